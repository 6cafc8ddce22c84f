#pragma once

#include "holo/core.hpp"
#include "holo/fft.hpp"
#include "holo/propagation.hpp"
#include "holo/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace holo {

enum class SceneMode { particles, texture };

inline std::string to_string(SceneMode m) { return m == SceneMode::particles ? "particles" : "texture"; }

inline SceneMode parse_scene_mode(const std::string& s)
{
    if (s == "particles")
        return SceneMode::particles;
    if (s == "texture")
        return SceneMode::texture;
    throw Error(ErrorCode::InvalidSpec, "mode must be 'particles' or 'texture', got '" + s + "'");
}

/// Depth offsets are relative to z2; positive offsets lie farther from the
/// sensor (a plane at offset d sits z2 + d above it).
struct ParticleParams {
    std::size_t count = 20;
    double radius_min_um = 2.0;
    double radius_max_um = 6.0;
    double opacity_min = 0.6;
    double opacity_max = 1.0;
    double depth_min_um = 0.0;
    double depth_max_um = 0.0;
};

struct TextureParams {
    double correlation_um = 3.0;
    double phase_amplitude_rad = 1.0;
    double absorption_min = 0.05;
    double absorption_max = 0.4;
};

struct SceneSpec {
    SceneMode mode = SceneMode::particles;
    std::size_t fov = 512;
    double pitch_um = 1.12;
    double wavelength_um = 0.53;
    ParticleParams particles;
    TextureParams texture;
    std::uint64_t seed = 0;

    Grid grid() const { return Grid{fov, fov, pitch_um, wavelength_um}; }

    void validate() const
    {
        auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); };
        if (fov == 0)
            bad("fov must be positive");
        if (!(pitch_um > 0.0))
            bad("pitch_um must be positive");
        if (!(wavelength_um > 0.0))
            bad("wavelength_um must be positive");
        if (mode == SceneMode::particles) {
            const auto& p = particles;
            if (!(p.radius_min_um > 0.0) || p.radius_max_um < p.radius_min_um)
                bad("radius range must satisfy 0 < min <= max");
            if (p.opacity_min < 0.0 || p.opacity_max > 1.0 || p.opacity_max < p.opacity_min)
                bad("opacity range must lie in [0, 1] with min <= max");
            if (p.depth_min_um < -200.0 || p.depth_max_um > 200.0 || p.depth_max_um < p.depth_min_um)
                bad("depth range must lie in [-200, 200] um with min <= max");
        } else {
            const auto& t = texture;
            if (!(t.correlation_um > 0.0))
                bad("correlation_um must be positive");
            if (t.phase_amplitude_rad < 0.0 || t.phase_amplitude_rad > 1.0)
                bad("phase_amplitude_rad must lie in [0, 1]");
            if (t.absorption_min < 0.0 || t.absorption_max >= 1.0 || t.absorption_max < t.absorption_min)
                bad("absorption range must lie in [0, 1) with min <= max");
        }
    }
};

inline void to_json(nlohmann::json& j, const SceneSpec& s)
{
    j = {{"mode", to_string(s.mode)},
         {"fov", s.fov},
         {"pitch_um", s.pitch_um},
         {"wavelength_um", s.wavelength_um},
         {"seed", s.seed},
         {"particles",
          {{"count", s.particles.count},
           {"radius_min_um", s.particles.radius_min_um},
           {"radius_max_um", s.particles.radius_max_um},
           {"opacity_min", s.particles.opacity_min},
           {"opacity_max", s.particles.opacity_max},
           {"depth_min_um", s.particles.depth_min_um},
           {"depth_max_um", s.particles.depth_max_um}}},
         {"texture",
          {{"correlation_um", s.texture.correlation_um},
           {"phase_amplitude_rad", s.texture.phase_amplitude_rad},
           {"absorption_min", s.texture.absorption_min},
           {"absorption_max", s.texture.absorption_max}}}};
}

inline void from_json(const nlohmann::json& j, SceneSpec& s)
{
    s.mode = parse_scene_mode(j.at("mode").get<std::string>());
    s.fov = j.at("fov").get<std::size_t>();
    s.pitch_um = j.at("pitch_um").get<double>();
    s.wavelength_um = j.at("wavelength_um").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("particles")) {
        const auto& p = j["particles"];
        s.particles.count = p.at("count").get<std::size_t>();
        s.particles.radius_min_um = p.at("radius_min_um").get<double>();
        s.particles.radius_max_um = p.at("radius_max_um").get<double>();
        s.particles.opacity_min = p.at("opacity_min").get<double>();
        s.particles.opacity_max = p.at("opacity_max").get<double>();
        s.particles.depth_min_um = p.at("depth_min_um").get<double>();
        s.particles.depth_max_um = p.at("depth_max_um").get<double>();
    }
    if (j.contains("texture")) {
        const auto& t = j["texture"];
        s.texture.correlation_um = t.at("correlation_um").get<double>();
        s.texture.phase_amplitude_rad = t.at("phase_amplitude_rad").get<double>();
        s.texture.absorption_min = t.at("absorption_min").get<double>();
        s.texture.absorption_max = t.at("absorption_max").get<double>();
    }
}

struct Particle {
    double x_um;
    double y_um;
    double radius_um;
    double opacity;
    double depth_um;
};

struct ScenePlane {
    double depth_um;
    ComplexField transmission;
};

struct Scene {
    std::vector<ScenePlane> planes;
    SceneSpec spec;
    std::vector<Particle> particles; ///< empty in texture mode

    /// Product of every plane's transmission: the all-in-focus object.
    ComplexField combined_transmission() const
    {
        std::vector<cplx> t(planes.front().transmission.values().begin(),
                            planes.front().transmission.values().end());
        for (std::size_t p = 1; p < planes.size(); ++p)
            for (std::size_t i = 0; i < t.size(); ++i)
                t[i] *= planes[p].transmission[i];
        return ComplexField(planes.front().transmission.grid(), std::move(t));
    }
};

namespace detail {

// Area coverage of a disc over each pixel by 4x4 supersampling. The grid
// is periodic, matching the FFT propagation model.
inline void stamp_disc(std::vector<cplx>& t, const Grid& g, const Particle& p)
{
    constexpr int ss = 4;
    const double pitch = g.pitch_um;
    const auto w = static_cast<std::ptrdiff_t>(g.width);
    const auto h = static_cast<std::ptrdiff_t>(g.height);
    const double cx = p.x_um / pitch, cy = p.y_um / pitch, r = p.radius_um / pitch;
    const auto x0 = static_cast<std::ptrdiff_t>(std::floor(cx - r)) - 1;
    const auto x1 = static_cast<std::ptrdiff_t>(std::ceil(cx + r)) + 1;
    const auto y0 = static_cast<std::ptrdiff_t>(std::floor(cy - r)) - 1;
    const auto y1 = static_cast<std::ptrdiff_t>(std::ceil(cy + r)) + 1;
    for (auto py = y0; py <= y1; ++py) {
        for (auto px = x0; px <= x1; ++px) {
            int inside = 0;
            for (int sy = 0; sy < ss; ++sy) {
                for (int sx = 0; sx < ss; ++sx) {
                    // pixel (px, py) covers [px, px+1) in pixel units
                    const double dx = static_cast<double>(px) + (sx + 0.5) / ss - cx;
                    const double dy = static_cast<double>(py) + (sy + 0.5) / ss - cy;
                    if (dx * dx + dy * dy <= r * r)
                        ++inside;
                }
            }
            if (inside == 0)
                continue;
            const double coverage = static_cast<double>(inside) / (ss * ss);
            const auto wx = ((px % w) + w) % w;
            const auto wy = ((py % h) + h) % h;
            t[static_cast<std::size_t>(wy * w + wx)] *= 1.0 - p.opacity * coverage;
        }
    }
}

// Zero-mean Gaussian-correlated noise scaled to max |value| = 1.
inline std::vector<double> correlated_noise(const Grid& g, double correlation_um, Rng& rng)
{
    std::vector<cplx> buf(g.size());
    for (auto& v : buf)
        v = {rng.normal(), 0.0};
    fft::transform_2d(buf, g.width, g.height, fft::Direction::forward);
    const double s2 = 2.0 * std::numbers::pi * std::numbers::pi * correlation_um * correlation_um;
    for (std::size_t y = 0; y < g.height; ++y) {
        const double fy = fft::frequency(y, g.height, g.pitch_um);
        for (std::size_t x = 0; x < g.width; ++x) {
            const double fx = fft::frequency(x, g.width, g.pitch_um);
            buf[y * g.width + x] *= std::exp(-s2 * (fx * fx + fy * fy));
        }
    }
    fft::transform_2d(buf, g.width, g.height, fft::Direction::inverse);
    std::vector<double> out(buf.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = buf[i].real();
        mean += out[i];
    }
    mean /= static_cast<double>(out.size());
    double peak = 0.0;
    for (auto& v : out) {
        v -= mean;
        peak = std::max(peak, std::abs(v));
    }
    if (peak > 0.0)
        for (auto& v : out)
            v /= peak;
    return out;
}

} // namespace detail

/// Realizes a synthetic sample. Particle mode: one plane per distinct depth
/// with discs of transmission 1 - opacity*coverage (overlaps multiply); an
/// empty particle list gives one all-ones plane at offset 0. Texture mode:
/// one connected plane t = (1 - absorption) exp(i phi) at offset 0.
inline Scene generate_scene(const SceneSpec& spec, Rng& rng)
{
    spec.validate();
    const Grid g = spec.grid();
    Scene scene;
    scene.spec = spec;

    if (spec.mode == SceneMode::texture) {
        const auto& tp = spec.texture;
        const auto phase = detail::correlated_noise(g, tp.correlation_um, rng);
        const auto absorb = detail::correlated_noise(g, tp.correlation_um, rng);
        std::vector<cplx> t(g.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double a =
                1.0 - (tp.absorption_min + (tp.absorption_max - tp.absorption_min) * 0.5 * (absorb[i] + 1.0));
            t[i] = std::polar(a, tp.phase_amplitude_rad * phase[i]);
        }
        scene.planes.push_back({0.0, ComplexField(g, std::move(t))});
        return scene;
    }

    const auto& pp = spec.particles;
    const double extent_x = static_cast<double>(g.width) * g.pitch_um;
    const double extent_y = static_cast<double>(g.height) * g.pitch_um;
    for (std::size_t k = 0; k < pp.count; ++k) {
        Particle p;
        p.x_um = rng.uniform(0.0, extent_x);
        p.y_um = rng.uniform(0.0, extent_y);
        p.radius_um = rng.uniform(pp.radius_min_um, pp.radius_max_um);
        p.opacity = rng.uniform(pp.opacity_min, pp.opacity_max);
        p.depth_um = pp.depth_min_um == pp.depth_max_um ? pp.depth_min_um
                                                        : rng.uniform(pp.depth_min_um, pp.depth_max_um);
        scene.particles.push_back(p);
    }
    if (scene.particles.empty()) {
        scene.planes.push_back({0.0, ComplexField::uniform(g)});
        return scene;
    }

    std::vector<double> depths;
    for (const auto& p : scene.particles)
        depths.push_back(p.depth_um);
    std::sort(depths.begin(), depths.end());
    depths.erase(std::unique(depths.begin(), depths.end()), depths.end());
    for (double d : depths) {
        std::vector<cplx> t(g.size(), cplx{1.0, 0.0});
        for (const auto& p : scene.particles)
            if (p.depth_um == d)
                detail::stamp_disc(t, g, p);
        scene.planes.push_back({d, ComplexField(g, std::move(t))});
    }
    return scene;
}

inline Scene generate_scene(const SceneSpec& spec)
{
    Rng rng(spec.seed);
    return generate_scene(spec, rng);
}

struct RenderOptions {
    PropagationOptions propagation;
    double noise_sigma = 0.0; ///< additive Gaussian intensity noise, off by default
    std::uint64_t noise_seed = 0;
};

namespace detail {

inline void check_scene_geometry(const Scene& scene, const CaptureGeometry& geometry)
{
    geometry.validate();
    if (scene.planes.empty())
        throw Error(ErrorCode::InvalidSpec, "scene has no planes");
    const Grid& g = scene.planes.front().transmission.grid();
    if (g.pitch_um != geometry.pitch_um || g.wavelength_um != geometry.wavelength_um)
        throw Error(ErrorCode::InvalidGeometry, "capture geometry pitch/wavelength differ from the scene's");
    for (const auto& p : scene.planes)
        if (!(p.transmission.grid() == g))
            throw Error(ErrorCode::InvalidGeometry, "scene planes differ in grid");
}

struct ExitField {
    ComplexField field;
    double depth_um; ///< offset of the plane nearest the sensor
};

// Unit plane wave through every plane, farthest from the sensor first.
inline ExitField exit_field(const Scene& scene, const PropagationOptions& opts)
{
    std::vector<const ScenePlane*> order;
    for (const auto& p : scene.planes)
        order.push_back(&p);
    std::stable_sort(order.begin(), order.end(),
                     [](const ScenePlane* a, const ScenePlane* b) { return a->depth_um > b->depth_um; });
    ComplexField field = order.front()->transmission;
    for (std::size_t k = 1; k < order.size(); ++k) {
        field = propagate(field, order[k - 1]->depth_um - order[k]->depth_um, opts);
        std::vector<cplx> v = std::move(field).release();
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] *= order[k]->transmission[i];
        field = ComplexField(order[k]->transmission.grid(), std::move(v));
    }
    return {std::move(field), order.back()->depth_um};
}

inline RealImage to_intensity(const ComplexField& sensor, const RenderOptions& opts, std::uint64_t stream)
{
    std::vector<double> v(sensor.values().size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = std::norm(sensor[i]);
    if (opts.noise_sigma > 0.0) {
        Rng rng = Rng(opts.noise_seed).fork(stream);
        for (auto& x : v)
            x = std::max(0.0, x + opts.noise_sigma * rng.normal());
    }
    return RealImage(sensor.grid(), ImageKind::intensity, std::move(v));
}

} // namespace detail

/// In-line hologram at the sensor, z2 below the scene's offset-0 plane.
inline RealImage render_hologram(const Scene& scene, const CaptureGeometry& geometry, const RenderOptions& opts = {})
{
    detail::check_scene_geometry(scene, geometry);
    const auto exit = detail::exit_field(scene, opts.propagation);
    return detail::to_intensity(propagate(exit.field, geometry.z2_um + exit.depth_um, opts.propagation), opts, 0);
}

/// One hologram per entry of geometry.heights_um. Each equals
/// render_hologram with z2 set to that height.
inline HologramStack render_stack(const Scene& scene, const CaptureGeometry& geometry, const RenderOptions& opts = {})
{
    detail::check_scene_geometry(scene, geometry);
    if (geometry.heights_um.empty())
        throw Error(ErrorCode::InvalidGeometry, "stack rendering needs at least one height");
    const auto exit = detail::exit_field(scene, opts.propagation);
    HologramStack stack;
    for (double h : geometry.heights_um) {
        stack.holograms.push_back(
            detail::to_intensity(propagate(exit.field, h + exit.depth_um, opts.propagation), opts, 0));
        stack.heights_um.push_back(h);
    }
    return stack;
}

/// Evenly spaced capture heights starting at z2.
inline std::vector<double> height_ladder(double z2_um, std::size_t count, double spacing_um)
{
    std::vector<double> h(count);
    for (std::size_t i = 0; i < count; ++i)
        h[i] = z2_um + spacing_um * static_cast<double>(i);
    return h;
}

} // namespace holo

#pragma once

#include "holo/autofocus.hpp"
#include "holo/core.hpp"
#include "holo/parallel.hpp"
#include "holo/phase_retrieval.hpp"
#include "holo/propagation.hpp"
#include "holo/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace holo {

// ---------------------------------------------------------------- SSIM

enum class SsimWindow { global, gaussian };

/// Stabilization constants default to C1 = (0.01 L)^2, C2 = (0.03 L)^2 with
/// L the maximum of the reference image, unless given explicitly.
struct SsimParams {
    std::optional<double> c1;
    std::optional<double> c2;
    std::optional<double> dynamic_range;
    SsimWindow window = SsimWindow::global;
    double gaussian_sigma_px = 1.5;
};

namespace detail {

inline double ssim_formula(double m1, double m2, double v1, double v2, double cov, double c1, double c2)
{
    return ((2.0 * m1 * m2 + c1) * (2.0 * cov + c2)) / ((m1 * m1 + m2 * m2 + c1) * (v1 + v2 + c2));
}

// Separable Gaussian blur, kernel truncated at 3 sigma and renormalized
// over the samples that fall inside the image.
inline std::vector<double> gaussian_blur(std::span<const double> img, std::size_t w, std::size_t h, double sigma)
{
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    for (std::ptrdiff_t i = -radius; i <= radius; ++i)
        k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    auto pass = [&](std::span<const double> src, bool horizontal) {
        std::vector<double> dst(src.size());
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                double acc = 0.0, norm = 0.0;
                for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
                    const auto xx = static_cast<std::ptrdiff_t>(x) + (horizontal ? i : 0);
                    const auto yy = static_cast<std::ptrdiff_t>(y) + (horizontal ? 0 : i);
                    if (xx < 0 || yy < 0 || xx >= static_cast<std::ptrdiff_t>(w) || yy >= static_cast<std::ptrdiff_t>(h))
                        continue;
                    const double kw = k[static_cast<std::size_t>(i + radius)];
                    acc += kw * src[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)];
                    norm += kw;
                }
                dst[y * w + x] = acc / norm;
            }
        }
        return dst;
    };
    auto tmp = pass(img, true);
    return pass(tmp, false);
}

} // namespace detail

/// Structural similarity of u1 (image under test) against u2 (reference).
inline double ssim(const RealImage& u1, const RealImage& u2, const SsimParams& params = {})
{
    if (!u1.grid().same_shape(u2.grid()))
        throw Error(ErrorCode::DimensionMismatch, "ssim images differ in shape");
    double L = 1.0;
    if (params.dynamic_range) {
        L = *params.dynamic_range;
    } else {
        double mx = 0.0;
        for (double v : u2.values())
            mx = std::max(mx, v);
        if (mx > 0.0)
            L = mx;
    }
    const double c1 = params.c1.value_or((0.01 * L) * (0.01 * L));
    const double c2 = params.c2.value_or((0.03 * L) * (0.03 * L));
    if (!(c1 > 0.0) || !(c2 > 0.0))
        throw Error(ErrorCode::InvalidSpec, "ssim constants must be positive");

    const auto a = u1.values();
    const auto b = u2.values();
    const auto n = static_cast<double>(a.size());

    if (params.window == SsimWindow::global) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            m1 += a[i];
            m2 += b[i];
        }
        m1 /= n;
        m2 /= n;
        double v1 = 0.0, v2 = 0.0, cov = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double da = a[i] - m1, db = b[i] - m2;
            v1 += da * da;
            v2 += db * db;
            cov += da * db;
        }
        return detail::ssim_formula(m1, m2, v1 / n, v2 / n, cov / n, c1, c2);
    }

    if (!(params.gaussian_sigma_px > 0.0))
        throw Error(ErrorCode::InvalidSpec, "gaussian window sigma must be positive");
    const std::size_t w = u1.width(), h = u1.height();
    std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const double s = params.gaussian_sigma_px;
    const auto mu1 = detail::gaussian_blur(a, w, h, s);
    const auto mu2 = detail::gaussian_blur(b, w, h, s);
    const auto e11 = detail::gaussian_blur(aa, w, h, s);
    const auto e22 = detail::gaussian_blur(bb, w, h, s);
    const auto e12 = detail::gaussian_blur(ab, w, h, s);
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        total += detail::ssim_formula(mu1[i], mu2[i], e11[i] - mu1[i] * mu1[i], e22[i] - mu2[i] * mu2[i],
                                      e12[i] - mu1[i] * mu2[i], c1, c2);
    }
    return total / n;
}

// ---------------------------------------------------------------- FWHM

enum class Axis { x, y };

/// Feature polarity: dark dips (opaque particles on a bright background),
/// bright peaks, or absolute deviation from the background.
enum class Polarity { dark, bright, absolute };

struct FwhmOptions {
    std::size_t search_radius_px = 5;
    Polarity polarity = Polarity::dark;
    /// Half-maximum crossings are searched within this many pixels of the
    /// extremum; 0 selects a quarter of the profile length.
    std::size_t max_extent_px = 0;
};

/// Full width at half maximum of the extremum nearest (hint_x, hint_y),
/// measured on the 1D profile along `axis` through it, in micrometers.
///
/// Background is the median of the profile's outer quartiles (first and
/// last quarter of its samples). The profile is mapped to a feature
/// profile q (background - p for dark features). The width spans the
/// outermost samples on either side of the extremum, within max_extent_px,
/// where q still reaches half of its value at the extremum; the crossings
/// just outside them are linearly interpolated.
inline double fwhm(const RealImage& img, std::size_t hint_x, std::size_t hint_y, Axis axis,
                   const FwhmOptions& opts = {})
{
    const std::size_t w = img.width(), h = img.height();
    if (hint_x >= w || hint_y >= h)
        throw Error(ErrorCode::NoPeak, "peak hint lies outside the image");

    const std::size_t len = axis == Axis::x ? w : h;
    const std::size_t quarter = len / 4;
    if (quarter == 0)
        throw Error(ErrorCode::NoPeak, "profile too short for a background estimate");
    auto row_profile = [&](std::size_t px, std::size_t py) {
        std::vector<double> prof(len);
        for (std::size_t i = 0; i < len; ++i)
            prof[i] = axis == Axis::x ? img.at(i, py) : img.at(px, i);
        return prof;
    };
    auto background_of = [&](const std::vector<double>& prof) {
        std::vector<double> outer(prof.begin(), prof.begin() + static_cast<std::ptrdiff_t>(quarter));
        outer.insert(outer.end(), prof.end() - static_cast<std::ptrdiff_t>(quarter), prof.end());
        std::sort(outer.begin(), outer.end());
        const std::size_t m = outer.size();
        return m % 2 ? outer[m / 2] : 0.5 * (outer[m / 2 - 1] + outer[m / 2]);
    };
    auto feature = [&](double v, double bg) {
        switch (opts.polarity) {
        case Polarity::dark: return bg - v;
        case Polarity::bright: return v - bg;
        case Polarity::absolute: return std::abs(v - bg);
        }
        return 0.0;
    };

    // Background from the profile through the hint; extremum within the
    // hint window, ties keep the first in raster order.
    const double hint_bg = background_of(row_profile(hint_x, hint_y));
    const std::size_t r = opts.search_radius_px;
    const std::size_t x0 = hint_x >= r ? hint_x - r : 0, x1 = std::min(w - 1, hint_x + r);
    const std::size_t y0 = hint_y >= r ? hint_y - r : 0, y1 = std::min(h - 1, hint_y + r);
    std::size_t px = hint_x, py = hint_y;
    for (std::size_t y = y0; y <= y1; ++y)
        for (std::size_t x = x0; x <= x1; ++x)
            if (feature(img.at(x, y), hint_bg) > feature(img.at(px, py), hint_bg))
                px = x, py = y;

    const auto profile = row_profile(px, py);
    const double background = background_of(profile);
    const std::size_t centre = axis == Axis::x ? px : py;
    std::vector<double> q(len);
    double scale = std::abs(background);
    for (std::size_t i = 0; i < len; ++i) {
        q[i] = feature(profile[i], background);
        scale = std::max(scale, std::abs(profile[i]));
    }
    const double peak = q[centre];
    if (!(peak > 1e-9 * std::max(scale, 1e-300)))
        throw Error(ErrorCode::NoPeak, "no extremum above background near the hint");
    if ((centre > 0 && q[centre - 1] > peak) || (centre + 1 < len && q[centre + 1] > peak))
        throw Error(ErrorCode::NoPeak, "no local extremum near the hint");

    const double half = 0.5 * peak;
    const std::size_t extent = opts.max_extent_px ? opts.max_extent_px : quarter;
    const std::size_t lo = centre >= extent ? centre - extent : 0;
    const std::size_t hi = std::min(len - 1, centre + extent);
    std::size_t i = lo;
    while (q[i] < half)
        ++i; // terminates at centre at the latest
    std::size_t j = hi;
    while (q[j] < half)
        --j;
    if (i == 0 || j + 1 == len || (i == lo && q[lo] >= half) || (j == hi && q[hi] >= half))
        throw Error(ErrorCode::NoPeak, "feature does not fall below half maximum within the search extent");
    const double left = static_cast<double>(i - 1) + (half - q[i - 1]) / (q[i] - q[i - 1]);
    const double right = static_cast<double>(j) + (q[j] - half) / (q[j] - q[j + 1]);
    return (right - left) * img.pitch_um();
}

// ---------------------------------------------------------------- sweeps

/// One test sample of a defocus sweep.
struct SweepScene {
    std::string id;
    RealImage hologram;                   ///< single in-line hologram
    double z_focus_um = 0.0;              ///< global focus distance
    RealImage reference;                  ///< in-focus reference amplitude
    std::optional<HologramStack> stack;   ///< multi-height capture, for mhpr
    std::size_t marker_x = 0, marker_y = 0; ///< feature location for FWHM sweeps
};

/// Named reconstruction procedure: amplitude image at defocus dz.
struct Reconstructor {
    std::string name;
    std::function<RealImage(const SweepScene&, double dz_um)> run;
};

inline Reconstructor backprop_reconstructor(PropagationOptions opts = {})
{
    return {"backprop", [opts](const SweepScene& s, double dz) {
                return amplitude_of(backpropagate_intensity(s.hologram, s.z_focus_um + dz, opts));
            }};
}

/// MH-PR reconstructed once per scene, then propagated by -dz (the same
/// defocus the back-propagation column receives).
inline Reconstructor mhpr_reconstructor(MhprParams params = {})
{
    struct Cache {
        std::mutex mutex;
        std::map<const SweepScene*, std::shared_ptr<SpectrumPropagator>> fields;
    };
    auto cache = std::make_shared<Cache>();
    return {"mhpr", [params, cache](const SweepScene& s, double dz) {
                if (!s.stack)
                    throw Error(ErrorCode::InvalidSpec, "mhpr reconstruction needs a hologram stack");
                std::shared_ptr<SpectrumPropagator> sp;
                {
                    std::lock_guard lock(cache->mutex);
                    auto& slot = cache->fields[&s];
                    if (!slot)
                        slot = std::make_shared<SpectrumPropagator>(mhpr(*s.stack, params).field, params.propagation);
                    sp = slot;
                }
                return amplitude_of(sp->at(-dz));
            }};
}

/// Returns the reference itself; a self-comparison baseline.
inline Reconstructor reference_reconstructor()
{
    return {"reference", [](const SweepScene& s, double) { return s.reference; }};
}

struct SweepResult {
    std::vector<double> dz_um;
    std::vector<std::string> methods;
    std::vector<std::vector<double>> scores; ///< scores[method][dz index]

    std::string csv() const
    {
        std::ostringstream os;
        os.precision(17);
        os << "dz_um";
        for (const auto& m : methods)
            os << ',' << m;
        os << '\n';
        for (std::size_t i = 0; i < dz_um.size(); ++i) {
            os << dz_um[i];
            for (const auto& col : scores)
                os << ',' << col[i];
            os << '\n';
        }
        return os.str();
    }
};

using SweepMetric = std::function<double(const RealImage& recon, const SweepScene&)>;

inline SweepMetric ssim_metric(SsimParams params = {})
{
    return [params](const RealImage& recon, const SweepScene& s) { return ssim(recon, s.reference, params); };
}

inline SweepMetric fwhm_metric(Axis axis = Axis::x, FwhmOptions opts = {})
{
    return [axis, opts](const RealImage& recon, const SweepScene& s) {
        return fwhm(recon, s.marker_x, s.marker_y, axis, opts);
    };
}

/// Scores every reconstructor at every defocus, averaged across scenes in
/// scene order.
inline SweepResult defocus_sweep(const std::vector<Reconstructor>& recons, const std::vector<SweepScene>& scenes,
                                 std::vector<double> dz_grid, const SweepMetric& metric = ssim_metric(),
                                 unsigned threads = 1)
{
    if (dz_grid.empty())
        throw Error(ErrorCode::InvalidSpec, "dz grid is empty");
    if (scenes.empty())
        throw Error(ErrorCode::InvalidSpec, "sweep needs at least one scene");
    std::sort(dz_grid.begin(), dz_grid.end());
    SweepResult out;
    out.dz_um = dz_grid;
    for (const auto& r : recons) {
        out.methods.push_back(r.name);
        std::vector<double> per(scenes.size() * dz_grid.size());
        parallel_for(per.size(), threads, [&](std::size_t k) {
            const auto& scene = scenes[k / dz_grid.size()];
            const double dz = dz_grid[k % dz_grid.size()];
            per[k] = metric(r.run(scene, dz), scene);
        });
        std::vector<double> mean(dz_grid.size(), 0.0);
        for (std::size_t s = 0; s < scenes.size(); ++s)
            for (std::size_t d = 0; d < dz_grid.size(); ++d)
                mean[d] += per[s * dz_grid.size() + d];
        for (auto& v : mean)
            v /= static_cast<double>(scenes.size());
        out.scores.push_back(std::move(mean));
    }
    return out;
}

/// Evenly spaced dz values from lo to hi inclusive.
inline std::vector<double> dz_range(double lo, double hi, double step)
{
    if (!(step > 0.0) || hi < lo)
        throw Error(ErrorCode::InvalidSpec, "dz range needs step > 0 and lo <= hi");
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo + step * static_cast<double>(i);
    return v;
}

// ---------------------------------------------------------------- timing

/// Stand-in for single-pass network inference: a fixed stack of 3x3
/// convolutions over the (amplitude, phase) channels. Its cost depends only
/// on the field size.
inline ComplexField fixed_cost_inference(const ComplexField& input, std::size_t layers = 8)
{
    const std::size_t w = input.width(), h = input.height();
    std::vector<double> amp(w * h), ph(w * h);
    for (std::size_t i = 0; i < amp.size(); ++i) {
        amp[i] = std::abs(input[i]);
        ph[i] = std::arg(input[i]);
    }
    constexpr double k[3][3] = {{0.0625, 0.125, 0.0625}, {0.125, 0.25, 0.125}, {0.0625, 0.125, 0.0625}};
    auto conv = [&](const std::vector<double>& src) {
        std::vector<double> dst(src.size());
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const std::size_t xx = (x + w + static_cast<std::size_t>(dx + 1) - 1) % w;
                        const std::size_t yy = (y + h + static_cast<std::size_t>(dy + 1) - 1) % h;
                        acc += k[dy + 1][dx + 1] * src[yy * w + xx];
                    }
                dst[y * w + x] = std::max(0.0, acc);
            }
        return dst;
    };
    for (std::size_t l = 0; l < layers; ++l) {
        amp = conv(amp);
        ph = conv(ph);
    }
    std::vector<cplx> out(w * h);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::polar(amp[i], ph[i]);
    return ComplexField(input.grid(), std::move(out));
}

struct TimingParams {
    std::vector<std::size_t> n_values{5, 10, 20, 40};
    std::vector<std::size_t> m_values{5, 10, 20, 40};
    std::size_t fixed_n = 20;
    std::size_t fixed_m = 20;
    std::size_t fov = 128;
    std::size_t patch = 64;
    std::size_t mhpr_heights = 8;
    std::size_t mhpr_iterations = 1;
    double height_spacing_um = 15.0;
    double z2_um = 1000.0;
    double search_half_range_um = 50.0;
    std::size_t inference_layers = 8;
    std::size_t repeats = 7;
    std::uint64_t seed = 1;
};

struct TimingRow {
    std::size_t n;
    std::size_t m;
    double seconds;
    std::string method;
};

struct TimingTable {
    std::vector<TimingRow> rows;
    double classical_slope_m = 0.0; ///< log-log slope vs m at fixed n
    double classical_slope_n = 0.0; ///< log-log slope vs n at fixed m
    double fixed_slope_m = 0.0;
    double fixed_slope_n = 0.0;

    std::string csv() const
    {
        std::ostringstream os;
        os.precision(9);
        os << "n,m,seconds,method\n";
        for (const auto& r : rows)
            os << r.n << ',' << r.m << ',' << r.seconds << ',' << r.method << '\n';
        return os.str();
    }
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw Error(ErrorCode::InvalidSpec, "slope fit needs >= 2 matching points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

namespace detail {

inline RealImage crop_periodic(const RealImage& img, std::size_t cx, std::size_t cy, std::size_t size)
{
    const std::size_t w = img.width(), h = img.height();
    std::vector<double> v(size * size);
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x)
            v[y * size + x] = img.at((cx + w - size / 2 + x) % w, (cy + h - size / 2 + y) % h);
    Grid g = img.grid();
    g.width = g.height = size;
    return RealImage(g, img.kind(), std::move(v));
}

template <class Fn>
double min_seconds(std::size_t repeats, Fn&& fn)
{
    double best = 1e300;
    for (std::size_t r = 0; r < std::max<std::size_t>(1, repeats); ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

} // namespace detail

/// Wall-clock of the classical pipeline (per-particle autofocus over m
/// planes, then MH-PR of the field of view) against a fixed-cost
/// single-pass reconstruction, as n and m grow.
inline TimingTable timing_study(const TimingParams& p)
{
    if (p.n_values.empty() || p.m_values.empty())
        throw Error(ErrorCode::InvalidSpec, "timing study needs non-empty n and m lists");
    if (p.patch > p.fov || p.patch < 3)
        throw Error(ErrorCode::InvalidSpec, "patch must lie in [3, fov]");

    std::size_t max_n = p.fixed_n;
    for (auto n : p.n_values)
        max_n = std::max(max_n, n);
    SceneSpec spec;
    spec.mode = SceneMode::particles;
    spec.fov = p.fov;
    spec.particles.count = max_n;
    spec.particles.radius_min_um = 2.0;
    spec.particles.radius_max_um = 4.0;
    spec.seed = p.seed;
    const Scene scene = generate_scene(spec);
    CaptureGeometry geo;
    geo.pitch_um = spec.pitch_um;
    geo.wavelength_um = spec.wavelength_um;
    geo.z2_um = p.z2_um;
    const RealImage holo = render_hologram(scene, geo);
    geo.heights_um = height_ladder(p.z2_um, p.mhpr_heights, p.height_spacing_um);
    const HologramStack stack = render_stack(scene, geo);
    const ComplexField coarse = backpropagate_intensity(holo, p.z2_um);

    std::vector<RealImage> patches;
    for (std::size_t k = 0; k < max_n; ++k) {
        const auto& part = scene.particles[k];
        patches.push_back(detail::crop_periodic(holo, static_cast<std::size_t>(part.x_um / spec.pitch_um),
                                                static_cast<std::size_t>(part.y_um / spec.pitch_um), p.patch));
    }

    MhprParams mp;
    mp.iterations = p.mhpr_iterations;
    auto classical = [&](std::size_t n, std::size_t m) {
        double sink = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            try {
                sink += autofocus_search(patches[k], p.z2_um - p.search_half_range_um,
                                         p.z2_um + p.search_half_range_um, FocusCriterion::tamura_of_gradient,
                                         GridSearch{m})
                            .z_hat_um;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NoContrast)
                    throw;
            }
        }
        sink += std::abs(mhpr(stack, mp).field[0]);
        return sink;
    };
    auto fixed = [&] { return std::abs(fixed_cost_inference(coarse, p.inference_layers)[0]); };

    // Every configuration is timed once per round and keeps its fastest
    // round, so a burst of machine load spreads over configurations instead
    // of landing on one.
    struct Config {
        std::size_t n, m;
        bool fixed_cost;
        double best = 1e300;
    };
    std::vector<Config> configs;
    for (auto m : p.m_values) {
        configs.push_back({p.fixed_n, m, false});
        configs.push_back({p.fixed_n, m, true});
    }
    for (auto n : p.n_values) {
        configs.push_back({n, p.fixed_m, false});
        configs.push_back({n, p.fixed_m, true});
    }
    for (std::size_t round = 0; round < p.repeats; ++round)
        for (auto& c : configs)
            c.best = std::min(c.best, detail::min_seconds(1, [&] {
                                  if (c.fixed_cost)
                                      fixed();
                                  else
                                      classical(c.n, c.m);
                              }));

    TimingTable t;
    auto slope = [&](std::size_t begin, bool by_m, bool fixed_cost) {
        std::vector<double> xs, ys;
        for (std::size_t i = begin; i < begin + 2 * (by_m ? p.m_values.size() : p.n_values.size()); ++i)
            if (configs[i].fixed_cost == fixed_cost) {
                xs.push_back(static_cast<double>(by_m ? configs[i].m : configs[i].n));
                ys.push_back(configs[i].best);
            }
        return loglog_slope(xs, ys);
    };
    const std::size_t n_begin = 2 * p.m_values.size();
    t.classical_slope_m = slope(0, true, false);
    t.fixed_slope_m = slope(0, true, true);
    t.classical_slope_n = slope(n_begin, false, false);
    t.fixed_slope_n = slope(n_begin, false, true);
    for (const auto& c : configs)
        t.rows.push_back({c.n, c.m, c.best, c.fixed_cost ? "fixed" : "classical"});
    return t;
}

} // namespace holo

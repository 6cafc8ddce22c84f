#pragma once

#include "holo/autofocus.hpp"
#include "holo/container.hpp"
#include "holo/core.hpp"
#include "holo/parallel.hpp"
#include "holo/phase_retrieval.hpp"
#include "holo/propagation.hpp"
#include "holo/rng.hpp"
#include "holo/simulator.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace holo {

enum class DefocusDistribution { uniform_random, uniform_grid };

inline std::string to_string(DefocusDistribution d)
{
    return d == DefocusDistribution::uniform_random ? "uniform_random" : "uniform_grid";
}

inline DefocusDistribution parse_distribution(const std::string& s)
{
    if (s == "uniform_random" || s == "random")
        return DefocusDistribution::uniform_random;
    if (s == "uniform_grid" || s == "grid")
        return DefocusDistribution::uniform_grid;
    throw Error(ErrorCode::InvalidSpec, "unknown defocus distribution '" + s + "'");
}

/// Defocus offsets dz applied around the autofocused global focus.
struct DefocusSpec {
    double dz_min_um = -100.0;
    double dz_max_um = 100.0;
    std::size_t n_distances = 81;
    DefocusDistribution distribution = DefocusDistribution::uniform_random;
    std::uint64_t seed = 0;
    bool share_across_sources = false; ///< one dz draw for every source

    /// 81 offsets for particle samples, 41 for texture samples, both over
    /// +-100 um.
    static DefocusSpec for_mode(SceneMode mode)
    {
        DefocusSpec d;
        d.n_distances = mode == SceneMode::particles ? 81 : 41;
        return d;
    }

    void validate() const
    {
        if (!(dz_min_um <= dz_max_um) || !std::isfinite(dz_min_um) || !std::isfinite(dz_max_um))
            throw Error(ErrorCode::InvalidSpec, "defocus range needs dz_min <= dz_max");
        if (n_distances < 1)
            throw Error(ErrorCode::InvalidSpec, "n_distances must be >= 1");
    }

    std::vector<double> draw(Rng& rng) const
    {
        std::vector<double> dz(n_distances);
        if (distribution == DefocusDistribution::uniform_grid) {
            for (std::size_t i = 0; i < n_distances; ++i)
                dz[i] = n_distances == 1 ? dz_min_um
                                         : dz_min_um + (dz_max_um - dz_min_um) * static_cast<double>(i) /
                                                           static_cast<double>(n_distances - 1);
            if (n_distances > 1)
                dz.back() = dz_max_um;
        } else {
            for (auto& v : dz)
                v = rng.uniform(dz_min_um, dz_max_um);
        }
        return dz;
    }
};

enum class TargetMode { ground_truth, mhpr };

inline std::string to_string(TargetMode t) { return t == TargetMode::ground_truth ? "ground_truth" : "mhpr"; }

inline TargetMode parse_target_mode(const std::string& s)
{
    if (s == "ground_truth")
        return TargetMode::ground_truth;
    if (s == "mhpr")
        return TargetMode::mhpr;
    throw Error(ErrorCode::InvalidSpec, "unknown target mode '" + s + "'");
}

/// Defocused back-propagated input and its in-focus target.
struct TrainingPair {
    ComplexField input;
    ComplexField target;
    double dz_um = 0.0;
    std::uint64_t source_id = 0;
    int rotation_deg = 0; ///< 0, 90, 180 or 270, counter-clockwise
};

/// Rotates a square field by quarter turns, counter-clockwise as displayed
/// with row 0 at the top.
inline ComplexField rotate_quarter(const ComplexField& f, int quarter_turns)
{
    const int q = ((quarter_turns % 4) + 4) % 4;
    if (q == 0)
        return f;
    const std::size_t w = f.width(), h = f.height();
    if (w != h)
        throw Error(ErrorCode::DimensionMismatch, "quarter-turn rotation needs a square field");
    std::vector<cplx> out(w * h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            std::size_t sx = x, sy = y;
            switch (q) {
            case 1: sx = w - 1 - y; sy = x; break;
            case 2: sx = w - 1 - x; sy = h - 1 - y; break;
            case 3: sx = y; sy = h - 1 - x; break;
            }
            out[y * w + x] = f.at(sx, sy);
        }
    return ComplexField(f.grid(), std::move(out));
}

inline constexpr std::uint16_t kPairVersion = 1;

/// Pair file layout (little-endian):
///   "HIDP" | u16 version | u32 H | u32 W | f64 dz_um | u8 rotation_code |
///   input amplitude | input phase | target amplitude | target phase
/// Each plane is H*W f32, row-major; phases wrapped to (-pi, pi].
inline std::vector<unsigned char> encode_pair(const TrainingPair& p)
{
    if (!p.input.grid().same_shape(p.target.grid()))
        throw Error(ErrorCode::DimensionMismatch, "pair input and target differ in shape");
    if (p.rotation_deg % 90 != 0 || p.rotation_deg < 0 || p.rotation_deg >= 360)
        throw Error(ErrorCode::InvalidSpec, "rotation must be 0, 90, 180 or 270");
    io::ByteWriter w;
    w.bytes("HIDP", 4);
    w.u16(kPairVersion);
    w.u32(static_cast<std::uint32_t>(p.input.height()));
    w.u32(static_cast<std::uint32_t>(p.input.width()));
    w.f64(p.dz_um);
    w.u8(static_cast<std::uint8_t>(p.rotation_deg / 90));
    for (const ComplexField* f : {&p.input, &p.target}) {
        for (const auto& v : f->values())
            w.f32(static_cast<float>(std::abs(v)));
        for (const auto& v : f->values())
            w.f32(static_cast<float>(wrap_phase(std::arg(v))));
    }
    return w.data();
}

inline void write_pair(const TrainingPair& pair, const std::filesystem::path& path)
{
    io::write_file(path, encode_pair(pair));
}

/// Reads a pair file. The file carries no optical metadata, so the grid's
/// pitch and wavelength come from the caller (normally the manifest).
inline TrainingPair read_pair(const std::filesystem::path& path, double pitch_um, double wavelength_um)
{
    io::ByteReader r(io::read_file(path), path.string());
    const std::string origin = path.string();
    if (r.magic() != std::array<char, 4>{'H', 'I', 'D', 'P'})
        throw Error(ErrorCode::CorruptFile, origin + ": bad magic");
    if (r.u16() != kPairVersion)
        throw Error(ErrorCode::CorruptFile, origin + ": unsupported version");
    const std::size_t h = r.u32();
    const std::size_t w = r.u32();
    TrainingPair p;
    p.dz_um = r.f64();
    const auto code = r.u8();
    if (code > 3)
        throw Error(ErrorCode::CorruptFile, origin + ": bad rotation code");
    p.rotation_deg = 90 * code;
    if (w == 0 || h == 0 || r.remaining() != 4 * w * h * 4)
        throw Error(ErrorCode::CorruptFile, origin + ": payload length does not match header");
    const Grid g{w, h, pitch_um, wavelength_um};
    auto plane = [&] {
        std::vector<double> v(w * h);
        for (auto& x : v)
            x = r.f32();
        return v;
    };
    auto field = [&] {
        const auto amp = plane();
        const auto ph = plane();
        std::vector<cplx> v(w * h);
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!(amp[i] >= 0.0))
                throw Error(ErrorCode::CorruptFile, origin + ": negative amplitude");
            v[i] = std::polar(amp[i], wrap_phase(ph[i]));
        }
        return ComplexField(g, std::move(v));
    };
    p.input = field();
    p.target = field();
    return p;
}

struct BuildOptions {
    TargetMode target_mode = TargetMode::ground_truth;
    std::size_t rotations = 4;
    FocusCriterion criterion = FocusCriterion::tamura_of_gradient;
    double focus_half_range_um = 100.0;
    SearchStrategy focus_strategy = CoarseToFine{3, 21};
    std::size_t mhpr_heights = 8;
    double mhpr_spacing_um = 15.0;
    MhprParams mhpr;
    PropagationOptions propagation;
    std::size_t split_train = 14;
    std::size_t split_validation = 3;
    std::uint64_t split_seed = 0;
    unsigned threads = 1;

    void validate() const
    {
        if (rotations < 1 || rotations > 4)
            throw Error(ErrorCode::InvalidSpec, "rotations must lie in [1, 4]");
        if (!(focus_half_range_um > 0.0))
            throw Error(ErrorCode::InvalidSpec, "focus search half range must be positive");
        if (split_train == 0 || split_validation == 0)
            throw Error(ErrorCode::InvalidSpec, "split ratio parts must be positive");
        if (target_mode == TargetMode::mhpr && mhpr_heights < 1)
            throw Error(ErrorCode::InvalidSpec, "mhpr targets need at least one height");
        propagation.validate();
    }
};

struct ManifestPair {
    std::string file; ///< relative to the dataset directory
    std::uint64_t source_id = 0;
    double dz_um = 0.0;
    int rotation_deg = 0;
    std::string split;
};

struct SourceRecord {
    std::uint64_t source_id = 0;
    std::string split; ///< "train", "validation" or "skipped"
    double z_focus_um = 0.0;
    std::string reason; ///< why a source was skipped
};

struct DatasetManifest {
    Grid grid;
    std::size_t ratio_train = 14;
    std::size_t ratio_validation = 3;
    std::vector<SourceRecord> sources;
    std::vector<ManifestPair> pairs;
    nlohmann::json config;

    std::size_t count_pairs(const std::string& split) const
    {
        return static_cast<std::size_t>(
            std::count_if(pairs.begin(), pairs.end(), [&](const ManifestPair& p) { return p.split == split; }));
    }

    std::size_t count_sources(const std::string& split) const
    {
        return static_cast<std::size_t>(
            std::count_if(sources.begin(), sources.end(), [&](const SourceRecord& s) { return s.split == split; }));
    }

    /// Number of distinct (source, rotation) regions.
    std::size_t count_regions() const
    {
        std::vector<std::pair<std::uint64_t, int>> keys;
        for (const auto& p : pairs)
            keys.emplace_back(p.source_id, p.rotation_deg);
        std::sort(keys.begin(), keys.end());
        return static_cast<std::size_t>(std::unique(keys.begin(), keys.end()) - keys.begin());
    }
};

inline void to_json(nlohmann::json& j, const DatasetManifest& m)
{
    j = nlohmann::json::object();
    j["format"] = "HIDP-dataset";
    j["version"] = 1;
    j["grid"] = {{"width", m.grid.width},
                 {"height", m.grid.height},
                 {"pitch_um", m.grid.pitch_um},
                 {"wavelength_um", m.grid.wavelength_um}};
    j["split_ratio"] = {{"train", m.ratio_train}, {"validation", m.ratio_validation}};
    j["counts"] = {{"pairs", m.pairs.size()},
                   {"train_pairs", m.count_pairs("train")},
                   {"validation_pairs", m.count_pairs("validation")},
                   {"regions", m.count_regions()}};
    j["config"] = m.config;
    auto& src = j["sources"] = nlohmann::json::array();
    for (const auto& s : m.sources) {
        nlohmann::json e = {{"source_id", s.source_id}, {"split", s.split}, {"z_focus_um", s.z_focus_um}};
        if (!s.reason.empty())
            e["reason"] = s.reason;
        src.push_back(std::move(e));
    }
    auto& pairs = j["pairs"] = nlohmann::json::array();
    for (const auto& p : m.pairs)
        pairs.push_back({{"file", p.file},
                         {"source_id", p.source_id},
                         {"dz_um", p.dz_um},
                         {"rotation_deg", p.rotation_deg},
                         {"split", p.split}});
}

inline void from_json(const nlohmann::json& j, DatasetManifest& m)
{
    const auto& g = j.at("grid");
    m.grid = Grid{g.at("width").get<std::size_t>(), g.at("height").get<std::size_t>(),
                  g.at("pitch_um").get<double>(), g.at("wavelength_um").get<double>()};
    m.ratio_train = j.at("split_ratio").at("train").get<std::size_t>();
    m.ratio_validation = j.at("split_ratio").at("validation").get<std::size_t>();
    m.config = j.value("config", nlohmann::json::object());
    m.sources.clear();
    for (const auto& s : j.at("sources"))
        m.sources.push_back({s.at("source_id").get<std::uint64_t>(), s.at("split").get<std::string>(),
                             s.at("z_focus_um").get<double>(), s.value("reason", std::string())});
    m.pairs.clear();
    for (const auto& p : j.at("pairs"))
        m.pairs.push_back({p.at("file").get<std::string>(), p.at("source_id").get<std::uint64_t>(),
                           p.at("dz_um").get<double>(), p.at("rotation_deg").get<int>(),
                           p.at("split").get<std::string>()});
}

inline DatasetManifest read_manifest(const std::filesystem::path& path)
{
    try {
        return io::read_json(path).get<DatasetManifest>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptFile, path.string() + ": " + e.what());
    }
}

namespace detail {

inline std::string pair_filename(std::uint64_t source, std::size_t distance, int rotation_deg)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "s%05llu_d%03zu_r%03d.hidp", static_cast<unsigned long long>(source), distance,
                  rotation_deg);
    return buf;
}

struct SourceOutcome {
    bool skipped = false;
    std::string reason;
    double z_focus_um = 0.0;
    std::vector<ManifestPair> pairs;
};

} // namespace detail

/// Builds defocus-augmented training pairs from simulated scenes.
///
/// Per scene: render one hologram at geometry.z2_um, autofocus it within
/// +-focus_half_range_um of z2, back-propagate to z* + dz for every drawn
/// defocus, and pair each input with the in-focus target (ground-truth
/// transmission or MH-PR of a rendered height stack). Every pair is
/// written in each of `rotations` quarter turns. Sources are split into
/// train/validation at the ratio given in the options; no source appears
/// in both. Scenes whose hologram has no focus contrast are skipped and
/// listed in the manifest.
inline DatasetManifest build_dataset(const std::vector<Scene>& scenes, const CaptureGeometry& geometry,
                                     const DefocusSpec& defocus, const BuildOptions& opts,
                                     const std::filesystem::path& out_dir)
{
    if (scenes.empty())
        throw Error(ErrorCode::InvalidSpec, "dataset needs at least one scene");
    geometry.validate();
    defocus.validate();
    opts.validate();
    const Grid grid = scenes.front().planes.front().transmission.grid();
    if (opts.rotations > 1 && grid.width != grid.height)
        throw Error(ErrorCode::InvalidSpec, "rotation augmentation needs square scenes");

    std::error_code ec;
    std::filesystem::create_directories(out_dir / "pairs", ec);
    if (ec)
        throw Error(ErrorCode::IoError, "cannot create " + (out_dir / "pairs").string() + ": " + ec.message());

    const Rng defocus_rng(defocus.seed);
    std::vector<double> shared_dz;
    if (defocus.share_across_sources) {
        Rng r = defocus_rng.fork(0xD2);
        shared_dz = defocus.draw(r);
    }

    std::vector<detail::SourceOutcome> outcomes(scenes.size());
    parallel_for(scenes.size(), opts.threads, [&](std::size_t s) {
        const Scene& scene = scenes[s];
        if (!(scene.planes.front().transmission.grid() == grid))
            throw Error(ErrorCode::DimensionMismatch, "all scenes must share one grid");
        auto& out = outcomes[s];
        const RealImage holo = render_hologram(scene, geometry, {opts.propagation});
        double z_focus = 0.0;
        try {
            z_focus = autofocus_search(holo, geometry.z2_um - opts.focus_half_range_um,
                                       geometry.z2_um + opts.focus_half_range_um, opts.criterion, opts.focus_strategy,
                                       {opts.propagation, 1})
                          .z_hat_um;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoContrast)
                throw;
            out.skipped = true;
            out.reason = e.what();
            return;
        }
        out.z_focus_um = z_focus;

        ComplexField target;
        if (opts.target_mode == TargetMode::ground_truth) {
            target = scene.combined_transmission();
        } else {
            CaptureGeometry g = geometry;
            g.heights_um = height_ladder(geometry.z2_um, opts.mhpr_heights, opts.mhpr_spacing_um);
            HologramStack stack = render_stack(scene, g, {opts.propagation});
            stack.heights_um = height_ladder(z_focus, opts.mhpr_heights, opts.mhpr_spacing_um);
            MhprParams mp = opts.mhpr;
            mp.propagation = opts.propagation;
            target = mhpr(stack, mp).field;
        }

        std::vector<double> dz = shared_dz;
        if (!defocus.share_across_sources) {
            Rng r = defocus_rng.fork(s);
            dz = defocus.draw(r);
        }
        const SpectrumPropagator sp(field_from_intensity(holo), opts.propagation);
        for (std::size_t k = 0; k < dz.size(); ++k) {
            const ComplexField input = sp.at(-(z_focus + dz[k]));
            for (std::size_t q = 0; q < opts.rotations; ++q) {
                TrainingPair pair{rotate_quarter(input, static_cast<int>(q)),
                                  rotate_quarter(target, static_cast<int>(q)), dz[k], s, static_cast<int>(90 * q)};
                const std::string name = detail::pair_filename(s, k, pair.rotation_deg);
                write_pair(pair, out_dir / "pairs" / name);
                out.pairs.push_back({"pairs/" + name, s, dz[k], pair.rotation_deg, ""});
            }
        }
    });

    // Source-level split: validation gets round(N * v / (t + v)) sources.
    std::vector<std::uint64_t> usable;
    for (std::size_t s = 0; s < scenes.size(); ++s)
        if (!outcomes[s].skipped)
            usable.push_back(s);
    const double total = static_cast<double>(opts.split_train + opts.split_validation);
    const auto n_val = static_cast<std::size_t>(
        std::llround(static_cast<double>(usable.size()) * static_cast<double>(opts.split_validation) / total));
    Rng split_rng(opts.split_seed);
    std::vector<std::uint64_t> shuffled = usable;
    for (std::size_t i = shuffled.size(); i > 1; --i)
        std::swap(shuffled[i - 1], shuffled[split_rng.below(i)]);
    std::vector<std::string> split(scenes.size(), "skipped");
    for (std::size_t i = 0; i < shuffled.size(); ++i)
        split[shuffled[i]] = i < n_val ? "validation" : "train";

    DatasetManifest m;
    m.grid = grid;
    m.ratio_train = opts.split_train;
    m.ratio_validation = opts.split_validation;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        auto& o = outcomes[s];
        m.sources.push_back({s, split[s], o.z_focus_um, o.reason});
        for (auto& p : o.pairs) {
            p.split = split[s];
            m.pairs.push_back(std::move(p));
        }
    }

    nlohmann::json cfg;
    cfg["geometry"] = {{"wavelength_um", geometry.wavelength_um},
                       {"pitch_um", geometry.pitch_um},
                       {"z2_um", geometry.z2_um}};
    cfg["defocus"] = {{"dz_min_um", defocus.dz_min_um},
                      {"dz_max_um", defocus.dz_max_um},
                      {"n_distances", defocus.n_distances},
                      {"distribution", to_string(defocus.distribution)},
                      {"seed", defocus.seed},
                      {"share_across_sources", defocus.share_across_sources}};
    cfg["target_mode"] = to_string(opts.target_mode);
    cfg["rotations"] = opts.rotations;
    cfg["criterion"] = to_string(opts.criterion);
    cfg["focus_half_range_um"] = opts.focus_half_range_um;
    cfg["pad_factor"] = opts.propagation.pad_factor;
    cfg["split_seed"] = opts.split_seed;
    if (opts.target_mode == TargetMode::mhpr)
        cfg["mhpr"] = {{"heights", opts.mhpr_heights},
                       {"spacing_um", opts.mhpr_spacing_um},
                       {"iterations", opts.mhpr.iterations},
                       {"relaxation", opts.mhpr.relaxation},
                       {"refine_heights", opts.mhpr.refine_heights}};
    nlohmann::json scene_specs = nlohmann::json::array();
    for (const auto& sc : scenes)
        scene_specs.push_back(sc.spec);
    cfg["scenes"] = std::move(scene_specs);
    m.config = std::move(cfg);

    io::write_json(out_dir / "manifest.json", m);
    return m;
}

} // namespace holo

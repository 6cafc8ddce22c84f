// holo: batch front-end for simulation, reconstruction and evaluation.

#include "holo/holo.hpp"
#include "png.hpp"

#include <CLI11.hpp>
#include <fftw3.h>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.3.1";

struct Common {
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string out = "holo_out";
    int pad = 1;
};

struct SceneArgs {
    holo::SceneSpec spec;
    std::string mode = "particles";
    double z2_um = 1000.0;
    std::size_t heights = 0;
    double spacing_um = 15.0;
    double noise = 0.0;
};

struct Run {
    std::string command;
    std::vector<std::string> argv;
    Common common;
    json config;
    std::vector<std::string> outputs;

    fs::path dir() const { return common.out; }

    void record(const fs::path& p) { outputs.push_back(fs::relative(p, dir()).generic_string()); }

    void container(const fs::path& p, const holo::ContainerPayload& payload, const json& side = nullptr)
    {
        holo::write_container(p, payload, side);
        record(p);
    }

    void text(const fs::path& p, const std::string& s)
    {
        holo::io::write_text(p, s);
        record(p);
    }

    void preview(const fs::path& p, const holo::RealImage& img)
    {
        holo::tools::write_preview_png(p, img);
        record(p);
    }

    void previews(const std::string& stem, const holo::ComplexField& f)
    {
        preview(dir() / (stem + "_amplitude.png"), holo::amplitude_of(f));
        preview(dir() / (stem + "_phase.png"), holo::phase_of(f));
    }
};

holo::PropagationOptions prop_opts(const Common& c) { return holo::PropagationOptions{c.pad}; }

void add_common(CLI::App* sub, Common& c)
{
    sub->add_option("--seed", c.seed, "RNG seed (HOLO_SEED overrides)");
    sub->add_option("--threads", c.threads, "worker threads, 0 = all cores");
    sub->add_option("-o,--out", c.out, "output directory");
    sub->add_option("--pad", c.pad, "zero-pad factor for propagation (1 or 2)")->check(CLI::IsMember({1, 2}));
}

void add_scene(CLI::App* sub, SceneArgs& a, bool with_mode = true)
{
    auto& s = a.spec;
    if (with_mode)
        sub->add_option("--mode", a.mode, "particles | texture")->check(CLI::IsMember({"particles", "texture"}));
    sub->add_option("--fov", s.fov, "field of view in pixels")->check(CLI::PositiveNumber);
    sub->add_option("--pitch-um", s.pitch_um, "pixel pitch")->check(CLI::PositiveNumber);
    sub->add_option("--wavelength-um", s.wavelength_um, "illumination wavelength")->check(CLI::PositiveNumber);
    sub->add_option("--z2-um,--z2", a.z2_um, "sample-to-sensor distance");
    sub->add_option("--count", s.particles.count, "number of particles")->check(CLI::NonNegativeNumber);
    sub->add_option("--radius-min-um", s.particles.radius_min_um);
    sub->add_option("--radius-max-um", s.particles.radius_max_um);
    sub->add_option("--opacity-min", s.particles.opacity_min);
    sub->add_option("--opacity-max", s.particles.opacity_max);
    sub->add_option("--depth-min-um", s.particles.depth_min_um, "particle depth offset from z2");
    sub->add_option("--depth-max-um", s.particles.depth_max_um);
    sub->add_option("--correlation-um", s.texture.correlation_um, "texture correlation length");
    sub->add_option("--phase-rad", s.texture.phase_amplitude_rad, "texture phase amplitude");
    sub->add_option("--absorption-min", s.texture.absorption_min);
    sub->add_option("--absorption-max", s.texture.absorption_max);
}

holo::CaptureGeometry geometry_of(const SceneArgs& a)
{
    holo::CaptureGeometry g;
    g.wavelength_um = a.spec.wavelength_um;
    g.pitch_um = a.spec.pitch_um;
    g.z2_um = a.z2_um;
    return g;
}

json grid_json(const holo::Grid& g)
{
    return {{"width", g.width}, {"height", g.height}, {"pitch_um", g.pitch_um}, {"wavelength_um", g.wavelength_um}};
}

std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// ----------------------------------------------------------------- simulate

void cmd_simulate(Run& run, SceneArgs& a)
{
    a.spec.mode = holo::parse_scene_mode(a.mode);
    a.spec.seed = run.common.seed;
    a.spec.validate();
    auto geo = geometry_of(a);
    geo.validate();
    run.config["aliasing_risk"] = geo.aliasing_risk();

    const holo::Scene scene = holo::generate_scene(a.spec);
    const holo::RenderOptions ro{prop_opts(run.common), a.noise, run.common.seed};
    const auto dir = run.dir();

    run.text(dir / "scene.json", json(a.spec).dump(2) + "\n");
    json parts = json::array();
    for (const auto& p : scene.particles)
        parts.push_back({{"x_um", p.x_um},
                         {"y_um", p.y_um},
                         {"radius_um", p.radius_um},
                         {"opacity", p.opacity},
                         {"depth_um", p.depth_um}});
    if (!scene.particles.empty())
        run.text(dir / "particles.json", parts.dump(2) + "\n");

    const auto object = scene.combined_transmission();
    run.container(dir / "object.hidf", object, {{"kind", "complex"}, {"content", "combined transmission"}});
    run.previews("object", object);

    const auto holo = holo::render_hologram(scene, geo, ro);
    run.container(dir / "hologram.hidf", holo,
                  {{"kind", "intensity"}, {"z2_um", geo.z2_um}, {"grid", grid_json(holo.grid())}});
    run.preview(dir / "hologram.png", holo);

    if (a.heights > 0) {
        geo.heights_um = holo::height_ladder(a.z2_um, a.heights, a.spacing_um);
        const auto stack = holo::render_stack(scene, geo, ro);
        json files = json::array();
        for (std::size_t j = 0; j < stack.size(); ++j) {
            char name[32];
            std::snprintf(name, sizeof name, "height_%02zu.hidf", j);
            run.container(dir / name, stack.holograms[j]);
            files.push_back({{"file", name}, {"height_um", stack.heights_um[j]}});
        }
        run.text(dir / "stack.json", json{{"holograms", files}}.dump(2) + "\n");
    }
    std::cout << "wrote " << run.outputs.size() << " files to " << dir.string() << "\n";
}

// ---------------------------------------------------------------- propagate

struct PropagateArgs {
    std::string input;
    double z_um = 0.0;
};

void cmd_propagate(Run& run, const PropagateArgs& a)
{
    auto payload = holo::read_container(a.input);
    holo::ComplexField out;
    if (auto* f = std::get_if<holo::ComplexField>(&payload)) {
        out = holo::propagate(*f, a.z_um, prop_opts(run.common));
    } else {
        const auto& img = std::get<holo::RealImage>(payload);
        if (img.kind() != holo::ImageKind::intensity)
            throw holo::Error(holo::ErrorCode::InvalidField, a.input + ": expected a complex field or intensity");
        out = holo::backpropagate_intensity(img, a.z_um, prop_opts(run.common));
    }
    run.container(run.dir() / "propagated.hidf", out, {{"source", a.input}, {"z_um", a.z_um}});
    run.previews("propagated", out);
}

// ---------------------------------------------------------------- autofocus

struct FocusArgs {
    std::string input;
    double zmin = 800.0;
    double zmax = 1200.0;
    std::string criterion = "tog";
    std::string strategy = "c2f";
    std::size_t steps = 801;
    std::size_t levels = 3;
    std::size_t per_level = 21;

    holo::SearchStrategy make() const
    {
        if (strategy == "grid")
            return holo::GridSearch{steps};
        return holo::CoarseToFine{levels, per_level};
    }
};

void add_focus(CLI::App* sub, FocusArgs& a)
{
    sub->add_option("--zmin-um,--zmin", a.zmin, "search start");
    sub->add_option("--zmax-um,--zmax", a.zmax, "search end");
    sub->add_option("--criterion", a.criterion, "tamura | gini | tog")->check(CLI::IsMember({"tamura", "gini", "tog"}));
    sub->add_option("--strategy", a.strategy, "grid | c2f")->check(CLI::IsMember({"grid", "c2f"}));
    sub->add_option("--steps", a.steps, "grid search points");
    sub->add_option("--levels", a.levels, "coarse-to-fine levels");
    sub->add_option("--per-level", a.per_level, "coarse-to-fine points per level");
}

void cmd_autofocus(Run& run, const FocusArgs& a)
{
    if (!(a.zmin < a.zmax))
        throw holo::Error(holo::ErrorCode::InvalidSpec, "--zmin-um must be below --zmax-um");
    const auto img = holo::read_image(a.input);
    const auto r = holo::autofocus_search(img, a.zmin, a.zmax, holo::parse_criterion(a.criterion), a.make(),
                                          {prop_opts(run.common), run.common.threads});
    run.text(run.dir() / "sweep.csv", holo::sweep_csv(r));
    run.text(run.dir() / "focus.json", json{{"z_hat_um", r.z_hat_um},
                                            {"score", r.score},
                                            {"evaluations", r.evaluations},
                                            {"boundary_hit", r.boundary_hit},
                                            {"criterion", a.criterion}}
                                               .dump(2) +
                                           "\n");
    std::cout << "z_hat_um " << fmt(r.z_hat_um) << "\n";
    if (r.boundary_hit)
        std::cerr << "warning: focus estimate lies on the search boundary\n";
}

// --------------------------------------------------------------------- mhpr

struct MhprArgs {
    std::vector<std::string> inputs;
    std::vector<double> heights;
    std::string stack;
    holo::MhprParams params;
    std::string criterion = "tog";
};

holo::HologramStack load_stack(const MhprArgs& a)
{
    holo::HologramStack s;
    if (!a.stack.empty()) {
        const fs::path meta = a.stack;
        const auto j = holo::io::read_json(meta);
        for (const auto& e : j.at("holograms")) {
            s.holograms.push_back(holo::read_image(meta.parent_path() / e.at("file").get<std::string>()));
            s.heights_um.push_back(e.at("height_um").get<double>());
        }
    } else {
        if (a.inputs.size() != a.heights.size())
            throw holo::Error(holo::ErrorCode::InvalidSpec, "--heights-um needs one value per input");
        for (const auto& p : a.inputs)
            s.holograms.push_back(holo::read_image(p));
        s.heights_um = a.heights;
    }
    return s;
}

void cmd_mhpr(Run& run, MhprArgs& a)
{
    a.params.criterion = holo::parse_criterion(a.criterion);
    a.params.propagation = prop_opts(run.common);
    const auto r = holo::mhpr(load_stack(a), a.params);
    run.container(run.dir() / "mhpr.hidf", r.field, {{"heights_um", r.heights_um}});
    run.text(run.dir() / "residuals.csv", holo::residual_csv(r));
    run.previews("mhpr", r.field);
    std::cout << "final residual " << fmt(r.residuals.back()) << "\n";
}

// ------------------------------------------------------------------ dataset

struct DatasetArgs {
    SceneArgs scene;
    std::size_t sources = 176;
    std::optional<std::size_t> distances;
    double dz_min = -100.0;
    double dz_max = 100.0;
    std::string distribution = "uniform_random";
    bool share = false;
    std::string target = "ground_truth";
    std::size_t rotations = 4;
    std::size_t train = 14;
    std::size_t validation = 3;
};

std::vector<holo::Scene> make_scenes(holo::SceneSpec spec, std::size_t n, std::uint64_t seed)
{
    std::vector<holo::Scene> scenes;
    const holo::Rng root(seed);
    for (std::size_t s = 0; s < n; ++s) {
        spec.seed = root.fork(s).next_u64();
        scenes.push_back(holo::generate_scene(spec));
    }
    return scenes;
}

void cmd_dataset(Run& run, DatasetArgs& a)
{
    a.scene.spec.mode = holo::parse_scene_mode(a.scene.mode);
    a.scene.spec.validate();
    if (a.sources == 0)
        throw holo::Error(holo::ErrorCode::InvalidSpec, "sources must be >= 1");
    auto defocus = holo::DefocusSpec::for_mode(a.scene.spec.mode);
    if (a.distances)
        defocus.n_distances = *a.distances;
    defocus.dz_min_um = a.dz_min;
    defocus.dz_max_um = a.dz_max;
    defocus.distribution = holo::parse_distribution(a.distribution);
    defocus.share_across_sources = a.share;
    defocus.seed = holo::Rng(run.common.seed).fork(1).next_u64();

    holo::BuildOptions o;
    o.target_mode = holo::parse_target_mode(a.target);
    o.rotations = a.rotations;
    o.split_train = a.train;
    o.split_validation = a.validation;
    o.split_seed = holo::Rng(run.common.seed).fork(2).next_u64();
    o.propagation = prop_opts(run.common);
    o.threads = run.common.threads;
    o.mhpr_heights = a.scene.heights == 0 ? 8 : a.scene.heights;
    o.mhpr_spacing_um = a.scene.spacing_um;

    const auto scenes = make_scenes(a.scene.spec, a.sources, run.common.seed);
    const auto m = holo::build_dataset(scenes, geometry_of(a.scene), defocus, o, run.dir());
    for (const auto& p : m.pairs)
        run.outputs.push_back(p.file);
    run.record(run.dir() / "manifest.json");
    std::cout << "pairs " << m.pairs.size() << " (train " << m.count_pairs("train") << ", validation "
              << m.count_pairs("validation") << "), regions " << m.count_regions() << "\n";
    for (const auto& s : m.sources)
        if (s.split == "skipped")
            std::cerr << "skipped source " << s.source_id << ": " << s.reason << "\n";
}

// --------------------------------------------------------------------- eval

struct EvalArgs {
    std::string metric = "ssim";
    double dz_min = -100.0;
    double dz_max = 100.0;
    double step = 5.0;
    std::size_t scenes = 4;
    std::size_t fov = 256;
    double z2_um = 1000.0;
    std::size_t heights = 8;
    double spacing_um = 15.0;
    std::size_t iterations = 20;
    std::string network_dir;
    std::string export_inputs;
};

std::string network_name(const std::string& id, double dz)
{
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s_dz%+08.2f.hidf", id.c_str(), dz);
    return buf;
}

holo::Reconstructor network_reconstructor(const fs::path& dir)
{
    return {"network", [dir](const holo::SweepScene& s, double dz) {
                auto payload = holo::read_container(dir / network_name(s.id, dz));
                if (auto* f = std::get_if<holo::ComplexField>(&payload))
                    return holo::amplitude_of(*f);
                auto img = std::get<holo::RealImage>(std::move(payload));
                if (img.kind() != holo::ImageKind::amplitude)
                    throw holo::Error(holo::ErrorCode::CorruptFile,
                                      (dir / network_name(s.id, dz)).string() + ": expected amplitude");
                return img;
            }};
}

std::vector<holo::SweepScene> eval_scenes(const EvalArgs& a, std::uint64_t seed, const holo::PropagationOptions& po)
{
    holo::SceneSpec spec;
    spec.fov = a.fov;
    if (a.metric == "ssim") {
        spec.mode = holo::SceneMode::texture;
    } else {
        spec.mode = holo::SceneMode::particles;
        spec.particles.count = 1;
        spec.particles.radius_min_um = spec.particles.radius_max_um = 2.0;
        spec.particles.opacity_min = spec.particles.opacity_max = 1.0;
    }
    spec.validate();
    holo::CaptureGeometry geo;
    geo.pitch_um = spec.pitch_um;
    geo.wavelength_um = spec.wavelength_um;
    geo.z2_um = a.z2_um;
    std::vector<holo::SweepScene> out;
    const auto scenes = make_scenes(spec, a.scenes, seed);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const auto& sc = scenes[i];
        holo::SweepScene s;
        char id[32];
        std::snprintf(id, sizeof id, "scene%03zu", i);
        s.id = id;
        s.hologram = holo::render_hologram(sc, geo, {po});
        s.z_focus_um = a.z2_um;
        s.reference = holo::amplitude_of(sc.combined_transmission());
        if (a.metric == "ssim") {
            auto g = geo;
            g.heights_um = holo::height_ladder(a.z2_um, a.heights, a.spacing_um);
            s.stack = holo::render_stack(sc, g, {po});
        } else {
            s.marker_x = static_cast<std::size_t>(sc.particles[0].x_um / spec.pitch_um);
            s.marker_y = static_cast<std::size_t>(sc.particles[0].y_um / spec.pitch_um);
        }
        out.push_back(std::move(s));
    }
    return out;
}

void cmd_eval(Run& run, const EvalArgs& a)
{
    const auto po = prop_opts(run.common);
    const auto dz = holo::dz_range(a.dz_min, a.dz_max, a.step);
    const auto scenes = eval_scenes(a, run.common.seed, po);

    if (!a.export_inputs.empty()) {
        const fs::path d = a.export_inputs;
        fs::create_directories(d);
        for (const auto& s : scenes)
            for (double z : dz)
                holo::write_container(d / network_name(s.id, z),
                                      holo::backpropagate_intensity(s.hologram, s.z_focus_um + z, po));
    }

    std::vector<holo::Reconstructor> recons{holo::backprop_reconstructor(po)};
    holo::SweepMetric metric;
    if (a.metric == "ssim") {
        holo::MhprParams mp;
        mp.iterations = a.iterations;
        mp.propagation = po;
        recons.push_back(holo::mhpr_reconstructor(mp));
        metric = holo::ssim_metric();
    } else {
        recons.push_back(
            {"ground_truth", [](const holo::SweepScene& s, double) { return s.reference; }});
        metric = holo::fwhm_metric();
    }
    if (!a.network_dir.empty())
        recons.push_back(network_reconstructor(a.network_dir));

    const auto r = holo::defocus_sweep(recons, scenes, dz, metric, run.common.threads);
    run.text(run.dir() / (a.metric + ".csv"), r.csv());

    const auto& s0 = scenes.front();
    run.previews("backprop_focus", holo::backpropagate_intensity(s0.hologram, s0.z_focus_um, po));
    run.preview(run.dir() / "reference_amplitude.png", s0.reference);
    std::cout << "wrote " << a.metric << ".csv with " << r.dz_um.size() << " rows\n";
}

// -------------------------------------------------------------------- bench

void cmd_bench(Run& run, holo::TimingParams& p)
{
    p.seed = run.common.seed;
    const auto t = holo::timing_study(p);
    run.text(run.dir() / "timing.csv", t.csv());
    run.text(run.dir() / "slopes.json", json{{"classical_slope_m", t.classical_slope_m},
                                             {"classical_slope_n", t.classical_slope_n},
                                             {"fixed_slope_m", t.fixed_slope_m},
                                             {"fixed_slope_n", t.fixed_slope_n}}
                                                .dump(2) +
                                            "\n");
    std::cout << "classical slope vs m " << t.classical_slope_m << ", vs n " << t.classical_slope_n
              << "; fixed slope vs m " << t.fixed_slope_m << ", vs n " << t.fixed_slope_n << "\n";
}

// --------------------------------------------------------------------- main

json versions()
{
    return {{"holo", kVersion}, {"fftw", std::string(fftw_version)}, {"compiler", __VERSION__}, {"cxx", __cplusplus}};
}

void write_manifest(const Run& run)
{
    json j;
    j["command"] = run.command;
    j["argv"] = run.argv;
    j["seed"] = run.common.seed;
    j["threads"] = run.common.threads;
    j["config"] = run.config;
    j["versions"] = versions();
    j["outputs"] = run.outputs;
    holo::io::write_json(run.dir() / "run_manifest.json", j);
}

int run_cli(std::vector<std::string> args)
{
    CLI::App app{"Lensless in-line holography toolkit"};
    app.require_subcommand(0, 1);
    app.set_version_flag("--version", kVersion);
    app.option_defaults()->always_capture_default();
    std::string replay;
    app.add_option("--replay", replay, "rerun the command recorded in a run_manifest.json");

    Common common;
    SceneArgs scene;
    PropagateArgs prop;
    FocusArgs focus;
    MhprArgs mh;
    DatasetArgs ds;
    EvalArgs ev;
    holo::TimingParams tp;

    auto* sim = app.add_subcommand("simulate", "render a scene and its hologram(s)");
    add_common(sim, common);
    add_scene(sim, scene);
    sim->add_option("--heights", scene.heights, "extra multi-height captures starting at z2");
    sim->add_option("--spacing-um", scene.spacing_um, "multi-height spacing");
    sim->add_option("--noise", scene.noise, "Gaussian intensity noise sigma")->check(CLI::NonNegativeNumber);

    auto* pr = app.add_subcommand("propagate", "angular-spectrum propagation of a field or hologram");
    add_common(pr, common);
    pr->add_option("input", prop.input, "HIDF field, or intensity to back-propagate")->required();
    pr->add_option("--z-um,--z", prop.z_um, "distance; intensity inputs are propagated back by z")->required();

    auto* af = app.add_subcommand("autofocus", "estimate the focus distance of a hologram");
    add_common(af, common);
    af->add_option("input", focus.input, "HIDF intensity hologram")->required();
    add_focus(af, focus);

    auto* mp = app.add_subcommand("mhpr", "multi-height phase recovery");
    add_common(mp, common);
    mp->add_option("inputs", mh.inputs, "HIDF intensity holograms, nearest first");
    mp->add_option("--heights-um,--heights", mh.heights, "height of each input")->delimiter(',');
    mp->add_option("--stack", mh.stack, "stack.json written by simulate --heights");
    mp->add_option("--iterations", mh.params.iterations)->check(CLI::PositiveNumber);
    mp->add_option("--relaxation", mh.params.relaxation)->check(CLI::Range(0.0, 1.0));
    mp->add_flag("--refine-heights", mh.params.refine_heights, "autofocus each height before recovery");
    mp->add_option("--bracket-um", mh.params.refine_bracket_um);
    mp->add_option("--criterion", mh.criterion)->check(CLI::IsMember({"tamura", "gini", "tog"}));

    auto* dsc = app.add_subcommand("dataset", "build defocus-augmented training pairs");
    add_common(dsc, common);
    add_scene(dsc, ds.scene);
    dsc->add_option("--sources", ds.sources, "number of simulated sources");
    dsc->add_option("--distances", ds.distances, "defocus distances per region (default 81 particles, 41 texture)");
    dsc->add_option("--dz-min-um,--dz-min", ds.dz_min);
    dsc->add_option("--dz-max-um,--dz-max", ds.dz_max);
    dsc->add_option("--distribution", ds.distribution)
        ->check(CLI::IsMember({"uniform_random", "uniform_grid"}));
    dsc->add_flag("--share-distances", ds.share, "one defocus draw shared by all sources");
    dsc->add_option("--target", ds.target)->check(CLI::IsMember({"ground_truth", "mhpr"}));
    dsc->add_option("--rotations", ds.rotations)->check(CLI::Range(1, 4));
    dsc->add_option("--heights", ds.scene.heights, "MH-PR target heights");
    dsc->add_option("--spacing-um", ds.scene.spacing_um, "MH-PR target height spacing");
    dsc->add_option("--split-train", ds.train);
    dsc->add_option("--split-validation", ds.validation);

    auto* evc = app.add_subcommand("eval", "defocus sweeps as CSV");
    add_common(evc, common);
    evc->add_option("--metric", ev.metric, "ssim (texture scenes) | fwhm (single particle)")
        ->check(CLI::IsMember({"ssim", "fwhm"}));
    evc->add_option("--dz-min-um,--dz-min", ev.dz_min);
    evc->add_option("--dz-max-um,--dz-max", ev.dz_max);
    evc->add_option("--step-um,--step", ev.step)->check(CLI::PositiveNumber);
    evc->add_option("--scenes", ev.scenes)->check(CLI::PositiveNumber);
    evc->add_option("--fov", ev.fov)->check(CLI::PositiveNumber);
    evc->add_option("--z2-um,--z2", ev.z2_um);
    evc->add_option("--heights", ev.heights)->check(CLI::PositiveNumber);
    evc->add_option("--spacing-um", ev.spacing_um);
    evc->add_option("--iterations", ev.iterations)->check(CLI::PositiveNumber);
    evc->add_option("--network-dir", ev.network_dir, "network outputs named <scene>_dz<+dz>.hidf");
    evc->add_option("--export-inputs", ev.export_inputs, "write back-propagated inputs for a network");

    auto* bn = app.add_subcommand("bench", "timing study of classical vs fixed-cost reconstruction");
    add_common(bn, common);
    bn->add_option("--n", tp.n_values, "object counts at fixed m")->delimiter(',');
    bn->add_option("--m", tp.m_values, "search steps at fixed n")->delimiter(',');
    bn->add_option("--fixed-n", tp.fixed_n);
    bn->add_option("--fixed-m", tp.fixed_m);
    bn->add_option("--fov", tp.fov);
    bn->add_option("--patch", tp.patch);
    bn->add_option("--repeats", tp.repeats)->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (!replay.empty()) {
        const auto j = holo::io::read_json(replay);
        auto argv = j.at("argv").get<std::vector<std::string>>();
        std::vector<std::string> pinned;
        for (std::size_t i = 0; i < argv.size(); ++i) {
            if (argv[i] == "--replay")
                throw holo::Error(holo::ErrorCode::InvalidSpec, "manifest records a replay");
            if (argv[i] == "--seed") {
                ++i;
                continue;
            }
            if (argv[i].rfind("--seed=", 0) == 0)
                continue;
            pinned.push_back(argv[i]);
        }
        // the recorded seed wins, whether it came from --seed or HOLO_SEED
        pinned.push_back("--seed");
        pinned.push_back(std::to_string(j.at("seed").get<std::uint64_t>()));
        unsetenv("HOLO_SEED");
        return run_cli(std::move(pinned));
    }

    CLI::App* sub = nullptr;
    for (auto* s : app.get_subcommands())
        sub = s;
    if (!sub) {
        std::cout << app.help();
        return 2;
    }

    if (const char* env = std::getenv("HOLO_SEED")) {
        try {
            std::size_t used = 0;
            common.seed = std::stoull(env, &used);
            if (env[used] != '\0')
                throw std::invalid_argument(env);
        } catch (const std::exception&) {
            throw holo::Error(holo::ErrorCode::InvalidSpec, std::string("HOLO_SEED is not an integer: ") + env);
        }
    }

    // numbers and booleans keep their type; anything else stays a string
    auto typed = [](const std::string& s) -> json {
        const auto j = json::parse(s, nullptr, false);
        return !j.is_discarded() && (j.is_number() || j.is_boolean()) ? j : json(s);
    };
    Run run;
    run.command = sub->get_name();
    run.argv = args;
    run.common = common;
    run.config = json::parse("{}");
    for (const auto* opt : sub->get_options()) {
        if (opt->get_lnames().empty() || opt->get_lnames().front() == "help")
            continue;
        const auto name = opt->get_lnames().front();
        const auto res = opt->reduced_results();
        if (res.empty())
            run.config[name] = typed(opt->get_default_str());
        else if (res.size() == 1)
            run.config[name] = typed(res.front());
        else {
            json arr = json::array();
            for (const auto& r : res)
                arr.push_back(typed(r));
            run.config[name] = arr;
        }
    }
    for (const auto* opt : sub->get_options())
        if (opt->get_lnames().empty() && !opt->get_name().empty() && opt->get_name() != "--help")
            run.config[opt->get_name()] = opt->reduced_results();
    run.config["seed"] = common.seed;

    std::error_code ec;
    fs::create_directories(run.dir(), ec);
    if (ec)
        throw holo::Error(holo::ErrorCode::IoError, "cannot create " + run.dir().string() + ": " + ec.message());

    const auto name = run.command;
    if (name == "simulate")
        cmd_simulate(run, scene);
    else if (name == "propagate")
        cmd_propagate(run, prop);
    else if (name == "autofocus")
        cmd_autofocus(run, focus);
    else if (name == "mhpr")
        cmd_mhpr(run, mh);
    else if (name == "dataset")
        cmd_dataset(run, ds);
    else if (name == "eval")
        cmd_eval(run, ev);
    else if (name == "bench")
        cmd_bench(run, tp);
    write_manifest(run);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    try {
        return run_cli(std::vector<std::string>(argv, argv + argc));
    } catch (const holo::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.is_validation() ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

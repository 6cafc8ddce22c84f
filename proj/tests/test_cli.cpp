#include <holo/holo.hpp>

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

namespace fs = std::filesystem;
using namespace holo;

namespace {

struct CliRun {
    int status;
    std::string output;
};

class CliTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("holo_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    CliRun run(const std::string& args, const std::string& env = "") const
    {
        const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" HOLO_CLI_PATH "' " + args + " 2>&1";
        FILE* pipe = popen(cmd.c_str(), "r");
        std::string out;
        std::array<char, 4096> buf{};
        while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe))
            out.append(buf.data(), n);
        const int raw = pclose(pipe);
        return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
    }

    std::string slurp(const fs::path& p) const
    {
        std::ifstream in(dir_ / p, std::ios::binary);
        return {std::istreambuf_iterator<char>(in), {}};
    }

    fs::path dir_;
};

} // namespace

TEST_F(CliTest, SimulateIsDeterministic)
{
    const std::string args = " --fov 48 --count 4 --seed 11";
    ASSERT_EQ(run("simulate -o a" + args).status, 0);
    ASSERT_EQ(run("simulate -o b" + args).status, 0);
    for (const char* f : {"hologram.hidf", "object.hidf", "particles.json", "scene.json", "hologram.png"})
        EXPECT_EQ(slurp(fs::path("a") / f), slurp(fs::path("b") / f)) << f;
    ASSERT_EQ(run("simulate -o c --fov 48 --count 4 --seed 12").status, 0);
    EXPECT_NE(slurp("a/hologram.hidf"), slurp("c/hologram.hidf"));
}

TEST_F(CliTest, HologramFileMatchesLibrary)
{
    ASSERT_EQ(run("simulate -o s --fov 32 --count 3 --seed 5 --z2-um 900").status, 0);
    const auto holo = read_image(dir_ / "s/hologram.hidf");
    SceneSpec spec;
    spec.fov = 32;
    spec.particles.count = 3;
    spec.seed = 5;
    CaptureGeometry g;
    g.z2_um = 900.0;
    const auto expected = render_hologram(generate_scene(spec), g);
    for (std::size_t i = 0; i < expected.values().size(); ++i)
        ASSERT_NEAR(holo[i], expected[i], 1e-6 * std::max(1.0, std::abs(expected[i])));
}

TEST_F(CliTest, ValidationErrorExitsTwo)
{
    const auto r = run("simulate --count -1");
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.output.find("--count"), std::string::npos) << r.output;
    EXPECT_EQ(run("simulate --fov 0").status, 2);
    EXPECT_EQ(run("autofocus x.hidf --zmin-um 10 --zmax-um 5").status, 2);
    EXPECT_EQ(run("frobnicate").status, 2);
}

TEST_F(CliTest, MissingInputExitsOneWithPath)
{
    const auto r = run("propagate nowhere.hidf --z-um 100");
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.output.find("nowhere.hidf"), std::string::npos) << r.output;
}

TEST_F(CliTest, AutofocusMatchesLibrary)
{
    ASSERT_EQ(run("simulate -o s --fov 96 --count 3 --seed 2").status, 0);
    const auto r = run("autofocus s/hologram.hidf -o f --zmin-um 800 --zmax-um 1200 --strategy c2f");
    ASSERT_EQ(r.status, 0) << r.output;
    const auto lib = autofocus_search(read_image(dir_ / "s/hologram.hidf"), 800.0, 1200.0,
                                      FocusCriterion::tamura_of_gradient, CoarseToFine{3, 21});
    std::istringstream in(r.output.substr(r.output.find("z_hat_um")));
    std::string key;
    double z = 0.0;
    in >> key >> z;
    EXPECT_NEAR(z, lib.z_hat_um, 1e-9);
    const auto focus = nlohmann::json::parse(slurp("f/focus.json"));
    EXPECT_NEAR(focus["z_hat_um"].get<double>(), lib.z_hat_um, 1e-9);
    EXPECT_EQ(focus["evaluations"].get<std::size_t>(), 63u);
    EXPECT_TRUE(fs::exists(dir_ / "f/sweep.csv"));
}

TEST_F(CliTest, PropagateAndMhprRun)
{
    ASSERT_EQ(run("simulate -o s --mode texture --fov 32 --heights 3 --seed 4").status, 0);
    EXPECT_EQ(run("propagate s/hologram.hidf -o p --z-um -1000").status, 0);
    EXPECT_TRUE(fs::exists(dir_ / "p/propagated.hidf"));
    const auto r = run("mhpr --stack s/stack.json -o m --iterations 4");
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_EQ(read_field(dir_ / "m/mhpr.hidf").grid().width, 32u);
    const std::string csv = slurp("m/residuals.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST_F(CliTest, EvalWritesFullDefocusTable)
{
    const auto r = run("eval --metric ssim -o e --fov 32 --scenes 1 --iterations 2 --heights 3");
    ASSERT_EQ(r.status, 0) << r.output;
    const std::string csv = slurp("e/ssim.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "dz_um,backprop,mhpr");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 42);
}

TEST_F(CliTest, ManifestReplayReproducesOutputs)
{
    ASSERT_EQ(run("simulate -o a --fov 32 --count 2 --seed 9 --threads 1").status, 0);
    const auto manifest = nlohmann::json::parse(slurp("a/run_manifest.json"));
    EXPECT_EQ(manifest["command"], "simulate");
    EXPECT_EQ(manifest["seed"].get<std::uint64_t>(), 9u);
    EXPECT_TRUE(manifest.contains("config"));
    EXPECT_TRUE(manifest["versions"].contains("fftw"));
    EXPECT_EQ(manifest["config"]["fov"].get<std::size_t>(), 32u);
    const std::string before = slurp("a/hologram.hidf");
    fs::remove(dir_ / "a/hologram.hidf");
    ASSERT_EQ(run("--replay a/run_manifest.json").status, 0);
    EXPECT_EQ(slurp("a/hologram.hidf"), before);
}

TEST_F(CliTest, SeedFromEnvironment)
{
    ASSERT_EQ(run("simulate -o a --fov 32 --count 2", "HOLO_SEED=21").status, 0);
    ASSERT_EQ(run("simulate -o b --fov 32 --count 2 --seed 21").status, 0);
    EXPECT_EQ(slurp("a/hologram.hidf"), slurp("b/hologram.hidf"));
    EXPECT_EQ(run("simulate -o c --fov 32", "HOLO_SEED=banana").status, 2);
    const std::string before = slurp("a/hologram.hidf");
    fs::remove(dir_ / "a/hologram.hidf");
    ASSERT_EQ(run("--replay a/run_manifest.json", "HOLO_SEED=5").status, 0);
    EXPECT_EQ(slurp("a/hologram.hidf"), before);
}

TEST_F(CliTest, PreviewSidecarDescribesScaling)
{
    ASSERT_EQ(run("simulate -o a --fov 32 --count 2").status, 0);
    const std::string png = slurp("a/hologram.png");
    ASSERT_GE(png.size(), 8u);
    EXPECT_EQ(png.substr(1, 3), "PNG");
    const auto side = nlohmann::json::parse(slurp("a/hologram.png.json"));
    EXPECT_EQ(side["scaling"], "min-max");
    EXPECT_LE(side["min"].get<double>(), side["max"].get<double>());
}

TEST_F(CliTest, DatasetWritesManifest)
{
    const auto r = run("dataset -o d --sources 3 --fov 16 --count 2 --rotations 1 --dz-min -10 --dz-max 10");
    ASSERT_EQ(r.status, 0) << r.output;
    const auto m = read_manifest(dir_ / "d/manifest.json");
    EXPECT_EQ(m.pairs.size(), 3u * 81u);
}

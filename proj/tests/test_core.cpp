#include "support.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <numbers>

using namespace holo;
namespace ts = testing_support;

TEST(Decompose, UnitFieldHasZeroPhase)
{
    const auto f = ComplexField::uniform(ts::grid(8), {1.0, 0.0});
    const auto [a, p] = decompose(f);
    for (std::size_t i = 0; i < f.grid().size(); ++i) {
        EXPECT_EQ(a[i], 1.0);
        EXPECT_EQ(p[i], 0.0);
    }
}

TEST(Decompose, NegativeImaginaryUnit)
{
    const auto f = ComplexField::uniform(ts::grid(4), {0.0, -1.0});
    const auto [a, p] = decompose(f);
    for (std::size_t i = 0; i < f.grid().size(); ++i) {
        EXPECT_DOUBLE_EQ(a[i], 1.0);
        EXPECT_DOUBLE_EQ(p[i], -std::numbers::pi / 2);
    }
}

TEST(Decompose, NegativeRealAxisMapsToPlusPi)
{
    const auto f = ComplexField::uniform(ts::grid(2), {-1.0, 0.0});
    EXPECT_EQ(phase_of(f)[0], std::numbers::pi);
    const auto g = ComplexField::uniform(ts::grid(2), {-1.0, -0.0});
    EXPECT_EQ(phase_of(g)[0], std::numbers::pi);
}

TEST(Compose, Examples)
{
    const auto g = ts::grid(4);
    auto one = compose(ts::image(g, ImageKind::amplitude, std::vector<double>(16, 1.0)),
                       ts::image(g, ImageKind::phase, std::vector<double>(16, 0.0)));
    EXPECT_EQ(one[5], cplx(1.0, 0.0));
    auto two = compose(ts::image(g, ImageKind::amplitude, std::vector<double>(16, 2.0)),
                       ts::image(g, ImageKind::phase, std::vector<double>(16, std::numbers::pi / 2)));
    EXPECT_NEAR(two[3].real(), 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(two[3].imag(), 2.0);
}

TEST(Compose, RejectsMismatchedInputs)
{
    const auto g = ts::grid(4);
    const auto a = ts::image(g, ImageKind::amplitude, std::vector<double>(16, 1.0));
    const auto p = ts::image(ts::grid(4, 2.0), ImageKind::phase, std::vector<double>(16, 0.0));
    EXPECT_THROW(compose(a, p), Error);
    EXPECT_THROW(compose(a, a), Error);
}

TEST(Compose, RoundTripProperty)
{
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const std::size_t n = 3 + seed % 17;
        const auto f = ts::random_field(Grid{n, n + 2, 0.8, 0.5}, seed);
        const auto [a, p] = decompose(f);
        EXPECT_LE(relative_l2(compose(a, p), f), 1e-12) << "seed " << seed;
    }
}

TEST(WrapPhase, HalfOpenInterval)
{
    constexpr double pi = std::numbers::pi;
    EXPECT_EQ(wrap_phase(pi), pi);
    EXPECT_NEAR(wrap_phase(-pi), pi, 1e-15);
    EXPECT_NEAR(wrap_phase(3 * pi / 2), -pi / 2, 1e-15);
    EXPECT_NEAR(wrap_phase(7.0), 7.0 - 2 * pi, 1e-15);
    for (double x = -40.0; x < 40.0; x += 0.37) {
        const double w = wrap_phase(x);
        EXPECT_GT(w, -pi);
        EXPECT_LE(w, pi);
        EXPECT_NEAR(std::cos(w), std::cos(x), 1e-12);
        EXPECT_NEAR(std::sin(w), std::sin(x), 1e-12);
    }
}

TEST(ComplexField, Validation)
{
    EXPECT_THROW(ComplexField(Grid{0, 4, 1.0, 0.5}, {}), Error);
    EXPECT_THROW(ComplexField(Grid{2, 2, -1.0, 0.5}, std::vector<cplx>(4)), Error);
    EXPECT_THROW(ComplexField(Grid{2, 2, 1.0, 0.0}, std::vector<cplx>(4)), Error);
    EXPECT_THROW(ComplexField(Grid{2, 2, 1.0, 0.5}, std::vector<cplx>(3)), Error);
    std::vector<cplx> bad(4);
    bad[2] = {std::nan(""), 0.0};
    try {
        ComplexField(Grid{2, 2, 1.0, 0.5}, bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteField);
    }
}

TEST(RealImage, Validation)
{
    const Grid g{2, 2, 1.0, 0.0};
    try {
        RealImage(g, ImageKind::intensity, {1.0, -0.5, 1.0, 1.0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NegativeIntensity);
    }
    EXPECT_THROW(RealImage(g, ImageKind::phase, {0.0, 4.0, 0.0, 0.0}), Error);
    EXPECT_THROW(RealImage(g, ImageKind::phase, {0.0, -std::numbers::pi, 0.0, 0.0}), Error);
    EXPECT_NO_THROW(RealImage(g, ImageKind::phase, {0.0, std::numbers::pi, 0.0, 0.0}));
}

TEST(CaptureGeometry, Validation)
{
    CaptureGeometry g;
    EXPECT_NO_THROW(g.validate());
    EXPECT_TRUE(g.aliasing_risk());
    g.heights_um = {1000, 1015, 1015};
    try {
        g.validate();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::HeightsOutOfOrder);
    }
    g.heights_um.clear();
    g.pitch_um = 0.0;
    EXPECT_THROW(g.validate(), Error);
    g.pitch_um = 0.2;
    EXPECT_FALSE(g.aliasing_risk());
}

TEST(Rng, MatchesStandardEngine)
{
    // The 10000th output of a default-seeded mt19937_64 is fixed by the C++ standard.
    Rng r(5489);
    std::uint64_t v = 0;
    for (int i = 0; i < 10000; ++i)
        v = r.next_u64();
    EXPECT_EQ(v, 9981545732273789042ULL);
}

TEST(Rng, DeterministicStreams)
{
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_EQ(a.uniform(), b.uniform());
        EXPECT_EQ(a.normal(), b.normal());
    }
    EXPECT_NE(Rng(42).fork(1).next_u64(), Rng(42).fork(2).next_u64());
    EXPECT_EQ(Rng(42).fork(7).next_u64(), Rng(42).fork(7).next_u64());
}

TEST(Rng, BelowAndUniformRanges)
{
    Rng r(3);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 50000; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ++counts[r.below(5)];
    }
    for (int c : counts)
        EXPECT_NEAR(c, 10000, 400);
}

TEST(Rng, NormalMoments)
{
    Rng r(11);
    double s = 0.0, s2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        s2 += x * x;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

class ContainerTest : public ::testing::Test {
protected:
    std::filesystem::path dir;
    void SetUp() override
    {
        dir = std::filesystem::temp_directory_path() /
              ("holo_container_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
               ::testing::UnitTest::GetInstance()->current_test_info()->name());
        std::filesystem::create_directories(dir);
    }
    void TearDown() override { std::filesystem::remove_all(dir); }
};

TEST_F(ContainerTest, ComplexRoundTripAtFloatPrecision)
{
    const auto f = ts::random_field(Grid{7, 5, 1.12, 0.53}, 9);
    write_container(dir / "f.hidf", f);
    const auto g = read_field(dir / "f.hidf");
    EXPECT_EQ(g.grid(), f.grid());
    for (std::size_t i = 0; i < f.grid().size(); ++i) {
        EXPECT_EQ(g[i].real(), static_cast<double>(static_cast<float>(f[i].real())));
        EXPECT_EQ(g[i].imag(), static_cast<double>(static_cast<float>(f[i].imag())));
    }
}

TEST_F(ContainerTest, PhaseImageStaysInRange)
{
    const Grid g{2, 1, 1.0, 0.53};
    write_container(dir / "p.hidf", RealImage(g, ImageKind::phase, {std::numbers::pi, -3.0}));
    const auto p = read_image(dir / "p.hidf");
    EXPECT_EQ(p.kind(), ImageKind::phase);
    EXPECT_LE(p[0], std::numbers::pi);
    EXPECT_NEAR(p[0], std::numbers::pi, 1e-6);
}

TEST_F(ContainerTest, HeaderLayout)
{
    const auto bytes = encode_container(RealImage(Grid{3, 2, 1.5, 0.25}, ImageKind::intensity,
                                                  {1, 2, 3, 4, 5, 6}));
    ASSERT_EQ(bytes.size(), 4u + 2 + 1 + 4 + 4 + 8 + 8 + 6 * 4);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "HIDF");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[5], 0);
    EXPECT_EQ(bytes[6], 1);
    EXPECT_EQ(bytes[7], 3);
    EXPECT_EQ(bytes[11], 2);
    double pitch;
    std::memcpy(&pitch, bytes.data() + 15, 8);
    EXPECT_EQ(pitch, 1.5);
}

TEST_F(ContainerTest, CorruptInputs)
{
    const auto f = ts::random_field(Grid{4, 4, 1.12, 0.53}, 1);
    auto bytes = encode_container(f);
    auto expect_corrupt = [&](std::vector<unsigned char> b) {
        io::write_file(dir / "c.hidf", b);
        try {
            read_container(dir / "c.hidf");
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::CorruptFile);
        }
    };
    expect_corrupt({bytes.begin(), bytes.end() - 3});
    expect_corrupt({bytes.begin(), bytes.begin() + 10});
    auto magic = bytes;
    magic[0] = 'X';
    expect_corrupt(magic);
    auto version = bytes;
    version[4] = 9;
    expect_corrupt(version);
    try {
        read_container(dir / "absent.hidf");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IoError);
        EXPECT_NE(std::string(e.what()).find("absent.hidf"), std::string::npos);
    }
}

TEST_F(ContainerTest, KindMismatchIsReported)
{
    write_container(dir / "f.hidf", ts::random_field(Grid{2, 2, 1.0, 0.5}, 2));
    EXPECT_THROW(read_image(dir / "f.hidf"), Error);
}

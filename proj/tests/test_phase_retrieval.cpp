#include "support.hpp"

#include <gtest/gtest.h>

using namespace holo;
namespace ts = testing_support;

namespace {

Scene texture_scene(std::uint64_t seed, std::size_t fov = 128)
{
    SceneSpec s;
    s.mode = SceneMode::texture;
    s.fov = fov;
    s.seed = seed;
    return generate_scene(s);
}

HologramStack stack_of(const Scene& scene, std::size_t n, double spacing = 15.0, double z2 = 1000.0)
{
    CaptureGeometry g;
    g.z2_um = z2;
    g.heights_um = height_ladder(z2, n, spacing);
    return render_stack(scene, g);
}

// Error after removing the best global phase, relative to the truth norm.
double aligned_error(const ComplexField& recon, const ComplexField& truth)
{
    cplx inner{};
    for (std::size_t i = 0; i < truth.values().size(); ++i)
        inner += std::conj(recon[i]) * truth[i];
    const cplx rot = std::abs(inner) > 0 ? inner / std::abs(inner) : cplx{1.0, 0.0};
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < truth.values().size(); ++i) {
        num += std::norm(rot * recon[i] - truth[i]);
        den += std::norm(truth[i]);
    }
    return std::sqrt(num / den);
}

} // namespace

TEST(Mhpr, SingleHeightEqualsBackpropagation)
{
    const auto stack = stack_of(texture_scene(1, 64), 1);
    MhprParams p;
    p.iterations = 1;
    p.relaxation = 1.0;
    const auto r = mhpr(stack, p);
    const auto bp = backpropagate_intensity(stack.holograms[0], stack.heights_um[0]);
    for (std::size_t i = 0; i < bp.values().size(); ++i)
        ASSERT_EQ(r.field[i], bp[i]);
}

TEST(Mhpr, UniformStackIsFixedPoint)
{
    const Grid g{32, 32, 1.12, 0.53};
    HologramStack s;
    for (int j = 0; j < 4; ++j) {
        s.holograms.emplace_back(g, ImageKind::intensity, std::vector<double>(g.size(), 1.0));
        s.heights_um.push_back(1000.0 + 15.0 * j);
    }
    const auto r = mhpr(s, {});
    EXPECT_NEAR(r.residuals.front(), 0.0, 1e-12);
    for (std::size_t i = 0; i < g.size(); ++i)
        ASSERT_NEAR(std::abs(r.field[i]), 1.0, 1e-12);
}

TEST(Mhpr, ImprovesOnBackpropagation)
{
    const auto scene = texture_scene(7);
    const auto stack = stack_of(scene, 8);
    const auto truth = scene.combined_transmission();
    const auto r = mhpr(stack, {});
    ASSERT_EQ(r.residuals.size(), 20u);
    const auto bp = backpropagate_intensity(stack.holograms[0], stack.heights_um[0]);
    const auto ref = amplitude_of(truth);
    EXPECT_GT(ssim(amplitude_of(r.field), ref), ssim(amplitude_of(bp), ref));
    EXPECT_LT(aligned_error(r.field, truth), aligned_error(bp, truth));
    MhprParams longer;
    longer.iterations = 60;
    EXPECT_LT(aligned_error(mhpr(stack, longer).field, truth), aligned_error(r.field, truth));
}

TEST(Mhpr, ResidualNonIncreasing)
{
    for (std::uint64_t seed : {2u, 3u}) {
        const auto r = mhpr(stack_of(texture_scene(seed), 8), {});
        for (std::size_t i = 1; i < r.residuals.size(); ++i)
            EXPECT_LE(r.residuals[i], r.residuals[i - 1] + 1e-6) << "pass " << i + 1;
        EXPECT_LT(r.residuals.back(), r.residuals.front());
    }
}

TEST(Mhpr, Deterministic)
{
    const auto stack = stack_of(texture_scene(4, 64), 4);
    const auto a = mhpr(stack, {});
    const auto b = mhpr(stack, {});
    for (std::size_t i = 0; i < a.field.values().size(); ++i)
        ASSERT_EQ(a.field[i], b.field[i]);
    EXPECT_EQ(a.residuals, b.residuals);
}

TEST(Mhpr, PaddedPropagationRuns)
{
    MhprParams p;
    p.iterations = 3;
    p.propagation.pad_factor = 2;
    const auto r = mhpr(stack_of(texture_scene(5, 32), 3), p);
    EXPECT_EQ(r.residuals.size(), 3u);
}

TEST(Mhpr, ParameterValidation)
{
    const auto stack = stack_of(texture_scene(1, 32), 2);
    MhprParams p;
    p.iterations = 0;
    EXPECT_THROW(mhpr(stack, p), Error);
    p.iterations = 1;
    p.relaxation = 1.5;
    EXPECT_THROW(mhpr(stack, p), Error);
    auto bad = stack;
    std::swap(bad.heights_um[0], bad.heights_um[1]);
    try {
        mhpr(bad, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::HeightsOutOfOrder);
    }
    HologramStack empty;
    EXPECT_THROW(mhpr(empty, {}), Error);
}

TEST(Mhpr, ResidualCsv)
{
    MhprResult r{ComplexField::uniform(ts::grid(2)), {0.5, 0.25}, {1000.0}};
    EXPECT_EQ(residual_csv(r), "pass,residual\n1,0.5\n2,0.25\n");
}

namespace {

Scene particle_scene(std::uint64_t seed)
{
    SceneSpec s;
    s.fov = 128;
    s.particles.count = 3;
    s.seed = seed;
    return generate_scene(s);
}

} // namespace

TEST(RefineHeights, ExactHeightsStayPut)
{
    const auto stack = stack_of(particle_scene(1), 3);
    // bracket 10 um: final step 2 * (20 / 20) * 2 / 20 = 0.1 um
    const auto r = refine_heights(stack, FocusCriterion::tamura_of_gradient, 10.0);
    for (std::size_t j = 0; j < 3; ++j)
        EXPECT_LE(std::abs(r.heights_um[j] - stack.heights_um[j]), 1.0) << "height " << j;
}

TEST(RefineHeights, PerturbedHeightsRecovered)
{
    const auto truth = stack_of(particle_scene(2), 3);
    auto perturbed = truth;
    for (auto& h : perturbed.heights_um)
        h += 10.0;
    const auto r = refine_heights(perturbed, FocusCriterion::tamura_of_gradient, 20.0);
    for (std::size_t j = 0; j < 3; ++j)
        EXPECT_LE(std::abs(r.heights_um[j] - truth.heights_um[j]), 2.0) << "height " << j;
}

TEST(RefineHeights, EmptySceneIsNoContrast)
{
    SceneSpec s;
    s.fov = 32;
    s.particles.count = 0;
    const auto stack = stack_of(generate_scene(s), 2);
    try {
        refine_heights(stack, FocusCriterion::tamura_of_gradient, 10.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoContrast);
    }
}

TEST(RefineHeights, UsedByMhprWhenRequested)
{
    auto stack = stack_of(particle_scene(3), 2);
    for (auto& h : stack.heights_um)
        h += 6.0;
    MhprParams p;
    p.iterations = 2;
    p.refine_heights = true;
    p.refine_bracket_um = 15.0;
    const auto r = mhpr(stack, p);
    EXPECT_LE(std::abs(r.heights_um[0] - 1000.0), 2.0);
    EXPECT_LE(std::abs(r.heights_um[1] - 1015.0), 2.0);
}

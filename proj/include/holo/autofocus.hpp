#pragma once

#include "holo/core.hpp"
#include "holo/parallel.hpp"
#include "holo/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace holo {

/// Focus measures. Every criterion follows "higher = sharper".
enum class FocusCriterion { tamura, gini, tamura_of_gradient };

inline std::string to_string(FocusCriterion c)
{
    switch (c) {
    case FocusCriterion::tamura: return "tamura";
    case FocusCriterion::gini: return "gini";
    case FocusCriterion::tamura_of_gradient: return "tog";
    }
    return "unknown";
}

inline FocusCriterion parse_criterion(const std::string& name)
{
    if (name == "tamura")
        return FocusCriterion::tamura;
    if (name == "gini")
        return FocusCriterion::gini;
    if (name == "tog" || name == "tamura_of_gradient")
        return FocusCriterion::tamura_of_gradient;
    throw Error(ErrorCode::InvalidSpec, "unknown focus criterion '" + name + "'");
}

namespace detail {

// Relative spreads below this are FFT round-off on a flat image.
inline constexpr double kFlatTolerance = 1e-12;

inline double tamura_of(std::span<const double> v)
{
    if (v.size() < 2)
        throw Error(ErrorCode::TooSmall, "tamura needs at least 2 pixels");
    double mean = 0.0;
    for (double x : v)
        mean += x;
    mean /= static_cast<double>(v.size());
    if (!(mean > 0.0))
        throw Error(ErrorCode::ZeroMean, "tamura needs a positive mean");
    double var = 0.0;
    for (double x : v)
        var += (x - mean) * (x - mean);
    const double sigma = std::sqrt(var / static_cast<double>(v.size()));
    if (sigma <= kFlatTolerance * mean)
        return 0.0;
    return std::sqrt(sigma / mean);
}

inline double gini_of(std::span<const double> v)
{
    if (v.empty())
        throw Error(ErrorCode::TooSmall, "gini needs at least 1 pixel");
    std::vector<double> a(v.begin(), v.end());
    double l1 = 0.0;
    for (double x : a) {
        if (x < 0.0)
            throw Error(ErrorCode::InvalidField, "gini needs nonnegative values");
        l1 += x;
    }
    if (!(l1 > 0.0))
        throw Error(ErrorCode::AllZero, "gini of an all-zero image");
    std::sort(a.begin(), a.end());
    const double n = static_cast<double>(a.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        // 1-based rank k+1: weight (N - k' + 0.5)/N
        acc += (a[k] / l1) * ((n - static_cast<double>(k + 1) + 0.5) / n);
    }
    return 1.0 - 2.0 * acc;
}

} // namespace detail

/// sqrt(sigma/mu) with the population standard deviation.
inline double tamura(const RealImage& img) { return detail::tamura_of(img.values()); }

/// Sparsity Gini index of the pixel values, in [0, 1).
inline double gini(const RealImage& img) { return detail::gini_of(img.values()); }

/// Gradient magnitude of |field| by central differences, borders replicated.
inline RealImage gradient_magnitude(const ComplexField& field)
{
    const std::size_t w = field.width(), h = field.height();
    if (w < 3 || h < 3)
        throw Error(ErrorCode::TooSmall, "gradient needs a field of at least 3x3");
    std::vector<double> amp(field.values().size());
    for (std::size_t i = 0; i < amp.size(); ++i)
        amp[i] = std::abs(field[i]);
    std::vector<double> g(amp.size());
    for (std::size_t y = 0; y < h; ++y) {
        const std::size_t ym = y == 0 ? 0 : y - 1;
        const std::size_t yp = y + 1 == h ? y : y + 1;
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t xm = x == 0 ? 0 : x - 1;
            const std::size_t xp = x + 1 == w ? x : x + 1;
            const double gx = 0.5 * (amp[y * w + xp] - amp[y * w + xm]);
            const double gy = 0.5 * (amp[yp * w + x] - amp[ym * w + x]);
            g[y * w + x] = std::sqrt(gx * gx + gy * gy);
        }
    }
    Grid grid = field.grid();
    return RealImage(grid, ImageKind::amplitude, std::move(g));
}

namespace detail {

// A gradient this small against the mean amplitude is round-off on a flat
// field; treat it as exactly zero.
inline bool gradient_is_flat(const RealImage& grad, const ComplexField& field)
{
    double mean_amp = 0.0;
    for (const auto& v : field.values())
        mean_amp += std::abs(v);
    mean_amp /= static_cast<double>(field.values().size());
    double gmax = 0.0;
    for (double g : grad.values())
        gmax = std::max(gmax, g);
    return gmax <= 1e-10 * mean_amp;
}

} // namespace detail

inline double tamura_of_gradient(const ComplexField& field)
{
    RealImage grad = gradient_magnitude(field);
    if (detail::gradient_is_flat(grad, field))
        return 0.0;
    return tamura(grad);
}

/// Criterion value of a reconstructed complex field. tamura scores the
/// amplitude image; gini and tamura_of_gradient score edge sparsity of the
/// amplitude gradient.
inline double focus_score(const ComplexField& field, FocusCriterion criterion)
{
    switch (criterion) {
    case FocusCriterion::tamura: {
        RealImage amp = amplitude_of(field);
        return tamura(amp);
    }
    case FocusCriterion::gini: {
        RealImage grad = gradient_magnitude(field);
        if (detail::gradient_is_flat(grad, field))
            return 0.0;
        return gini(grad);
    }
    case FocusCriterion::tamura_of_gradient: return tamura_of_gradient(field);
    }
    return 0.0;
}

/// Evenly spaced sweep of n_steps distances including both ends.
struct GridSearch {
    std::size_t n_steps = 21;
};

/// n_per_level evenly spaced distances per level. Each level after the first
/// spans one previous-level step either side of that level's argmax
/// (clamped to the search range).
struct CoarseToFine {
    std::size_t levels = 3;
    std::size_t n_per_level = 21;
};

using SearchStrategy = std::variant<GridSearch, CoarseToFine>;

inline std::size_t evaluation_budget(const SearchStrategy& s)
{
    if (const auto* g = std::get_if<GridSearch>(&s))
        return g->n_steps;
    const auto& c = std::get<CoarseToFine>(s);
    return c.levels * c.n_per_level;
}

struct FocusSample {
    double z_um;
    double score;
};

struct FocusResult {
    double z_hat_um = 0.0;
    double score = 0.0;
    std::vector<FocusSample> sweep; ///< in evaluation order
    std::size_t evaluations = 0;
    bool boundary_hit = false;
};

struct SearchOptions {
    PropagationOptions propagation;
    unsigned threads = 1;
};

namespace detail {

inline std::vector<double> linspace(double lo, double hi, std::size_t n)
{
    std::vector<double> z(n);
    if (n == 1) {
        z[0] = lo;
        return z;
    }
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i)
        z[i] = lo + step * static_cast<double>(i);
    z[n - 1] = hi;
    return z;
}

// Deterministic argmax: highest score, smallest z among ties.
inline std::size_t argmax(std::span<const FocusSample> s)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i].score > s[best].score || (s[i].score == s[best].score && s[i].z_um < s[best].z_um))
            best = i;
    return best;
}

} // namespace detail

/// Axial search of an arbitrary score(z) function over [z_min, z_max].
template <class ScoreFn>
FocusResult search_axis(ScoreFn&& score_at, double z_min, double z_max, const SearchStrategy& strategy,
                        unsigned threads = 1)
{
    if (!(z_min < z_max) || !std::isfinite(z_min) || !std::isfinite(z_max))
        throw Error(ErrorCode::InvalidSpec, "search range needs z_min < z_max");
    std::size_t levels = 1, n = 0;
    if (const auto* g = std::get_if<GridSearch>(&strategy)) {
        n = g->n_steps;
    } else {
        const auto& c = std::get<CoarseToFine>(strategy);
        levels = c.levels;
        n = c.n_per_level;
        if (levels < 1)
            throw Error(ErrorCode::InvalidSpec, "coarse_to_fine needs levels >= 1");
    }
    if (n < 3)
        throw Error(ErrorCode::InvalidSpec, "search needs at least 3 steps per level");

    FocusResult result;
    double lo = z_min, hi = z_max;
    for (std::size_t level = 0; level < levels; ++level) {
        const auto zs = detail::linspace(lo, hi, n);
        std::vector<FocusSample> samples(n);
        parallel_for(n, threads, [&](std::size_t i) { samples[i] = {zs[i], score_at(zs[i])}; });
        result.sweep.insert(result.sweep.end(), samples.begin(), samples.end());
        const double z_best = samples[detail::argmax(samples)].z_um;
        const double step = (hi - lo) / static_cast<double>(n - 1);
        lo = std::max(z_min, z_best - step);
        hi = std::min(z_max, z_best + step);
    }
    result.evaluations = result.sweep.size();

    double smin = result.sweep.front().score, smax = smin;
    for (const auto& s : result.sweep) {
        if (!std::isfinite(s.score))
            throw Error(ErrorCode::NonFiniteField, "focus criterion is not finite");
        smin = std::min(smin, s.score);
        smax = std::max(smax, s.score);
    }
    if (smax - smin <= 1e-12)
        throw Error(ErrorCode::NoContrast, "focus criterion is flat over the search range");

    const auto& best = result.sweep[detail::argmax(result.sweep)];
    result.z_hat_um = best.z_um;
    result.score = best.score;
    result.boundary_hit = best.z_um <= z_min || best.z_um >= z_max;
    return result;
}

/// Classical holographic autofocus: back-propagate the hologram to each
/// candidate distance and maximize the criterion.
inline FocusResult autofocus_search(const RealImage& holo, double z_min, double z_max,
                                    FocusCriterion criterion, const SearchStrategy& strategy,
                                    const SearchOptions& opts = {})
{
    SpectrumPropagator sp(field_from_intensity(holo), opts.propagation);
    return search_axis([&](double z) { return focus_score(sp.at(-z), criterion); }, z_min, z_max, strategy,
                       opts.threads);
}

inline std::string sweep_csv(const FocusResult& r)
{
    std::ostringstream os;
    os.precision(17);
    os << "z_um,score\n";
    for (const auto& s : r.sweep)
        os << s.z_um << ',' << s.score << '\n';
    return os.str();
}

} // namespace holo

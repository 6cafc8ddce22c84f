#pragma once

#include "holo/holo.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

namespace testing_support {

using holo::cplx;

inline holo::Grid grid(std::size_t n, double pitch = 1.12, double wavelength = 0.53)
{
    return holo::Grid{n, n, pitch, wavelength};
}

inline holo::ComplexField random_field(const holo::Grid& g, std::uint64_t seed)
{
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> nd;
    std::vector<cplx> v(g.size());
    for (auto& c : v)
        c = {nd(eng), nd(eng)};
    return holo::ComplexField(g, std::move(v));
}

/// One term of a plane-wave superposition on the periodic grid.
struct PlaneWave {
    int kx;
    int ky;
    cplx amplitude;
};

/// Random plane waves whose spatial frequency lies inside `band` times
/// 1/lambda, so every component propagates.
inline std::vector<PlaneWave> random_waves(const holo::Grid& g, std::size_t count, double band, std::uint64_t seed)
{
    std::mt19937_64 eng(seed);
    const int half = static_cast<int>(g.width / 2) - 1;
    std::uniform_int_distribution<int> k(-half, half);
    std::normal_distribution<double> nd;
    std::vector<PlaneWave> w;
    const double fmax = band / g.wavelength_um;
    while (w.size() < count) {
        const int kx = k(eng), ky = k(eng);
        const double fx = kx / (static_cast<double>(g.width) * g.pitch_um);
        const double fy = ky / (static_cast<double>(g.height) * g.pitch_um);
        if (std::hypot(fx, fy) < fmax)
            w.push_back({kx, ky, {nd(eng), nd(eng)}});
    }
    return w;
}

/// Closed-form sum of plane waves, each carrying its own propagation phase
/// exp(i 2 pi z sqrt(1/lambda^2 - fx^2 - fy^2)).
inline holo::ComplexField synthesize(const holo::Grid& g, const std::vector<PlaneWave>& waves, double z_um = 0.0)
{
    std::vector<cplx> v(g.size());
    const double two_pi = 2.0 * std::numbers::pi;
    for (const auto& w : waves) {
        const double fx = w.kx / (static_cast<double>(g.width) * g.pitch_um);
        const double fy = w.ky / (static_cast<double>(g.height) * g.pitch_um);
        const double kz = std::sqrt(1.0 / (g.wavelength_um * g.wavelength_um) - fx * fx - fy * fy);
        const cplx a = w.amplitude * std::polar(1.0, two_pi * kz * z_um);
        for (std::size_t y = 0; y < g.height; ++y)
            for (std::size_t x = 0; x < g.width; ++x) {
                const double arg = two_pi * (static_cast<double>(w.kx * static_cast<long>(x)) / g.width +
                                             static_cast<double>(w.ky * static_cast<long>(y)) / g.height);
                v[y * g.width + x] += a * std::polar(1.0, arg);
            }
    }
    return holo::ComplexField(g, std::move(v));
}

inline holo::RealImage image(const holo::Grid& g, holo::ImageKind kind, std::vector<double> v)
{
    return holo::RealImage(g, kind, std::move(v));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace testing_support

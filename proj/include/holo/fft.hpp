#pragma once

#include "holo/core.hpp"

#include <fftw3.h>

#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

namespace holo::fft {

enum class Direction { forward, inverse };

namespace detail {

// FFTW planning is not thread safe; execution of an existing plan on new
// arrays is. Plans are built once per (width, height, direction) under a
// lock and live for the process lifetime. FFTW_ESTIMATE keeps the chosen
// algorithm, and therefore the output bits, identical from run to run.
class PlanCache {
public:
    static PlanCache& instance()
    {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(std::size_t width, std::size_t height, Direction dir)
    {
        std::lock_guard lock(mutex_);
        auto key = std::make_tuple(width, height, dir);
        if (auto it = plans_.find(key); it != plans_.end())
            return it->second;
        std::vector<cplx> scratch(width * height);
        auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
        fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(height), static_cast<int>(width), buf, buf,
                                          dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, plan);
        return plan;
    }

    PlanCache(const PlanCache&) = delete;
    PlanCache& operator=(const PlanCache&) = delete;

    ~PlanCache()
    {
        for (auto& [key, plan] : plans_)
            fftw_destroy_plan(plan);
    }

private:
    PlanCache() = default;
    std::mutex mutex_;
    std::map<std::tuple<std::size_t, std::size_t, Direction>, fftw_plan> plans_;
};

} // namespace detail

/// In-place 2D DFT of a row-major width x height array. The inverse is
/// normalized by 1/(width*height) so forward followed by inverse is the
/// identity.
inline void transform_2d(std::span<cplx> data, std::size_t width, std::size_t height, Direction dir)
{
    if (data.size() != width * height)
        throw Error(ErrorCode::DimensionMismatch, "fft buffer size != width*height");
    fftw_plan plan = detail::PlanCache::instance().get(width, height, dir);
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, buf, buf);
    if (dir == Direction::inverse) {
        const double scale = 1.0 / static_cast<double>(width * height);
        for (auto& v : data)
            v *= scale;
    }
}

/// DFT frequency of index k on an n-point axis with sample spacing d:
/// k/(n*d) for k < ceil(n/2), (k-n)/(n*d) otherwise (so the Nyquist bin of
/// an even-length axis is negative).
inline double frequency(std::size_t k, std::size_t n, double spacing) noexcept
{
    const auto half = static_cast<std::ptrdiff_t>((n + 1) / 2);
    auto idx = static_cast<std::ptrdiff_t>(k);
    if (idx >= half)
        idx -= static_cast<std::ptrdiff_t>(n);
    return static_cast<double>(idx) / (static_cast<double>(n) * spacing);
}

} // namespace holo::fft

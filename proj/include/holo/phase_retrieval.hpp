#pragma once

#include "holo/autofocus.hpp"
#include "holo/core.hpp"
#include "holo/fft.hpp"
#include "holo/propagation.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace holo {

struct MhprParams {
    std::size_t iterations = 20;
    double relaxation = 1.0; ///< weight of the measured amplitude in each update
    bool refine_heights = false;
    double refine_bracket_um = 20.0;
    FocusCriterion criterion = FocusCriterion::tamura_of_gradient;
    PropagationOptions propagation;

    void validate() const
    {
        if (iterations < 1)
            throw Error(ErrorCode::InvalidSpec, "mhpr iterations must be >= 1");
        if (!(relaxation >= 0.0 && relaxation <= 1.0))
            throw Error(ErrorCode::InvalidSpec, "mhpr relaxation must lie in [0, 1]");
        if (refine_heights && !(refine_bracket_um > 0.0))
            throw Error(ErrorCode::InvalidSpec, "refine bracket must be positive");
        propagation.validate();
    }
};

struct MhprResult {
    ComplexField field;              ///< object-plane field
    std::vector<double> residuals;   ///< per pass: mean |amplitude - measured amplitude|
    std::vector<double> heights_um;  ///< heights actually used
};

/// Replaces each height by the autofocus estimate within +-bracket of it.
inline HologramStack refine_heights(const HologramStack& stack, FocusCriterion criterion, double bracket_um,
                                    const SearchStrategy& strategy = CoarseToFine{3, 21},
                                    const SearchOptions& opts = {})
{
    stack.validate();
    if (!(bracket_um > 0.0))
        throw Error(ErrorCode::InvalidSpec, "refine bracket must be positive");
    HologramStack out = stack;
    for (std::size_t j = 0; j < stack.size(); ++j) {
        const double h = stack.heights_um[j];
        out.heights_um[j] =
            autofocus_search(stack.holograms[j], h - bracket_um, h + bracket_um, criterion, strategy, opts).z_hat_um;
    }
    for (std::size_t j = 1; j < out.size(); ++j)
        if (!(out.heights_um[j] > out.heights_um[j - 1]))
            throw Error(ErrorCode::HeightsOutOfOrder, "refined heights are no longer strictly increasing");
    return out;
}

namespace detail {

// Propagation between two sensor planes, reusing one transfer function.
class PlaneStep {
public:
    PlaneStep(const Grid& grid, const AxialFrequencies& axial, double dz, const PropagationOptions& opts)
        : grid_(grid), dz_(dz), opts_(opts)
    {
        if (opts.pad_factor == 1) {
            h_.resize(axial.size());
            for (std::size_t i = 0; i < h_.size(); ++i)
                h_[i] = AxialFrequencies::transfer(axial[i], dz);
        }
    }

    void apply(std::vector<cplx>& u) const
    {
        if (opts_.pad_factor != 1) {
            u = propagate(ComplexField(grid_, std::move(u)), dz_, opts_).release();
            return;
        }
        fft::transform_2d(u, grid_.width, grid_.height, fft::Direction::forward);
        for (std::size_t i = 0; i < u.size(); ++i)
            u[i] *= h_[i];
        fft::transform_2d(u, grid_.width, grid_.height, fft::Direction::inverse);
    }

private:
    Grid grid_;
    double dz_;
    PropagationOptions opts_;
    std::vector<cplx> h_;
};

} // namespace detail

/// Multi-height phase recovery by cyclic amplitude projections.
///
/// The field starts at the first height as sqrt(I_1) with zero phase. Each
/// pass walks up the stack to the last height and back down to the first;
/// at every visited plane the amplitude becomes
/// (1 - relaxation) |u| + relaxation sqrt(I_j) with the phase kept. The
/// final field is propagated to the object plane.
inline MhprResult mhpr(const HologramStack& input, const MhprParams& params = {})
{
    input.validate();
    params.validate();
    const HologramStack stack = params.refine_heights
                                    ? refine_heights(input, params.criterion, params.refine_bracket_um)
                                    : input;
    const std::size_t n = stack.size();
    const Grid& grid = stack.holograms.front().grid();
    validate_grid(grid, true);

    std::vector<std::vector<double>> measured(n);
    for (std::size_t j = 0; j < n; ++j) {
        measured[j].resize(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i)
            measured[j][i] = std::sqrt(stack.holograms[j][i]);
    }

    std::vector<std::size_t> visits;
    if (n == 1) {
        visits.push_back(0);
    } else {
        for (std::size_t j = 1; j < n; ++j)
            visits.push_back(j);
        for (std::size_t j = n - 1; j-- > 0;)
            visits.push_back(j);
    }

    const AxialFrequencies axial = params.propagation.pad_factor == 1 ? AxialFrequencies(grid) : AxialFrequencies();
    // evenly spaced ladders share one step per direction
    std::map<double, detail::PlaneStep> steps;
    auto step_for = [&](double dz) -> const detail::PlaneStep& {
        auto it = steps.find(dz);
        if (it == steps.end())
            it = steps.emplace(dz, detail::PlaneStep(grid, axial, dz, params.propagation)).first;
        return it->second;
    };
    std::vector<const detail::PlaneStep*> up, down;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double dz = stack.heights_um[j + 1] - stack.heights_um[j];
        up.push_back(&step_for(dz));
        down.push_back(&step_for(-dz));
    }

    std::vector<cplx> u(grid.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        u[i] = {measured[0][i], 0.0};
    std::size_t current = 0;

    MhprResult result;
    result.heights_um = stack.heights_um;
    const double r = params.relaxation;
    for (std::size_t pass = 0; pass < params.iterations; ++pass) {
        double pass_residual = 0.0;
        for (std::size_t target : visits) {
            if (target == current + 1)
                up[current]->apply(u);
            else if (target + 1 == current)
                down[target]->apply(u);
            current = target;
            const auto& a = measured[target];
            double mismatch = 0.0;
            for (std::size_t i = 0; i < u.size(); ++i) {
                const double mag = std::sqrt(std::norm(u[i]));
                mismatch += std::abs(mag - a[i]);
                const double updated = (1.0 - r) * mag + r * a[i];
                if (mag > 0.0)
                    u[i] *= updated / mag;
                else
                    u[i] = {updated, 0.0};
            }
            pass_residual += mismatch / static_cast<double>(u.size());
        }
        pass_residual /= static_cast<double>(visits.size());
        if (!std::isfinite(pass_residual))
            throw Error(ErrorCode::NonFiniteField, "phase recovery diverged");
        result.residuals.push_back(pass_residual);
    }
    for (const auto& v : u)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw Error(ErrorCode::NonFiniteField, "phase recovery diverged");

    result.field = propagate(ComplexField(grid, std::move(u)), -stack.heights_um[current], params.propagation);
    return result;
}

inline std::string residual_csv(const MhprResult& r)
{
    std::ostringstream os;
    os.precision(17);
    os << "pass,residual\n";
    for (std::size_t i = 0; i < r.residuals.size(); ++i)
        os << i + 1 << ',' << r.residuals[i] << '\n';
    return os.str();
}

} // namespace holo

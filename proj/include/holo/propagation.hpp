#pragma once

#include "holo/core.hpp"
#include "holo/fft.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace holo {

struct PropagationOptions {
    /// 1 = propagate on the native grid (periodic boundary). 2 = embed in a
    /// grid twice as large, filled with the mean of the field's border, and
    /// crop back; suppresses wraparound at large |z|.
    int pad_factor = 1;

    void validate() const
    {
        if (pad_factor != 1 && pad_factor != 2)
            throw Error(ErrorCode::InvalidSpec, "pad_factor must be 1 or 2");
    }
};

/// Axial spatial frequency table for a grid: sqrt(1/lambda^2 - fx^2 - fy^2)
/// on the propagating band, stored negated as -sqrt(fx^2 + fy^2 - 1/lambda^2)
/// on the evanescent band.
class AxialFrequencies {
public:
    AxialFrequencies() = default;

    explicit AxialFrequencies(const Grid& grid) : grid_(grid), w_(grid.size())
    {
        validate_grid(grid, true);
        const double inv_l2 = 1.0 / (grid.wavelength_um * grid.wavelength_um);
        for (std::size_t y = 0; y < grid.height; ++y) {
            const double fy = fft::frequency(y, grid.height, grid.pitch_um);
            for (std::size_t x = 0; x < grid.width; ++x) {
                const double fx = fft::frequency(x, grid.width, grid.pitch_um);
                const double arg = inv_l2 - fx * fx - fy * fy;
                w_[y * grid.width + x] = arg >= 0.0 ? std::sqrt(arg) : -std::sqrt(-arg);
            }
        }
    }

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return w_.size(); }
    double operator[](std::size_t i) const { return w_[i]; }

    /// exp(i 2 pi z w) on the propagating band, exp(-2 pi |z| |w|) beyond it.
    static cplx transfer(double w, double z) noexcept
    {
        constexpr double two_pi = 2.0 * std::numbers::pi;
        if (w >= 0.0)
            return std::polar(1.0, two_pi * z * w);
        return {std::exp(-two_pi * std::abs(z) * -w), 0.0};
    }

private:
    Grid grid_;
    std::vector<double> w_;
};

struct TransferFunction {
    Grid grid;
    double z_um = 0.0;
    std::vector<cplx> values; ///< row-major over DFT frequency indices
};

inline TransferFunction transfer_function(const Grid& grid, double z_um)
{
    if (!std::isfinite(z_um))
        throw Error(ErrorCode::InvalidGeometry, "propagation distance must be finite");
    AxialFrequencies w(grid);
    TransferFunction h{grid, z_um, std::vector<cplx>(grid.size())};
    for (std::size_t i = 0; i < h.values.size(); ++i)
        h.values[i] = AxialFrequencies::transfer(w[i], z_um);
    return h;
}

namespace detail {

inline cplx border_mean(const ComplexField& f)
{
    const std::size_t w = f.width(), h = f.height();
    cplx sum{};
    std::size_t n = 0;
    for (std::size_t x = 0; x < w; ++x) {
        sum += f.at(x, 0);
        ++n;
        if (h > 1) {
            sum += f.at(x, h - 1);
            ++n;
        }
    }
    for (std::size_t y = 1; y + 1 < h; ++y) {
        sum += f.at(0, y);
        ++n;
        if (w > 1) {
            sum += f.at(w - 1, y);
            ++n;
        }
    }
    return sum / static_cast<double>(n);
}

} // namespace detail

/// Holds the angular spectrum of one field so it can be evaluated at many
/// distances for the cost of one inverse FFT each.
class SpectrumPropagator {
public:
    explicit SpectrumPropagator(const ComplexField& field, PropagationOptions opts = {})
        : grid_(field.grid()), opts_(opts)
    {
        opts_.validate();
        const std::size_t pad = static_cast<std::size_t>(opts_.pad_factor);
        work_grid_ = grid_;
        work_grid_.width *= pad;
        work_grid_.height *= pad;
        spectrum_.assign(work_grid_.size(), pad == 1 ? cplx{} : detail::border_mean(field));
        x0_ = (work_grid_.width - grid_.width) / 2;
        y0_ = (work_grid_.height - grid_.height) / 2;
        for (std::size_t y = 0; y < grid_.height; ++y)
            for (std::size_t x = 0; x < grid_.width; ++x)
                spectrum_[(y + y0_) * work_grid_.width + x + x0_] = field.at(x, y);
        fft::transform_2d(spectrum_, work_grid_.width, work_grid_.height, fft::Direction::forward);
        axial_ = AxialFrequencies(work_grid_);
    }

    const Grid& grid() const noexcept { return grid_; }

    ComplexField at(double z_um) const
    {
        if (!std::isfinite(z_um))
            throw Error(ErrorCode::InvalidGeometry, "propagation distance must be finite");
        std::vector<cplx> buf(spectrum_.size());
        for (std::size_t i = 0; i < buf.size(); ++i)
            buf[i] = spectrum_[i] * AxialFrequencies::transfer(axial_[i], z_um);
        fft::transform_2d(buf, work_grid_.width, work_grid_.height, fft::Direction::inverse);
        if (opts_.pad_factor == 1)
            return ComplexField(grid_, std::move(buf));
        std::vector<cplx> out(grid_.size());
        for (std::size_t y = 0; y < grid_.height; ++y)
            for (std::size_t x = 0; x < grid_.width; ++x)
                out[y * grid_.width + x] = buf[(y + y0_) * work_grid_.width + x + x0_];
        return ComplexField(grid_, std::move(out));
    }

private:
    Grid grid_;
    Grid work_grid_;
    PropagationOptions opts_;
    std::size_t x0_ = 0, y0_ = 0;
    std::vector<cplx> spectrum_;
    AxialFrequencies axial_;
};

/// Angular-spectrum propagation by z micrometers (negative z propagates
/// back towards the source).
inline ComplexField propagate(const ComplexField& field, double z_um, PropagationOptions opts = {})
{
    if (!std::isfinite(z_um))
        throw Error(ErrorCode::InvalidGeometry, "propagation distance must be finite");
    if (z_um == 0.0 && opts.pad_factor == 1)
        return field;
    return SpectrumPropagator(field, opts).at(z_um);
}

/// Square root of an intensity image as a zero-phase field.
inline ComplexField field_from_intensity(const RealImage& holo)
{
    if (holo.kind() != ImageKind::intensity)
        throw Error(ErrorCode::InvalidField, "expected an intensity image");
    std::vector<cplx> v(holo.values().size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (holo[i] < 0.0)
            throw Error(ErrorCode::NegativeIntensity, "hologram has a negative pixel");
        v[i] = {std::sqrt(holo[i]), 0.0};
    }
    return ComplexField(holo.grid(), std::move(v));
}

/// Twin-image-contaminated object field obtained by propagating the
/// hologram amplitude (zero phase) back by z.
inline ComplexField backpropagate_intensity(const RealImage& holo, double z_um,
                                            PropagationOptions opts = {})
{
    return propagate(field_from_intensity(holo), -z_um, opts);
}

} // namespace holo

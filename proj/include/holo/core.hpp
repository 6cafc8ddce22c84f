#pragma once

#include "holo/error.hpp"

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace holo {

using cplx = std::complex<double>;

/// Sampling grid shared by every field and image. Lengths in micrometers.
/// A wavelength of 0 on a RealImage means "not recorded".
struct Grid {
    std::size_t width = 0;
    std::size_t height = 0;
    double pitch_um = 0.0;
    double wavelength_um = 0.0;

    std::size_t size() const noexcept { return width * height; }
    bool same_shape(const Grid& o) const noexcept { return width == o.width && height == o.height; }
    bool operator==(const Grid&) const = default;
};

inline void validate_grid(const Grid& g, bool require_wavelength)
{
    if (g.width == 0 || g.height == 0)
        throw Error(ErrorCode::InvalidGeometry, "grid width and height must be positive");
    if (!(g.pitch_um > 0.0) || !std::isfinite(g.pitch_um))
        throw Error(ErrorCode::InvalidGeometry, "pixel_pitch must be positive");
    if (require_wavelength ? !(g.wavelength_um > 0.0) : !(g.wavelength_um >= 0.0))
        throw Error(ErrorCode::InvalidGeometry, "wavelength must be positive");
    if (!std::isfinite(g.wavelength_um))
        throw Error(ErrorCode::InvalidGeometry, "wavelength must be finite");
}

/// Wraps an angle into (-pi, pi].
inline double wrap_phase(double phi) noexcept
{
    constexpr double pi = std::numbers::pi;
    if (phi > -pi && phi <= pi)
        return phi;
    double r = std::remainder(phi, 2.0 * pi);
    return r <= -pi ? r + 2.0 * pi : r;
}

/// Complex optical field sampled on a Grid, row-major. Immutable once built.
///
/// Time convention: fields carry exp(-i*omega*t), so a plane wave travelling
/// towards +z accumulates phase exp(+i*2*pi*z/lambda).
class ComplexField {
public:
    ComplexField() = default;

    ComplexField(Grid grid, std::vector<cplx> values) : grid_(grid), values_(std::move(values))
    {
        validate_grid(grid_, true);
        if (values_.size() != grid_.size())
            throw Error(ErrorCode::DimensionMismatch, "values length != width*height");
        for (const auto& v : values_)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                throw Error(ErrorCode::NonFiniteField, "field contains NaN or Inf");
    }

    static ComplexField uniform(Grid grid, cplx value = {1.0, 0.0})
    {
        return ComplexField(grid, std::vector<cplx>(grid.size(), value));
    }

    const Grid& grid() const noexcept { return grid_; }
    std::size_t width() const noexcept { return grid_.width; }
    std::size_t height() const noexcept { return grid_.height; }
    double pitch_um() const noexcept { return grid_.pitch_um; }
    double wavelength_um() const noexcept { return grid_.wavelength_um; }
    std::span<const cplx> values() const noexcept { return values_; }
    const cplx& at(std::size_t x, std::size_t y) const { return values_[y * grid_.width + x]; }
    const cplx& operator[](std::size_t i) const { return values_[i]; }

    /// Moves the samples out, leaving the field empty.
    std::vector<cplx> release() && { return std::move(values_); }

private:
    Grid grid_;
    std::vector<cplx> values_;
};

enum class ImageKind : unsigned char { intensity = 1, amplitude = 2, phase = 3 };

inline std::string to_string(ImageKind k)
{
    switch (k) {
    case ImageKind::intensity: return "intensity";
    case ImageKind::amplitude: return "amplitude";
    case ImageKind::phase: return "phase";
    }
    return "unknown";
}

/// Real-valued image (intensity, amplitude or wrapped phase), row-major.
class RealImage {
public:
    RealImage() = default;

    RealImage(Grid grid, ImageKind kind, std::vector<double> values)
        : grid_(grid), kind_(kind), values_(std::move(values))
    {
        validate_grid(grid_, false);
        if (values_.size() != grid_.size())
            throw Error(ErrorCode::DimensionMismatch, "values length != width*height");
        for (double v : values_) {
            if (!std::isfinite(v))
                throw Error(ErrorCode::InvalidField, "image contains NaN or Inf");
            if (kind_ == ImageKind::phase) {
                if (!(v > -std::numbers::pi && v <= std::numbers::pi))
                    throw Error(ErrorCode::InvalidField, "phase value outside (-pi, pi]");
            } else if (v < 0.0) {
                throw Error(kind_ == ImageKind::intensity ? ErrorCode::NegativeIntensity
                                                          : ErrorCode::InvalidField,
                            to_string(kind_) + " image has a negative value");
            }
        }
    }

    const Grid& grid() const noexcept { return grid_; }
    ImageKind kind() const noexcept { return kind_; }
    std::size_t width() const noexcept { return grid_.width; }
    std::size_t height() const noexcept { return grid_.height; }
    double pitch_um() const noexcept { return grid_.pitch_um; }
    std::span<const double> values() const noexcept { return values_; }
    double at(std::size_t x, std::size_t y) const { return values_[y * grid_.width + x]; }
    double operator[](std::size_t i) const { return values_[i]; }

private:
    Grid grid_;
    ImageKind kind_ = ImageKind::intensity;
    std::vector<double> values_;
};

/// Image of |field|.
inline RealImage amplitude_of(const ComplexField& f)
{
    std::vector<double> a(f.values().size());
    for (std::size_t i = 0; i < a.size(); ++i)
        a[i] = std::abs(f[i]);
    return RealImage(f.grid(), ImageKind::amplitude, std::move(a));
}

inline RealImage phase_of(const ComplexField& f)
{
    std::vector<double> p(f.values().size());
    for (std::size_t i = 0; i < p.size(); ++i)
        p[i] = wrap_phase(std::arg(f[i]));
    return RealImage(f.grid(), ImageKind::phase, std::move(p));
}

inline RealImage intensity_of(const ComplexField& f)
{
    std::vector<double> v(f.values().size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = std::norm(f[i]);
    return RealImage(f.grid(), ImageKind::intensity, std::move(v));
}

struct AmplitudePhase {
    RealImage amplitude;
    RealImage phase;
};

inline AmplitudePhase decompose(const ComplexField& field)
{
    return {amplitude_of(field), phase_of(field)};
}

inline ComplexField compose(const RealImage& amplitude, const RealImage& phase)
{
    if (amplitude.kind() != ImageKind::amplitude || phase.kind() != ImageKind::phase)
        throw Error(ErrorCode::DimensionMismatch, "compose expects (amplitude, phase) images");
    if (!(amplitude.grid() == phase.grid()))
        throw Error(ErrorCode::DimensionMismatch, "amplitude and phase grids differ");
    std::vector<cplx> v(amplitude.values().size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = std::polar(amplitude[i], phase[i]);
    return ComplexField(amplitude.grid(), std::move(v));
}

/// Relative L2 distance ||a - b|| / ||b||.
inline double relative_l2(std::span<const cplx> a, std::span<const cplx> b)
{
    if (a.size() != b.size())
        throw Error(ErrorCode::DimensionMismatch, "relative_l2 length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += std::norm(a[i] - b[i]);
        den += std::norm(b[i]);
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline double relative_l2(const ComplexField& a, const ComplexField& b)
{
    return relative_l2(a.values(), b.values());
}

/// Sample-to-sensor geometry of an in-line capture.
struct CaptureGeometry {
    double wavelength_um = 0.53;
    double pitch_um = 1.12;
    double z2_um = 1000.0;
    std::vector<double> heights_um; ///< multi-height capture; empty for a single hologram

    void validate() const
    {
        if (!(wavelength_um > 0.0) || !std::isfinite(wavelength_um))
            throw Error(ErrorCode::InvalidGeometry, "wavelength must be positive");
        if (!(pitch_um > 0.0) || !std::isfinite(pitch_um))
            throw Error(ErrorCode::InvalidGeometry, "pixel_pitch must be positive");
        if (!std::isfinite(z2_um))
            throw Error(ErrorCode::InvalidGeometry, "z2 must be finite");
        for (std::size_t i = 1; i < heights_um.size(); ++i)
            if (!(heights_um[i] > heights_um[i - 1]))
                throw Error(ErrorCode::HeightsOutOfOrder, "heights must be strictly increasing");
    }

    /// Sampling coarser than half a wavelength cannot represent the full
    /// propagating band. Allowed, but callers may want to warn.
    bool aliasing_risk() const noexcept { return wavelength_um < 2.0 * pitch_um; }

    Grid grid(std::size_t width, std::size_t height) const
    {
        return Grid{width, height, pitch_um, wavelength_um};
    }
};

/// Intensity holograms recorded at several sample-to-sensor distances.
struct HologramStack {
    std::vector<RealImage> holograms;
    std::vector<double> heights_um;

    void validate() const
    {
        if (holograms.empty())
            throw Error(ErrorCode::InvalidSpec, "hologram stack is empty");
        if (holograms.size() != heights_um.size())
            throw Error(ErrorCode::DimensionMismatch, "stack needs one height per hologram");
        for (const auto& h : holograms) {
            if (h.kind() != ImageKind::intensity)
                throw Error(ErrorCode::InvalidField, "stack holds intensity images only");
            if (!(h.grid() == holograms.front().grid()))
                throw Error(ErrorCode::DimensionMismatch, "stack images differ in grid");
        }
        for (std::size_t i = 1; i < heights_um.size(); ++i)
            if (!(heights_um[i] > heights_um[i - 1]))
                throw Error(ErrorCode::HeightsOutOfOrder, "heights must be strictly increasing");
    }

    std::size_t size() const noexcept { return holograms.size(); }
};

} // namespace holo

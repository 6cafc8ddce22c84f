#pragma once

#include "holo/core.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <variant>
#include <vector>

namespace holo {

namespace io {

/// Little-endian byte sink/source used by the binary formats.
class ByteWriter {
public:
    void bytes(const void* p, std::size_t n)
    {
        auto* b = static_cast<const unsigned char*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { uint_le(v, 2); }
    void u32(std::uint32_t v) { uint_le(v, 4); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { uint_le(std::bit_cast<std::uint64_t>(v), 8); }

    const std::vector<unsigned char>& data() const noexcept { return buf_; }

private:
    void uint_le(std::uint64_t v, int n)
    {
        for (int i = 0; i < n; ++i)
            buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    std::vector<unsigned char> buf_;
};

class ByteReader {
public:
    ByteReader(std::vector<unsigned char> data, std::string origin)
        : buf_(std::move(data)), origin_(std::move(origin))
    {
    }

    void need(std::size_t n) const
    {
        if (pos_ + n > buf_.size())
            throw Error(ErrorCode::CorruptFile, origin_ + ": truncated");
    }
    std::array<char, 4> magic()
    {
        need(4);
        std::array<char, 4> m{};
        std::memcpy(m.data(), buf_.data() + pos_, 4);
        pos_ += 4;
        return m;
    }
    std::uint8_t u8()
    {
        need(1);
        return buf_[pos_++];
    }
    std::uint16_t u16() { return static_cast<std::uint16_t>(uint_le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(uint_le(4)); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(uint_le(8)); }
    std::size_t remaining() const noexcept { return buf_.size() - pos_; }
    const std::string& origin() const noexcept { return origin_; }

private:
    std::uint64_t uint_le(int n)
    {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i)
            v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * i);
        return v;
    }
    std::vector<unsigned char> buf_;
    std::string origin_;
    std::size_t pos_ = 0;
};

inline void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& data)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out)
        throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    write_file(path, std::vector<unsigned char>(text.begin(), text.end()));
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j)
{
    write_text(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json(const std::filesystem::path& path)
{
    auto bytes = read_file(path);
    try {
        return nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptFile, path.string() + ": " + e.what());
    }
}

} // namespace io

/// Kind byte of the HIDF container.
enum class ContainerKind : std::uint8_t { complex = 0, intensity = 1, amplitude = 2, phase = 3 };

using ContainerPayload = std::variant<ComplexField, RealImage>;

inline constexpr std::uint16_t kContainerVersion = 1;

/// Encodes a field or image as an HIDF container:
///   "HIDF" | u16 version | u8 kind | u32 width | u32 height |
///   f64 pixel_pitch_um | f64 wavelength_um | f32 payload (row-major,
///   complex interleaved re,im), all little-endian.
inline std::vector<unsigned char> encode_container(const ContainerPayload& payload)
{
    io::ByteWriter w;
    w.bytes("HIDF", 4);
    w.u16(kContainerVersion);
    std::visit(
        [&w](const auto& item) {
            using T = std::decay_t<decltype(item)>;
            const Grid& g = item.grid();
            if constexpr (std::is_same_v<T, ComplexField>)
                w.u8(static_cast<std::uint8_t>(ContainerKind::complex));
            else
                w.u8(static_cast<std::uint8_t>(item.kind()));
            w.u32(static_cast<std::uint32_t>(g.width));
            w.u32(static_cast<std::uint32_t>(g.height));
            w.f64(g.pitch_um);
            w.f64(g.wavelength_um);
            for (const auto& v : item.values()) {
                if constexpr (std::is_same_v<T, ComplexField>) {
                    w.f32(static_cast<float>(v.real()));
                    w.f32(static_cast<float>(v.imag()));
                } else {
                    w.f32(static_cast<float>(v));
                }
            }
        },
        payload);
    return w.data();
}

inline ContainerPayload decode_container(io::ByteReader& r)
{
    const auto& origin = r.origin();
    if (r.magic() != std::array<char, 4>{'H', 'I', 'D', 'F'})
        throw Error(ErrorCode::CorruptFile, origin + ": bad magic");
    if (r.u16() != kContainerVersion)
        throw Error(ErrorCode::CorruptFile, origin + ": unsupported version");
    const auto kind = r.u8();
    if (kind > 3)
        throw Error(ErrorCode::CorruptFile, origin + ": unknown kind");
    Grid g;
    g.width = r.u32();
    g.height = r.u32();
    g.pitch_um = r.f64();
    g.wavelength_um = r.f64();
    const std::size_t per = kind == 0 ? 8 : 4;
    if (g.width == 0 || g.height == 0 || r.remaining() != g.size() * per)
        throw Error(ErrorCode::CorruptFile, origin + ": payload length does not match header");
    try {
        if (kind == 0) {
            std::vector<cplx> v(g.size());
            for (auto& c : v) {
                const double re = r.f32();
                const double im = r.f32();
                c = {re, im};
            }
            return ComplexField(g, std::move(v));
        }
        const auto ik = static_cast<ImageKind>(kind);
        std::vector<double> v(g.size());
        for (auto& x : v) {
            x = r.f32();
            // float(pi) > pi; clamp that rounding instead of wrapping it to -pi
            if (ik == ImageKind::phase)
                x = x > std::numbers::pi && x < std::numbers::pi + 1e-6 ? std::numbers::pi : wrap_phase(x);
        }
        return RealImage(g, ik, std::move(v));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptFile)
            throw;
        throw Error(ErrorCode::CorruptFile, origin + ": " + e.what());
    }
}

inline void write_container(const std::filesystem::path& path, const ContainerPayload& payload,
                            const nlohmann::json& sidecar = nullptr)
{
    io::write_file(path, encode_container(payload));
    if (!sidecar.is_null()) {
        auto side = path;
        side.replace_extension(".json");
        io::write_json(side, sidecar);
    }
}

inline ContainerPayload read_container(const std::filesystem::path& path)
{
    io::ByteReader r(io::read_file(path), path.string());
    return decode_container(r);
}

inline ComplexField read_field(const std::filesystem::path& path)
{
    auto p = read_container(path);
    if (auto* f = std::get_if<ComplexField>(&p))
        return std::move(*f);
    throw Error(ErrorCode::CorruptFile, path.string() + ": expected a complex field");
}

inline RealImage read_image(const std::filesystem::path& path)
{
    auto p = read_container(path);
    if (auto* f = std::get_if<RealImage>(&p))
        return std::move(*f);
    throw Error(ErrorCode::CorruptFile, path.string() + ": expected a real image");
}

} // namespace holo

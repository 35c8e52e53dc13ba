#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace uvtomo::detail {

// Little-endian byte buffer writer.
class ByteWriter {
public:
    void magic(std::string_view tag);
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void zeros(std::size_t n) { bytes_.insert(bytes_.end(), n, 0); }

    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    void write_file(const std::filesystem::path& path) const;

private:
    std::vector<std::uint8_t> bytes_;
};

// Little-endian reader over a whole file; throws FormatError on underrun.
class ByteReader {
public:
    explicit ByteReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}
    static ByteReader from_file(const std::filesystem::path& path);

    void expect_magic(std::string_view tag);
    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    void skip(std::size_t n);

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const;

    std::vector<std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace uvtomo::detail

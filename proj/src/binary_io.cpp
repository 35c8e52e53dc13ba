#include "binary_io.hpp"

#include <fstream>
#include <iterator>

#include "uvtomo/error.hpp"

namespace uvtomo::detail {

void ByteWriter::magic(std::string_view tag) {
    bytes_.insert(bytes_.end(), tag.begin(), tag.end());
}

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::write_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

ByteReader ByteReader::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return ByteReader(std::move(bytes));
}

void ByteReader::need(std::size_t n) const {
    if (remaining() < n) throw FormatError("truncated file");
}

void ByteReader::expect_magic(std::string_view tag) {
    need(tag.size());
    for (char c : tag) {
        if (static_cast<char>(bytes_[pos_++]) != c)
            throw FormatError("bad magic, expected " + std::string(tag));
    }
}

std::uint8_t ByteReader::u8() {
    need(1);
    return bytes_[pos_++];
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
}

void ByteReader::skip(std::size_t n) {
    need(n);
    pos_ += n;
}

}  // namespace uvtomo::detail

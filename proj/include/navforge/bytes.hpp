#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

#include "navforge/common.hpp"

namespace navforge {

uint32_t crc32(std::string_view data);

// Little-endian byte-buffer writer for checkpoint blocks.
struct ByteWriter {
    std::string buf;

    void put_u8(uint8_t v) { buf.push_back(static_cast<char>(v)); }
    void put_u32(uint32_t v) {
        for (int i = 0; i < 4; ++i)
            buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void put_u64(uint64_t v) {
        for (int i = 0; i < 8; ++i)
            buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void put_f64(double v) { put_u64(std::bit_cast<uint64_t>(v)); }
    void put_bytes(std::string_view s) { buf.append(s); }
    // Appends the CRC of everything written so far.
    void seal() { put_u32(crc32(buf)); }
};

// Bounds-checked reader; underruns throw IoError (truncated files load as
// errors, never as corrupt data).
struct ByteReader {
    std::string_view buf;
    size_t pos = 0;

    explicit ByteReader(std::string_view b) : buf(b) {}

    size_t remaining() const { return buf.size() - pos; }
    void need(size_t n) const {
        if (remaining() < n)
            throw IoError("checkpoint truncated: need " + std::to_string(n) +
                          " bytes at offset " + std::to_string(pos));
    }
    uint8_t get_u8() {
        need(1);
        return static_cast<uint8_t>(buf[pos++]);
    }
    uint32_t get_u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
        return v;
    }
    uint64_t get_u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
        return v;
    }
    double get_f64() { return std::bit_cast<double>(get_u64()); }
    std::string_view get_bytes(size_t n) {
        need(n);
        std::string_view s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    // Verifies the trailing CRC over bytes [0, size-4).
    void check_crc() const {
        if (buf.size() < 4)
            throw IoError("checkpoint truncated: no CRC");
        ByteReader tail(buf.substr(buf.size() - 4));
        uint32_t stored = const_cast<ByteReader&>(tail).get_u32();
        uint32_t actual = crc32(buf.substr(0, buf.size() - 4));
        if (stored != actual)
            throw IoError("checkpoint CRC mismatch");
    }
};

std::string read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::string_view data);

}  // namespace navforge

#include "navforge/bytes.hpp"

#include <array>
#include <fstream>
#include <sstream>

namespace navforge {

namespace {

std::array<uint32_t, 256> make_crc_table() {
    std::array<uint32_t, 256> table{};
    for (uint32_t i = 0; i < 256; ++i) {
        uint32_t c = i;
        for (int k = 0; k < 8; ++k)
            c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

}  // namespace

uint32_t crc32(std::string_view data) {
    static const std::array<uint32_t, 256> table = make_crc_table();
    uint32_t c = 0xffffffffu;
    for (char ch : data)
        c = table[(c ^ static_cast<uint8_t>(ch)) & 0xff] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_bytes(const std::string& path, std::string_view data) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write file: " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out)
        throw IoError("write failed: " + path);
}

}  // namespace navforge

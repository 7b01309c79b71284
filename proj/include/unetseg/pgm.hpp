#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace unetseg {

// Binary (P5) PGM image. Samples are 8-bit for maxval < 256, otherwise
// 16-bit big-endian, per the PNM convention.
struct PgmImage {
    std::int64_t w = 0;
    std::int64_t h = 0;
    int maxval = 255;
    std::vector<std::uint16_t> pixels;  // row-major, one value per pixel
};

// Parses a P5 file. Throws DecodeError with the byte offset of the first
// offending byte on malformed headers, bad sample values, or truncation.
PgmImage load_pgm(const std::string& path);

// Writes a canonical header: "P5\n<w> <h>\n<maxval>\n" followed by samples.
void save_pgm(const std::string& path, const PgmImage& img);

}  // namespace unetseg

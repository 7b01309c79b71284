#include "unetseg/pgm.hpp"

#include <fstream>
#include <sstream>

#include "unetseg/errors.hpp"

namespace unetseg {

namespace {

// Cursor over the raw file bytes; keeps the offset for error reporting.
struct ByteReader {
    const std::string& bytes;
    std::uint64_t pos = 0;

    bool eof() const { return pos >= bytes.size(); }
    unsigned char peek() const { return static_cast<unsigned char>(bytes[pos]); }
    unsigned char take() { return static_cast<unsigned char>(bytes[pos++]); }

    // Whitespace and '#' comments between header tokens.
    void skip_separators() {
        while (!eof()) {
            const unsigned char c = peek();
            if (c == '#') {
                while (!eof() && take() != '\n') {
                }
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    }

    std::int64_t read_uint(const char* what) {
        skip_separators();
        if (eof() || peek() < '0' || peek() > '9') {
            throw DecodeError(std::string("PGM: expected ") + what, pos);
        }
        std::int64_t value = 0;
        while (!eof() && peek() >= '0' && peek() <= '9') {
            value = value * 10 + (take() - '0');
            if (value > 1'000'000'000) throw DecodeError(std::string("PGM: ") + what + " too large", pos);
        }
        return value;
    }
};

}  // namespace

PgmImage load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();

    ByteReader r{bytes};
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
        throw DecodeError("PGM: missing P5 magic in " + path, 0);
    }
    r.pos = 2;

    PgmImage img;
    img.w = r.read_uint("width");
    img.h = r.read_uint("height");
    const std::int64_t maxval = r.read_uint("maxval");
    if (img.w <= 0 || img.h <= 0) throw DecodeError("PGM: zero dimension", r.pos);
    if (maxval <= 0 || maxval > 65535) throw DecodeError("PGM: maxval out of range", r.pos);
    img.maxval = static_cast<int>(maxval);

    // Exactly one whitespace byte separates the header from the payload.
    if (r.eof()) throw DecodeError("PGM: truncated header", r.pos);
    const unsigned char sep = r.take();
    if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n') {
        throw DecodeError("PGM: expected single whitespace before payload", r.pos - 1);
    }

    const bool wide = img.maxval > 255;
    const std::uint64_t need =
        static_cast<std::uint64_t>(img.w) * static_cast<std::uint64_t>(img.h) * (wide ? 2 : 1);
    if (bytes.size() - r.pos < need) {
        throw DecodeError("PGM: truncated payload, need " + std::to_string(need) + " bytes",
                          bytes.size());
    }
    if (bytes.size() - r.pos > need) {
        throw DecodeError("PGM: trailing bytes after payload", r.pos + need);
    }

    img.pixels.resize(static_cast<std::size_t>(img.w * img.h));
    for (auto& px : img.pixels) {
        if (wide) {
            const std::uint16_t hi = r.take();  // big-endian 16-bit samples
            const std::uint16_t lo = r.take();
            px = static_cast<std::uint16_t>((hi << 8) | lo);
        } else {
            px = r.take();
        }
        if (px > img.maxval) {
            throw DecodeError("PGM: sample " + std::to_string(px) + " exceeds maxval",
                              r.pos - (wide ? 2 : 1));
        }
    }
    return img;
}

void save_pgm(const std::string& path, const PgmImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "P5\n" << img.w << " " << img.h << "\n" << img.maxval << "\n";
    const bool wide = img.maxval > 255;
    std::string payload;
    payload.reserve(img.pixels.size() * (wide ? 2 : 1));
    for (const std::uint16_t px : img.pixels) {
        if (wide) {
            payload.push_back(static_cast<char>((px >> 8) & 0xFF));
            payload.push_back(static_cast<char>(px & 0xFF));
        } else {
            payload.push_back(static_cast<char>(px & 0xFF));
        }
    }
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace unetseg

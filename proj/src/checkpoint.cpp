#include "unetseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace unetseg {

namespace {

constexpr char kMagic[4] = {'U', 'N', 'B', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

void put_f64(std::string& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

struct Reader {
    const std::string& bytes;
    std::uint64_t pos = 0;

    void need(std::uint64_t count, const char* what) {
        if (bytes.size() - pos < count) {
            throw DecodeError(std::string("checkpoint: truncated reading ") + what, pos);
        }
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        }
        pos += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        }
        pos += 8;
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
    std::string str(std::uint32_t len, const char* what) {
        need(len, what);
        std::string s = bytes.substr(pos, len);
        pos += len;
        return s;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const Model& model) {
    const UNetConfig& cfg = model.config();
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(cfg.in_channels));
    put_u32(out, static_cast<std::uint32_t>(cfg.num_classes));
    put_u32(out, static_cast<std::uint32_t>(cfg.depth));
    put_u32(out, static_cast<std::uint32_t>(cfg.base_channels));
    put_u32(out, static_cast<std::uint32_t>(cfg.fc_hidden));
    put_u32(out, static_cast<std::uint32_t>(cfg.input_h));
    put_u32(out, static_cast<std::uint32_t>(cfg.input_w));
    put_f64(out, cfg.lambda_bottleneck);
    put_u64(out, static_cast<std::uint64_t>(model.params().scalar_count()));
    for (const auto& entry : model.params()) {
        put_u32(out, static_cast<std::uint32_t>(entry.name.size()));
        out += entry.name;
        const Shape4& s = entry.value.shape();
        put_u32(out, static_cast<std::uint32_t>(s.n));
        put_u32(out, static_cast<std::uint32_t>(s.c));
        put_u32(out, static_cast<std::uint32_t>(s.h));
        put_u32(out, static_cast<std::uint32_t>(s.w));
        for (const double v : entry.value) put_f32(out, static_cast<float>(v));
    }

    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot write " + path);
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open checkpoint " + path);
    std::ostringstream ss;
    ss << file.rdbuf();
    const std::string bytes = ss.str();

    Reader r{bytes};
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw DecodeError("checkpoint: bad magic in " + path, 0);
    }
    r.pos = 4;
    const std::uint32_t version = r.u32("version");
    if (version != kVersion) {
        throw DecodeError("checkpoint: unsupported version " + std::to_string(version), 4);
    }

    UNetConfig cfg;
    cfg.in_channels = r.u32("in_channels");
    cfg.num_classes = r.u32("num_classes");
    cfg.depth = r.u32("depth");
    cfg.base_channels = r.u32("base_channels");
    cfg.fc_hidden = r.u32("fc_hidden");
    cfg.input_h = r.u32("input_h");
    cfg.input_w = r.u32("input_w");
    cfg.lambda_bottleneck = r.f64("lambda");
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw DecodeError("checkpoint: stored config invalid: " + std::string(e.what()), 8);
    }

    const std::uint64_t declared = r.u64("parameter count");
    Model model(cfg, 0);
    if (declared != static_cast<std::uint64_t>(model.params().scalar_count())) {
        throw DecodeError("checkpoint: declares " + std::to_string(declared) +
                              " parameters, config implies " +
                              std::to_string(model.params().scalar_count()),
                          r.pos - 8);
    }

    for (auto& entry : model.params()) {
        const std::uint32_t name_len = r.u32("name length");
        const std::string name = r.str(name_len, "name");
        if (name != entry.name) {
            throw DecodeError("checkpoint: parameter '" + name + "', expected '" + entry.name +
                                  "'",
                              r.pos - name_len);
        }
        const Shape4 shape{r.u32("shape.n"), r.u32("shape.c"), r.u32("shape.h"), r.u32("shape.w")};
        if (shape != entry.value.shape()) {
            throw DecodeError("checkpoint: " + name + " stored as " + shape.str() +
                                  ", expected " + entry.value.shape().str(),
                              r.pos - 16);
        }
        for (auto& v : entry.value) v = static_cast<double>(r.f32("values"));
    }
    if (r.pos != bytes.size()) {
        throw DecodeError("checkpoint: trailing bytes", r.pos);
    }
    return model;
}

}  // namespace unetseg

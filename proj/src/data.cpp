#include "unetseg/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "unetseg/pgm.hpp"
#include "unetseg/rng.hpp"

namespace fs = std::filesystem;

namespace unetseg {

Difficulty parse_difficulty(const std::string& name) {
    if (name == "easy") return Difficulty::easy;
    if (name == "hard") return Difficulty::hard;
    throw ValidationError("unknown difficulty '" + name + "', expected easy or hard");
}

std::string difficulty_name(Difficulty d) { return d == Difficulty::easy ? "easy" : "hard"; }

namespace {

struct Ellipse {
    double cx, cy;  // center, in pixel units
    double a, b;    // semi-axes
    double ex, ey;  // unit direction of the major axis
};

// Bilinear interpolation over a (grid+1)^2 lattice spanning the image.
double lattice_value(const std::vector<double>& lattice, std::int64_t grid, double u, double v) {
    const auto ix = static_cast<std::int64_t>(u);
    const auto iy = static_cast<std::int64_t>(v);
    const double fx = u - static_cast<double>(ix);
    const double fy = v - static_cast<double>(iy);
    const std::int64_t stride = grid + 1;
    const double v00 = lattice[static_cast<std::size_t>(iy * stride + ix)];
    const double v01 = lattice[static_cast<std::size_t>(iy * stride + ix + 1)];
    const double v10 = lattice[static_cast<std::size_t>((iy + 1) * stride + ix)];
    const double v11 = lattice[static_cast<std::size_t>((iy + 1) * stride + ix + 1)];
    const double top = v00 + (v01 - v00) * fx;
    const double bot = v10 + (v11 - v10) * fx;
    return top + (bot - top) * fy;
}

}  // namespace

Sample generate_phantom(std::uint64_t seed, std::int64_t h, std::int64_t w,
                        Difficulty difficulty) {
    if (h < 16 || w < 16) {
        throw ValidationError("generate_phantom: size must be at least 16x16, got " +
                              std::to_string(h) + "x" + std::to_string(w));
    }
    const double sigma = difficulty == Difficulty::easy ? 0.05 : 0.15;
    const double offset = difficulty == Difficulty::easy ? 0.30 : 0.12;

    Rng rng(seed);

    // Smooth background: bilinear surface over a 5x5 lattice of levels in
    // [0.30, 0.50]. Draw order is fixed: lattice, ellipses, then per-pixel
    // noise, so a sample is a pure function of its seed.
    constexpr std::int64_t kGrid = 4;
    std::vector<double> lattice(static_cast<std::size_t>((kGrid + 1) * (kGrid + 1)));
    for (auto& v : lattice) v = 0.30 + 0.20 * rng.uniform01();

    const double m = static_cast<double>(std::min(h, w));
    const std::int64_t num_ellipses = 1 + rng.below(3);
    std::vector<Ellipse> ellipses;
    for (std::int64_t k = 0; k < num_ellipses; ++k) {
        Ellipse e{};
        e.cx = (0.25 + 0.50 * rng.uniform01()) * static_cast<double>(w);
        e.cy = (0.25 + 0.50 * rng.uniform01()) * static_cast<double>(h);
        // Semi-axes in [0.11, 0.22]*min(h,w); with centers in the middle
        // half of the image every lesion lies fully inside.
        e.a = (0.11 + 0.11 * rng.uniform01()) * m;
        e.b = (0.11 + 0.11 * rng.uniform01()) * m;
        double dx = 2.0 * rng.uniform01() - 1.0;
        double dy = 2.0 * rng.uniform01() - 1.0;
        const double norm = std::sqrt(dx * dx + dy * dy);
        if (norm < 1e-9) {
            dx = 1.0;
            dy = 0.0;
        } else {
            dx /= norm;
            dy /= norm;
        }
        e.ex = dx;
        e.ey = dy;
        ellipses.push_back(e);
    }

    Sample s{Tensor4({1, 1, h, w}), LabelMap(1, h, w)};
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            const double px = static_cast<double>(x) + 0.5;
            const double py = static_cast<double>(y) + 0.5;
            bool inside = false;
            for (const auto& e : ellipses) {
                const double rx = px - e.cx;
                const double ry = py - e.cy;
                const double t1 = (rx * e.ex + ry * e.ey) / e.a;
                const double t2 = (-rx * e.ey + ry * e.ex) / e.b;
                if (t1 * t1 + t2 * t2 <= 1.0) {
                    inside = true;
                    break;
                }
            }
            const double u = px / static_cast<double>(w) * static_cast<double>(kGrid);
            const double v = py / static_cast<double>(h) * static_cast<double>(kGrid);
            double value = lattice_value(lattice, kGrid, u, v);
            if (inside) value += offset;
            value += sigma * rng.gaussian();
            s.image.at(0, 0, y, x) = std::clamp(value, 0.0, 1.0);
            s.mask.at(0, y, x) = inside ? 1 : 0;
        }
    }
    return s;
}

LabelMap downsample_labels(const LabelMap& mask, std::int64_t factor) {
    if (factor < 1) throw ShapeError("downsample_labels: factor must be >= 1");
    if (mask.h % factor != 0 || mask.w % factor != 0) {
        throw ShapeError("downsample_labels: " + std::to_string(mask.h) + "x" +
                         std::to_string(mask.w) + " not divisible by " + std::to_string(factor));
    }
    LabelMap out(mask.n, mask.h / factor, mask.w / factor);
    for (std::int64_t i = 0; i < out.n; ++i) {
        for (std::int64_t y = 0; y < out.h; ++y) {
            for (std::int64_t x = 0; x < out.w; ++x) {
                out.at(i, y, x) = mask.at(i, y * factor, x * factor);
            }
        }
    }
    return out;
}

Sample augment(const Sample& sample, AugmentOp op) {
    const auto [n, c, h, w] = sample.image.shape();
    const bool rotation =
        op == AugmentOp::rot90 || op == AugmentOp::rot180 || op == AugmentOp::rot270;
    if (rotation && h != w) {
        throw ShapeError("augment: rotations require square samples, got " +
                         sample.image.shape().str());
    }
    // Source coordinates for output pixel (y, x).
    const auto src = [&](std::int64_t y, std::int64_t x) -> std::pair<std::int64_t, std::int64_t> {
        switch (op) {
            case AugmentOp::flip_h: return {y, w - 1 - x};
            case AugmentOp::flip_v: return {h - 1 - y, x};
            case AugmentOp::rot90: return {x, w - 1 - y};
            case AugmentOp::rot180: return {h - 1 - y, w - 1 - x};
            case AugmentOp::rot270: return {h - 1 - x, y};
        }
        return {y, x};
    };

    Sample out{Tensor4(sample.image.shape()), LabelMap(sample.mask.n, h, w)};
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            const auto [sy, sx] = src(y, x);
            for (std::int64_t i = 0; i < n; ++i) {
                for (std::int64_t j = 0; j < c; ++j) {
                    out.image.at(i, j, y, x) = sample.image.at(i, j, sy, sx);
                }
            }
            for (std::int64_t i = 0; i < sample.mask.n; ++i) {
                out.mask.at(i, y, x) = sample.mask.at(i, sy, sx);
            }
        }
    }
    return out;
}

void save_sample(const Sample& sample, const std::string& image_path,
                 const std::string& mask_path) {
    const auto [n, c, h, w] = sample.image.shape();
    if (n != 1 || c != 1) {
        throw ValidationError("save_sample: PGM supports single-channel samples, got " +
                              sample.image.shape().str());
    }
    PgmImage img;
    img.w = w;
    img.h = h;
    img.maxval = 65535;
    img.pixels.resize(static_cast<std::size_t>(h * w));
    for (std::int64_t i = 0; i < h * w; ++i) {
        const double v = sample.image[i];
        if (v < 0.0 || v > 1.0) {
            throw ValidationError("save_sample: image value " + std::to_string(v) +
                                  " outside [0, 1]");
        }
        img.pixels[static_cast<std::size_t>(i)] =
            static_cast<std::uint16_t>(std::llround(v * 65535.0));
    }
    save_pgm(image_path, img);

    PgmImage mask;
    mask.w = w;
    mask.h = h;
    mask.maxval = 255;
    mask.pixels.resize(static_cast<std::size_t>(h * w));
    for (std::int64_t i = 0; i < h * w; ++i) {
        const std::int32_t cls = sample.mask.data[static_cast<std::size_t>(i)];
        if (cls < 0 || cls > 255) {
            throw ValidationError("save_sample: label " + std::to_string(cls) +
                                  " not storable in an 8-bit mask");
        }
        mask.pixels[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(cls);
    }
    save_pgm(mask_path, mask);
}

Sample load_sample(const std::string& image_path, const std::string& mask_path) {
    const PgmImage img = load_pgm(image_path);
    const PgmImage mask = load_pgm(mask_path);
    if (img.w != mask.w || img.h != mask.h) {
        throw ShapeError("load_sample: image " + std::to_string(img.w) + "x" +
                         std::to_string(img.h) + " vs mask " + std::to_string(mask.w) + "x" +
                         std::to_string(mask.h));
    }
    Sample s{Tensor4({1, 1, img.h, img.w}), LabelMap(1, img.h, img.w)};
    const double scale = 1.0 / static_cast<double>(img.maxval);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        s.image[static_cast<std::int64_t>(i)] = static_cast<double>(img.pixels[i]) * scale;
        s.mask.data[i] = static_cast<std::int32_t>(mask.pixels[i]);
    }
    return s;
}

void save_manifest(const std::string& path, const Manifest& manifest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << manifest.h << " " << manifest.w << " " << manifest.num_classes << " "
        << manifest.count << " " << manifest.seed << "\n";
    for (const auto& e : manifest.entries) {
        out << e.image_path << "\t" << e.mask_path << "\n";
    }
    if (!out) throw IoError("write failed for " + path);
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    Manifest m;
    m.dir = fs::path(path).parent_path().string();
    if (m.dir.empty()) m.dir = ".";

    std::string header;
    if (!std::getline(in, header)) throw DecodeError("manifest: empty file " + path, 0);
    std::istringstream hs(header);
    if (!(hs >> m.h >> m.w >> m.num_classes >> m.count >> m.seed)) {
        throw DecodeError("manifest: malformed header '" + header + "'", 0);
    }
    if (m.h < 1 || m.w < 1 || m.num_classes < 2 || m.count < 0) {
        throw ValidationError("manifest: invalid header values '" + header + "'");
    }

    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DecodeError("manifest: entry without tab separator: '" + line + "'", 0);
        }
        m.entries.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    if (static_cast<std::int64_t>(m.entries.size()) != m.count) {
        throw ValidationError("manifest: header declares " + std::to_string(m.count) +
                              " samples but lists " + std::to_string(m.entries.size()));
    }
    return m;
}

std::vector<Sample> load_dataset(const Manifest& manifest) {
    std::vector<Sample> samples;
    samples.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        const std::string img = (fs::path(manifest.dir) / e.image_path).string();
        const std::string msk = (fs::path(manifest.dir) / e.mask_path).string();
        Sample s = load_sample(img, msk);
        if (s.image.shape().h != manifest.h || s.image.shape().w != manifest.w) {
            throw ValidationError("dataset: " + e.image_path + " is " +
                                  std::to_string(s.image.shape().h) + "x" +
                                  std::to_string(s.image.shape().w) + ", manifest declares " +
                                  std::to_string(manifest.h) + "x" + std::to_string(manifest.w));
        }
        for (const std::int32_t cls : s.mask.data) {
            if (cls < 0 || cls >= manifest.num_classes) {
                throw ValidationError("dataset: " + e.mask_path + " holds label " +
                                      std::to_string(cls) + ", manifest declares " +
                                      std::to_string(manifest.num_classes) + " classes");
            }
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

Manifest generate_dataset(const std::string& dir, std::int64_t count, std::int64_t h,
                          std::int64_t w, Difficulty difficulty, std::uint64_t seed) {
    if (count < 1) throw ValidationError("count must be >= 1");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());

    Manifest m;
    m.h = h;
    m.w = w;
    m.num_classes = 2;
    m.count = count;
    m.seed = seed;
    m.dir = dir;
    for (std::int64_t i = 0; i < count; ++i) {
        const Sample s = generate_phantom(mix_seed(seed, static_cast<std::uint64_t>(i)), h, w,
                                          difficulty);
        char img_name[64];
        char mask_name[64];
        std::snprintf(img_name, sizeof(img_name), "sample_%04lld.pgm",
                      static_cast<long long>(i));
        std::snprintf(mask_name, sizeof(mask_name), "sample_%04lld_mask.pgm",
                      static_cast<long long>(i));
        save_sample(s, (fs::path(dir) / img_name).string(), (fs::path(dir) / mask_name).string());
        m.entries.push_back({img_name, mask_name});
    }
    save_manifest((fs::path(dir) / "manifest.txt").string(), m);
    return m;
}

}  // namespace unetseg

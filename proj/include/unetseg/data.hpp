#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unetseg/tensor.hpp"

namespace unetseg {

// One image/mask pair. The image is (1, channels, H, W) with values in
// [0, 1]; the mask holds per-pixel class labels in [0, C).
struct Sample {
    Tensor4 image;
    LabelMap mask;
};

enum class Difficulty { easy, hard };

Difficulty parse_difficulty(const std::string& name);
std::string difficulty_name(Difficulty d);

// Synthetic phantom: a smooth low-frequency background plus Gaussian noise,
// with 1-3 elliptical lesions of raised intensity. Mask is 1 inside any
// ellipse. Fully determined by the seed.
//   easy: noise sigma 0.05, lesion offset +0.30
//   hard: noise sigma 0.15, lesion offset +0.12
Sample generate_phantom(std::uint64_t seed, std::int64_t h, std::int64_t w, Difficulty difficulty);

// Nearest-neighbor label downsampling: out(y, x) = in(y*factor, x*factor).
LabelMap downsample_labels(const LabelMap& mask, std::int64_t factor);

enum class AugmentOp { flip_h, flip_v, rot90, rot180, rot270 };

// Applies the same spatial transform to image and mask. Rotations require
// square samples. rot90 is counterclockwise: out(y, x) = in(x, W-1-y).
Sample augment(const Sample& sample, AugmentOp op);

// Image as 16-bit PGM (round(value*65535)), mask as 8-bit PGM holding raw
// class indices.
void save_sample(const Sample& sample, const std::string& image_path,
                 const std::string& mask_path);
Sample load_sample(const std::string& image_path, const std::string& mask_path);

struct ManifestEntry {
    std::string image_path;  // relative to the manifest's directory
    std::string mask_path;
};

// Line-oriented dataset listing. First line: "H W C count seed", then one
// "image_path<TAB>mask_path" line per sample.
struct Manifest {
    std::int64_t h = 0;
    std::int64_t w = 0;
    std::int64_t num_classes = 0;
    std::int64_t count = 0;
    std::uint64_t seed = 0;
    std::vector<ManifestEntry> entries;
    std::string dir;  // directory the manifest was loaded from / written to
};

void save_manifest(const std::string& path, const Manifest& manifest);
Manifest load_manifest(const std::string& path);

// Decodes every entry, validating shape and label range against the header.
std::vector<Sample> load_dataset(const Manifest& manifest);

// Writes `count` phantoms plus manifest.txt under `dir`; sample i uses seed
// mix_seed(seed, i). Returns the manifest (paths relative to dir).
Manifest generate_dataset(const std::string& dir, std::int64_t count, std::int64_t h,
                          std::int64_t w, Difficulty difficulty, std::uint64_t seed);

}  // namespace unetseg

#pragma once

#include <string>

#include "unetseg/model.hpp"

namespace unetseg {

// Binary checkpoint, all integers little-endian:
//   magic "UNBK", u32 version (1),
//   config: u32 in_channels, num_classes, depth, base_channels, fc_hidden,
//           input_h, input_w, f64 lambda,
//   u64 total scalar parameter count,
//   per registry entry in registry order:
//     u32 name length, name bytes, u32 shape n/c/h/w, f32 values.
// Values are stored single-precision; round-trip exactness is defined at
// that precision.
void save_checkpoint(const std::string& path, const Model& model);

// Validates magic, version, declared counts and total file length, then
// rebuilds the model from the stored config and overwrites its parameters.
Model load_checkpoint(const std::string& path);

}  // namespace unetseg

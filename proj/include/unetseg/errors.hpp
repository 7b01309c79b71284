#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace unetseg {

// Tensor shapes disagree with an operation's contract.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Values out of range (labels >= C, non-binary masks, bad flag values).
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Architecture or training configuration rejected before any work starts.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Malformed input file. Carries the byte offset of the first offending byte.
struct DecodeError : std::runtime_error {
    DecodeError(const std::string& msg, std::uint64_t byte_offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    std::uint64_t offset;
};

// Filesystem-level failure (missing file, unwritable path).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training hit a non-finite loss. Carries the step at which it happened.
struct NumericDivergence : std::runtime_error {
    NumericDivergence(const std::string& msg, std::int64_t at_step)
        : std::runtime_error(msg + " at step " + std::to_string(at_step)), step(at_step) {}
    std::int64_t step;
};

}  // namespace unetseg

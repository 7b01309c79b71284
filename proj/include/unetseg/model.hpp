#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "unetseg/layers.hpp"
#include "unetseg/tensor.hpp"

namespace unetseg {

class Rng;

// Architecture hyperparameters. Input H and W must be divisible by 2^depth.
struct UNetConfig {
    std::int64_t in_channels = 1;
    std::int64_t num_classes = 2;
    std::int64_t depth = 2;          // number of down-sampling stages
    std::int64_t base_channels = 8;  // doubled per stage
    std::int64_t fc_hidden = 256;    // width of the first bottleneck FC layer
    double lambda_bottleneck = 1.0;
    std::int64_t input_h = 32;
    std::int64_t input_w = 32;

    std::int64_t pool_factor() const { return std::int64_t{1} << depth; }
    // Channel width at stage s (0-based); stage `depth` is the bottleneck.
    std::int64_t stage_channels(std::int64_t s) const { return base_channels << s; }
    std::int64_t bottleneck_h() const { return input_h / pool_factor(); }
    std::int64_t bottleneck_w() const { return input_w / pool_factor(); }

    void validate() const;  // throws ConfigError
    bool operator==(const UNetConfig&) const = default;
};

// A learnable tensor with its gradient buffer.
struct ParamEntry {
    std::string name;
    Tensor4 value;
    Tensor4 grad;
};

// Named, ordered parameter collection. Iteration order is fixed at build
// time: encoder stage 0..D-1, bottleneck conv block, bottleneck FCs,
// decoder stage D-1..0, output head, each layer as weight then bias.
class ParamRegistry {
  public:
    int add(std::string name, Tensor4 init);

    std::size_t size() const { return entries_.size(); }
    ParamEntry& operator[](std::size_t i) { return entries_[i]; }
    const ParamEntry& operator[](std::size_t i) const { return entries_[i]; }
    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    std::int64_t scalar_count() const;
    void zero_grads();

  private:
    std::vector<ParamEntry> entries_;
};

// Cached pre- and post-activations of a conv -> ReLU -> conv -> ReLU block.
struct ConvBlockCache {
    Tensor4 z1, a1, z2, a2;
};

struct EncoderStageCache {
    ConvBlockCache block;
    Tensor4 pooled;
    PoolRecord pool;
};

struct DecoderStageCache {
    Tensor4 up;   // upconv output
    Tensor4 cat;  // concat(skip, up)
    ConvBlockCache block;
};

struct FcHeadCache {
    Tensor4 flat_in;  // flattened bottleneck activation, (n, 1, 1, in_dim)
    Tensor4 z1, a1;
};

// Both network outputs plus everything backward() needs.
struct ForwardOutput {
    Tensor4 seg_logits;         // (n, C, H, W)
    Tensor4 bottleneck_logits;  // (n, C, H/2^D, W/2^D)

    Tensor4 input;
    std::vector<EncoderStageCache> encoder;
    ConvBlockCache bottleneck;
    FcHeadCache fc;
    std::vector<DecoderStageCache> decoder;  // indexed by stage, 0 = shallowest
};

// The encoder / bottleneck-FC / decoder network. Parameters live in the
// registry; He-normal initialization from the seeded generator, biases zero.
// A model instance is single-writer: forward may run concurrently on a
// frozen instance, but backward and parameter updates must not.
class Model {
  public:
    Model(const UNetConfig& config, std::uint64_t seed);

    const UNetConfig& config() const { return cfg_; }
    ParamRegistry& params() { return params_; }
    const ParamRegistry& params() const { return params_; }

    // Input must be (n, in_channels, input_h, input_w).
    ForwardOutput forward(const Tensor4& x) const;

    // Accumulates d(<seg_grad, seg_logits> + <bottleneck_grad,
    // bottleneck_logits>)/dparam into every gradient buffer. Buffers are
    // not cleared first; calling twice doubles them.
    void backward(const ForwardOutput& out, const Tensor4& seg_grad,
                  const Tensor4& bottleneck_grad);

  private:
    struct ConvRef {
        int weights = -1;
        int bias = -1;
    };

    ConvRef add_conv(const std::string& name, std::int64_t out_c, std::int64_t in_c,
                     std::int64_t kh, std::int64_t kw, Rng& rng);
    ConvRef add_fc(const std::string& name, std::int64_t out_dim, std::int64_t in_dim, Rng& rng);

    const Tensor4& value(const ConvRef& r) const { return params_[r.weights].value; }
    const Tensor4& bias(const ConvRef& r) const { return params_[r.bias].value; }

    UNetConfig cfg_;
    ParamRegistry params_;
    std::vector<std::array<ConvRef, 2>> encoder_;  // conv1, conv2 per stage
    std::array<ConvRef, 2> bottleneck_{};
    ConvRef fc1_, fc2_;
    struct DecoderRefs {
        ConvRef upconv, conv1, conv2;
    };
    std::vector<DecoderRefs> decoder_;  // indexed by stage, 0 = shallowest
    ConvRef head_;
};

// Builds the model and returns it with its registry populated (the registry
// is owned by the model; this is the spec-level build operation).
inline Model build(const UNetConfig& config, std::uint64_t seed) { return Model(config, seed); }

}  // namespace unetseg

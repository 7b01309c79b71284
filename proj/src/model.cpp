#include "unetseg/model.hpp"

#include <cmath>

#include "unetseg/rng.hpp"

namespace unetseg {

void UNetConfig::validate() const {
    if (in_channels < 1 || num_classes < 2 || base_channels < 1 || fc_hidden < 1) {
        throw ConfigError("config: channel/class/width fields must be >= 1 (classes >= 2)");
    }
    if (depth < 1 || depth > 16) {
        throw ConfigError("config: depth must be in [1, 16], got " + std::to_string(depth));
    }
    if (lambda_bottleneck < 0.0) {
        throw ConfigError("config: lambda must be >= 0, got " +
                          std::to_string(lambda_bottleneck));
    }
    const std::int64_t factor = pool_factor();
    if (input_h < factor || input_w < factor || input_h % factor != 0 ||
        input_w % factor != 0) {
        throw ConfigError("config: input " + std::to_string(input_h) + "x" +
                          std::to_string(input_w) + " not divisible by 2^depth = " +
                          std::to_string(factor));
    }
}

int ParamRegistry::add(std::string name, Tensor4 init) {
    for (const auto& e : entries_) {
        if (e.name == name) throw ConfigError("registry: duplicate parameter name " + name);
    }
    Tensor4 grad(init.shape());
    entries_.push_back({std::move(name), std::move(init), std::move(grad)});
    return static_cast<int>(entries_.size()) - 1;
}

std::int64_t ParamRegistry::scalar_count() const {
    std::int64_t total = 0;
    for (const auto& e : entries_) total += e.value.size();
    return total;
}

void ParamRegistry::zero_grads() {
    for (auto& e : entries_) {
        for (auto& g : e.grad) g = 0.0;
    }
}

namespace {

// He-style initialization: normal(0, sqrt(2/fan_in)), drawn in flat
// row-major order so the same seed always yields the same bytes.
Tensor4 he_normal(const Shape4& shape, std::int64_t fan_in, Rng& rng) {
    Tensor4 t(shape);
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t) v = rng.gaussian() * scale;
    return t;
}

}  // namespace

Model::ConvRef Model::add_conv(const std::string& name, std::int64_t out_c, std::int64_t in_c,
                               std::int64_t kh, std::int64_t kw, Rng& rng) {
    ConvRef r;
    r.weights = params_.add(name + "/weight",
                            he_normal({out_c, in_c, kh, kw}, in_c * kh * kw, rng));
    r.bias = params_.add(name + "/bias", Tensor4({1, 1, 1, out_c}));
    return r;
}

Model::ConvRef Model::add_fc(const std::string& name, std::int64_t out_dim, std::int64_t in_dim,
                             Rng& rng) {
    ConvRef r;
    r.weights = params_.add(name + "/weight", he_normal({1, 1, out_dim, in_dim}, in_dim, rng));
    r.bias = params_.add(name + "/bias", Tensor4({1, 1, 1, out_dim}));
    return r;
}

Model::Model(const UNetConfig& config, std::uint64_t seed) : cfg_(config) {
    cfg_.validate();
    Rng rng(seed);

    std::int64_t in_c = cfg_.in_channels;
    for (std::int64_t s = 0; s < cfg_.depth; ++s) {
        const std::int64_t c = cfg_.stage_channels(s);
        const std::string prefix = "encoder" + std::to_string(s);
        encoder_.push_back({add_conv(prefix + "/conv1", c, in_c, 3, 3, rng),
                            add_conv(prefix + "/conv2", c, c, 3, 3, rng)});
        in_c = c;
    }

    const std::int64_t cb = cfg_.stage_channels(cfg_.depth);
    bottleneck_ = {add_conv("bottleneck/conv1", cb, in_c, 3, 3, rng),
                   add_conv("bottleneck/conv2", cb, cb, 3, 3, rng)};

    const std::int64_t flat_dim = cb * cfg_.bottleneck_h() * cfg_.bottleneck_w();
    const std::int64_t fc_out = cfg_.num_classes * cfg_.bottleneck_h() * cfg_.bottleneck_w();
    fc1_ = add_fc("fc_head/fc1", cfg_.fc_hidden, flat_dim, rng);
    fc2_ = add_fc("fc_head/fc2", fc_out, cfg_.fc_hidden, rng);

    decoder_.resize(static_cast<std::size_t>(cfg_.depth));
    for (std::int64_t s = cfg_.depth - 1; s >= 0; --s) {
        const std::int64_t c = cfg_.stage_channels(s);
        const std::int64_t c_up = cfg_.stage_channels(s + 1);
        const std::string prefix = "decoder" + std::to_string(s);
        decoder_[static_cast<std::size_t>(s)] = {
            add_conv(prefix + "/upconv", c, c_up, 2, 2, rng),
            add_conv(prefix + "/conv1", c, 2 * c, 3, 3, rng),
            add_conv(prefix + "/conv2", c, c, 3, 3, rng)};
    }

    head_ = add_conv("head/conv", cfg_.num_classes, cfg_.base_channels, 1, 1, rng);
}

ForwardOutput Model::forward(const Tensor4& x) const {
    const Shape4 expect{x.shape().n, cfg_.in_channels, cfg_.input_h, cfg_.input_w};
    if (x.shape() != expect) {
        throw ShapeError("forward: input " + x.shape().str() + ", configured for " +
                         expect.str());
    }

    ForwardOutput out;
    out.input = x;

    // Encoder: conv3x3 -> ReLU -> conv3x3 -> ReLU -> maxpool per stage; the
    // pre-pool activation is the skip source.
    const Tensor4* cur = &out.input;
    out.encoder.resize(encoder_.size());
    for (std::size_t s = 0; s < encoder_.size(); ++s) {
        auto& cache = out.encoder[s];
        cache.block.z1 = conv2d(*cur, value(encoder_[s][0]), bias(encoder_[s][0]));
        cache.block.a1 = relu(cache.block.z1);
        cache.block.z2 = conv2d(cache.block.a1, value(encoder_[s][1]), bias(encoder_[s][1]));
        cache.block.a2 = relu(cache.block.z2);
        auto [pooled, record] = maxpool2(cache.block.a2);
        cache.pooled = std::move(pooled);
        cache.pool = std::move(record);
        cur = &cache.pooled;
    }

    out.bottleneck.z1 = conv2d(*cur, value(bottleneck_[0]), bias(bottleneck_[0]));
    out.bottleneck.a1 = relu(out.bottleneck.z1);
    out.bottleneck.z2 = conv2d(out.bottleneck.a1, value(bottleneck_[1]), bias(bottleneck_[1]));
    out.bottleneck.a2 = relu(out.bottleneck.z2);

    // FC head branches off the bottleneck activation; its output is the
    // class-logit map at bottleneck resolution.
    const std::int64_t n = x.shape().n;
    const std::int64_t bh = cfg_.bottleneck_h();
    const std::int64_t bw = cfg_.bottleneck_w();
    out.fc.flat_in = out.bottleneck.a2.reshaped({n, 1, 1, out.bottleneck.a2.size() / n});
    out.fc.z1 = fc(out.fc.flat_in, value(fc1_), bias(fc1_));
    out.fc.a1 = relu(out.fc.z1);
    const Tensor4 fc_out = fc(out.fc.a1, value(fc2_), bias(fc2_));
    out.bottleneck_logits = fc_out.reshaped({n, cfg_.num_classes, bh, bw});

    // Decoder: upconv (no activation) -> concat(skip, up) -> conv3x3 ->
    // ReLU -> conv3x3 -> ReLU, deepest stage first.
    cur = &out.bottleneck.a2;
    out.decoder.resize(decoder_.size());
    for (std::int64_t s = cfg_.depth - 1; s >= 0; --s) {
        auto& cache = out.decoder[static_cast<std::size_t>(s)];
        const auto& refs = decoder_[static_cast<std::size_t>(s)];
        cache.up = upconv2(*cur, value(refs.upconv), bias(refs.upconv));
        cache.cat = concat_channels(out.encoder[static_cast<std::size_t>(s)].block.a2, cache.up);
        cache.block.z1 = conv2d(cache.cat, value(refs.conv1), bias(refs.conv1));
        cache.block.a1 = relu(cache.block.z1);
        cache.block.z2 = conv2d(cache.block.a1, value(refs.conv2), bias(refs.conv2));
        cache.block.a2 = relu(cache.block.z2);
        cur = &cache.block.a2;
    }

    out.seg_logits = conv2d(*cur, value(head_), bias(head_));
    return out;
}

void Model::backward(const ForwardOutput& out, const Tensor4& seg_grad,
                     const Tensor4& bottleneck_grad) {
    if (seg_grad.shape() != out.seg_logits.shape()) {
        throw ShapeError("backward: seg gradient " + seg_grad.shape().str() + ", expected " +
                         out.seg_logits.shape().str());
    }
    if (bottleneck_grad.shape() != out.bottleneck_logits.shape()) {
        throw ShapeError("backward: bottleneck gradient " + bottleneck_grad.shape().str() +
                         ", expected " + out.bottleneck_logits.shape().str());
    }

    const auto accumulate = [this](int idx, const Tensor4& g) {
        Tensor4& buf = params_[static_cast<std::size_t>(idx)].grad;
        for (std::int64_t i = 0; i < g.size(); ++i) buf[i] += g[i];
    };

    // Output head.
    ConvGrads head_g = conv2d_vjp(out.decoder[0].block.a2, value(head_), seg_grad);
    accumulate(head_.weights, head_g.dkernels);
    accumulate(head_.bias, head_g.dbias);

    // Decoder stages, shallowest first; collect the skip gradients and the
    // gradient flowing into the bottleneck activation.
    std::vector<Tensor4> skip_grads(static_cast<std::size_t>(cfg_.depth));
    Tensor4 d_bottleneck_a2;
    Tensor4 d_act = std::move(head_g.dx);
    for (std::int64_t s = 0; s < cfg_.depth; ++s) {
        const auto& cache = out.decoder[static_cast<std::size_t>(s)];
        const auto& refs = decoder_[static_cast<std::size_t>(s)];

        const Tensor4 dz2 = relu_vjp(cache.block.z2, d_act);
        ConvGrads g2 = conv2d_vjp(cache.block.a1, value(refs.conv2), dz2);
        accumulate(refs.conv2.weights, g2.dkernels);
        accumulate(refs.conv2.bias, g2.dbias);

        const Tensor4 dz1 = relu_vjp(cache.block.z1, g2.dx);
        ConvGrads g1 = conv2d_vjp(cache.cat, value(refs.conv1), dz1);
        accumulate(refs.conv1.weights, g1.dkernels);
        accumulate(refs.conv1.bias, g1.dbias);

        const std::int64_t skip_c = out.encoder[static_cast<std::size_t>(s)].block.a2.shape().c;
        auto [d_skip, d_up] = concat_channels_vjp(skip_c, g1.dx);
        skip_grads[static_cast<std::size_t>(s)] = std::move(d_skip);

        const Tensor4& up_input = s == cfg_.depth - 1
                                      ? out.bottleneck.a2
                                      : out.decoder[static_cast<std::size_t>(s + 1)].block.a2;
        ConvGrads gu = upconv2_vjp(up_input, value(refs.upconv), d_up);
        accumulate(refs.upconv.weights, gu.dkernels);
        accumulate(refs.upconv.bias, gu.dbias);

        if (s == cfg_.depth - 1) {
            d_bottleneck_a2 = std::move(gu.dx);
        } else {
            d_act = std::move(gu.dx);
        }
    }

    // FC head; its input gradient joins the decoder's at the bottleneck
    // activation (the two paths share the encoder).
    const std::int64_t n = out.input.shape().n;
    const Tensor4 d_fc_out = bottleneck_grad.reshaped({n, 1, 1, bottleneck_grad.size() / n});
    FcGrads gfc2 = fc_vjp(out.fc.a1, value(fc2_), d_fc_out);
    accumulate(fc2_.weights, gfc2.dmatrix);
    accumulate(fc2_.bias, gfc2.dbias);
    const Tensor4 dz1_fc = relu_vjp(out.fc.z1, gfc2.dx);
    FcGrads gfc1 = fc_vjp(out.fc.flat_in, value(fc1_), dz1_fc);
    accumulate(fc1_.weights, gfc1.dmatrix);
    accumulate(fc1_.bias, gfc1.dbias);
    {
        const Tensor4 d_flat = gfc1.dx.reshaped(out.bottleneck.a2.shape());
        for (std::int64_t i = 0; i < d_bottleneck_a2.size(); ++i) {
            d_bottleneck_a2[i] += d_flat[i];
        }
    }

    // Bottleneck conv block.
    const Tensor4& bottleneck_in = out.encoder.back().pooled;
    const Tensor4 dbz2 = relu_vjp(out.bottleneck.z2, d_bottleneck_a2);
    ConvGrads bg2 = conv2d_vjp(out.bottleneck.a1, value(bottleneck_[1]), dbz2);
    accumulate(bottleneck_[1].weights, bg2.dkernels);
    accumulate(bottleneck_[1].bias, bg2.dbias);
    const Tensor4 dbz1 = relu_vjp(out.bottleneck.z1, bg2.dx);
    ConvGrads bg1 = conv2d_vjp(bottleneck_in, value(bottleneck_[0]), dbz1);
    accumulate(bottleneck_[0].weights, bg1.dkernels);
    accumulate(bottleneck_[0].bias, bg1.dbias);

    // Encoder stages, deepest first. Each stage receives the pooled
    // gradient from below plus its skip gradient.
    Tensor4 d_pooled = std::move(bg1.dx);
    for (std::int64_t s = cfg_.depth - 1; s >= 0; --s) {
        const auto& cache = out.encoder[static_cast<std::size_t>(s)];
        Tensor4 d_a2 = maxpool2_vjp(cache.pool, d_pooled);
        const Tensor4& d_skip = skip_grads[static_cast<std::size_t>(s)];
        for (std::int64_t i = 0; i < d_a2.size(); ++i) d_a2[i] += d_skip[i];

        const Tensor4 dz2 = relu_vjp(cache.block.z2, d_a2);
        ConvGrads g2 = conv2d_vjp(cache.block.a1, value(encoder_[static_cast<std::size_t>(s)][1]),
                                  dz2);
        accumulate(encoder_[static_cast<std::size_t>(s)][1].weights, g2.dkernels);
        accumulate(encoder_[static_cast<std::size_t>(s)][1].bias, g2.dbias);

        const Tensor4 dz1 = relu_vjp(cache.block.z1, g2.dx);
        const Tensor4& stage_in =
            s == 0 ? out.input : out.encoder[static_cast<std::size_t>(s - 1)].pooled;
        ConvGrads g1 = conv2d_vjp(stage_in, value(encoder_[static_cast<std::size_t>(s)][0]),
                                  dz1);
        accumulate(encoder_[static_cast<std::size_t>(s)][0].weights, g1.dkernels);
        accumulate(encoder_[static_cast<std::size_t>(s)][0].bias, g1.dbias);
        d_pooled = std::move(g1.dx);
    }
}

}  // namespace unetseg

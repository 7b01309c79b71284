#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "unetseg/model.hpp"
#include "unetseg/rng.hpp"

using namespace unetseg;
using testutil::dot;
using testutil::random_tensor;

namespace {

UNetConfig tiny_config() {
    UNetConfig cfg;
    cfg.depth = 1;
    cfg.base_channels = 2;
    cfg.fc_hidden = 8;
    cfg.input_h = 8;
    cfg.input_w = 8;
    return cfg;
}

std::int64_t conv_params(std::int64_t in_c, std::int64_t out_c, std::int64_t k) {
    return out_c * in_c * k * k + out_c;
}

// Closed-form parameter count of the architecture, summed layer by layer.
std::int64_t expected_param_count(const UNetConfig& cfg) {
    std::int64_t total = 0;
    std::int64_t in_c = cfg.in_channels;
    for (std::int64_t s = 0; s < cfg.depth; ++s) {
        const std::int64_t c = cfg.stage_channels(s);
        total += conv_params(in_c, c, 3) + conv_params(c, c, 3);
        in_c = c;
    }
    const std::int64_t cb = cfg.stage_channels(cfg.depth);
    total += conv_params(in_c, cb, 3) + conv_params(cb, cb, 3);

    const std::int64_t flat = cb * cfg.bottleneck_h() * cfg.bottleneck_w();
    const std::int64_t fc_out = cfg.num_classes * cfg.bottleneck_h() * cfg.bottleneck_w();
    total += cfg.fc_hidden * flat + cfg.fc_hidden;
    total += fc_out * cfg.fc_hidden + fc_out;

    for (std::int64_t s = 0; s < cfg.depth; ++s) {
        const std::int64_t c = cfg.stage_channels(s);
        const std::int64_t c_up = cfg.stage_channels(s + 1);
        total += c * c_up * 4 + c;  // 2x2 up-convolution
        total += conv_params(2 * c, c, 3) + conv_params(c, c, 3);
    }
    total += conv_params(cfg.base_channels, cfg.num_classes, 1);
    return total;
}

const Tensor4& param(const Model& model, const std::string& name) {
    for (const auto& e : model.params()) {
        if (e.name == name) return e.value;
    }
    throw std::runtime_error("missing parameter " + name);
}

}  // namespace

TEST_CASE("registry enumeration matches the closed-form parameter count") {
    UNetConfig cfg;
    cfg.depth = 1;
    cfg.base_channels = 4;
    cfg.input_h = 8;
    cfg.input_w = 8;
    const Model model(cfg, 0);
    CHECK(model.params().scalar_count() == expected_param_count(cfg));

    UNetConfig deeper;
    deeper.depth = 3;
    deeper.base_channels = 8;
    deeper.fc_hidden = 32;
    deeper.input_h = 32;
    deeper.input_w = 64;
    const Model big(deeper, 1);
    CHECK(big.params().scalar_count() == expected_param_count(deeper));
}

TEST_CASE("same seed builds bit-identical parameters") {
    const UNetConfig cfg = tiny_config();
    const Model a(cfg, 99);
    const Model b(cfg, 99);
    REQUIRE(a.params().size() == b.params().size());
    for (std::size_t i = 0; i < a.params().size(); ++i) {
        CHECK(a.params()[i].name == b.params()[i].name);
        CHECK(a.params()[i].value == b.params()[i].value);
    }
    const Model c(cfg, 100);
    CHECK(a.params()[0].value != c.params()[0].value);
}

TEST_CASE("biases start at zero, weights do not") {
    const Model model(tiny_config(), 3);
    for (const auto& e : model.params()) {
        if (e.name.ends_with("/bias")) {
            for (double v : e.value) CHECK(v == 0.0);
        } else {
            double sum = 0.0;
            for (double v : e.value) sum += std::abs(v);
            CHECK(sum > 0.0);
        }
    }
}

TEST_CASE("input size must be divisible by 2^depth") {
    UNetConfig cfg;
    cfg.depth = 2;
    cfg.input_h = 30;
    cfg.input_w = 30;
    CHECK_THROWS_AS(Model(cfg, 0), ConfigError);

    cfg.input_h = 32;
    cfg.input_w = 32;
    CHECK_NOTHROW(Model(cfg, 0));

    cfg.lambda_bottleneck = -0.5;
    CHECK_THROWS_AS(Model(cfg, 0), ConfigError);
}

TEST_CASE("forward output shapes") {
    UNetConfig cfg;  // depth 2, base 8, C 2, 32x32
    const Model model(cfg, 7);
    Rng rng(1);
    const ForwardOutput out = model.forward(random_tensor(rng, {1, 1, 32, 32}));
    CHECK(out.seg_logits.shape() == Shape4{1, 2, 32, 32});
    CHECK(out.bottleneck_logits.shape() == Shape4{1, 2, 8, 8});

    const ForwardOutput batched = model.forward(random_tensor(rng, {3, 1, 32, 32}));
    CHECK(batched.seg_logits.shape() == Shape4{3, 2, 32, 32});
    CHECK(batched.bottleneck_logits.shape() == Shape4{3, 2, 8, 8});

    CHECK_THROWS_AS(model.forward(Tensor4({1, 1, 16, 16})), ShapeError);
    CHECK_THROWS_AS(model.forward(Tensor4({1, 2, 32, 32})), ShapeError);
}

TEST_CASE("output spatial size equals input size across configurations") {
    Rng rng(2);
    for (const std::int64_t size : {8, 16, 24}) {
        UNetConfig cfg = tiny_config();
        cfg.input_h = size;
        cfg.input_w = size;
        const Model model(cfg, 5);
        const ForwardOutput out = model.forward(random_tensor(rng, {1, 1, size, size}));
        CHECK(out.seg_logits.shape().h == size);
        CHECK(out.seg_logits.shape().w == size);
        CHECK(out.bottleneck_logits.shape().h == size / 2);
    }
}

TEST_CASE("all-zero parameters give all-zero logits") {
    Model model(tiny_config(), 11);
    for (auto& e : model.params()) {
        for (auto& v : e.value) v = 0.0;
    }
    Rng rng(3);
    const ForwardOutput out = model.forward(random_tensor(rng, {1, 1, 8, 8}, 0.0, 1.0));
    for (double v : out.seg_logits) CHECK(v == 0.0);
    for (double v : out.bottleneck_logits) CHECK(v == 0.0);
}

TEST_CASE("forward equals a hand-composed pipeline of the layer ops") {
    const UNetConfig cfg = tiny_config();
    const Model model(cfg, 21);
    Rng rng(4);
    const Tensor4 x = random_tensor(rng, {2, 1, 8, 8}, 0.0, 1.0);
    const ForwardOutput out = model.forward(x);

    const auto conv = [&](const Tensor4& in, const std::string& name) {
        return conv2d(in, param(model, name + "/weight"), param(model, name + "/bias"));
    };

    // Encoder stage 0.
    const Tensor4 e_a1 = relu(conv(x, "encoder0/conv1"));
    const Tensor4 e_a2 = relu(conv(e_a1, "encoder0/conv2"));
    const auto [pooled, record] = maxpool2(e_a2);

    // Bottleneck block.
    const Tensor4 b_a1 = relu(conv(pooled, "bottleneck/conv1"));
    const Tensor4 b_a2 = relu(conv(b_a1, "bottleneck/conv2"));

    // FC head.
    const Tensor4 flat = b_a2.reshaped({2, 1, 1, b_a2.size() / 2});
    const Tensor4 f_a1 =
        relu(fc(flat, param(model, "fc_head/fc1/weight"), param(model, "fc_head/fc1/bias")));
    const Tensor4 f_out =
        fc(f_a1, param(model, "fc_head/fc2/weight"), param(model, "fc_head/fc2/bias"));
    const Tensor4 bottleneck_logits = f_out.reshaped({2, 2, 4, 4});

    // Decoder stage 0 and head.
    const Tensor4 up =
        upconv2(b_a2, param(model, "decoder0/upconv/weight"), param(model, "decoder0/upconv/bias"));
    const Tensor4 cat = concat_channels(e_a2, up);
    const Tensor4 d_a1 = relu(conv(cat, "decoder0/conv1"));
    const Tensor4 d_a2 = relu(conv(d_a1, "decoder0/conv2"));
    const Tensor4 seg_logits = conv(d_a2, "head/conv");

    CHECK(out.seg_logits == seg_logits);
    CHECK(out.bottleneck_logits == bottleneck_logits);
}

TEST_CASE("backward with zero upstreams leaves gradients at zero") {
    Model model(tiny_config(), 8);
    Rng rng(5);
    const ForwardOutput out = model.forward(random_tensor(rng, {1, 1, 8, 8}));
    model.backward(out, Tensor4(out.seg_logits.shape()), Tensor4(out.bottleneck_logits.shape()));
    for (const auto& e : model.params()) {
        for (double g : e.grad) CHECK(g == 0.0);
    }
}

TEST_CASE("zero bottleneck upstream leaves the FC head untouched") {
    Model model(tiny_config(), 9);
    Rng rng(6);
    const ForwardOutput out = model.forward(random_tensor(rng, {1, 1, 8, 8}));
    model.backward(out, random_tensor(rng, out.seg_logits.shape()),
                   Tensor4(out.bottleneck_logits.shape()));
    for (const auto& e : model.params()) {
        if (e.name.starts_with("fc_head/")) {
            for (double g : e.grad) CHECK(g == 0.0);
        }
    }
    // The encoder still receives gradient through the decoder path.
    double encoder_sum = 0.0;
    for (const auto& e : model.params()) {
        if (e.name.starts_with("encoder0/")) {
            for (double g : e.grad) encoder_sum += std::abs(g);
        }
    }
    CHECK(encoder_sum > 0.0);
}

TEST_CASE("backward is additive over the two outputs") {
    const UNetConfig cfg = tiny_config();
    Rng rng(7);
    const Tensor4 x = random_tensor(rng, {1, 1, 8, 8});

    Model seg_only(cfg, 17);
    Model bottleneck_only(cfg, 17);
    Model both(cfg, 17);

    const ForwardOutput out = both.forward(x);
    const Tensor4 seg_up = random_tensor(rng, out.seg_logits.shape());
    const Tensor4 bottleneck_up = random_tensor(rng, out.bottleneck_logits.shape());
    const Tensor4 seg_zero(out.seg_logits.shape());
    const Tensor4 bottleneck_zero(out.bottleneck_logits.shape());

    seg_only.backward(seg_only.forward(x), seg_up, bottleneck_zero);
    bottleneck_only.backward(bottleneck_only.forward(x), seg_zero, bottleneck_up);
    both.backward(out, seg_up, bottleneck_up);

    for (std::size_t p = 0; p < both.params().size(); ++p) {
        const Tensor4& a = seg_only.params()[p].grad;
        const Tensor4& b = bottleneck_only.params()[p].grad;
        const Tensor4& sum = both.params()[p].grad;
        for (std::int64_t i = 0; i < sum.size(); ++i) {
            CHECK(sum[i] == doctest::Approx(a[i] + b[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("backward called twice doubles every gradient buffer") {
    Model model(tiny_config(), 10);
    Rng rng(8);
    const Tensor4 x = random_tensor(rng, {1, 1, 8, 8});
    const ForwardOutput out = model.forward(x);
    const Tensor4 seg_up = random_tensor(rng, out.seg_logits.shape());
    const Tensor4 bottleneck_up = random_tensor(rng, out.bottleneck_logits.shape());

    model.backward(out, seg_up, bottleneck_up);
    std::vector<Tensor4> once;
    for (const auto& e : model.params()) once.push_back(e.grad);
    model.backward(out, seg_up, bottleneck_up);
    for (std::size_t p = 0; p < model.params().size(); ++p) {
        const Tensor4& twice = model.params()[p].grad;
        for (std::int64_t i = 0; i < twice.size(); ++i) {
            CHECK(twice[i] == 2.0 * once[p][i]);
        }
    }
}

TEST_CASE("whole-model gradient matches finite differences") {
    const UNetConfig cfg = tiny_config();
    Model model(cfg, 33);
    Rng rng(9);
    const Tensor4 x = random_tensor(rng, {1, 1, 8, 8}, 0.0, 1.0);
    const ForwardOutput base = model.forward(x);
    const Tensor4 seg_up = random_tensor(rng, base.seg_logits.shape());
    const Tensor4 bottleneck_up = random_tensor(rng, base.bottleneck_logits.shape());

    model.params().zero_grads();
    model.backward(base, seg_up, bottleneck_up);

    const auto loss = [&] {
        const ForwardOutput out = model.forward(x);
        return dot(seg_up, out.seg_logits) + dot(bottleneck_up, out.bottleneck_logits);
    };
    double worst = 0.0;
    for (auto& e : model.params()) {
        for (std::int64_t i = 0; i < e.value.size(); ++i) {
            const double fd = testutil::central_diff(e.value[i], 1e-5, loss);
            worst = std::max(worst, testutil::rel_err(e.grad[i], fd));
        }
    }
    CHECK(worst <= 1e-4);
}

// Acceptance suite: runs every release criterion end to end and prints one
// pass/fail line per criterion. Exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "test_util.hpp"
#include "unetseg/checkpoint.hpp"
#include "unetseg/data.hpp"
#include "unetseg/trainer.hpp"

using namespace unetseg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

char fmt_buf[512];
template <typename... Args>
std::string fmt(const char* pattern, Args... args) {
    std::snprintf(fmt_buf, sizeof(fmt_buf), pattern, args...);
    return fmt_buf;
}

// Shared recipe for criteria 4, 6 and 7: 8 easy phantoms, 32x32, depth 2,
// base 8, lr 0.05, 500 steps.
constexpr std::uint64_t kOverfitDataSeed = 2024;
constexpr std::uint64_t kOverfitModelSeed = 1;

std::vector<Sample> phantom_set(std::uint64_t base_seed, std::int64_t count, std::int64_t size) {
    std::vector<Sample> samples;
    for (std::int64_t i = 0; i < count; ++i) {
        samples.push_back(generate_phantom(mix_seed(base_seed, static_cast<std::uint64_t>(i)),
                                           size, size, Difficulty::easy));
    }
    return samples;
}

UNetConfig overfit_config(double lambda) {
    UNetConfig cfg;
    cfg.depth = 2;
    cfg.base_channels = 8;
    cfg.lambda_bottleneck = lambda;
    cfg.input_h = 32;
    cfg.input_w = 32;
    return cfg;
}

struct OverfitRun {
    Model model;
    TrainResult result;
    std::string checkpoint_path;
    std::string log_path;
};

OverfitRun run_overfit(const std::vector<Sample>& data, double lambda, const fs::path& dir,
                       const std::string& tag) {
    OverfitRun run{Model(overfit_config(lambda), kOverfitModelSeed), {}, {}, {}};
    TrainConfig tc;
    tc.learning_rate = 0.05;
    tc.steps = 500;
    tc.lambda_bottleneck = lambda;
    tc.seed = kOverfitModelSeed;
    tc.checkpoint_path = (dir / (tag + ".ckpt")).string();
    run.checkpoint_path = tc.checkpoint_path;
    run.result = train(run.model, data, tc);
    run.log_path = (dir / (tag + ".log")).string();
    std::ofstream(run.log_path, std::ios::binary) << format_train_log(run.result.log);
    return run;
}

// --- criteria ---------------------------------------------------------------

Outcome criterion_gradcheck() {
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (const double lambda : {0.0, 1.0}) {
        UNetConfig cfg;
        cfg.depth = 1;
        cfg.base_channels = 2;
        cfg.input_h = 8;
        cfg.input_w = 8;
        cfg.lambda_bottleneck = lambda;
        const GradCheckReport report = gradcheck(cfg, 0, 1e-5);
        worst = std::max(worst, report.worst_rel_err);
    }
    const double elapsed = seconds_since(start);
    return {worst <= 1e-4 && elapsed <= 60.0,
            fmt("worst rel err %.3e (tol 1e-4), %.1f s (limit 60)", worst, elapsed)};
}

Outcome criterion_layer_oracles() {
    Rng rng(12345);
    for (int trial = 0; trial < 100; ++trial) {
        const Shape4 xs{1 + rng.below(2), 1 + rng.below(4), 1 + rng.below(6), 1 + rng.below(6)};
        const std::int64_t cout = 1 + rng.below(4);
        const Tensor4 x = testutil::random_tensor(rng, xs);
        const Tensor4 bias = testutil::random_tensor(rng, {1, 1, 1, cout});

        const std::int64_t k = rng.below(2) == 0 ? 1 : 3;
        const Tensor4 k3 = testutil::random_tensor(rng, {cout, xs.c, k, k});
        if (!(conv2d(x, k3, bias) == oracles::conv2d_oracle(x, k3, bias))) {
            return {false, fmt("conv2d mismatch at trial %d", trial)};
        }

        const Tensor4 k2 = testutil::random_tensor(rng, {cout, xs.c, 2, 2});
        if (!(upconv2(x, k2, bias) == oracles::upconv2_oracle(x, k2, bias))) {
            return {false, fmt("upconv2 mismatch at trial %d", trial)};
        }

        if (xs.h % 2 == 0 && xs.w % 2 == 0) {
            if (!(maxpool2(x).first == oracles::maxpool2_oracle(x))) {
                return {false, fmt("maxpool2 mismatch at trial %d", trial)};
            }
        }

        if (!(relu(x) == oracles::relu_oracle(x))) {
            return {false, fmt("relu mismatch at trial %d", trial)};
        }

        const Tensor4 other =
            testutil::random_tensor(rng, {xs.n, 1 + rng.below(4), xs.h, xs.w});
        if (!(concat_channels(x, other) == oracles::concat_oracle(x, other))) {
            return {false, fmt("concat mismatch at trial %d", trial)};
        }

        const std::int64_t in_dim = 1 + rng.below(12);
        const std::int64_t out_dim = 1 + rng.below(12);
        const Tensor4 vec = testutil::random_tensor(rng, {1 + rng.below(3), 1, 1, in_dim});
        const Tensor4 matrix = testutil::random_tensor(rng, {1, 1, out_dim, in_dim});
        const Tensor4 fc_bias = testutil::random_tensor(rng, {1, 1, 1, out_dim});
        if (!(fc(vec, matrix, fc_bias) == oracles::fc_oracle(vec, matrix, fc_bias))) {
            return {false, fmt("fc mismatch at trial %d", trial)};
        }
    }

    // Adjoint identity <conv_s2(x), y> == <x, upconv2(y)> with shared kernels.
    double worst_adjoint = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::int64_t cin = 1 + rng.below(4);
        const std::int64_t cout = 1 + rng.below(4);
        const std::int64_t h = 1 + rng.below(5);
        const std::int64_t w = 1 + rng.below(5);
        const Tensor4 kernels = testutil::random_tensor(rng, {cout, cin, 2, 2});
        const Tensor4 y = testutil::random_tensor(rng, {1, cin, h, w});
        const Tensor4 x = testutil::random_tensor(rng, {1, cout, 2 * h, 2 * w});
        const double lhs = testutil::dot(oracles::conv_stride2_oracle(x, kernels), y);
        const double rhs = testutil::dot(x, upconv2(y, kernels, Tensor4({1, 1, 1, cout})));
        worst_adjoint = std::max(worst_adjoint, std::abs(lhs - rhs));
    }
    return {worst_adjoint <= 1e-10,
            fmt("100 forward trials bit-exact, adjoint gap %.2e (tol 1e-10)", worst_adjoint)};
}

Outcome criterion_metric_exactness() {
    struct Fixture {
        ConfusionCounts counts;
        double sens, spec, acc;
    };
    // Hand-computed fixtures (n_tp, n_tn, n_fp, n_fn).
    const std::vector<Fixture> fixtures = {
        {{4, 0, 0, 0}, 1.0, -1.0, 1.0},        // all positive, spec undefined
        {{0, 4, 0, 0}, -1.0, 1.0, 1.0},        // all negative, sens undefined
        {{1, 1, 1, 1}, 0.5, 0.5, 0.5},
        {{5, 0, 0, 5}, 0.5, -1.0, 0.5},
        {{10, 30, 10, 10}, 0.5, 0.75, 2.0 / 3.0},
        {{9, 1, 0, 0}, 1.0, 1.0, 1.0},
        {{0, 0, 7, 0}, -1.0, 0.0, 0.0},
        {{0, 0, 0, 7}, 0.0, -1.0, 0.0},
        {{3, 4, 2, 1}, 0.75, 4.0 / 6.0, 0.7},
        {{20, 60, 15, 5}, 0.8, 0.8, 0.8},
        {{1, 98, 1, 0}, 1.0, 98.0 / 99.0, 0.99},
        {{50, 40, 5, 5}, 50.0 / 55.0, 40.0 / 45.0, 0.9},
        {{2, 2, 2, 2}, 0.5, 0.5, 0.5},
        {{100, 0, 0, 100}, 0.5, -1.0, 0.5},
        {{0, 100, 100, 0}, -1.0, 0.5, 0.5},
        {{7, 11, 3, 9}, 7.0 / 16.0, 11.0 / 14.0, 0.6},
        {{939, 0, 0, 61}, 0.939, -1.0, 0.939},
        {{0, 926, 74, 0}, -1.0, 0.926, 0.926},
        {{450, 463, 44, 43}, 450.0 / 493.0, 463.0 / 507.0, 0.913},
        {{480, 496, 4, 20}, 0.96, 0.992, 0.976},
    };
    int index = 0;
    for (const auto& f : fixtures) {
        ++index;
        if (f.sens >= 0.0 && sensitivity(f.counts) != f.sens) {
            return {false, fmt("fixture %d sensitivity mismatch", index)};
        }
        if (f.sens < 0.0 && !std::isnan(sensitivity(f.counts))) {
            return {false, fmt("fixture %d expected undefined sensitivity", index)};
        }
        if (f.spec >= 0.0 && specificity(f.counts) != f.spec) {
            return {false, fmt("fixture %d specificity mismatch", index)};
        }
        if (f.spec < 0.0 && !std::isnan(specificity(f.counts))) {
            return {false, fmt("fixture %d expected undefined specificity", index)};
        }
        if (accuracy(f.counts) != f.acc) {
            return {false, fmt("fixture %d accuracy mismatch", index)};
        }
    }

    // The published ratios, reproduced from illustrative counts to machine
    // precision: MRI 0.926/0.939/0.913, CT 0.961/0.972/0.976.
    const bool table_ok = specificity({0, 926, 74, 0}) == 0.926 &&
                          sensitivity({939, 0, 0, 61}) == 0.939 &&
                          accuracy({450, 463, 44, 43}) == 0.913 &&
                          specificity({0, 961, 39, 0}) == 0.961 &&
                          sensitivity({972, 0, 0, 28}) == 0.972 &&
                          accuracy({488, 488, 12, 12}) == 0.976;
    return {table_ok, "20 fixtures exact, published ratios reproduced to machine precision"};
}

Outcome criterion_overfit(const OverfitRun& run, const std::vector<Sample>& data) {
    const double final_loss = run.result.log.back().total;
    const EvalReport report = evaluate(run.model, data);
    const double acc = report.summary.accuracy;

    // Monotone sanity: 50-step moving average of L_total may never rise by
    // more than 5% after step 100.
    bool monotone = true;
    const auto& log = run.result.log;
    double prev_avg = 0.0;
    bool have_prev = false;
    for (std::size_t t = 99; t < log.size(); ++t) {
        double sum = 0.0;
        for (std::size_t k = t - 49; k <= t; ++k) sum += log[k].total;
        const double avg = sum / 50.0;
        if (have_prev && avg > prev_avg * 1.05) monotone = false;
        prev_avg = avg;
        have_prev = true;
    }

    return {final_loss < 0.05 && acc >= 0.98 && monotone,
            fmt("final L_total %.4f (<0.05), train accuracy %.4f (>=0.98), moving avg %s",
                final_loss, acc, monotone ? "non-increasing" : "INCREASED")};
}

Outcome criterion_generalization() {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<Sample> train_set = phantom_set(77, 64, 32);
    const std::vector<Sample> held_out = phantom_set(78, 64, 32);

    Model model(overfit_config(1.0), 7);
    TrainConfig tc;
    tc.learning_rate = 0.05;
    tc.steps = 2000;
    tc.seed = 7;
    train(model, train_set, tc);

    const EvalReport report = evaluate(model, held_out);
    const double sens = report.summary.sensitivity;
    const double spec = report.summary.specificity;
    const double elapsed = seconds_since(start);
    return {sens >= 0.90 && spec >= 0.90 && elapsed <= 1200.0,
            fmt("held-out sensitivity %.4f, specificity %.4f (both >=0.90), %.0f s (limit 1200)",
                sens, spec, elapsed)};
}

Outcome criterion_bottleneck_supervision(const OverfitRun& supervised,
                                         const std::vector<Sample>& data, const fs::path& dir) {
    const OverfitRun plain = run_overfit(data, 0.0, dir, "lambda0");
    const double ce_supervised = evaluate(supervised.model, data).summary.bottleneck_ce;
    const double ce_plain = evaluate(plain.model, data).summary.bottleneck_ce;
    return {ce_supervised < ce_plain,
            fmt("bottleneck CE %.4f (lambda=1) < %.4f (lambda=0)", ce_supervised, ce_plain)};
}

Outcome criterion_determinism(const OverfitRun& first, const std::vector<Sample>& data,
                              const fs::path& dir) {
    const OverfitRun repeat = run_overfit(data, 1.0, dir, "repeat");
    const bool ckpt_same =
        read_bytes(first.checkpoint_path) == read_bytes(repeat.checkpoint_path);
    const bool log_same = read_bytes(first.log_path) == read_bytes(repeat.log_path);

    // save -> load -> save is byte-identical.
    const std::string reloaded_path = (dir / "reloaded.ckpt").string();
    const Model reloaded = load_checkpoint(first.checkpoint_path);
    save_checkpoint(reloaded_path, reloaded);
    const bool roundtrip_same = read_bytes(first.checkpoint_path) == read_bytes(reloaded_path);

    return {ckpt_same && log_same && roundtrip_same,
            fmt("rerun checkpoint %s, rerun log %s, save/load/save %s",
                ckpt_same ? "identical" : "DIFFERS", log_same ? "identical" : "DIFFERS",
                roundtrip_same ? "identical" : "DIFFERS")};
}

Outcome criterion_shapes() {
    Rng rng(55);
    for (const std::int64_t depth : {1, 2, 3}) {
        const std::int64_t factor = std::int64_t{1} << depth;
        for (std::int64_t size = 8; size <= 64; size += 4) {
            if (size % factor != 0) continue;
            UNetConfig cfg;
            cfg.depth = depth;
            cfg.base_channels = 2;
            cfg.fc_hidden = 8;
            cfg.input_h = size;
            cfg.input_w = size;
            const Model model(cfg, 3);
            const ForwardOutput out =
                model.forward(testutil::random_tensor(rng, {1, 1, size, size}, 0.0, 1.0));
            if (out.seg_logits.shape() != Shape4{1, 2, size, size}) {
                return {false, fmt("seg shape wrong at depth %lld size %lld",
                                   static_cast<long long>(depth), static_cast<long long>(size))};
            }
            if (out.bottleneck_logits.shape() != Shape4{1, 2, size / factor, size / factor}) {
                return {false, fmt("bottleneck shape wrong at depth %lld size %lld",
                                   static_cast<long long>(depth), static_cast<long long>(size))};
            }
        }
    }
    return {true, "seg output matches input size, bottleneck smaller by 2^depth, sizes 8-64"};
}

}  // namespace

int main() {
    const fs::path dir = fs::temp_directory_path() / "unetseg_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);

    int passed = 0;
    int total = 0;
    const auto report = [&](int number, const std::string& name, const Outcome& outcome) {
        ++total;
        if (outcome.passed) ++passed;
        std::printf("criterion %d: %-28s %s  (%s)\n", number, name.c_str(),
                    outcome.passed ? "PASS" : "FAIL", outcome.detail.c_str());
        std::fflush(stdout);
    };

    report(1, "gradient correctness", criterion_gradcheck());
    report(2, "layer oracles", criterion_layer_oracles());
    report(3, "metric exactness", criterion_metric_exactness());

    const std::vector<Sample> overfit_data = phantom_set(kOverfitDataSeed, 8, 32);
    const auto overfit_start = std::chrono::steady_clock::now();
    const OverfitRun overfit_run = run_overfit(overfit_data, 1.0, dir, "overfit");
    const double overfit_elapsed = seconds_since(overfit_start);
    Outcome overfit_outcome = criterion_overfit(overfit_run, overfit_data);
    overfit_outcome.passed = overfit_outcome.passed && overfit_elapsed <= 300.0;
    overfit_outcome.detail += fmt(", %.0f s (limit 300)", overfit_elapsed);
    report(4, "overfit run", overfit_outcome);

    report(5, "generalization", criterion_generalization());
    report(6, "bottleneck supervision",
           criterion_bottleneck_supervision(overfit_run, overfit_data, dir));
    report(7, "determinism", criterion_determinism(overfit_run, overfit_data, dir));
    report(8, "shape invariant", criterion_shapes());

    std::printf("acceptance: %d/%d criteria passed\n", passed, total);
    return passed == total ? 0 : 1;
}

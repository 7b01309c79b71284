#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "unetseg/checkpoint.hpp"
#include "unetseg/data.hpp"
#include "unetseg/metrics.hpp"
#include "unetseg/pgm.hpp"
#include "unetseg/trainer.hpp"

namespace fs = std::filesystem;
using namespace unetseg;

// Exit codes: 0 success, 1 gradient-check tolerance failure,
// 2 usage/validation errors, 3 numeric divergence during training.
namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;
constexpr int kDiverged = 3;

struct GenDataArgs {
    std::string out_dir;
    std::int64_t count = 16;
    std::vector<std::int64_t> size{32, 32};
    std::string difficulty = "easy";
    std::uint64_t seed = 0;
};

struct TrainArgs {
    std::string manifest_path;
    std::string checkpoint_path;
    std::int64_t depth = 2;
    std::int64_t base = 8;
    double lambda = 1.0;
    double lr = 0.05;
    std::int64_t steps = 500;
    std::uint64_t seed = 0;
};

struct EvalArgs {
    std::string manifest_path;
    std::string checkpoint_path;
    bool json = false;
};

struct PredictArgs {
    std::string image_path;
    std::string checkpoint_path;
    std::string out_path;
};

struct GradcheckArgs {
    std::int64_t depth = 1;
    std::int64_t base = 2;
    std::vector<std::int64_t> size{8, 8};
    std::uint64_t seed = 0;
    double eps = 1e-5;
    double tol = 1e-4;
};

int run_gen_data(const GenDataArgs& args) {
    const Manifest manifest =
        generate_dataset(args.out_dir, args.count, args.size[0], args.size[1],
                         parse_difficulty(args.difficulty), args.seed);
    std::cout << (fs::path(manifest.dir) / "manifest.txt").string() << "\n";
    return kOk;
}

int run_train(const TrainArgs& args) {
    const Manifest manifest = load_manifest(args.manifest_path);
    const std::vector<Sample> dataset = load_dataset(manifest);

    UNetConfig model_cfg;
    model_cfg.in_channels = 1;
    model_cfg.num_classes = manifest.num_classes;
    model_cfg.depth = args.depth;
    model_cfg.base_channels = args.base;
    model_cfg.lambda_bottleneck = args.lambda;
    model_cfg.input_h = manifest.h;
    model_cfg.input_w = manifest.w;
    model_cfg.validate();

    TrainConfig train_cfg;
    train_cfg.learning_rate = args.lr;
    train_cfg.steps = args.steps;
    train_cfg.lambda_bottleneck = args.lambda;
    train_cfg.seed = args.seed;
    train_cfg.checkpoint_path = args.checkpoint_path;
    if (args.lr < 0.0) throw ValidationError("learning rate must be >= 0");

    Model model(model_cfg, args.seed);
    const TrainResult result = train(model, dataset, train_cfg);

    const std::string log_path = args.checkpoint_path + ".log";
    std::ofstream log(log_path, std::ios::binary);
    if (!log) throw IoError("cannot write " + log_path);
    log << format_train_log(result.log);

    const TrainLogEntry& last = result.log.back();
    std::printf("step %" PRId64 ": L_total=%.9g L1=%.9g CE=%.9g\n", last.step, last.total,
                last.l1_term, last.ce_term);
    std::printf("checkpoint: %s\nlog: %s\n", args.checkpoint_path.c_str(), log_path.c_str());
    return kOk;
}

int run_eval(const EvalArgs& args) {
    const Manifest manifest = load_manifest(args.manifest_path);
    const std::vector<Sample> dataset = load_dataset(manifest);
    const Model model = load_checkpoint(args.checkpoint_path);
    if (model.config().num_classes != manifest.num_classes ||
        model.config().input_h != manifest.h || model.config().input_w != manifest.w) {
        throw ValidationError("checkpoint configured for " +
                              std::to_string(model.config().input_h) + "x" +
                              std::to_string(model.config().input_w) + "/" +
                              std::to_string(model.config().num_classes) +
                              " classes, manifest declares " + std::to_string(manifest.h) + "x" +
                              std::to_string(manifest.w) + "/" +
                              std::to_string(manifest.num_classes));
    }
    const EvalReport report = evaluate(model, dataset);
    if (args.json) {
        std::cout << metrics_json(report.summary, report.per_sample) << "\n";
    } else {
        std::cout << metrics_table(report.summary, "eval");
    }
    return kOk;
}

int run_predict(const PredictArgs& args) {
    const Model model = load_checkpoint(args.checkpoint_path);
    const PgmImage img = load_pgm(args.image_path);

    Tensor4 x({1, 1, img.h, img.w});
    const double scale = 1.0 / static_cast<double>(img.maxval);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        x[static_cast<std::int64_t>(i)] = static_cast<double>(img.pixels[i]) * scale;
    }

    const ForwardOutput out = model.forward(x);
    const LabelMap pred = argmax_channels(out.seg_logits);

    PgmImage mask;
    mask.w = img.w;
    mask.h = img.h;
    mask.maxval = 255;
    mask.pixels.resize(pred.data.size());
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        mask.pixels[i] = static_cast<std::uint16_t>(pred.data[i]);
    }
    save_pgm(args.out_path, mask);
    std::cout << args.out_path << "\n";
    return kOk;
}

int run_gradcheck(const GradcheckArgs& args) {
    if (!(args.eps > 0.0)) throw ValidationError("eps must be > 0");
    if (!(args.tol > 0.0)) throw ValidationError("tol must be > 0");

    UNetConfig cfg;
    cfg.depth = args.depth;
    cfg.base_channels = args.base;
    cfg.input_h = args.size[0];
    cfg.input_w = args.size[1];
    cfg.validate();

    // Both loss paths get exercised: lambda 1 covers the total objective.
    cfg.lambda_bottleneck = 1.0;
    const GradCheckReport report = gradcheck(cfg, args.seed, args.eps);
    for (const auto& group : report.groups) {
        std::printf("%-24s max_rel_err=%.3e max_abs_grad=%.3e\n", group.name.c_str(),
                    group.max_rel_err, group.max_abs_analytic);
    }
    std::printf("worst relative error: %.3e (tolerance %.3e)\n", report.worst_rel_err, args.tol);
    if (!report.passed(args.tol)) {
        std::printf("FAIL\n");
        return kCheckFailed;
    }
    std::printf("PASS\n");
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Encoder-decoder segmentation network with a supervised bottleneck head"};
    app.require_subcommand(1);

    GenDataArgs gen_args;
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic phantom dataset");
    gen->add_option("--out", gen_args.out_dir, "Output directory")->required();
    gen->add_option("--count", gen_args.count, "Number of samples");
    gen->add_option("--size", gen_args.size, "Height and width")->expected(2);
    gen->add_option("--difficulty", gen_args.difficulty, "easy or hard")
        ->check(CLI::IsMember({"easy", "hard"}));
    gen->add_option("--seed", gen_args.seed, "Base seed");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train on a dataset manifest");
    train_cmd->add_option("--data", train_args.manifest_path, "Manifest path")->required();
    train_cmd->add_option("--out", train_args.checkpoint_path, "Checkpoint path")->required();
    train_cmd->add_option("--depth", train_args.depth, "Down-sampling stages");
    train_cmd->add_option("--base", train_args.base, "Base channel width");
    train_cmd->add_option("--lambda", train_args.lambda, "Bottleneck loss weight");
    train_cmd->add_option("--lr", train_args.lr, "Learning rate");
    train_cmd->add_option("--steps", train_args.steps, "Training steps");
    train_cmd->add_option("--seed", train_args.seed, "Seed");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
    eval_cmd->add_option("--data", eval_args.manifest_path, "Manifest path")->required();
    eval_cmd->add_option("--ckpt", eval_args.checkpoint_path, "Checkpoint path")->required();
    eval_cmd->add_flag("--json", eval_args.json, "Structured output");

    PredictArgs predict_args;
    auto* predict_cmd = app.add_subcommand("predict", "Segment a single image");
    predict_cmd->add_option("--image", predict_args.image_path, "Input PGM")->required();
    predict_cmd->add_option("--ckpt", predict_args.checkpoint_path, "Checkpoint path")
        ->required();
    predict_cmd->add_option("--out", predict_args.out_path, "Output mask PGM")->required();

    GradcheckArgs grad_args;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check");
    grad_cmd->add_option("--depth", grad_args.depth, "Down-sampling stages");
    grad_cmd->add_option("--base", grad_args.base, "Base channel width");
    grad_cmd->add_option("--size", grad_args.size, "Height and width")->expected(2);
    grad_cmd->add_option("--seed", grad_args.seed, "Seed");
    grad_cmd->add_option("--eps", grad_args.eps, "Finite-difference step");
    grad_cmd->add_option("--tol", grad_args.tol, "Max relative error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (gen->parsed()) return run_gen_data(gen_args);
        if (train_cmd->parsed()) return run_train(train_args);
        if (eval_cmd->parsed()) return run_eval(eval_args);
        if (predict_cmd->parsed()) return run_predict(predict_args);
        if (grad_cmd->parsed()) return run_gradcheck(grad_args);
    } catch (const NumericDivergence& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}

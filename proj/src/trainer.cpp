#include "unetseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "unetseg/checkpoint.hpp"
#include "unetseg/rng.hpp"

namespace unetseg {

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (lambda_bottleneck < 0.0) throw ConfigError("lambda must be >= 0");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
}

TotalLoss total_loss(const ForwardOutput& out, const LabelMap& mask, const LabelMap& down_mask,
                     double lambda) {
    if (lambda < 0.0) throw ValidationError("total_loss: lambda must be >= 0");
    const std::int64_t num_classes = out.seg_logits.shape().c;

    const Tensor4 probs = sigmoid(out.seg_logits);
    const Tensor4 target = one_hot(mask, num_classes);
    const LossResult l1 = l1_loss(probs, target);
    const LossResult ce = pixelwise_cross_entropy(out.bottleneck_logits, down_mask);

    TotalLoss result;
    result.l1_term = l1.value;
    result.ce_term = ce.value;
    result.total = l1.value + lambda * ce.value;
    result.seg_grad = sigmoid_vjp(probs, l1.grad);
    result.bottleneck_grad = Tensor4(ce.grad.shape());
    for (std::int64_t i = 0; i < ce.grad.size(); ++i) {
        result.bottleneck_grad[i] = lambda * ce.grad[i];
    }
    return result;
}

void sgd_step(ParamRegistry& params, SgdState& state, double learning_rate, double momentum) {
    if (state.velocity.empty()) {
        state.velocity.reserve(params.size());
        for (const auto& e : params) state.velocity.emplace_back(e.value.shape());
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        ParamEntry& e = params[p];
        Tensor4& v = state.velocity[p];
        for (std::int64_t i = 0; i < e.value.size(); ++i) {
            v[i] = momentum * v[i] + e.grad[i];
            e.value[i] -= learning_rate * v[i];
            e.grad[i] = 0.0;
        }
    }
}

namespace {

void check_dataset(const Model& model, const std::vector<Sample>& dataset) {
    const UNetConfig& cfg = model.config();
    if (dataset.empty()) throw ConfigError("dataset is empty");
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const Shape4 expect{1, cfg.in_channels, cfg.input_h, cfg.input_w};
        if (dataset[i].image.shape() != expect) {
            throw ConfigError("sample " + std::to_string(i) + " is " +
                              dataset[i].image.shape().str() + ", model configured for " +
                              expect.str());
        }
        for (const std::int32_t cls : dataset[i].mask.data) {
            if (cls < 0 || cls >= cfg.num_classes) {
                throw ConfigError("sample " + std::to_string(i) + " holds label " +
                                  std::to_string(cls) + ", model has " +
                                  std::to_string(cfg.num_classes) + " classes");
            }
        }
    }
}

// Batch of samples stacked along the batch axis.
void stack_batch(const std::vector<Sample>& dataset, const std::vector<std::int64_t>& indices,
                 Tensor4& x, LabelMap& mask) {
    const Shape4 s = dataset[0].image.shape();
    const auto b = static_cast<std::int64_t>(indices.size());
    x = Tensor4({b, s.c, s.h, s.w});
    mask = LabelMap(b, s.h, s.w);
    const std::int64_t image_elems = s.c * s.h * s.w;
    const std::int64_t mask_elems = s.h * s.w;
    for (std::int64_t k = 0; k < b; ++k) {
        const Sample& sample = dataset[static_cast<std::size_t>(indices[k])];
        std::copy(sample.image.data(), sample.image.data() + image_elems,
                  x.data() + k * image_elems);
        std::copy(sample.mask.data.begin(), sample.mask.data.end(),
                  mask.data.begin() + k * mask_elems);
    }
}

void shuffle(std::vector<std::int64_t>& perm, Rng& rng) {
    for (std::int64_t i = static_cast<std::int64_t>(perm.size()) - 1; i >= 1; --i) {
        const std::int64_t j = rng.below(i + 1);
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
}

}  // namespace

TrainResult train(Model& model, const std::vector<Sample>& dataset, const TrainConfig& cfg) {
    cfg.validate();
    check_dataset(model, dataset);

    const auto n = static_cast<std::int64_t>(dataset.size());
    const std::int64_t batch = std::min(cfg.batch_size, n);
    const std::int64_t factor = model.config().pool_factor();

    Rng shuffle_rng(mix_seed(cfg.seed, 0));
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::int64_t pos = n;  // forces a shuffle before the first batch

    SgdState state;
    TrainResult result;
    result.log.reserve(static_cast<std::size_t>(cfg.steps));

    Tensor4 x;
    LabelMap mask;
    std::vector<std::int64_t> indices(static_cast<std::size_t>(batch));
    for (std::int64_t step = 1; step <= cfg.steps; ++step) {
        if (pos + batch > n) {
            shuffle(perm, shuffle_rng);
            pos = 0;
        }
        for (std::int64_t k = 0; k < batch; ++k) {
            indices[static_cast<std::size_t>(k)] = perm[static_cast<std::size_t>(pos + k)];
        }
        pos += batch;

        stack_batch(dataset, indices, x, mask);
        const LabelMap down_mask = downsample_labels(mask, factor);
        const ForwardOutput out = model.forward(x);
        const TotalLoss loss = total_loss(out, mask, down_mask, cfg.lambda_bottleneck);
        if (!std::isfinite(loss.total)) {
            throw NumericDivergence("non-finite training loss", step);
        }
        model.backward(out, loss.seg_grad, loss.bottleneck_grad);
        sgd_step(model.params(), state, cfg.learning_rate, cfg.momentum);

        result.log.push_back({step, loss.total, loss.l1_term, loss.ce_term});
        if (!cfg.checkpoint_path.empty() &&
            (step % cfg.eval_every == 0 || step == cfg.steps)) {
            save_checkpoint(cfg.checkpoint_path, model);
        }
    }
    return result;
}

std::string format_train_log(const std::vector<TrainLogEntry>& log) {
    std::string out;
    char buf[160];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof(buf), "%lld\t%.9g\t%.9g\t%.9g\n",
                      static_cast<long long>(e.step), e.total, e.l1_term, e.ce_term);
        out += buf;
    }
    return out;
}

EvalReport evaluate(const Model& model, const std::vector<Sample>& dataset) {
    check_dataset(model, dataset);
    const UNetConfig& cfg = model.config();
    const std::int64_t factor = cfg.pool_factor();
    // Binary segmentation reports the lesion class; multi-class reports
    // every class one-vs-rest and macro-averages.
    const std::int64_t first_class = cfg.num_classes == 2 ? 1 : 0;

    EvalReport report;
    std::vector<ConfusionCounts> aggregate(
        static_cast<std::size_t>(cfg.num_classes - first_class));
    double ce_sum = 0.0;
    for (const Sample& sample : dataset) {
        const ForwardOutput out = model.forward(sample.image);
        const LabelMap pred = argmax_channels(out.seg_logits);
        std::vector<ConfusionCounts> counts;
        for (std::int64_t cls = first_class; cls < cfg.num_classes; ++cls) {
            counts.push_back(
                confusion_one_vs_rest(pred, sample.mask, static_cast<std::int32_t>(cls)));
        }
        for (std::size_t k = 0; k < counts.size(); ++k) aggregate[k] += counts[k];
        report.per_sample.push_back(std::move(counts));

        const LabelMap down_mask = downsample_labels(sample.mask, factor);
        ce_sum += pixelwise_cross_entropy(out.bottleneck_logits, down_mask).value;
    }
    report.summary = summarize(aggregate, ce_sum / static_cast<double>(dataset.size()));
    return report;
}

CheckBatch make_check_batch(const UNetConfig& cfg, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 1));
    CheckBatch batch;
    batch.input = Tensor4({1, cfg.in_channels, cfg.input_h, cfg.input_w});
    for (auto& v : batch.input) v = rng.uniform01();
    batch.mask = LabelMap(1, cfg.input_h, cfg.input_w);
    for (auto& cls : batch.mask.data) {
        cls = static_cast<std::int32_t>(rng.below(cfg.num_classes));
    }
    batch.down_mask = downsample_labels(batch.mask, cfg.pool_factor());
    return batch;
}

double loss_value(const Model& model, const CheckBatch& batch, double lambda) {
    const ForwardOutput out = model.forward(batch.input);
    return total_loss(out, batch.mask, batch.down_mask, lambda).total;
}

std::vector<Tensor4> analytic_gradients(Model& model, const CheckBatch& batch, double lambda) {
    model.params().zero_grads();
    const ForwardOutput out = model.forward(batch.input);
    const TotalLoss loss = total_loss(out, batch.mask, batch.down_mask, lambda);
    model.backward(out, loss.seg_grad, loss.bottleneck_grad);
    std::vector<Tensor4> grads;
    grads.reserve(model.params().size());
    for (const auto& e : model.params()) grads.push_back(e.grad);
    model.params().zero_grads();
    return grads;
}

std::vector<Tensor4> numeric_gradients(Model& model, const CheckBatch& batch, double lambda,
                                       double eps) {
    if (!(eps > 0.0)) throw ValidationError("numeric_gradients: eps must be > 0");
    std::vector<Tensor4> grads;
    grads.reserve(model.params().size());
    for (std::size_t p = 0; p < model.params().size(); ++p) {
        ParamEntry& entry = model.params()[p];
        Tensor4 grad(entry.value.shape());
        for (std::int64_t i = 0; i < entry.value.size(); ++i) {
            const double saved = entry.value[i];
            entry.value[i] = saved + eps;
            const double plus = loss_value(model, batch, lambda);
            entry.value[i] = saved - eps;
            const double minus = loss_value(model, batch, lambda);
            entry.value[i] = saved;
            grad[i] = (plus - minus) / (2.0 * eps);
        }
        grads.push_back(std::move(grad));
    }
    return grads;
}

GradCheckReport compare_gradients(const ParamRegistry& params,
                                  const std::vector<Tensor4>& analytic,
                                  const std::vector<Tensor4>& numeric) {
    if (analytic.size() != params.size() || numeric.size() != params.size()) {
        throw ValidationError("compare_gradients: gradient list size mismatch");
    }
    GradCheckReport report;
    for (std::size_t p = 0; p < params.size(); ++p) {
        GradCheckGroup group;
        group.name = params[p].name;
        for (std::int64_t i = 0; i < analytic[p].size(); ++i) {
            const double a = analytic[p][i];
            const double n = numeric[p][i];
            const double denom = std::max({std::abs(a), std::abs(n), 1e-6});
            group.max_rel_err = std::max(group.max_rel_err, std::abs(a - n) / denom);
            group.max_abs_analytic = std::max(group.max_abs_analytic, std::abs(a));
        }
        report.worst_rel_err = std::max(report.worst_rel_err, group.max_rel_err);
        report.groups.push_back(std::move(group));
    }
    return report;
}

GradCheckReport gradcheck(const UNetConfig& config, std::uint64_t seed, double eps) {
    Model model(config, seed);
    const CheckBatch batch = make_check_batch(config, seed);
    const std::vector<Tensor4> analytic =
        analytic_gradients(model, batch, config.lambda_bottleneck);
    const std::vector<Tensor4> numeric =
        numeric_gradients(model, batch, config.lambda_bottleneck, eps);
    return compare_gradients(model.params(), analytic, numeric);
}

}  // namespace unetseg

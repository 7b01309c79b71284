#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unetseg/data.hpp"
#include "unetseg/losses.hpp"
#include "unetseg/metrics.hpp"
#include "unetseg/model.hpp"

namespace unetseg {

struct TrainConfig {
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::int64_t batch_size = 4;
    std::int64_t steps = 500;
    double lambda_bottleneck = 1.0;
    std::uint64_t seed = 0;
    std::int64_t eval_every = 100;  // checkpoint interval, in steps
    std::string checkpoint_path;    // empty: no checkpoints written

    void validate() const;  // throws ConfigError
};

// Combined objective and its gradients with respect to both logit tensors:
//   L = l1(sigmoid(seg_logits), onehot(mask)) + lambda * ce(bottleneck, down_mask)
// The sigmoid chain rule is applied inside, so seg_grad is with respect to
// the raw logits.
struct TotalLoss {
    double total = 0.0;
    double l1_term = 0.0;
    double ce_term = 0.0;  // unweighted cross-entropy value
    Tensor4 seg_grad;
    Tensor4 bottleneck_grad;
};
TotalLoss total_loss(const ForwardOutput& out, const LabelMap& mask, const LabelMap& down_mask,
                     double lambda);

// Momentum buffers, one per registry entry, created zeroed on first step.
struct SgdState {
    std::vector<Tensor4> velocity;
};

// v <- momentum*v + grad; param <- param - lr*v; gradients cleared after.
void sgd_step(ParamRegistry& params, SgdState& state, double learning_rate, double momentum);

struct TrainLogEntry {
    std::int64_t step = 0;
    double total = 0.0;
    double l1_term = 0.0;
    double ce_term = 0.0;
};

struct TrainResult {
    std::vector<TrainLogEntry> log;
};

// Deterministic loop: batches drawn from a seeded shuffle (epochs of a
// permutation, remainder dropped), checkpoints written at eval_every and at
// the final step. Throws NumericDivergence on a non-finite loss.
TrainResult train(Model& model, const std::vector<Sample>& dataset, const TrainConfig& cfg);

// Tab-separated "step L_total L1 CE" lines, one per step.
std::string format_train_log(const std::vector<TrainLogEntry>& log);

struct EvalReport {
    MetricSummary summary;
    std::vector<std::vector<ConfusionCounts>> per_sample;  // per-class counts per sample
};

// Argmax prediction per sample (ties to the lowest class), confusion counts
// aggregated over all pixels of all samples, plus the bottleneck head's
// cross-entropy as a diagnostic.
EvalReport evaluate(const Model& model, const std::vector<Sample>& dataset);

// --- gradient checking -----------------------------------------------------

struct GradCheckGroup {
    std::string name;
    double max_rel_err = 0.0;
    double max_abs_analytic = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckGroup> groups;
    double worst_rel_err = 0.0;

    bool passed(double tolerance) const { return worst_rel_err <= tolerance; }
};

// Deterministic check fixture: a uniform random input with random labels,
// both derived from `seed`.
struct CheckBatch {
    Tensor4 input;
    LabelMap mask;
    LabelMap down_mask;
};
CheckBatch make_check_batch(const UNetConfig& cfg, std::uint64_t seed);

// Scalar L_total at the model's current parameters.
double loss_value(const Model& model, const CheckBatch& batch, double lambda);

// One backward pass from zeroed buffers; grads copied out, buffers cleared.
std::vector<Tensor4> analytic_gradients(Model& model, const CheckBatch& batch, double lambda);

// Central differences parameter by parameter; restores parameters after.
std::vector<Tensor4> numeric_gradients(Model& model, const CheckBatch& batch, double lambda,
                                       double eps);

// Guarded relative error |a - n| / max(|a|, |n|, 1e-6), worst per group.
GradCheckReport compare_gradients(const ParamRegistry& params,
                                  const std::vector<Tensor4>& analytic,
                                  const std::vector<Tensor4>& numeric);

// Whole-model gradient check of L_total at the given config's lambda.
GradCheckReport gradcheck(const UNetConfig& config, std::uint64_t seed, double eps);

}  // namespace unetseg

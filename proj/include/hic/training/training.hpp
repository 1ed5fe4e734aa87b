#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hic/prompting/prompting.hpp"
#include "hic/xfusion/loss.hpp"
#include "hic/xfusion/net.hpp"

namespace hic {

struct TrainConfig {
    double learning_rate = 2e-4;
    double lr_decay = 0.99;  // multiplicative, applied once per epoch
    std::size_t steps = 500;
    std::size_t steps_per_epoch = 50;
    std::size_t batch_size = 4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    LossWeights loss;
    std::uint64_t seed = 0;
    std::vector<TaskId> domains{kAllTasks.begin(), kAllTasks.end()};
    double mask_ratio = kDefaultMaskRatio;
    bool train_soft_anchors = true;
    bool domain_filter_retrieval = false;

    // Throws ConfigError naming the offending field.
    void validate() const;
};

// lr_0 * decay^epoch
double lr_at_epoch(const TrainConfig& config, std::size_t epoch);
inline double lr_at_step(const TrainConfig& config, std::size_t step) {
    return lr_at_epoch(config, step / config.steps_per_epoch);
}

// Derived task samples for every clip and domain, in clip-major order; the
// pool that anchors are sampled from.
Corpus build_corpus(const Dataset& dataset, std::span<const TaskId> domains, std::uint64_t seed,
                    double mask_ratio = kDefaultMaskRatio);

struct BatchItem {
    std::size_t clip;
    TaskSample sample;
    RetrievedPrompt prompt;
};

// Uniform (clip, domain) draws; deterministic in batch_seed.
std::vector<BatchItem> build_batch(const Dataset& dataset, const AnchorSet& anchors, const TrainConfig& config,
                                   std::uint64_t batch_seed);

// First and second moments for one list of tensors.
struct Moments {
    std::vector<Mat> first;
    std::vector<Mat> second;
    std::size_t step = 0;
};

struct OptimizerState {
    Moments network;
    std::vector<Moments> soft;  // per anchor; step counts only retrieved updates
};

OptimizerState init_optimizer(const XFusionParams& params, const AnchorSet& anchors);

// p <- (1 - lr*decay) p, then the bias-corrected Adam step with moments m, v at step t (t >= 1).
void adamw_update(Mat& p, const Mat& grad, Mat& m, Mat& v, std::size_t t, double lr, const TrainConfig& config);

struct StepReport {
    std::size_t step = 0;
    double lr = 0.0;
    double loss = 0.0;
    double position = 0.0;
    double velocity = 0.0;
    double shape = 0.0;
};

// Mean batch loss, one backward pass, AdamW on all network parameters and on the
// soft factors of anchors retrieved in this batch. Hard anchors are never written.
// Throws NumericError naming batch_id when the loss or a gradient is not finite.
StepReport train_step(const XFusionNet& net, std::span<const BatchItem> batch, XFusionParams& params,
                      AnchorSet& anchors, OptimizerState& state, const TrainConfig& config, double lr,
                      std::size_t batch_id);

using StepCallback = std::function<void(const StepReport&)>;

// config.steps steps with batches drawn from mix_seed(config.seed, step).
void train(const XFusionNet& net, XFusionParams& params, AnchorSet& anchors, const Dataset& dataset,
           const TrainConfig& config, const StepCallback& on_step = {});

// Fixed evaluation tasks: clip-major, domain order as given, seeds from mix_seed(seed, index).
std::vector<BatchItem> evaluation_items(const Dataset& dataset, const AnchorSet& anchors,
                                        std::span<const TaskId> domains, std::uint64_t seed,
                                        double mask_ratio = kDefaultMaskRatio, bool domain_filter = false);

// Mean loss over items with the current parameters; side-effect free.
double mean_loss(const XFusionNet& net, const XFusionParams& params, const AnchorSet& anchors,
                 std::span<const BatchItem> items, const LossWeights& weights);

// Maps a task sample and its retrieved anchor to a predicted target sequence.
using Predictor = std::function<MotionSequence(const TaskSample&, const Anchor&, const SoftAnchor*)>;
Predictor network_predictor(const XFusionNet& net, const XFusionParams& params);

// Wraps raw network output as a sequence shaped like `like`: virtual joints
// zeroed, z zeroed for 2-D output, beta attached for mesh output.
MotionSequence as_sequence(const NdBuffer& motion, const Vec& beta, const MotionSequence& like);

struct DomainMetric {
    std::string metric;  // "mpjpe_mm" or "param_l2"
    double value = 0.0;
    std::size_t count = 0;
};
using EvalTable = std::map<TaskId, DomainMetric>;

EvalTable evaluate(std::span<const BatchItem> items, const AnchorSet& anchors, const Predictor& predict,
                   double unit_to_mm);

}  // namespace hic

#include "hic/training/training.hpp"

#include <cmath>
#include <optional>

#include "hic/numeric/rng.hpp"

namespace hic {
namespace {

void require(bool ok, const char* field, const char* what) {
    if (!ok) throw ConfigError(field, what);
}

bool finite(const Mat& m) { return m.allFinite(); }

Moments zero_moments(std::span<const Mat> like) {
    Moments m;
    for (const Mat& p : like) {
        m.first.push_back(Mat::Zero(p.rows(), p.cols()));
        m.second.push_back(Mat::Zero(p.rows(), p.cols()));
    }
    return m;
}

std::optional<Var> soft_term(Tape& tape, const AnchorSet& anchors, std::size_t index) {
    if (anchors.soft.empty()) return std::nullopt;
    return tape.constant(soft_anchor_value(anchors.soft.at(index)));
}

std::optional<TaskId> filter_for(TaskId domain, bool enabled) {
    return enabled ? std::optional<TaskId>(domain) : std::nullopt;
}

}  // namespace

void TrainConfig::validate() const {
    require(std::isfinite(learning_rate) && learning_rate >= 0.0, "learning_rate", "must be finite and non-negative");
    require(lr_decay > 0.0 && lr_decay <= 1.0, "lr_decay", "must lie in (0, 1]");
    require(steps_per_epoch > 0, "steps_per_epoch", "must be positive");
    require(batch_size > 0, "batch_size", "must be positive");
    require(weight_decay >= 0.0, "weight_decay", "must be non-negative");
    require(beta1 >= 0.0 && beta1 < 1.0, "beta1", "must lie in [0, 1)");
    require(beta2 >= 0.0 && beta2 < 1.0, "beta2", "must lie in [0, 1)");
    require(epsilon > 0.0, "epsilon", "must be positive");
    require(loss.position >= 0.0, "loss_position", "must be non-negative");
    require(loss.velocity >= 0.0, "loss_velocity", "must be non-negative");
    require(loss.shape >= 0.0, "loss_shape", "must be non-negative");
    require(!domains.empty(), "domains", "must name at least one task");
    require(mask_ratio >= 0.0 && mask_ratio < 1.0, "mask_ratio", "must lie in [0, 1)");
}

double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
    return config.learning_rate * std::pow(config.lr_decay, static_cast<double>(epoch));
}

Corpus build_corpus(const Dataset& dataset, std::span<const TaskId> domains, std::uint64_t seed, double mask_ratio) {
    dataset.validate();
    Corpus corpus;
    corpus.reserve(dataset.clips.size() * domains.size());
    for (std::size_t c = 0; c < dataset.clips.size(); ++c)
        for (std::size_t d = 0; d < domains.size(); ++d) {
            TaskSample s = derive_task(dataset.clips[c], domains[d], mix_seed(seed, c * domains.size() + d), mask_ratio);
            corpus.push_back({std::move(s.query_input), std::move(s.query_target), domains[d]});
        }
    return corpus;
}

std::vector<BatchItem> build_batch(const Dataset& dataset, const AnchorSet& anchors, const TrainConfig& config,
                                   std::uint64_t batch_seed) {
    if (dataset.clips.empty()) throw StateError("cannot build a batch from an empty dataset");
    if (anchors.size() == 0) throw StateError("cannot build a batch without anchors");
    if (config.domains.empty()) throw ConfigError("domains", "must name at least one task");
    Rng rng(batch_seed);
    std::vector<BatchItem> batch;
    batch.reserve(config.batch_size);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
        const std::size_t clip = rng.uniform_index(dataset.clips.size());
        const TaskId domain = config.domains[rng.uniform_index(config.domains.size())];
        TaskSample sample = derive_task(dataset.clips[clip], domain, rng.next_u64(), config.mask_ratio);
        RetrievedPrompt prompt =
            retrieve_prompt(sample.query_input, anchors, filter_for(domain, config.domain_filter_retrieval));
        batch.push_back({clip, std::move(sample), prompt});
    }
    return batch;
}

OptimizerState init_optimizer(const XFusionParams& params, const AnchorSet& anchors) {
    OptimizerState state;
    state.network = zero_moments(flatten(params));
    for (const SoftAnchor& s : anchors.soft) {
        const Mat pair[] = {s.w1, s.w2};
        state.soft.push_back(zero_moments(pair));
    }
    return state;
}

void adamw_update(Mat& p, const Mat& grad, Mat& m, Mat& v, std::size_t t, double lr, const TrainConfig& config) {
    if (t == 0) throw DomainError("adamw step count starts at 1");
    p *= 1.0 - lr * config.weight_decay;
    m = config.beta1 * m + (1.0 - config.beta1) * grad;
    v = config.beta2 * v + (1.0 - config.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.epsilon);
}

StepReport train_step(const XFusionNet& net, std::span<const BatchItem> batch, XFusionParams& params,
                      AnchorSet& anchors, OptimizerState& state, const TrainConfig& config, double lr,
                      std::size_t batch_id) {
    if (batch.empty()) throw StateError("empty batch");
    const bool update_soft = config.train_soft_anchors && !anchors.soft.empty();
    if (update_soft && state.soft.size() != anchors.soft.size())
        throw StateError("optimizer state does not match the anchor set");

    Tape tape;
    const BoundParams bound = bind(tape, params);
    std::vector<std::size_t> retrieved;
    std::vector<std::pair<Var, Var>> soft_vars;
    StepReport report;
    report.lr = lr;
    const double inv = 1.0 / static_cast<double>(batch.size());
    std::optional<Var> total;
    try {
        for (const BatchItem& item : batch) {
            const std::size_t k = item.prompt.index;
            const Anchor& anchor = anchors.anchors.at(k);
            std::optional<Var> u;
            if (update_soft) {
                std::size_t slot = 0;
                while (slot < retrieved.size() && retrieved[slot] != k) ++slot;
                if (slot == retrieved.size()) {
                    retrieved.push_back(k);
                    soft_vars.emplace_back(tape.parameter(anchors.soft[k].w1), tape.parameter(anchors.soft[k].w2));
                }
                u = matmul(soft_vars[slot].first, soft_vars[slot].second);
            } else {
                u = soft_term(tape, anchors, k);
            }
            const ForwardResult out = forward(net, bound, item.sample.query_input, anchor.input, anchor.target, u);
            const LossTerms terms = motion_loss(out.prediction, out.shape, item.sample, config.loss);
            report.position += inv * terms.position;
            report.velocity += inv * terms.velocity;
            report.shape += inv * terms.shape;
            const Var scaled = scale(terms.total, inv);
            total = total ? *total + scaled : scaled;
        }
    } catch (const NumericError& e) {
        throw NumericError("batch " + std::to_string(batch_id) + ": " + e.what(), e.op());
    }
    report.loss = total->value()(0, 0);
    tape.backward(*total);

    std::vector<Var> vars;
    visit_params(bound, [&](const std::string&, const Var& v) { vars.push_back(v); });
    std::vector<Mat> grads;
    grads.reserve(vars.size());
    for (const Var& v : vars) {
        grads.push_back(tape.grad(v));
        if (!finite(grads.back()))
            throw NumericError("batch " + std::to_string(batch_id) + ": non-finite gradient", "backward");
    }

    Moments& net_m = state.network;
    if (net_m.first.size() != grads.size()) throw StateError("optimizer state does not match the parameters");
    ++net_m.step;
    std::size_t i = 0;
    visit_params(params, [&](const std::string&, Mat& p) {
        adamw_update(p, grads[i], net_m.first[i], net_m.second[i], net_m.step, lr, config);
        ++i;
    });

    for (std::size_t s = 0; s < retrieved.size(); ++s) {
        SoftAnchor& soft = anchors.soft[retrieved[s]];
        Moments& m = state.soft[retrieved[s]];
        const Mat g1 = tape.grad(soft_vars[s].first), g2 = tape.grad(soft_vars[s].second);
        if (!finite(g1) || !finite(g2))
            throw NumericError("batch " + std::to_string(batch_id) + ": non-finite soft-anchor gradient", "backward");
        ++m.step;
        adamw_update(soft.w1, g1, m.first[0], m.second[0], m.step, lr, config);
        adamw_update(soft.w2, g2, m.first[1], m.second[1], m.step, lr, config);
    }
    return report;
}

void train(const XFusionNet& net, XFusionParams& params, AnchorSet& anchors, const Dataset& dataset,
           const TrainConfig& config, const StepCallback& on_step) {
    config.validate();
    OptimizerState state = init_optimizer(params, anchors);
    for (std::size_t step = 0; step < config.steps; ++step) {
        const std::vector<BatchItem> batch = build_batch(dataset, anchors, config, mix_seed(config.seed, step));
        StepReport r = train_step(net, batch, params, anchors, state, config, lr_at_step(config, step), step);
        r.step = step;
        if (on_step) on_step(r);
    }
}

std::vector<BatchItem> evaluation_items(const Dataset& dataset, const AnchorSet& anchors,
                                        std::span<const TaskId> domains, std::uint64_t seed, double mask_ratio,
                                        bool domain_filter) {
    if (dataset.clips.empty()) throw StateError("cannot evaluate on an empty dataset");
    std::vector<BatchItem> items;
    items.reserve(dataset.clips.size() * domains.size());
    for (std::size_t c = 0; c < dataset.clips.size(); ++c)
        for (std::size_t d = 0; d < domains.size(); ++d) {
            TaskSample s = derive_task(dataset.clips[c], domains[d], mix_seed(seed, c * domains.size() + d), mask_ratio);
            RetrievedPrompt p = retrieve_prompt(s.query_input, anchors, filter_for(domains[d], domain_filter));
            items.push_back({c, std::move(s), p});
        }
    return items;
}

double mean_loss(const XFusionNet& net, const XFusionParams& params, const AnchorSet& anchors,
                 std::span<const BatchItem> items, const LossWeights& weights) {
    if (items.empty()) throw StateError("mean_loss over no items");
    double total = 0.0;
    for (const BatchItem& item : items) {
        Tape tape;
        const BoundParams bound = bind(tape, params);
        const Anchor& anchor = anchors.anchors.at(item.prompt.index);
        const ForwardResult out = forward(net, bound, item.sample.query_input, anchor.input, anchor.target,
                                          soft_term(tape, anchors, item.prompt.index));
        total += motion_loss(out.prediction, out.shape, item.sample, weights).total.value()(0, 0);
    }
    return total / static_cast<double>(items.size());
}

MotionSequence as_sequence(const NdBuffer& motion, const Vec& beta, const MotionSequence& like) {
    if (motion.shape() != like.values().shape())
        throw DimensionError("prediction " + shape_str(motion.shape()) + " does not match target " +
                             shape_str(like.values().shape()));
    NdBuffer v = motion;
    for (std::size_t f = 0; f < like.frames(); ++f)
        for (std::size_t j = 0; j < like.joints(); ++j) {
            if (j >= like.native_joint_count())
                for (std::size_t c = 0; c < kChannels; ++c) v.at(f, j, c) = 0.0;
            if (like.modality() == Modality::Pose2D) v.at(f, j, 2) = 0.0;
        }
    const bool mesh = like.modality() == Modality::MeshParams;
    return MotionSequence(std::move(v), like.modality(), like.native_joint_count(),
                          mesh ? beta : Vec(Vec::Zero(kShapeParams)));
}

Predictor network_predictor(const XFusionNet& net, const XFusionParams& params) {
    return [&net, &params](const TaskSample& sample, const Anchor& anchor, const SoftAnchor* soft) {
        Prediction p = predict(net, params, sample.query_input, anchor.input, anchor.target, soft);
        return as_sequence(p.motion, p.shape, sample.query_target);
    };
}

EvalTable evaluate(std::span<const BatchItem> items, const AnchorSet& anchors, const Predictor& predict,
                   double unit_to_mm) {
    EvalTable table;
    for (const BatchItem& item : items) {
        const std::size_t k = item.prompt.index;
        const SoftAnchor* soft = anchors.soft.empty() ? nullptr : &anchors.soft.at(k);
        const MotionSequence pred = predict(item.sample, anchors.anchors.at(k), soft);
        const MotionSequence& target = item.sample.query_target;
        DomainMetric& row = table[item.sample.domain];
        if (is_mesh_output(item.sample.domain)) {
            row.metric = "param_l2";
            row.value += mean_parameter_l2(pred, target);
        } else {
            row.metric = "mpjpe_mm";
            row.value += mpjpe(pred, target, unit_to_mm);
        }
        ++row.count;
    }
    for (auto& [domain, row] : table) row.value /= static_cast<double>(row.count);
    return table;
}

}  // namespace hic

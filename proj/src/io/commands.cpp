#include "hic/io/commands.hpp"

#include <iomanip>

#include "hic/numeric/grad_check.hpp"
#include "hic/numeric/rng.hpp"

namespace hic {
namespace {

using nlohmann::json;

XFusionConfig model_for(const RunConfig& config, const Dataset& data) {
    XFusionConfig m = config.model;
    m.frames = data.window();
    m.joints = data.joints();
    return m;
}

TrainConfig train_for(const RunConfig& config) {
    TrainConfig t = config.train;
    t.seed = stage_seed(config, SeedTag::Train);
    t.validate();
    return t;
}

// Recomputes the anchor corpus fingerprint from the dataset; a mismatch only warns.
void check_fingerprint(const AnchorFile& anchors, const Dataset& data, std::ostream& err) {
    if (anchors.recipe.domains.empty()) return;
    const Corpus corpus = build_corpus(data, anchors.recipe.domains, anchors.recipe.seed, anchors.recipe.mask_ratio);
    const std::uint64_t fp = corpus_fingerprint(corpus);
    if (fp != anchors.set.corpus_fingerprint)
        err << "warning: dataset corpus fingerprint " << hex64(fp) << " differs from the anchor file's "
            << hex64(anchors.set.corpus_fingerprint) << "\n";
}

void require_window(const AnchorSet& anchors, const Dataset& data) {
    if (anchors.frames() != data.window() || anchors.joints() != data.joints())
        throw DimensionError("anchors are " + std::to_string(anchors.frames()) + "x" +
                             std::to_string(anchors.joints()) + ", dataset windows are " +
                             std::to_string(data.window()) + "x" + std::to_string(data.joints()));
}

void print_steps(const AnchorSet& set, std::ostream& out) {
    out << std::setprecision(17);
    for (std::size_t k = 0; k < set.size(); ++k) {
        out << "anchor " << k << " source " << set.anchors[k].source_index;
        if (k > 0 && k - 1 < set.step_values.size()) out << " maxmin " << set.step_values[k - 1];
        out << "\n";
    }
}

}  // namespace

Dataset cmd_synth(const RunConfig& config, const Path& out_path, std::ostream& out) {
    SynthConfig s = config.synth;
    s.seed = config.seed;
    Dataset d = synthesize(s);
    write_dataset(out_path, d);
    out << "wrote " << d.clips.size() << " clips of " << 2 * d.window() << " frames x " << d.joints()
        << " joints to " << out_path.string() << "\n";
    return d;
}

AnchorFile cmd_sample_anchors(const RunConfig& config, const Path& dataset_path, const Path& out_path,
                              std::ostream& out) {
    const Dataset data = read_dataset(dataset_path);
    const CorpusRecipe recipe{config.train.domains, stage_seed(config, SeedTag::Corpus), config.train.mask_ratio};
    const Corpus corpus = build_corpus(data, recipe.domains, recipe.seed, recipe.mask_ratio);
    AnchorFile file{{}, recipe};
    switch (config.method) {
        case SamplingMethod::Sps: file.set = sps_sample(corpus, config.k); break;
        case SamplingMethod::Random: file.set = random_sample(corpus, config.k, stage_seed(config, SeedTag::Corpus)); break;
        case SamplingMethod::Cluster:
            file.set = cluster_sample(corpus, config.k, stage_seed(config, SeedTag::Corpus));
            break;
    }
    initialize_soft_anchors(file.set, config.model.hidden, stage_seed(config, SeedTag::Soft));
    write_anchors(out_path, file);
    out << sampling_method_name(file.set.method) << ": " << file.set.size() << " anchors from a corpus of "
        << corpus.size() << "\n";
    print_steps(file.set, out);
    return file;
}

Corpus scalar_toy_corpus() {
    Corpus c;
    for (double x : {1.0, 2.0, 10.0}) {
        const MotionSequence s(NdBuffer({1, 1, kChannels}, {x, 0.0, 0.0}), Modality::MeshParams, 1);
        c.push_back({s, s, TaskId::MP_M});
    }
    return c;
}

AnchorFile cmd_sample_toy(const RunConfig& config, const Path& out_path, std::ostream& out) {
    const Corpus corpus = scalar_toy_corpus();
    AnchorFile file{{}, {}};
    switch (config.method) {
        case SamplingMethod::Sps: file.set = sps_sample(corpus, config.k); break;
        case SamplingMethod::Random: file.set = random_sample(corpus, config.k, config.seed); break;
        case SamplingMethod::Cluster: file.set = cluster_sample(corpus, config.k, config.seed); break;
    }
    write_anchors(out_path, file);
    out << "order";
    for (const Anchor& a : file.set.anchors) out << " " << a.input.values()[0];
    out << "\n";
    print_steps(file.set, out);
    return file;
}

RetrievedPrompt cmd_retrieve(const RunConfig& config, const Path& anchors_path, const RetrieveQuery& query,
                             std::ostream& out, std::ostream& err) {
    const AnchorFile file = read_anchors(anchors_path);
    const int sources = int(query.anchor.has_value()) + int(query.scalar.has_value()) + int(query.dataset.has_value());
    if (sources != 1) throw ConfigError("query", "give exactly one of an anchor index, a scalar or a dataset");
    std::optional<MotionSequence> q;
    std::optional<TaskId> filter;
    if (query.anchor) {
        if (*query.anchor >= file.set.size())
            throw IndexError("anchor " + std::to_string(*query.anchor) + " out of range for " +
                             std::to_string(file.set.size()) + " anchors");
        q = file.set.anchors[*query.anchor].input;
    } else if (query.scalar) {
        q = MotionSequence(NdBuffer({1, 1, kChannels}, {*query.scalar, 0.0, 0.0}), Modality::MeshParams, 1);
    } else {
        const Dataset data = read_dataset(*query.dataset);
        check_fingerprint(file, data, err);
        if (query.clip >= data.clips.size())
            throw IndexError("clip " + std::to_string(query.clip) + " out of range for " +
                             std::to_string(data.clips.size()) + " clips");
        q = derive_task(data.clips[query.clip], query.domain, stage_seed(config, SeedTag::Eval),
                        config.train.mask_ratio)
                .query_input;
        if (query.domain_filter) filter = query.domain;
    }
    const RetrievedPrompt r = retrieve_prompt(*q, file.set, filter);
    out << std::setprecision(17) << "best " << r.index << " similarity " << r.similarity << " margin ";
    if (r.margin)
        out << *r.margin;
    else
        out << "none";
    out << "\n";
    return r;
}

TaskSample cmd_derive(const RunConfig& config, const Path& dataset_path, std::size_t clip, TaskId domain,
                      std::ostream& out) {
    const Dataset data = read_dataset(dataset_path);
    if (clip >= data.clips.size())
        throw IndexError("clip " + std::to_string(clip) + " out of range for " + std::to_string(data.clips.size()) +
                         " clips");
    TaskSample s = derive_task(data.clips[clip], domain, config.seed, config.train.mask_ratio);
    auto zeros = [](const std::optional<Mask>& m) {
        json idx = json::array();
        if (m)
            for (std::size_t i = 0; i < m->size(); ++i)
                if ((*m)[i] == 0) idx.push_back(i);
        return idx;
    };
    const json summary = {{"domain", std::string(task_name(domain))},
                          {"clip", clip},
                          {"input", modality_name(s.query_input.modality())},
                          {"target", modality_name(s.query_target.modality())},
                          {"frames", s.query_input.frames()},
                          {"joints", s.query_input.joints()},
                          {"masked_frames", zeros(s.time_mask)},
                          {"masked_joints", zeros(s.joint_mask)}};
    out << summary.dump() << "\n";
    return s;
}

Checkpoint cmd_train(const RunConfig& config, const Path& dataset_path, const Path& anchors_path,
                     const Path& out_path, std::ostream& log, std::ostream& err) {
    const Dataset data = read_dataset(dataset_path);
    AnchorFile anchors = read_anchors(anchors_path);
    require_window(anchors.set, data);
    check_fingerprint(anchors, data, err);
    const XFusionConfig model = model_for(config, data);
    if (anchors.set.hidden() != model.hidden)
        throw ConfigError("hidden", "anchor file soft factors have width " + std::to_string(anchors.set.hidden()) +
                                        ", model hidden is " + std::to_string(model.hidden));
    const TrainConfig train_config = train_for(config);
    const XFusionNet net(model);
    XFusionParams params = init_params(model, stage_seed(config, SeedTag::Init));
    log << std::setprecision(17);
    train(net, params, anchors.set, data, train_config, [&](const StepReport& r) {
        const json line = {{"step", r.step},
                           {"epoch", r.step / train_config.steps_per_epoch},
                           {"lr", r.lr},
                           {"loss", r.loss},
                           {"position", r.position},
                           {"velocity", r.velocity},
                           {"shape", r.shape}};
        log << line.dump() << "\n";
    });
    Checkpoint c{model, std::move(params), anchors.set.soft, anchors.set.corpus_fingerprint, train_config.steps};
    write_checkpoint(out_path, c);
    return c;
}

EvalTable cmd_eval(const RunConfig& config, const Path& dataset_path, const Path& anchors_path,
                   const Path& checkpoint_path, std::ostream& out, std::ostream& err) {
    const Dataset data = read_dataset(dataset_path);
    AnchorFile anchors = read_anchors(anchors_path);
    const Checkpoint ckpt = read_checkpoint(checkpoint_path);
    require_window(anchors.set, data);
    check_fingerprint(anchors, data, err);
    if (ckpt.config.frames != data.window() || ckpt.config.joints != data.joints())
        throw DimensionError("checkpoint does not match the dataset window");
    if (ckpt.anchor_fingerprint != anchors.set.corpus_fingerprint)
        err << "warning: checkpoint was trained against a different anchor corpus\n";
    if (!ckpt.soft.empty()) {
        if (ckpt.soft.size() != anchors.set.size())
            throw DimensionError("checkpoint holds " + std::to_string(ckpt.soft.size()) + " soft anchors, file has " +
                                 std::to_string(anchors.set.size()));
        anchors.set.soft = ckpt.soft;
    }
    const XFusionNet net(ckpt.config);
    const auto items = evaluation_items(data, anchors.set, config.train.domains, stage_seed(config, SeedTag::Eval),
                                        config.train.mask_ratio, config.train.domain_filter_retrieval);
    const EvalTable table = evaluate(items, anchors.set, network_predictor(net, ckpt.params), data.unit_to_mm);
    out << std::fixed << std::setprecision(4);
    for (const auto& [domain, row] : table)
        out << std::left << std::setw(8) << task_name(domain) << " " << std::setw(9) << row.metric << " "
            << row.value << " (" << row.count << ")\n";
    return table;
}

bool cmd_gradcheck(const RunConfig& config, std::ostream& out) {
    XFusionConfig model;
    model.frames = 4;
    model.joints = 5;
    model.hidden = 8;
    model.layers = 2;
    const XFusionNet net(model);
    Rng rng(config.seed);
    XFusionParams params = init_params(model, stage_seed(config, SeedTag::Init));
    // Off the symmetric starting point so the compression path carries gradient.
    for (auto& layer : params.layers)
        for (auto* b : {&layer.query, &layer.prompt})
            for (Eigen::Index i = 0; i < b->compress.size(); ++i) b->compress.data()[i] = 0.3 * rng.normal();

    SynthConfig s;
    s.clips = 2;
    s.frames = model.frames;
    s.joints = model.joints;
    s.seed = config.seed;
    const Dataset data = synthesize(s);
    const TaskSample query = derive_task(data.clips[0], TaskId::MIB_M, config.seed);
    const TaskSample prompt = derive_task(data.clips[1], TaskId::MIB_M, config.seed + 1);

    std::vector<Mat> values = flatten(params);
    Mat w1(model.locations(), 1), w2(1, model.hidden);
    for (Eigen::Index i = 0; i < w1.size(); ++i) w1.data()[i] = 0.1 * rng.normal();
    for (Eigen::Index i = 0; i < w2.size(); ++i) w2.data()[i] = 0.1 * rng.normal();
    values.push_back(w1);
    values.push_back(w2);
    const LossWeights weights;
    const GradCheckResult r = grad_check(
        [&](Tape&, std::span<const Var> v) {
            const BoundParams b = bind_values(v.first(v.size() - 2), model.layers);
            const Var u = matmul(v[v.size() - 2], v[v.size() - 1]);
            const ForwardResult f = forward(net, b, query.query_input, prompt.query_input, prompt.query_target, u);
            return motion_loss(f.prediction, f.shape, query, weights).total;
        },
        values);
    std::vector<std::string> names;
    visit_params(params, [&](const std::string& n, const Mat&) { names.push_back(n); });
    names.push_back("soft.w1");
    names.push_back("soft.w2");
    const bool pass = r.max_rel_error < 1e-4;
    out << std::setprecision(6) << (pass ? "PASS" : "FAIL") << " max rel err " << r.max_rel_error << " at "
        << names[r.worst_param] << "[" << r.worst_coord << "] over " << values.size() << " tensors\n";
    return pass;
}

}  // namespace hic

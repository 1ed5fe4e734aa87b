// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

#include "hic/io/formats.hpp"
#include "hic/io/synth.hpp"
#include "hic/numeric/grad_check.hpp"
#include "hic/training/training.hpp"
#include "test_util.hpp"

using namespace hic;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o{false, ""};
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    char timing[64];
    std::snprintf(timing, sizeof timing, "%.2f s of %.0f s", secs, budget_s);
    std::cout << (pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << " (" << timing
              << (in_time ? "" : ", over budget") << ")" << std::endl;
}

// Negative mean per-location distance, evaluated with plain loops.
double naive_similarity(const MotionSequence& a, const MotionSequence& b) {
    double total = 0.0;
    const std::size_t f = a.frames(), j = a.joints();
    for (std::size_t x = 0; x < f; ++x)
        for (std::size_t y = 0; y < j; ++y) {
            double s = 0.0;
            for (std::size_t c = 0; c < kChannels; ++c) {
                const double d = a.values().at(x, y, c) - b.values().at(x, y, c);
                s += d * d;
            }
            total += std::sqrt(s);
        }
    return -total / static_cast<double>(f * j);
}

std::vector<std::int64_t> oracle_sps(const Corpus& corpus, std::size_t k) {
    std::vector<MotionSequence> anchors = {canonical_tbody(corpus[0].input.frames(), corpus[0].input.joints())};
    std::vector<std::int64_t> order = {-1};
    std::vector<bool> used(corpus.size(), false);
    while (anchors.size() < k && order.size() <= corpus.size()) {
        std::int64_t pick = -1;
        double pick_value = 0.0;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            if (used[i]) continue;
            double best = -INFINITY;
            for (const auto& a : anchors) best = std::max(best, naive_similarity(corpus[i].input, a));
            if (pick < 0 || best < pick_value) {
                pick = static_cast<std::int64_t>(i);
                pick_value = best;
            }
        }
        used[static_cast<std::size_t>(pick)] = true;
        anchors.push_back(corpus[static_cast<std::size_t>(pick)].input);
        order.push_back(pick);
    }
    return order;
}

Corpus random_corpus(Rng& rng, std::size_t n, std::size_t f, std::size_t j) {
    Corpus c;
    for (std::size_t i = 0; i < n; ++i) {
        auto s = test::random_sequence(rng, f, j, rng.uniform(0.5, 3.0));
        c.push_back({s, s, kAllTasks[rng.uniform_index(kTaskCount)]});
    }
    return c;
}

double layer_norm_error(const ViewTrace& t, const ViewParams<Mat>& p) {
    const Mat x = t.input.value() + (t.levels[0].value() + t.levels[1].value() + t.levels[2].value()) / 3.0;
    double worst = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().mean();
        const Eigen::RowVectorXd ref =
            ((x.row(r).array() - mean) / std::sqrt(var + 1e-5)).matrix().cwiseProduct(p.norm_gain.row(0)) +
            p.norm_bias.row(0);
        worst = std::max(worst, (ref - t.output.value().row(r)).cwiseAbs().maxCoeff());
    }
    return worst;
}

struct OverfitSetup {
    Dataset data;
    AnchorSet anchors;
    XFusionConfig model;
    std::vector<TaskId> domains{TaskId::PE, TaskId::MP_P, TaskId::MIB_P};
};

OverfitSetup overfit_setup(std::uint64_t seed) {
    OverfitSetup s;
    SynthConfig sc;
    sc.clips = 16;
    sc.frames = 8;
    sc.joints = 24;
    sc.seed = seed;
    s.data = synthesize(sc);
    s.anchors = sps_sample(build_corpus(s.data, s.domains, mix_seed(seed, 1)), 8);
    s.model.frames = 8;
    s.model.joints = 24;
    s.model.hidden = 32;
    s.model.layers = 2;
    initialize_soft_anchors(s.anchors, s.model.hidden, mix_seed(seed, 2));
    return s;
}

struct OverfitRun {
    double initial_loss, final_loss;
    EvalTable before, after;
};

OverfitRun overfit(std::uint64_t seed, bool soft) {
    OverfitSetup s = overfit_setup(seed);
    const XFusionNet net(s.model);
    XFusionParams params = init_params(s.model, mix_seed(seed, 3));
    TrainConfig tc;
    tc.domains = s.domains;
    tc.steps = 500;
    tc.batch_size = 4;
    tc.seed = mix_seed(seed, 4);
    tc.train_soft_anchors = soft;
    const auto items = evaluation_items(s.data, s.anchors, s.domains, mix_seed(seed, 5));
    OverfitRun r;
    r.initial_loss = mean_loss(net, params, s.anchors, items, tc.loss);
    r.before = evaluate(items, s.anchors, network_predictor(net, params), s.data.unit_to_mm);
    train(net, params, s.anchors, s.data, tc);
    r.final_loss = mean_loss(net, params, s.anchors, items, tc.loss);
    r.after = evaluate(items, s.anchors, network_predictor(net, params), s.data.unit_to_mm);
    return r;
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

}  // namespace

int main() {
    criterion(1, "SPS equals brute-force max-min oracle", 10, [] {
        Rng rng(101);
        int match = 0;
        for (int t = 0; t < 50; ++t) {
            const Corpus c = random_corpus(rng, 1 + rng.uniform_index(64), 1 + rng.uniform_index(4), 1 + rng.uniform_index(3));
            const std::size_t k = 1 + rng.uniform_index(c.size() + 2);
            std::vector<std::int64_t> got;
            for (const Anchor& a : sps_sample(c, k).anchors) got.push_back(a.source_index);
            match += got == oracle_sps(c, k);
        }
        return Outcome{match == 50, std::to_string(match) + "/50 corpora match"};
    });

    criterion(2, "scalar-toy trace", 1, [] {
        Corpus c;
        for (double x : {1.0, 2.0, 10.0}) c.push_back({test::scalar_sequence(x), test::scalar_sequence(x), TaskId::MP_M});
        std::vector<double> order;
        for (const Anchor& a : sps_sample(c, 4).anchors) order.push_back(a.input.values()[0]);
        std::string s;
        for (double v : order) s += (s.empty() ? "" : ",") + fmt(v);
        return Outcome{order == std::vector<double>{0, 10, 2, 1}, "order [" + s + "]"};
    });

    criterion(3, "similarity symmetry, self-zero, triangle inequality", 5, [] {
        Rng rng(103);
        bool sym = true, self = true;
        double worst = -INFINITY;
        for (int t = 0; t < 10000; ++t) {
            const std::size_t f = 1 + rng.uniform_index(4), j = 1 + rng.uniform_index(4);
            const auto x = test::random_sequence(rng, f, j), y = test::random_sequence(rng, f, j),
                       z = test::random_sequence(rng, f, j);
            sym &= similarity(x, y) == similarity(y, x);
            self &= similarity(x, x) == 0.0;
            worst = std::max(worst, -similarity(x, z) - (-similarity(x, y) - similarity(y, z)));
        }
        return Outcome{sym && self && worst <= 1e-9,
                       std::string("symmetric ") + (sym ? "yes" : "no") + ", self-zero " + (self ? "yes" : "no") +
                           ", max triangle excess " + fmt(worst)};
    });

    criterion(4, "retrieval equals linear-scan argmax with lowest-index ties", 5, [] {
        Rng rng(104);
        int match = 0;
        for (int t = 0; t < 1000; ++t) {
            const std::size_t f = 1 + rng.uniform_index(3), j = 1 + rng.uniform_index(3);
            AnchorSet set;
            const std::size_t n = 1 + rng.uniform_index(12);
            for (std::size_t k = 0; k < n; ++k) {
                // Duplicates force ties.
                auto s = (k > 0 && rng.uniform() < 0.3) ? set.anchors[rng.uniform_index(k)].input
                                                         : test::random_sequence(rng, f, j);
                set.anchors.push_back({s, s, std::nullopt, static_cast<std::int64_t>(k) - 1});
            }
            const auto q = rng.uniform() < 0.2 ? set.anchors[rng.uniform_index(n)].input : test::random_sequence(rng, f, j);
            std::size_t best = 0;
            for (std::size_t k = 1; k < n; ++k)
                if (naive_similarity(q, set.anchors[k].input) > naive_similarity(q, set.anchors[best].input)) best = k;
            match += retrieve_prompt(q, set).index == best;
        }
        return Outcome{match == 1000, std::to_string(match) + "/1000 configurations match"};
    });

    criterion(5, "initialization invariant", 5, [] {
        const XFusionConfig c;
        const XFusionNet net(c);
        const XFusionParams p = init_params(c, 105);
        Rng rng(105);
        const auto q = test::random_sequence(rng, c.frames, c.joints), pi = test::random_sequence(rng, c.frames, c.joints),
                   pg = test::random_sequence(rng, c.frames, c.joints);
        Tape tape;
        const BoundParams b = bind(tape, p);
        const ForwardResult r = forward(net, b, q, pi, pg, std::nullopt);
        bool exact = true;
        double worst = 0.0;
        std::size_t scores = 0;
        for (std::size_t l = 0; l < c.layers; ++l)
            for (int branch = 0; branch < 2; ++branch) {
                const BlockOutput& o = branch == 0 ? r.query_blocks[l] : r.prompt_blocks[l];
                const BlockParams<Mat>& bp = branch == 0 ? p.layers[l].query : p.layers[l].prompt;
                for (const ViewTrace* t : {&o.temporal, &o.spatial}) {
                    exact &= (t->alpha.value().array() == 1.0 / 3.0).all();
                    scores += static_cast<std::size_t>(t->alpha.value().size());
                    worst = std::max(worst, layer_norm_error(*t, t == &o.temporal ? bp.temporal : bp.spatial));
                }
            }
        return Outcome{exact && worst <= 1e-9, std::to_string(scores) + " scores " + (exact ? "all" : "not all") +
                                                   " exactly 1/3, max fused deviation " + fmt(worst)};
    });

    criterion(6, "full-network gradient fidelity", 120, [] {
        XFusionConfig c;
        c.frames = 4;
        c.joints = 5;
        c.hidden = 8;
        c.layers = 2;
        const XFusionNet net(c);
        Rng rng(106);
        XFusionParams p = init_params(c, 106);
        for (auto& layer : p.layers)
            for (auto* b : {&layer.query, &layer.prompt}) {
                b->compress = test::random_mat(rng, b->compress.rows(), b->compress.cols(), 0.3);
                b->compress_bias = test::random_mat(rng, 1, 3, 0.3);
            }
        double worst = 0.0;
        for (TaskId domain : {TaskId::FPE, TaskId::JC_M}) {
            const MotionClip clip = test::random_clip(rng, 8, 5, 4);
            const MotionClip other = test::random_clip(rng, 8, 5, 4);
            const TaskSample s = derive_task(clip, domain, 1);
            const TaskSample prompt = derive_task(other, domain, 2);
            std::vector<Mat> values = flatten(p);
            values.push_back(test::random_mat(rng, 20, 1, 0.1));
            values.push_back(test::random_mat(rng, 1, 8, 0.1));
            const auto r = grad_check(
                [&](Tape&, std::span<const Var> v) {
                    const BoundParams b = bind_values(v.first(v.size() - 2), c.layers);
                    const Var u = matmul(v[v.size() - 2], v[v.size() - 1]);
                    const ForwardResult f = forward(net, b, s.query_input, prompt.query_input, prompt.query_target, u);
                    return motion_loss(f.prediction, f.shape, s, LossWeights{}).total;
                },
                values);
            worst = std::max(worst, r.max_rel_error);
        }
        return Outcome{worst < 1e-4, "max rel err " + fmt(worst) + " over all parameters"};
    });

    criterion(7, "SSM causality", 5, [] {
        XFusionConfig c;
        c.frames = 8;
        c.joints = 6;
        c.hidden = 8;
        c.layers = 1;
        const XFusionNet net(c);
        Rng rng(107);
        int ok = 0;
        for (int t = 0; t < 100; ++t) {
            const XFusionParams p = init_params(c, 1000 + t);
            const View view = t % 2 ? View::Spatial : View::Temporal;
            const std::size_t block = net.block(view);
            const Mat x = test::random_mat(rng, 48, 8);
            const std::size_t step = rng.uniform_index(block - 1);
            const std::size_t start = rng.uniform_index(48 / block) * block;
            Mat y = x;
            y.row(start + step + 1) += test::random_mat(rng, 1, 8);
            Tape tape;
            const BoundParams b = bind(tape, p);
            const auto& vp = view == View::Temporal ? b.layers[0].query.temporal : b.layers[0].query.spatial;
            const Mat ox = aggregate_level(net, tape.constant(x), Level::Ssm, view, vp).value();
            const Mat oy = aggregate_level(net, tape.constant(y), Level::Ssm, view, vp).value();
            bool same = true;
            for (std::size_t s = 0; s <= step; ++s) same &= ox.row(start + s) == oy.row(start + s);
            ok += same;
        }
        return Outcome{ok == 100, std::to_string(ok) + "/100 prefixes bitwise unchanged"};
    });

    criterion(8, "mask law", 5, [] {
        int ok = 0;
        for (std::uint64_t seed = 0; seed < 10000; ++seed) {
            const Mask t = make_time_mask(16, 0.4, seed);
            const Mask j = make_joint_mask(24, kRootJoint, 0.4, seed);
            ok += std::count(t.begin(), t.end(), 0) == 6 && t.front() == 1 && t.back() == 1 && j[kRootJoint] == 1;
        }
        return Outcome{ok == 10000, std::to_string(ok) + "/10000 masks obey the law"};
    });

    OverfitRun base{};
    criterion(9, "toy overfit", 300, [&] {
        base = overfit(0, true);
        bool lower = true;
        std::string rows;
        for (const auto& [d, row] : base.after) {
            lower &= row.value < base.before.at(d).value;
            rows += std::string(" ") + std::string(task_name(d)) + " " + fmt(base.before.at(d).value) + "->" + fmt(row.value);
        }
        const double ratio = base.final_loss / base.initial_loss;
        return Outcome{ratio <= 0.10 && lower, "loss " + fmt(base.initial_loss) + " -> " + fmt(base.final_loss) +
                                                   " (ratio " + fmt(ratio) + "), MPJPE mm" + rows};
    });

    criterion(10, "ablation trend: SPS coverage vs random and cluster", 60, [] {
        int beat_random = 0, beat_cluster = 0;
        for (std::uint64_t t = 0; t < 20; ++t) {
            Rng rng(1100 + t);
            Corpus c;
            std::vector<MotionSequence> queries;
            const auto centre = [&](double s) { return test::random_sequence(rng, 4, 3, s); };
            const MotionSequence a = centre(3.0), b = centre(3.0);
            for (int i = 0; i < 60; ++i) {
                NdBuffer v = (i % 2 ? a : b).values();
                for (std::size_t e = 0; e < v.size(); ++e) v[e] += 0.3 * rng.normal();
                c.push_back({MotionSequence(v, Modality::Pose3D, 3), MotionSequence(v, Modality::Pose3D, 3), TaskId::MP_P});
            }
            for (int i = 0; i < 6; ++i) {
                const MotionSequence o = centre(6.0);
                c.push_back({o, o, TaskId::MP_P});
            }
            for (const auto& e : c) queries.push_back(e.input);
            const double sps = coverage(queries, sps_sample(c, 8));
            beat_random += sps >= coverage(queries, random_sample(c, 8, t));
            beat_cluster += sps >= coverage(queries, cluster_sample(c, 8, t));
        }
        return Outcome{beat_random >= 16 && beat_cluster >= 12, "SPS >= random in " + std::to_string(beat_random) +
                                                                    "/20, >= cluster in " +
                                                                    std::to_string(beat_cluster) + "/20"};
    });

    criterion(11, "soft-anchor trend", 900, [&] {
        std::vector<double> with, without;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            with.push_back(seed == 0 && base.final_loss > 0 ? base.final_loss : overfit(seed, true).final_loss);
            without.push_back(overfit(seed, false).final_loss);
        }
        auto median = [](std::vector<double> v) {
            std::sort(v.begin(), v.end());
            return v[v.size() / 2];
        };
        const double m1 = median(with), m0 = median(without);
        return Outcome{m1 <= m0, "median final loss with soft anchors " + fmt(m1) + ", frozen at zero " + fmt(m0)};
    });

    criterion(12, "persistence round trips and header rejection", 5, [] {
        SynthConfig sc;
        sc.clips = 6;
        sc.frames = 4;
        sc.joints = 7;
        const Dataset d = synthesize(sc);
        const std::string db = encode_dataset(d);
        bool ok = encode_dataset(decode_dataset(db)) == db;
        const Dataset back = decode_dataset(db);
        for (std::size_t i = 0; i < d.clips.size(); ++i)
            ok &= back.clips[i].pose3d == d.clips[i].pose3d && back.clips[i].mesh == d.clips[i].mesh;

        AnchorFile af{sps_sample(build_corpus(d, std::vector<TaskId>{TaskId::PE, TaskId::MR}, 1), 5), {{TaskId::PE, TaskId::MR}, 1, 0.4}};
        initialize_soft_anchors(af.set, 8, 2);
        const std::string ab = encode_anchors(af);
        ok &= encode_anchors(decode_anchors(ab)) == ab;

        XFusionConfig mc;
        mc.frames = 4;
        mc.joints = 7;
        mc.hidden = 8;
        mc.layers = 2;
        const Checkpoint ck{mc, init_params(mc, 3), af.set.soft, af.set.corpus_fingerprint, 0};
        const std::string cb = encode_checkpoint(ck);
        ok &= encode_checkpoint(decode_checkpoint(cb)) == cb;
        ok &= flatten(decode_checkpoint(cb).params) == flatten(ck.params);

        int rejected = 0;
        for (const std::string* bytes : {&db, &ab, &cb}) {
            std::string bad_magic = *bytes, bad_version = *bytes;
            bad_magic[1] = 'X';
            bad_version[4] = 7;
            try {
                decode_container(bad_magic, "dataset");
            } catch (const FormatError& e) {
                rejected += std::string(e.what()).find("HICM") != std::string::npos;
            }
            try {
                decode_container(bad_version, "dataset");
            } catch (const FormatError& e) {
                rejected += std::string(e.what()).find("expected 1") != std::string::npos;
            }
        }
        return Outcome{ok && rejected == 6, std::string("round trips ") + (ok ? "bit-exact" : "differ") + ", " +
                                                std::to_string(rejected) + "/6 corrupted headers rejected"};
    });

    std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail") << std::endl;
    return failures == 0 ? 0 : 1;
}

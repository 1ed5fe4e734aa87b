#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hic/numeric/grad_check.hpp"
#include "hic/xfusion/loss.hpp"
#include "hic/xfusion/net.hpp"
#include "test_util.hpp"

using namespace hic;

namespace {

XFusionConfig toy_config(std::size_t layers = 2) {
    XFusionConfig c;
    c.frames = 4;
    c.joints = 5;
    c.hidden = 8;
    c.layers = layers;
    return c;
}

// Gives every compression block random entries so tests do not rely on the symmetric start.
void randomize_compression(XFusionParams& p, Rng& rng) {
    for (auto& layer : p.layers)
        for (auto* b : {&layer.query, &layer.prompt}) {
            b->compress = test::random_mat(rng, b->compress.rows(), b->compress.cols(), 0.3);
            b->compress_bias = test::random_mat(rng, 1, b->compress_bias.cols(), 0.3);
        }
}

Mat layer_norm_reference(const Mat& x, const Mat& gain, const Mat& bias) {
    Mat out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().mean();
        out.row(r) = ((x.row(r).array() - mean) / std::sqrt(var + 1e-5)).matrix().cwiseProduct(gain.row(0)) + bias.row(0);
    }
    return out;
}

TaskSample sample_of(TaskId domain, MotionSequence input, MotionSequence target) {
    return TaskSample{domain, std::move(input), std::move(target), std::nullopt, std::nullopt};
}

}  // namespace

TEST_CASE("adjacencies are symmetric in structure and row-stochastic") {
    for (std::size_t j : {1u, 5u, 24u, 27u}) {
        const Mat a = skeleton_adjacency(j);
        CHECK((a.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-15);
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            CHECK(a(r, r) > 0.0);
            for (Eigen::Index c = 0; c < a.cols(); ++c) CHECK((a(r, c) > 0) == (a(c, r) > 0));
        }
    }
    const Mat full = skeleton_adjacency(24);
    const Eigen::Index edges = ((full.array() > 0).cast<Eigen::Index>().sum() - 24) / 2;
    CHECK(edges == 23);
    const Mat padded = skeleton_adjacency(26);
    CHECK(padded(25, 25) == 1.0);
    CHECK(padded.row(24).sum() == 1.0);
    const Mat path = path_adjacency(4);
    CHECK(path(0, 0) == doctest::Approx(0.5));
    CHECK(path(1, 0) == doctest::Approx(1.0 / 3.0));
    CHECK(path(0, 2) == 0.0);
}

TEST_CASE("encode_context closed forms") {
    const XFusionConfig c = toy_config();
    const XFusionNet net(c);
    XFusionParams p = zero_params(c);
    Rng rng(3);
    p.query_encoder.bias = test::random_mat(rng, 1, c.hidden);
    const MotionSequence zero(NdBuffer({c.frames, c.joints, kChannels}), Modality::Pose3D, c.joints);
    Tape tape;
    const BoundParams b = bind(tape, p);
    const Context ctx = encode_context(net, b, zero, zero, zero, std::nullopt);
    for (Eigen::Index r = 0; r < ctx.query.rows(); ++r) CHECK(ctx.query.value().row(r) == p.query_encoder.bias.row(0));

    const XFusionParams q = init_params(c, 5);
    const BoundParams bq = bind(tape, q);
    const MotionSequence x = test::random_sequence(rng, c.frames, c.joints);
    const Var u = tape.constant(test::random_mat(rng, c.frames * c.joints, c.hidden));
    const Context with = encode_context(net, bq, x, x, x, u);
    const Context without = encode_context(net, bq, x, x, x, std::nullopt);
    CHECK((with.query.value() - without.query.value() - u.value()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(with.prompt.value() == without.prompt.value());

    const MotionSequence short_seq = test::random_sequence(rng, c.frames - 1, c.joints);
    CHECK_THROWS_AS(encode_context(net, bq, short_seq, x, x, std::nullopt), DimensionError);
    CHECK_THROWS_AS(encode_context(net, bq, x, x, x, tape.constant(Mat::Zero(3, c.hidden))), DimensionError);
}

TEST_CASE("encode_context at default hyperparameters") {
    const XFusionConfig c;
    XFusionConfig shallow = c;
    shallow.layers = 0;
    const XFusionNet net(shallow);
    Rng rng(1);
    const MotionSequence x = test::random_sequence(rng, c.frames, c.joints);
    Tape tape;
    const Context ctx = encode_context(net, bind(tape, init_params(shallow, 2)), x, x, x, std::nullopt);
    CHECK(ctx.query.rows() == 16 * 24);
    CHECK(ctx.query.cols() == 128);
}

TEST_CASE("aggregate_level degenerate cases") {
    XFusionConfig c = toy_config(1);
    c.frames = 1;
    const XFusionNet net(c);
    XFusionParams p = init_params(c, 9);
    auto& view = p.layers[0].query.temporal;
    Rng rng(4);
    const Mat x = test::random_mat(rng, c.joints, c.hidden);
    const Mat eye = Mat::Identity(c.hidden, c.hidden);

    Tape tape;
    BoundParams b = bind(tape, p);
    const Var xv = tape.constant(x);
    const Mat attn = aggregate_level(net, xv, Level::Attention, View::Temporal, b.layers[0].query.temporal).value();
    CHECK((attn - x * view.attention.value * view.attention.output).cwiseAbs().maxCoeff() < 1e-12);

    view.graph = eye;
    view.ssm.input = eye;
    view.ssm.decay.setZero();
    view.ssm.out_gain.setZero();
    view.ssm.skip.setOnes();
    b = bind(tape, p);
    CHECK(aggregate_level(net, xv, Level::Graph, View::Temporal, b.layers[0].query.temporal).value() == x);
    CHECK(aggregate_level(net, xv, Level::Ssm, View::Temporal, b.layers[0].query.temporal).value() == x);
    CHECK_THROWS_AS(aggregate_level(net, xv, static_cast<Level>(7), View::Temporal, b.layers[0].query.temporal),
                    DomainError);
}

TEST_CASE("ssm level is causal along each block") {
    const XFusionConfig c = toy_config(1);
    const XFusionNet net(c);
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const XFusionParams p = init_params(c, 100 + trial);
        const View view = trial % 2 == 0 ? View::Temporal : View::Spatial;
        const std::size_t block = net.block(view);
        const Mat x = test::random_mat(rng, c.frames * c.joints, c.hidden);
        const std::size_t t = rng.uniform_index(block - 1);
        Mat y = x;
        const std::size_t b0 = rng.uniform_index(x.rows() / block) * block;
        y.row(static_cast<Eigen::Index>(b0 + t + 1)) += test::random_mat(rng, 1, c.hidden);
        Tape tape;
        const BoundParams b = bind(tape, p);
        const auto& vp = view == View::Temporal ? b.layers[0].query.temporal : b.layers[0].query.spatial;
        const Mat ox = aggregate_level(net, tape.constant(x), Level::Ssm, view, vp).value();
        const Mat oy = aggregate_level(net, tape.constant(y), Level::Ssm, view, vp).value();
        for (std::size_t s = 0; s <= t; ++s) CHECK(ox.row(b0 + s) == oy.row(b0 + s));
        CHECK(ox.row(b0 + t + 1) != oy.row(b0 + t + 1));
    }
}

TEST_CASE("cross_level_update closed forms") {
    Tape tape;
    const Var y1 = tape.constant(Mat::Constant(1, 1, 2.0));
    const Var y2 = tape.constant(Mat::Constant(1, 1, 4.0));
    const std::vector<Var> two = {y1, y2};
    Mat bias(1, 2);
    bias << std::log(3.0), 0.0;
    const FusedLevels f = cross_level_update(two, tape.constant(Mat::Zero(2, 2)), tape.constant(bias));
    CHECK(f.alpha.value()(0, 0) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(f.alpha.value()(0, 1) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(f.fused.value()(0, 0) == doctest::Approx(2.5).epsilon(1e-14));

    Rng rng(8);
    std::vector<Var> three;
    for (int l = 0; l < 3; ++l) three.push_back(tape.constant(test::random_mat(rng, 6, 4)));
    const FusedLevels even =
        cross_level_update(three, tape.constant(Mat::Zero(3, 12)), tape.constant(Mat::Constant(1, 3, 0.7)));
    CHECK((even.alpha.value().array() == 1.0 / 3.0).all());
    const Mat mean = (three[0].value() + three[1].value() + three[2].value()) / 3.0;
    CHECK((even.fused.value() - mean).cwiseAbs().maxCoeff() < 1e-15);

    for (int trial = 0; trial < 50; ++trial) {
        const FusedLevels r = cross_level_update(three, tape.constant(test::random_mat(rng, 3, 12, 3.0)),
                                                 tape.constant(test::random_mat(rng, 1, 3, 3.0)));
        CHECK((r.alpha.value().rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
        CHECK((r.alpha.value().array() > 0).all());
    }
    CHECK_THROWS_AS(cross_level_update(two, tape.constant(Mat::Zero(3, 12)), tape.constant(Mat::Zero(1, 3))),
                    DimensionError);
}

TEST_CASE("xfusion_block at initialization averages levels per view") {
    const XFusionConfig c = toy_config(1);
    const XFusionNet net(c);
    const XFusionParams p = init_params(c, 21);
    Rng rng(5);
    const Mat h = test::random_mat(rng, c.frames * c.joints, c.hidden);
    Tape tape;
    const BoundParams b = bind(tape, p);
    const BlockOutput out = xfusion_block(net, tape.constant(h), b.layers[0].query);
    CHECK(out.output.rows() == static_cast<Eigen::Index>(c.frames * c.joints));
    CHECK(out.output.cols() == static_cast<Eigen::Index>(c.hidden));
    for (const auto* trace : {&out.temporal, &out.spatial}) {
        CHECK((trace->alpha.value().array() == 1.0 / 3.0).all());
        const Mat mean = (trace->levels[0].value() + trace->levels[1].value() + trace->levels[2].value()) / 3.0;
        const auto& vp = trace == &out.temporal ? p.layers[0].query.temporal : p.layers[0].query.spatial;
        const Mat expected = layer_norm_reference(trace->input.value() + mean, vp.norm_gain, vp.norm_bias);
        CHECK((trace->output.value() - expected).cwiseAbs().maxCoeff() < 1e-9);
    }
    // Temporal view runs first and its output, back in frame-major order, feeds the spatial view.
    Mat back(h.rows(), h.cols());
    const auto to_frame = net.to_frame_major();
    for (std::size_t i = 0; i < to_frame.size(); ++i) back.row(i) = out.temporal.output.value().row(to_frame[i]);
    CHECK(back == out.spatial.input.value());
    CHECK(out.output.value() == out.spatial.output.value());

    const BlockOutput again = xfusion_block(net, tape.constant(h), b.layers[0].query);
    CHECK(again.output.value() == out.output.value());
}

TEST_CASE("xfusion_block gradients match central differences") {
    const XFusionConfig c = toy_config(1);
    const XFusionNet net(c);
    Rng rng(6);
    XFusionParams p = init_params(c, 31);
    randomize_compression(p, rng);
    const Mat h = test::random_mat(rng, c.frames * c.joints, c.hidden);
    const Mat w = test::random_mat(rng, c.frames * c.joints, c.hidden);
    std::vector<Mat> params;
    auto collect = [&](const std::string&, const Mat& m) { params.push_back(m); };
    detail::visit_block("b", p.layers[0].query, collect);
    params.push_back(h);
    const auto r = grad_check(
        [&](Tape& tape, std::span<const Var> v) {
            BlockParams<Var> bp;
            std::size_t i = 0;
            auto assign = [&](const std::string&, Var& x) { x = v[i++]; };
            detail::visit_block("b", bp, assign);
            const BlockOutput out = xfusion_block(net, v[i], bp);
            return sum(hadamard(out.output, tape.constant(w)));
        },
        params);
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("spatial graph breaks joint permutation covariance") {
    const XFusionConfig c = toy_config(1);
    const XFusionNet net(c);
    const XFusionParams p = init_params(c, 41);
    Rng rng(7);
    const Mat h = test::random_mat(rng, c.frames * c.joints, c.hidden);
    std::vector<std::size_t> swap(h.rows());
    for (std::size_t f = 0; f < c.frames; ++f)
        for (std::size_t j = 0; j < c.joints; ++j) swap[f * c.joints + j] = f * c.joints + (c.joints - 1 - j);
    Tape tape;
    const BoundParams b = bind(tape, p);
    const Var out = xfusion_block(net, tape.constant(h), b.layers[0].query).output;
    const Var permuted_in = xfusion_block(net, permute_rows(tape.constant(h), swap), b.layers[0].query).output;
    CHECK(permute_rows(out, swap).value() != permuted_in.value());
}

TEST_CASE("context_inject is a sum") {
    Rng rng(2);
    Tape tape;
    const Var a = tape.constant(test::random_mat(rng, 3, 4));
    const Var b = tape.constant(test::random_mat(rng, 3, 4));
    const Var zero = tape.constant(Mat::Zero(3, 4));
    CHECK(context_inject(zero, a).value() == a.value());
    CHECK(context_inject(a, b).value() == context_inject(b, a).value());
    CHECK(context_inject(a, scale(a, -1.0)).value() == Mat::Zero(3, 4));
    CHECK_THROWS_AS(context_inject(a, tape.constant(Mat::Zero(2, 4))), DimensionError);
}

TEST_CASE("forward at default hyperparameters") {
    const XFusionConfig c;
    const XFusionNet net(c);
    const XFusionParams p = init_params(c, 1);
    Rng rng(3);
    const MotionSequence q = test::random_sequence(rng, c.frames, c.joints);
    const MotionSequence pi = test::random_sequence(rng, c.frames, c.joints);
    const MotionSequence pg = test::random_sequence(rng, c.frames, c.joints);
    const Prediction out = predict(net, p, q, pi, pg, nullptr);
    CHECK(out.motion.shape() == Shape{16, 24, 3});
    CHECK(out.shape.size() == 10);
    REQUIRE(out.scores.size() == 8);
    for (const LayerScores& s : out.scores)
        for (const Mat* m : {&s.query.temporal, &s.query.spatial, &s.prompt.temporal, &s.prompt.spatial}) {
            CHECK(m->rows() == 16 * 24);
            CHECK((m->array() == 1.0 / 3.0).all());
        }
}

TEST_CASE("forward is deterministic and isolates the prompt branch") {
    const XFusionConfig c = toy_config();
    const XFusionNet net(c);
    const XFusionParams p = init_params(c, 17);
    Rng rng(9);
    const MotionSequence q = test::random_sequence(rng, c.frames, c.joints);
    const MotionSequence zero(NdBuffer({c.frames, c.joints, kChannels}), Modality::Pose3D, c.joints);
    const Prediction a = predict(net, p, q, zero, zero, nullptr);
    const Prediction b = predict(net, p, q, zero, zero, nullptr);
    CHECK(a.motion == b.motion);
    CHECK(a.shape == b.shape);

    const MotionSequence pi = test::random_sequence(rng, c.frames, c.joints);
    const MotionSequence pg = test::random_sequence(rng, c.frames, c.joints);
    CHECK(!(predict(net, p, q, pi, pg, nullptr).motion == a.motion));
    SoftAnchor soft{test::random_mat(rng, c.frames * c.joints, 1), test::random_mat(rng, 1, c.hidden)};
    CHECK(!(predict(net, p, q, zero, zero, &soft).motion == a.motion));
}

TEST_CASE("full network gradients match central differences") {
    const XFusionConfig c = toy_config(2);
    const XFusionNet net(c);
    Rng rng(10);
    XFusionParams p = init_params(c, 51);
    randomize_compression(p, rng);
    const MotionClip clip = test::random_clip(rng, 2 * c.frames, c.joints, c.joints - 1);
    const TaskSample sample = derive_task(clip, TaskId::MIB_M, 4);
    const MotionSequence& pi = sample.query_input;
    const MotionSequence& pg = sample.query_target;
    std::vector<Mat> params = flatten(p);
    params.push_back(test::random_mat(rng, c.frames * c.joints, 1, 0.1));
    params.push_back(test::random_mat(rng, 1, c.hidden, 0.1));
    const LossWeights weights{1.0, 0.5, 0.3};
    const auto r = grad_check(
        [&](Tape&, std::span<const Var> v) {
            const BoundParams b = bind_values(v.first(v.size() - 2), c.layers);
            const Var u = matmul(v[v.size() - 2], v[v.size() - 1]);
            const ForwardResult out = forward(net, b, sample.query_input, pi, pg, u);
            return motion_loss(out.prediction, out.shape, sample, weights).total;
        },
        params);
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("parameter containers round trip through flat lists") {
    const XFusionConfig c = toy_config(2);
    const XFusionParams p = init_params(c, 3);
    XFusionParams q = zero_params(c);
    unflatten(flatten(p), q);
    CHECK(flatten(q) == flatten(p));
    std::vector<Mat> short_list = flatten(p);
    short_list.pop_back();
    CHECK_THROWS_AS(unflatten(short_list, q), DimensionError);
    std::size_t n = 0;
    for (const Mat& m : flatten(p)) n += static_cast<std::size_t>(m.size());
    CHECK(parameter_count(p) == n);
    for (const auto& layer : p.layers) {
        CHECK(layer.query.compress.isZero(0.0));
        CHECK((layer.query.compress_bias.array() == layer.query.compress_bias(0, 0)).all());
        CHECK((layer.query.temporal.ssm.decay.array().tanh().abs() < 1.0).all());
    }
    CHECK(flatten(init_params(c, 3)) == flatten(p));
}

TEST_CASE("loss closed forms") {
    Rng rng(13);
    const MotionSequence target = test::random_sequence(rng, 4, 3);
    const TaskSample sample = sample_of(TaskId::PE, target, target);
    Tape tape;
    const Var shape = tape.constant(Mat::Zero(1, kShapeParams));
    CHECK(motion_loss(tape.constant(Mat(target.rows())), shape, sample, {}).total.value()(0, 0) == 0.0);

    Mat offset = target.rows();
    offset.rowwise() += Eigen::RowVector3d(1.0, -2.0, 2.0);
    const LossTerms t = motion_loss(tape.constant(offset), shape, sample, {1.0, 0.0, 0.0});
    CHECK(t.total.value()(0, 0) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(t.velocity == doctest::Approx(0.0).scale(1.0));

    CHECK_THROWS_AS(motion_loss(tape.constant(offset), shape, sample, {1.0, -0.1, 0.0}), DomainError);
}

TEST_CASE("loss matches a direct evaluation") {
    Rng rng(14);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t f = 1 + rng.uniform_index(5), j = 2 + rng.uniform_index(4), native = 1 + rng.uniform_index(j);
        const bool mesh = trial % 2 == 1;
        NdBuffer tv({f, j, kChannels});
        for (std::size_t a = 0; a < f; ++a)
            for (std::size_t b = 0; b < native; ++b)
                for (std::size_t ch = 0; ch < kChannels; ++ch) tv.at(a, b, ch) = rng.normal();
        Vec beta = Vec::Zero(kShapeParams);
        if (mesh)
            for (auto& x : beta) x = rng.normal();
        const MotionSequence target(tv, mesh ? Modality::MeshParams : Modality::Pose3D, native, beta);
        const TaskSample sample = sample_of(mesh ? TaskId::MP_M : TaskId::MP_P, target, target);
        const Mat pred = test::random_mat(rng, static_cast<Eigen::Index>(f * j), kChannels);
        const Mat shape = test::random_mat(rng, 1, kShapeParams);
        const LossWeights w{rng.uniform(), rng.uniform(), rng.uniform()};

        double pos = 0.0, vel = 0.0, shp = 0.0;
        for (std::size_t a = 0; a < f; ++a)
            for (std::size_t b = 0; b < native; ++b) {
                double d2 = 0.0, v2 = 0.0;
                for (std::size_t ch = 0; ch < kChannels; ++ch) {
                    const double e = pred(a * j + b, ch) - tv.at(a, b, ch);
                    d2 += e * e;
                    if (a + 1 < f) {
                        const double e1 = pred((a + 1) * j + b, ch) - tv.at(a + 1, b, ch);
                        v2 += (e1 - e) * (e1 - e);
                    }
                }
                pos += std::sqrt(d2);
                vel += std::sqrt(v2);
            }
        pos /= static_cast<double>(f * native);
        vel = f > 1 ? vel / static_cast<double>((f - 1) * native) : 0.0;
        if (mesh) {
            for (std::size_t s = 0; s < kShapeParams; ++s) shp += std::pow(shape(0, s) - beta(s), 2);
            shp /= kShapeParams;
        }
        Tape tape;
        const LossTerms t = motion_loss(tape.constant(pred), tape.constant(shape), sample, w);
        CHECK(t.position == doctest::Approx(pos).epsilon(1e-12));
        CHECK(t.velocity == doctest::Approx(vel).epsilon(1e-12));
        CHECK(t.shape == doctest::Approx(shp).epsilon(1e-12));
        CHECK(t.total.value()(0, 0) ==
              doctest::Approx(w.position * pos + w.velocity * vel + w.shape * shp).epsilon(1e-12));
    }
}

TEST_CASE("mpjpe closed forms") {
    NdBuffer t({1, 2, kChannels});
    NdBuffer p({1, 2, kChannels});
    p.at(0, 1, 0) = 3.0;
    p.at(0, 1, 1) = 4.0;
    const MotionSequence target(t, Modality::Pose3D, 2);
    const MotionSequence pred(p, Modality::Pose3D, 2);
    CHECK(mpjpe(pred, target) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(mpjpe(pred, target, 1000.0) == doctest::Approx(2500.0).epsilon(1e-15));
    CHECK(mpjpe(target, target) == 0.0);

    Rng rng(15);
    const MotionSequence x = test::random_sequence(rng, 5, 6);
    NdBuffer shifted = x.values();
    for (std::size_t f = 0; f < 5; ++f)
        for (std::size_t j = 0; j < 6; ++j) shifted.at(f, j, 2) += 7.5;
    CHECK(mpjpe(MotionSequence(shifted, Modality::Pose3D, 6), x) < 1e-12);

    const MotionSequence mesh(NdBuffer({1, 2, kChannels}), Modality::MeshParams, 2);
    CHECK_THROWS_AS(mpjpe(mesh, mesh), DomainError);
}

TEST_CASE("padding virtual joints leaves metrics unchanged") {
    Rng rng(16);
    for (int trial = 0; trial < 20; ++trial) {
        const MotionSequence a = test::random_sequence(rng, 3, 5);
        const MotionSequence b = test::random_sequence(rng, 3, 5);
        const MotionSequence pa = pad_virtual_joints(a, 8);
        const MotionSequence pb = pad_virtual_joints(b, 8);
        CHECK(mpjpe(pa, pb) == doctest::Approx(mpjpe(a, b)).epsilon(1e-14));
        CHECK(mean_parameter_l2(pa, pb) == doctest::Approx(mean_parameter_l2(a, b)).epsilon(1e-14));
    }
}

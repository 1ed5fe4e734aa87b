#include "hic/xfusion/net.hpp"

#include <cmath>
#include <string>

#include "hic/numeric/ops.hpp"

namespace hic {
namespace {

void require_sequence(const XFusionNet& net, const MotionSequence& m, const char* what) {
    const XFusionConfig& c = net.config();
    if (m.frames() != c.frames || m.joints() != c.joints)
        throw DimensionError(std::string(what) + " is " + std::to_string(m.frames()) + "x" +
                             std::to_string(m.joints()) + ", network expects " + std::to_string(c.frames) + "x" +
                             std::to_string(c.joints));
}

Mat paired_input(const MotionSequence& input, const MotionSequence& target) {
    Mat out(input.rows().rows(), 2 * kChannels);
    out.leftCols(kChannels) = input.rows();
    out.rightCols(kChannels) = target.rows();
    return out;
}

Var encode(const XFusionNet& net, Tape& tape, const EncoderParams<Var>& e, const Mat& input) {
    const XFusionConfig& c = net.config();
    Var h = add_row(matmul(tape.constant(input), e.weight), e.bias);
    h = h + tile_per_frame(e.pos_spatial, c.frames);
    return h + repeat_per_joint(e.pos_temporal, c.joints);
}

ViewTrace run_view(const XFusionNet& net, Var x, View view, const ViewParams<Var>& p, Var compress, Var bias) {
    ViewTrace trace;
    trace.input = x;
    for (std::size_t l = 0; l < kLevels; ++l) trace.levels[l] = aggregate_level(net, x, static_cast<Level>(l), view, p);
    FusedLevels fused = cross_level_update(trace.levels, compress, bias);
    trace.alpha = fused.alpha;
    trace.output = layer_norm_rows(x + fused.fused, p.norm_gain, p.norm_bias);
    return trace;
}

}  // namespace

Context encode_context(const XFusionNet& net, const BoundParams& params, const MotionSequence& query_input,
                       const MotionSequence& prompt_input, const MotionSequence& prompt_target,
                       std::optional<Var> soft_anchor) {
    require_sequence(net, query_input, "query input");
    require_sequence(net, prompt_input, "prompt input");
    require_sequence(net, prompt_target, "prompt target");
    Tape& tape = *params.out_weight.tape;
    Context ctx{encode(net, tape, params.query_encoder, paired_input(query_input, prompt_target)),
                encode(net, tape, params.prompt_encoder, paired_input(prompt_input, prompt_target))};
    if (soft_anchor) {
        if (soft_anchor->rows() != ctx.query.rows() || soft_anchor->cols() != ctx.query.cols())
            throw DimensionError("soft anchor is " + std::to_string(soft_anchor->rows()) + "x" +
                                 std::to_string(soft_anchor->cols()) + ", expected " +
                                 std::to_string(ctx.query.rows()) + "x" + std::to_string(ctx.query.cols()));
        ctx.query = ctx.query + *soft_anchor;
    }
    return ctx;
}

Var aggregate_level(const XFusionNet& net, Var x, Level level, View view, const ViewParams<Var>& p) {
    const std::size_t block = net.block(view);
    switch (level) {
        case Level::Attention: {
            const auto& a = p.attention;
            const double s = 1.0 / std::sqrt(static_cast<double>(a.query.cols()));
            Var mixed = block_attention(matmul(x, a.query), matmul(x, a.key), matmul(x, a.value), block, s);
            return matmul(mixed, a.output);
        }
        case Level::Graph:
            return matmul(block_apply(net.adjacency(view), x, block), p.graph);
        case Level::Ssm: {
            const auto& s = p.ssm;
            return block_diag_scan(matmul(x, s.input), tanh(s.decay), s.in_gain, s.out_gain, s.skip, block);
        }
    }
    throw DomainError("unknown aggregation level " + std::to_string(static_cast<int>(level)));
}

FusedLevels cross_level_update(std::span<const Var> levels, Var compress, Var compress_bias) {
    if (levels.empty()) throw DimensionError("cross_level_update needs at least one level");
    const auto l = static_cast<Eigen::Index>(levels.size());
    if (compress.rows() != l || compress.cols() != l * levels[0].cols())
        throw DimensionError("compression matrix is " + std::to_string(compress.rows()) + "x" +
                             std::to_string(compress.cols()) + " for " + std::to_string(l) + " levels of width " +
                             std::to_string(levels[0].cols()));
    Var logits = add_row(matmul_bt(concat_cols(levels), compress), compress_bias);
    Var alpha = softmax_rows(logits);
    return {mix_levels(alpha, levels), alpha};
}

BlockOutput xfusion_block(const XFusionNet& net, Var h, const BlockParams<Var>& p) {
    BlockOutput out;
    auto temporal = [&](Var frame_major) {
        out.temporal = run_view(net, permute_rows(frame_major, net.to_joint_major()), View::Temporal, p.temporal,
                                p.compress, p.compress_bias);
        return permute_rows(out.temporal.output, net.to_frame_major());
    };
    auto spatial = [&](Var frame_major) {
        out.spatial = run_view(net, frame_major, View::Spatial, p.spatial, p.compress, p.compress_bias);
        return out.spatial.output;
    };
    out.output = net.config().spatial_first ? temporal(spatial(h)) : spatial(temporal(h));
    return out;
}

ForwardResult forward(const XFusionNet& net, const BoundParams& params, const MotionSequence& query_input,
                      const MotionSequence& prompt_input, const MotionSequence& prompt_target,
                      std::optional<Var> soft_anchor) {
    Context ctx = encode_context(net, params, query_input, prompt_input, prompt_target, soft_anchor);
    ForwardResult result;
    Var hq = ctx.query, hp = ctx.prompt;
    for (const LayerParams<Var>& layer : params.layers) {
        BlockOutput zq = xfusion_block(net, hq, layer.query);
        BlockOutput zp = xfusion_block(net, hp, layer.prompt);
        hq = context_inject(zp.output, zq.output);
        hp = zp.output;
        result.scores.push_back({{zq.temporal.alpha.value(), zq.spatial.alpha.value()},
                                 {zp.temporal.alpha.value(), zp.spatial.alpha.value()}});
        result.query_blocks.push_back(std::move(zq));
        result.prompt_blocks.push_back(std::move(zp));
    }
    result.prediction = add_row(matmul(hq, params.out_weight), params.out_bias);
    result.shape = add_row(matmul(mean_rows(hq), params.shape_weight), params.shape_bias);
    return result;
}

Prediction predict(const XFusionNet& net, const XFusionParams& params, const MotionSequence& query_input,
                   const MotionSequence& prompt_input, const MotionSequence& prompt_target, const SoftAnchor* soft) {
    Tape tape;
    BoundParams bound = bind(tape, params);
    std::optional<Var> u;
    if (soft != nullptr) u = tape.constant(soft_anchor_value(*soft));
    ForwardResult r = forward(net, bound, query_input, prompt_input, prompt_target, u);
    const XFusionConfig& c = net.config();
    const Mat& v = r.prediction.value();
    NdBuffer motion({c.frames, c.joints, kChannels}, Eigen::Map<const Vec>(v.data(), v.size()));
    return {std::move(motion), r.shape.value().row(0).transpose(), std::move(r.scores)};
}

}  // namespace hic

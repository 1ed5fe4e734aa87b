#include "hic/xfusion/params.hpp"

#include <cmath>

#include "hic/numeric/rng.hpp"

namespace hic {
namespace {

struct Shapes {
    std::size_t f, j, h, c, s, l;
};

Shapes shapes_of(const XFusionConfig& config) {
    if (config.frames == 0 || config.joints == 0 || config.hidden == 0 || config.shape_params == 0)
        throw ConfigError("xfusion", "frames, joints, hidden and shape_params must be positive");
    return {config.frames, config.joints, config.hidden, kChannels, config.shape_params, kLevels};
}

Mat zeros(std::size_t r, std::size_t c) {
    return Mat::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

EncoderParams<Mat> zero_encoder(const Shapes& s) {
    return {zeros(2 * s.c, s.h), zeros(1, s.h), zeros(s.j, s.h), zeros(s.f, s.h)};
}

ViewParams<Mat> zero_view(const Shapes& s) {
    ViewParams<Mat> v;
    v.attention = {zeros(s.h, s.h), zeros(s.h, s.h), zeros(s.h, s.h), zeros(s.h, s.h)};
    v.graph = zeros(s.h, s.h);
    v.ssm = {zeros(s.h, s.h), zeros(1, s.h), zeros(1, s.h), zeros(1, s.h), zeros(1, s.h)};
    v.norm_gain = zeros(1, s.h);
    v.norm_bias = zeros(1, s.h);
    return v;
}

BlockParams<Mat> zero_block(const Shapes& s) {
    return {zero_view(s), zero_view(s), zeros(s.l, s.l * s.h), zeros(1, s.l)};
}

void fill_normal(Mat& m, Rng& rng, double std) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std * rng.normal();
}

void init_view(ViewParams<Mat>& v, Rng& rng, double std) {
    fill_normal(v.attention.query, rng, std);
    fill_normal(v.attention.key, rng, std);
    fill_normal(v.attention.value, rng, std);
    fill_normal(v.attention.output, rng, std);
    fill_normal(v.graph, rng, std);
    fill_normal(v.ssm.input, rng, std);
    for (Eigen::Index h = 0; h < v.ssm.decay.cols(); ++h) {
        const double raw = rng.uniform(0.2, 1.0);
        v.ssm.decay(0, h) = raw;
        v.ssm.in_gain(0, h) = 1.0 - std::tanh(raw);
    }
    v.ssm.out_gain.setOnes();
    v.ssm.skip.setConstant(0.5);
    v.norm_gain.setOnes();
    v.norm_bias.setZero();
}

}  // namespace

XFusionParams zero_params(const XFusionConfig& config) {
    const Shapes s = shapes_of(config);
    XFusionParams p;
    p.query_encoder = zero_encoder(s);
    p.prompt_encoder = zero_encoder(s);
    p.layers.resize(config.layers, LayerParams<Mat>{zero_block(s), zero_block(s)});
    p.out_weight = zeros(s.h, s.c);
    p.out_bias = zeros(1, s.c);
    p.shape_weight = zeros(s.h, s.s);
    p.shape_bias = zeros(1, s.s);
    return p;
}

XFusionParams init_params(const XFusionConfig& config, std::uint64_t seed) {
    XFusionParams p = zero_params(config);
    Rng rng(seed);
    const double enc_std = 1.0 / std::sqrt(2.0 * kChannels);
    const double hid_std = 1.0 / std::sqrt(static_cast<double>(config.hidden));
    for (EncoderParams<Mat>* e : {&p.query_encoder, &p.prompt_encoder}) {
        fill_normal(e->weight, rng, enc_std);
        fill_normal(e->pos_spatial, rng, 0.02);
        fill_normal(e->pos_temporal, rng, 0.02);
    }
    for (LayerParams<Mat>& layer : p.layers) {
        for (BlockParams<Mat>* b : {&layer.query, &layer.prompt}) {
            init_view(b->temporal, rng, hid_std);
            init_view(b->spatial, rng, hid_std);
            b->compress.setZero();
            b->compress_bias.setConstant(config.compress_bias_init);
        }
    }
    fill_normal(p.out_weight, rng, hid_std);
    fill_normal(p.shape_weight, rng, hid_std);
    return p;
}

BoundParams bind(Tape& tape, const XFusionParams& params) {
    std::vector<Var> vars;
    visit_params(params, [&](const std::string&, const Mat& m) { vars.push_back(tape.parameter(m)); });
    return bind_values(vars, params.layers.size());
}

BoundParams bind_values(std::span<const Var> values, std::size_t layers) {
    BoundParams out;
    out.layers.resize(layers);
    std::size_t count = 0;
    visit_params(out, [&](const std::string&, Var&) { ++count; });
    if (values.size() != count)
        throw DimensionError("bind_values: " + std::to_string(values.size()) + " values for " + std::to_string(count) +
                             " parameters");
    std::size_t i = 0;
    visit_params(out, [&](const std::string&, Var& v) { v = values[i++]; });
    return out;
}

std::vector<Mat> flatten(const XFusionParams& params) {
    std::vector<Mat> out;
    visit_params(params, [&](const std::string&, const Mat& m) { out.push_back(m); });
    return out;
}

void unflatten(std::span<const Mat> values, XFusionParams& params) {
    std::size_t count = 0;
    visit_params(params, [&](const std::string&, const Mat&) { ++count; });
    if (values.size() != count)
        throw DimensionError("unflatten: " + std::to_string(values.size()) + " tensors for " + std::to_string(count) +
                             " parameters");
    std::size_t i = 0;
    visit_params(params, [&](const std::string& name, Mat& m) {
        const Mat& v = values[i++];
        if (v.rows() != m.rows() || v.cols() != m.cols())
            throw DimensionError("unflatten: " + name + " expects " + std::to_string(m.rows()) + "x" +
                                 std::to_string(m.cols()) + ", got " + std::to_string(v.rows()) + "x" +
                                 std::to_string(v.cols()));
        m = v;
    });
}

std::size_t parameter_count(const XFusionParams& params) {
    std::size_t n = 0;
    visit_params(params, [&](const std::string&, const Mat& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
}

}  // namespace hic

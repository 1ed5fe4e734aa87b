#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hic/motion/motion.hpp"
#include "hic/numeric/tape.hpp"

namespace hic {

// Aggregation levels per view: self-attention, graph convolution, state-space scan.
inline constexpr std::size_t kLevels = 3;

struct XFusionConfig {
    std::size_t frames = 16;
    std::size_t joints = 24;
    std::size_t hidden = 128;  // H = H'
    std::size_t layers = 8;
    std::size_t shape_params = kShapeParams;
    // Temporal view first by default.
    bool spatial_first = false;
    // Common initial value of the compression biases b^1..b^L.
    double compress_bias_init = 0.0;

    std::size_t locations() const { return frames * joints; }
};

// Parameter containers are templated on the leaf type: Mat for stored values,
// Var for values bound to a Tape during a forward pass.
template <typename T>
struct EncoderParams {
    T weight;        // 2C x H, per-location affine map of [input || target]
    T bias;          // 1 x H
    T pos_spatial;   // J x H
    T pos_temporal;  // F x H
};

template <typename T>
struct AttentionParams {
    T query, key, value, output;  // H x H
};

// s_t = tanh(decay) * s_{t-1} + in_gain * (u_t),  y_t = out_gain * s_t + skip * u_t,  u = x * input
template <typename T>
struct SsmParams {
    T input;     // H x H
    T decay;     // 1 x H, pre-tanh
    T in_gain;   // 1 x H
    T out_gain;  // 1 x H
    T skip;      // 1 x H
};

template <typename T>
struct ViewParams {
    AttentionParams<T> attention;
    T graph;  // H x H
    SsmParams<T> ssm;
    T norm_gain, norm_bias;  // 1 x H
};

template <typename T>
struct BlockParams {
    ViewParams<T> temporal;
    ViewParams<T> spatial;
    T compress;       // L x (L*H), shared by both views
    T compress_bias;  // 1 x L
};

template <typename T>
struct LayerParams {
    BlockParams<T> query;
    BlockParams<T> prompt;
};

template <typename T>
struct XFusionParamsT {
    EncoderParams<T> query_encoder;
    EncoderParams<T> prompt_encoder;
    std::vector<LayerParams<T>> layers;
    T out_weight;    // H x C
    T out_bias;      // 1 x C
    T shape_weight;  // H x S
    T shape_bias;    // 1 x S
};

using XFusionParams = XFusionParamsT<Mat>;
using BoundParams = XFusionParamsT<Var>;

namespace detail {

template <typename E, typename Fn>
void visit_encoder(const std::string& p, E& e, Fn& fn) {
    fn(p + ".weight", e.weight);
    fn(p + ".bias", e.bias);
    fn(p + ".pos_spatial", e.pos_spatial);
    fn(p + ".pos_temporal", e.pos_temporal);
}

template <typename V, typename Fn>
void visit_view(const std::string& p, V& v, Fn& fn) {
    fn(p + ".attention.query", v.attention.query);
    fn(p + ".attention.key", v.attention.key);
    fn(p + ".attention.value", v.attention.value);
    fn(p + ".attention.output", v.attention.output);
    fn(p + ".graph", v.graph);
    fn(p + ".ssm.input", v.ssm.input);
    fn(p + ".ssm.decay", v.ssm.decay);
    fn(p + ".ssm.in_gain", v.ssm.in_gain);
    fn(p + ".ssm.out_gain", v.ssm.out_gain);
    fn(p + ".ssm.skip", v.ssm.skip);
    fn(p + ".norm_gain", v.norm_gain);
    fn(p + ".norm_bias", v.norm_bias);
}

template <typename B, typename Fn>
void visit_block(const std::string& p, B& b, Fn& fn) {
    visit_view(p + ".temporal", b.temporal, fn);
    visit_view(p + ".spatial", b.spatial, fn);
    fn(p + ".compress", b.compress);
    fn(p + ".compress_bias", b.compress_bias);
}

}  // namespace detail

// Calls fn(name, member) for every parameter in a fixed canonical order.
// Works on const and non-const containers of either leaf type.
template <typename P, typename Fn>
void visit_params(P& params, Fn&& fn) {
    detail::visit_encoder("query_encoder", params.query_encoder, fn);
    detail::visit_encoder("prompt_encoder", params.prompt_encoder, fn);
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        const std::string p = "layers." + std::to_string(k);
        detail::visit_block(p + ".query", params.layers[k].query, fn);
        detail::visit_block(p + ".prompt", params.layers[k].prompt, fn);
    }
    fn(std::string("out_weight"), params.out_weight);
    fn(std::string("out_bias"), params.out_bias);
    fn(std::string("shape_weight"), params.shape_weight);
    fn(std::string("shape_bias"), params.shape_bias);
}

// Random weights from the seed; compression matrices zero and all compression
// biases equal, so every influence score starts at exactly 1/L.
XFusionParams init_params(const XFusionConfig& config, std::uint64_t seed);

// Zero-filled container with the config's shapes.
XFusionParams zero_params(const XFusionConfig& config);

// Registers every parameter as a differentiable leaf on the tape.
BoundParams bind(Tape& tape, const XFusionParams& params);
// Assembles already-registered values given in canonical order.
BoundParams bind_values(std::span<const Var> values, std::size_t layers);

// Flat list in canonical order and its inverse.
std::vector<Mat> flatten(const XFusionParams& params);
void unflatten(std::span<const Mat> values, XFusionParams& params);
std::size_t parameter_count(const XFusionParams& params);

}  // namespace hic

#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "hic/numeric/ops.hpp"
#include "hic/prompting/prompting.hpp"
#include "hic/xfusion/params.hpp"

namespace hic {

enum class Level : std::uint8_t { Attention, Graph, Ssm };
enum class View : std::uint8_t { Temporal, Spatial };

// SMPL kinematic tree parents; -1 marks the root.
inline constexpr std::array<int, 24> kSmplParents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8,
                                                     9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};

// Row-normalised D^-1 (A + I) of the symmetrised SMPL tree restricted to the
// first min(J, 24) joints; joints past 24 connect only to themselves.
Mat skeleton_adjacency(std::size_t joints);
// Row-normalised D^-1 (A + I) of the path graph t <-> t +- 1.
Mat path_adjacency(std::size_t frames);

// Fixed structure of the network: configuration, graphs and the row
// permutations between frame-major (f*J + j) and joint-major (j*F + f) layouts.
class XFusionNet {
public:
    explicit XFusionNet(XFusionConfig config);

    const XFusionConfig& config() const noexcept { return config_; }
    const Mat& adjacency(View v) const { return v == View::Temporal ? temporal_adj_ : spatial_adj_; }
    // Rows per sequence in a view layout: F for temporal, J for spatial.
    std::size_t block(View v) const { return v == View::Temporal ? config_.frames : config_.joints; }
    std::span<const std::size_t> to_joint_major() const { return to_joint_major_; }
    std::span<const std::size_t> to_frame_major() const { return to_frame_major_; }

private:
    XFusionConfig config_;
    Mat temporal_adj_;
    Mat spatial_adj_;
    std::vector<std::size_t> to_joint_major_;
    std::vector<std::size_t> to_frame_major_;
};

// H_Q = E_Q([q_in || p_gt]) + U*, H_P = E_P([p_in || p_gt]); each (F*J) x H frame-major.
struct Context {
    Var query;
    Var prompt;
};
Context encode_context(const XFusionNet& net, const BoundParams& params, const MotionSequence& query_input,
                       const MotionSequence& prompt_input, const MotionSequence& prompt_target,
                       std::optional<Var> soft_anchor);

// One aggregation level on a view matrix whose rows are consecutive sequences of net.block(view).
Var aggregate_level(const XFusionNet& net, Var view_rows, Level level, View view, const ViewParams<Var>& params);

// Per row: a = W [y^1; ...; y^L] + b, alpha = softmax(a), z = sum_l alpha_l y^l.
struct FusedLevels {
    Var fused;
    Var alpha;  // rows x L
};
FusedLevels cross_level_update(std::span<const Var> levels, Var compress, Var compress_bias);

struct ViewTrace {
    Var input;                        // view layout
    std::array<Var, kLevels> levels;  // view layout
    Var alpha;
    Var output;  // layer_norm(input + fused), view layout
};

struct BlockOutput {
    Var output;  // frame-major
    ViewTrace temporal;
    ViewTrace spatial;
};

// Both views with the block's shared compression matrix; each fused view is
// wrapped as layer_norm(x + z).
BlockOutput xfusion_block(const XFusionNet& net, Var h, const BlockParams<Var>& params);

// Query-branch input of the next layer.
inline Var context_inject(Var prompt_features, Var query_features) { return prompt_features + query_features; }

struct InfluenceScores {
    Mat temporal;  // rows joint-major (j*F + f) x L
    Mat spatial;   // rows frame-major (f*J + j) x L
};

struct LayerScores {
    InfluenceScores query;
    InfluenceScores prompt;
};

struct ForwardResult {
    Var prediction;  // (F*J) x C frame-major
    Var shape;       // 1 x S
    std::vector<LayerScores> scores;
    std::vector<BlockOutput> query_blocks;
    std::vector<BlockOutput> prompt_blocks;
};

ForwardResult forward(const XFusionNet& net, const BoundParams& params, const MotionSequence& query_input,
                      const MotionSequence& prompt_input, const MotionSequence& prompt_target,
                      std::optional<Var> soft_anchor);

struct Prediction {
    NdBuffer motion;  // F x J x C
    Vec shape;
    std::vector<LayerScores> scores;
};

// Tape-free convenience wrapper; soft may be null for U* = 0.
Prediction predict(const XFusionNet& net, const XFusionParams& params, const MotionSequence& query_input,
                   const MotionSequence& prompt_input, const MotionSequence& prompt_target, const SoftAnchor* soft);

}  // namespace hic

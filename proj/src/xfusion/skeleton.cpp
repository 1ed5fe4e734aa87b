#include "hic/xfusion/net.hpp"

namespace hic {
namespace {

Mat normalize_with_self_loops(Mat a) {
    a.diagonal().setOnes();
    const Vec degree = a.rowwise().sum();
    return degree.cwiseInverse().asDiagonal() * a;
}

}  // namespace

Mat skeleton_adjacency(std::size_t joints) {
    const auto n = static_cast<Eigen::Index>(joints);
    Mat a = Mat::Zero(n, n);
    for (Eigen::Index j = 1; j < std::min<Eigen::Index>(n, kSmplParents.size()); ++j) {
        const int parent = kSmplParents[static_cast<std::size_t>(j)];
        if (parent < n) {
            a(j, parent) = 1.0;
            a(parent, j) = 1.0;
        }
    }
    return normalize_with_self_loops(std::move(a));
}

Mat path_adjacency(std::size_t frames) {
    const auto n = static_cast<Eigen::Index>(frames);
    Mat a = Mat::Zero(n, n);
    for (Eigen::Index t = 0; t + 1 < n; ++t) {
        a(t, t + 1) = 1.0;
        a(t + 1, t) = 1.0;
    }
    return normalize_with_self_loops(std::move(a));
}

XFusionNet::XFusionNet(XFusionConfig config)
    : config_(config), temporal_adj_(path_adjacency(config.frames)), spatial_adj_(skeleton_adjacency(config.joints)) {
    if (config.frames == 0 || config.joints == 0 || config.hidden == 0)
        throw ConfigError("xfusion", "frames, joints and hidden must be positive");
    const std::size_t f = config.frames, j = config.joints;
    to_joint_major_.resize(f * j);
    to_frame_major_.resize(f * j);
    for (std::size_t jj = 0; jj < j; ++jj)
        for (std::size_t ff = 0; ff < f; ++ff) {
            to_joint_major_[jj * f + ff] = ff * j + jj;
            to_frame_major_[ff * j + jj] = jj * f + ff;
        }
}

}  // namespace hic

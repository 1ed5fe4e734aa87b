#pragma once

#include <cstdint>

#include "hic/motion/motion.hpp"

namespace hic {

// Sinusoidal joint rotations on an SMPL-like skeleton, grouped into planted
// motion clusters. Positions are in metres, root-centred at the first frame.
struct SynthConfig {
    std::size_t clips = 64;
    std::size_t frames = 16;  // task window F; clips hold 2F frames
    std::size_t joints = 24;  // joints past 24 are zero virtual joints
    std::size_t clusters = 4;
    double noise = 0.05;  // per-clip jitter of the cluster's amplitudes
    double unit_to_mm = 1000.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Rest-pose offsets of the 24 SMPL joints from their parents, in metres.
Eigen::Matrix<double, 24, 3, Eigen::RowMajor> smpl_rest_offsets();

// Forward kinematics for per-joint axis-angle rotations (J <= 24) plus a root translation.
Mat forward_kinematics(const Mat& axis_angle, const Eigen::RowVector3d& root);

// Every stored value is exactly representable as a 32-bit float.
Dataset synthesize(const SynthConfig& config);

}  // namespace hic

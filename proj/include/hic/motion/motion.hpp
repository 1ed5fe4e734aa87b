#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hic/numeric/tensor.hpp"

namespace hic {

enum class Modality : std::uint8_t { Pose2D, Pose3D, MeshParams };

std::string_view modality_name(Modality m);
Modality parse_modality(std::string_view name);
inline bool is_pose(Modality m) { return m != Modality::MeshParams; }

inline constexpr std::size_t kChannels = 3;
// SMPL shape vector length.
inline constexpr std::size_t kShapeParams = 10;
// Pelvis in SMPL ordering.
inline constexpr std::size_t kRootJoint = 0;

// One unified F x J x 3 motion clip. Immutable; the constructor enforces the
// modality invariants (2-D poses have a zero z channel, pose modalities carry
// zero shape parameters, joints past native_joint_count are all zero).
class MotionSequence {
public:
    MotionSequence(NdBuffer values, Modality modality, std::size_t native_joint_count, Vec beta);
    MotionSequence(NdBuffer values, Modality modality, std::size_t native_joint_count)
        : MotionSequence(std::move(values), modality, native_joint_count, Vec::Zero(kShapeParams)) {}

    std::size_t frames() const noexcept { return values_.extent(0); }
    std::size_t joints() const noexcept { return values_.extent(1); }
    const NdBuffer& values() const noexcept { return values_; }
    Modality modality() const noexcept { return modality_; }
    std::size_t native_joint_count() const noexcept { return native_; }
    const Vec& beta() const noexcept { return beta_; }

    // (F*J) x 3 row-major view, row f*J + j.
    NdBuffer::ConstMatrixMap rows() const { return values_.matrix(frames() * joints(), kChannels); }

    // Frames [first, first + count).
    MotionSequence window(std::size_t first, std::size_t count) const;

    bool operator==(const MotionSequence& o) const {
        return modality_ == o.modality_ && native_ == o.native_ && values_ == o.values_ && beta_ == o.beta_;
    }

private:
    NdBuffer values_;
    Modality modality_;
    std::size_t native_;
    Vec beta_;
};

// Three synchronized views of one 2F-frame clip.
struct MotionClip {
    MotionSequence pose2d;
    MotionSequence pose3d;
    MotionSequence mesh;
    std::string id;
    std::string source;

    std::size_t frames() const { return pose3d.frames(); }
    std::size_t joints() const { return pose3d.joints(); }
    const MotionSequence& get(Modality m) const;
    // Throws DimensionError unless all three share frame and joint counts.
    void validate() const;
};

// Clips of 2F frames sharing one joint layout; tasks use F-frame windows.
struct Dataset {
    std::vector<MotionClip> clips;
    // Multiplier from stored position units to millimetres.
    double unit_to_mm = 1.0;

    std::size_t window() const { return clips.at(0).frames() / 2; }
    std::size_t joints() const { return clips.at(0).joints(); }
    // Throws unless non-empty, every clip valid, all clips share an even frame count and J.
    void validate() const;
};

// F x N x 2 -> F x N x 3 with a zero z slice.
MotionSequence unify_pose2d(const NdBuffer& points);
// F x N x 3 positions.
MotionSequence unify_pose3d(const NdBuffer& points);
// F x 3J axis-angle rows -> F x J x 3; row j of frame f is (t[3j], t[3j+1], t[3j+2]).
MotionSequence reorganize_mesh_params(const Mat& theta, const Vec& beta);
// Inverse of reorganize_mesh_params.
Mat flatten_mesh_params(const MotionSequence& mesh);
// Appends all-zero virtual joints up to target_joints.
MotionSequence pad_virtual_joints(const MotionSequence& m, std::size_t target_joints);
// Zero rotations over F frames: the canonical T-body.
MotionSequence canonical_tbody(std::size_t frames, std::size_t joints);

}  // namespace hic

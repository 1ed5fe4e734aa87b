#include "hic/motion/motion.hpp"

namespace hic {

std::string_view modality_name(Modality m) {
    switch (m) {
        case Modality::Pose2D: return "pose2d";
        case Modality::Pose3D: return "pose3d";
        case Modality::MeshParams: return "mesh";
    }
    return "?";
}

Modality parse_modality(std::string_view name) {
    if (name == "pose2d") return Modality::Pose2D;
    if (name == "pose3d") return Modality::Pose3D;
    if (name == "mesh") return Modality::MeshParams;
    throw DomainError("unknown modality '" + std::string(name) + "'");
}

MotionSequence::MotionSequence(NdBuffer values, Modality modality, std::size_t native_joint_count, Vec beta)
    : values_(std::move(values)), modality_(modality), native_(native_joint_count), beta_(std::move(beta)) {
    if (values_.rank() != 3 || values_.extent(2) != kChannels)
        throw DimensionError("motion values must be [F,J,3], got " + shape_str(values_.shape()));
    if (native_ == 0 || native_ > joints())
        throw DimensionError("native joint count " + std::to_string(native_) + " outside [1," +
                             std::to_string(joints()) + "]");
    if (static_cast<std::size_t>(beta_.size()) != kShapeParams)
        throw DimensionError("shape parameters must have length " + std::to_string(kShapeParams));
    if (!all_finite(beta_)) throw NumericError("non-finite shape parameters", "motion");
    if (is_pose(modality_) && !beta_.isZero(0.0)) throw DomainError("pose modalities carry zero shape parameters");
    for (std::size_t f = 0; f < frames(); ++f)
        for (std::size_t j = 0; j < joints(); ++j) {
            if (modality_ == Modality::Pose2D && values_.at(f, j, 2) != 0.0)
                throw DomainError("2-D pose must have a zero z channel");
            if (j >= native_)
                for (std::size_t c = 0; c < kChannels; ++c)
                    if (values_.at(f, j, c) != 0.0) throw DomainError("virtual joints must be all zero");
        }
}

MotionSequence MotionSequence::window(std::size_t first, std::size_t count) const {
    if (count == 0 || first + count > frames())
        throw DimensionError("frame window [" + std::to_string(first) + "," + std::to_string(first + count) +
                             ") outside " + std::to_string(frames()) + " frames");
    const std::size_t stride = joints() * kChannels;
    NdBuffer out({count, joints(), kChannels},
                 values_.flat().segment(static_cast<Eigen::Index>(first * stride), static_cast<Eigen::Index>(count * stride)));
    return MotionSequence(std::move(out), modality_, native_, beta_);
}

const MotionSequence& MotionClip::get(Modality m) const {
    switch (m) {
        case Modality::Pose2D: return pose2d;
        case Modality::Pose3D: return pose3d;
        case Modality::MeshParams: return mesh;
    }
    return pose3d;
}

void MotionClip::validate() const {
    for (const MotionSequence* m : {&pose2d, &pose3d, &mesh}) {
        if (m->frames() != pose3d.frames() || m->joints() != pose3d.joints())
            throw DimensionError("clip '" + id + "' members disagree on frames/joints");
    }
    if (pose2d.modality() != Modality::Pose2D || pose3d.modality() != Modality::Pose3D ||
        mesh.modality() != Modality::MeshParams)
        throw DomainError("clip '" + id + "' members carry the wrong modality tags");
}

void Dataset::validate() const {
    if (clips.empty()) throw StateError("dataset has no clips");
    if (!(unit_to_mm > 0.0)) throw DomainError("unit_to_mm must be positive");
    const std::size_t frames = clips[0].frames(), joints = clips[0].joints();
    if (frames % 2 != 0) throw DimensionError("clips need an even frame count, got " + std::to_string(frames));
    for (const MotionClip& c : clips) {
        c.validate();
        if (c.frames() != frames || c.joints() != joints)
            throw DimensionError("clip '" + c.id + "' is " + std::to_string(c.frames()) + "x" +
                                 std::to_string(c.joints()) + ", dataset is " + std::to_string(frames) + "x" +
                                 std::to_string(joints));
    }
}

MotionSequence unify_pose2d(const NdBuffer& points) {
    if (points.rank() != 3 || points.extent(2) != 2)
        throw DimensionError("2-D pose input must be [F,N,2], got " + shape_str(points.shape()));
    const std::size_t F = points.extent(0), N = points.extent(1);
    NdBuffer out({F, N, kChannels});
    for (std::size_t f = 0; f < F; ++f)
        for (std::size_t j = 0; j < N; ++j) {
            out.at(f, j, 0) = points.at(f, j, 0);
            out.at(f, j, 1) = points.at(f, j, 1);
        }
    return MotionSequence(std::move(out), Modality::Pose2D, N);
}

MotionSequence unify_pose3d(const NdBuffer& points) {
    if (points.rank() != 3 || points.extent(2) != kChannels)
        throw DimensionError("3-D pose input must be [F,N,3], got " + shape_str(points.shape()));
    return MotionSequence(points, Modality::Pose3D, points.extent(1));
}

MotionSequence reorganize_mesh_params(const Mat& theta, const Vec& beta) {
    if (theta.rows() == 0 || theta.cols() == 0 || theta.cols() % 3 != 0)
        throw DimensionError("rotation parameters per frame must be a positive multiple of 3, got " +
                             std::to_string(theta.cols()));
    const auto F = static_cast<std::size_t>(theta.rows());
    const auto J = static_cast<std::size_t>(theta.cols() / 3);
    // Row-major F x 3J already is F x J x 3 in memory.
    NdBuffer values({F, J, kChannels}, Eigen::Map<const Vec>(theta.data(), theta.size()));
    return MotionSequence(std::move(values), Modality::MeshParams, J, beta);
}

Mat flatten_mesh_params(const MotionSequence& mesh) {
    return mesh.values().matrix(mesh.frames(), mesh.joints() * kChannels);
}

MotionSequence pad_virtual_joints(const MotionSequence& m, std::size_t target_joints) {
    if (target_joints < m.joints())
        throw DimensionError("cannot pad " + std::to_string(m.joints()) + " joints down to " +
                             std::to_string(target_joints));
    NdBuffer out({m.frames(), target_joints, kChannels});
    for (std::size_t f = 0; f < m.frames(); ++f)
        for (std::size_t j = 0; j < m.joints(); ++j)
            for (std::size_t c = 0; c < kChannels; ++c) out.at(f, j, c) = m.values().at(f, j, c);
    return MotionSequence(std::move(out), m.modality(), m.native_joint_count(), m.beta());
}

MotionSequence canonical_tbody(std::size_t frames, std::size_t joints) {
    return MotionSequence(NdBuffer({frames, joints, kChannels}), Modality::MeshParams, joints);
}

}  // namespace hic

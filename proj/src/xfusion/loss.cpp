#include "hic/xfusion/loss.hpp"

#include <string>

#include "hic/numeric/ops.hpp"

namespace hic {
namespace {

// 1/(frames*native) on native-joint rows, 0 on virtual ones.
Vec native_mean_weights(std::size_t frames, std::size_t joints, std::size_t native) {
    Vec w = Vec::Zero(static_cast<Eigen::Index>(frames * joints));
    const double each = 1.0 / static_cast<double>(frames * native);
    for (std::size_t f = 0; f < frames; ++f)
        for (std::size_t j = 0; j < native; ++j) w(static_cast<Eigen::Index>(f * joints + j)) = each;
    return w;
}

void require_pose_pair(const MotionSequence& a, const MotionSequence& b, const char* metric) {
    if (a.modality() == Modality::MeshParams || b.modality() == Modality::MeshParams)
        throw DomainError(std::string(metric) + " is defined for pose sequences only");
    if (a.frames() != b.frames() || a.joints() != b.joints())
        throw DimensionError(std::string(metric) + " shape mismatch");
}

}  // namespace

LossTerms motion_loss(Var prediction, Var shape, const TaskSample& sample, const LossWeights& weights) {
    if (weights.position < 0 || weights.velocity < 0 || weights.shape < 0)
        throw DomainError("loss weights must be non-negative");
    const MotionSequence& target = sample.query_target;
    const std::size_t f = target.frames(), j = target.joints(), n = target.native_joint_count();
    if (prediction.rows() != static_cast<Eigen::Index>(f * j) || prediction.cols() != static_cast<Eigen::Index>(kChannels))
        throw DimensionError("prediction is " + std::to_string(prediction.rows()) + "x" +
                             std::to_string(prediction.cols()) + ", target has " + std::to_string(f * j) + " rows");
    Tape& tape = *prediction.tape;
    Var error = prediction - tape.constant(Mat(target.rows()));

    LossTerms terms;
    Var position = weighted_sum(row_norms(error), native_mean_weights(f, j, n));
    terms.position = position.value()(0, 0);
    Var total = scale(position, weights.position);

    if (f > 1) {
        Var velocity = weighted_sum(row_norms(frame_diff(error, j)), native_mean_weights(f - 1, j, n));
        terms.velocity = velocity.value()(0, 0);
        total = total + scale(velocity, weights.velocity);
    }
    if (is_mesh_output(sample.domain)) {
        const Vec& beta = target.beta();
        if (shape.cols() != beta.size()) throw DimensionError("shape head width does not match beta");
        Var diff = shape - tape.constant(beta.transpose());
        Var mse = scale(sum_squares(diff), 1.0 / static_cast<double>(beta.size()));
        terms.shape = mse.value()(0, 0);
        total = total + scale(mse, weights.shape);
    }
    terms.total = total;
    return terms;
}

double mpjpe(const MotionSequence& prediction, const MotionSequence& target, double unit_to_mm, std::size_t root) {
    require_pose_pair(prediction, target, "mpjpe");
    const std::size_t f = target.frames(), j = target.joints(), n = target.native_joint_count();
    if (root >= n) throw IndexError("root joint " + std::to_string(root) + " is not a native joint");
    const auto p = prediction.rows();
    const auto t = target.rows();
    double total = 0.0;
    for (std::size_t ff = 0; ff < f; ++ff) {
        const auto r = static_cast<Eigen::Index>(ff * j + root);
        for (std::size_t jj = 0; jj < n; ++jj) {
            const auto i = static_cast<Eigen::Index>(ff * j + jj);
            total += ((p.row(i) - p.row(r)) - (t.row(i) - t.row(r))).norm();
        }
    }
    return unit_to_mm * total / static_cast<double>(f * n);
}

double mean_parameter_l2(const MotionSequence& prediction, const MotionSequence& target) {
    if (prediction.frames() != target.frames() || prediction.joints() != target.joints())
        throw DimensionError("mean_parameter_l2 shape mismatch");
    const std::size_t f = target.frames(), j = target.joints(), n = target.native_joint_count();
    double total = 0.0;
    for (std::size_t ff = 0; ff < f; ++ff)
        for (std::size_t jj = 0; jj < n; ++jj) {
            const auto i = static_cast<Eigen::Index>(ff * j + jj);
            total += (prediction.rows().row(i) - target.rows().row(i)).norm();
        }
    return total / static_cast<double>(f * n);
}

}  // namespace hic

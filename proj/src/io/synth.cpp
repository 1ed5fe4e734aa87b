#include "hic/io/synth.hpp"

#include <cmath>
#include <numbers>

#include "hic/numeric/rng.hpp"
#include "hic/xfusion/net.hpp"

namespace hic {
namespace {

struct Cluster {
    Mat amplitude;  // J x 3 radians
    Mat phase;      // J x 3
    double omega;   // radians per frame
    Eigen::RowVector3d velocity;
    Vec beta;
};

double to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

Cluster make_cluster(Rng& rng, std::size_t joints) {
    Cluster c;
    const auto j = static_cast<Eigen::Index>(joints);
    c.amplitude = Mat(j, 3);
    c.phase = Mat(j, 3);
    for (Eigen::Index i = 0; i < c.amplitude.size(); ++i) {
        c.amplitude.data()[i] = rng.uniform(-0.6, 0.6);
        c.phase.data()[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    c.amplitude.row(0) *= 0.3;
    c.omega = 2.0 * std::numbers::pi * rng.uniform(1.0, 3.0) / 30.0;
    c.velocity = Eigen::RowVector3d(rng.uniform(-0.02, 0.02), 0.0, rng.uniform(-0.02, 0.02));
    c.beta = Vec(kShapeParams);
    for (auto& b : c.beta) b = rng.normal();
    return c;
}

}  // namespace

void SynthConfig::validate() const {
    if (clips == 0) throw ConfigError("clips", "must be positive");
    if (frames < 2) throw ConfigError("frames", "must be at least 2");
    if (joints == 0) throw ConfigError("joints", "must be positive");
    if (clusters == 0) throw ConfigError("clusters", "must be positive");
    if (!(noise >= 0.0)) throw ConfigError("noise", "must be non-negative");
    if (!(unit_to_mm > 0.0)) throw ConfigError("unit_to_mm", "must be positive");
}

Eigen::Matrix<double, 24, 3, Eigen::RowMajor> smpl_rest_offsets() {
    Eigen::Matrix<double, 24, 3, Eigen::RowMajor> o;
    o << 0, 0, 0,                //
        0.06, -0.09, 0,          // left hip
        -0.06, -0.09, 0,         //
        0, 0.11, 0,              // spine
        0.04, -0.38, 0,          // left knee
        -0.04, -0.38, 0,         //
        0, 0.14, 0,              //
        0, -0.40, 0,             // left ankle
        0, -0.40, 0,             //
        0, 0.06, 0.02,           //
        0, -0.06, 0.12,          // left foot
        0, -0.06, 0.12,          //
        0, 0.21, -0.03,          // neck
        0.08, 0.12, -0.02,       // left collar
        -0.08, 0.12, -0.02,      //
        0, 0.09, 0.05,           // head
        0.12, 0.04, -0.01,       // left shoulder
        -0.12, 0.04, -0.01,      //
        0.26, 0, -0.02,          // left elbow
        -0.26, 0, -0.02,         //
        0.25, 0, 0,              // left wrist
        -0.25, 0, 0,             //
        0.08, 0, 0,              // left hand
        -0.08, 0, 0;
    return o;
}

Mat forward_kinematics(const Mat& axis_angle, const Eigen::RowVector3d& root) {
    const Eigen::Index n = axis_angle.rows();
    if (n == 0 || n > 24 || axis_angle.cols() != 3)
        throw DimensionError("forward_kinematics expects J x 3 rotations with J <= 24");
    const auto offsets = smpl_rest_offsets();
    std::vector<Eigen::Matrix3d> global(static_cast<std::size_t>(n));
    Mat pos(n, 3);
    for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Vector3d aa = axis_angle.row(j).transpose();
        const double angle = aa.norm();
        const Eigen::Matrix3d local =
            angle > 0.0 ? Eigen::AngleAxisd(angle, aa / angle).toRotationMatrix() : Eigen::Matrix3d::Identity();
        const int parent = kSmplParents[static_cast<std::size_t>(j)];
        if (parent < 0) {
            global[0] = local;
            pos.row(0) = root;
        } else {
            const auto p = static_cast<std::size_t>(parent);
            global[static_cast<std::size_t>(j)] = global[p] * local;
            pos.row(j) = pos.row(parent) + (global[p] * offsets.row(j).transpose()).transpose();
        }
    }
    return pos;
}

Dataset synthesize(const SynthConfig& config) {
    config.validate();
    Rng rng(config.seed);
    const std::size_t native = std::min<std::size_t>(config.joints, 24);
    std::vector<Cluster> clusters;
    for (std::size_t c = 0; c < config.clusters; ++c) clusters.push_back(make_cluster(rng, native));

    Dataset d;
    d.unit_to_mm = config.unit_to_mm;
    const std::size_t frames = 2 * config.frames;
    for (std::size_t i = 0; i < config.clips; ++i) {
        const std::size_t c = i % config.clusters;
        const Cluster& cl = clusters[c];
        Mat amplitude = cl.amplitude;
        for (Eigen::Index k = 0; k < amplitude.size(); ++k) amplitude.data()[k] += config.noise * rng.normal();
        const double shift = rng.uniform(0.0, 2.0 * std::numbers::pi);
        Vec beta = cl.beta;
        for (auto& b : beta) b = to_float(b + 0.1 * rng.normal());

        NdBuffer p2({frames, config.joints, kChannels});
        NdBuffer p3({frames, config.joints, kChannels});
        NdBuffer mesh({frames, config.joints, kChannels});
        for (std::size_t f = 0; f < frames; ++f) {
            const double t = cl.omega * static_cast<double>(f) + shift;
            Mat aa = amplitude.cwiseProduct((cl.phase.array() + t).sin().matrix());
            aa = aa.unaryExpr(&to_float);
            const Mat pos = forward_kinematics(aa, cl.velocity * static_cast<double>(f));
            for (std::size_t j = 0; j < native; ++j)
                for (std::size_t ch = 0; ch < kChannels; ++ch) {
                    const auto r = static_cast<Eigen::Index>(j), k = static_cast<Eigen::Index>(ch);
                    mesh.at(f, j, ch) = aa(r, k);
                    p3.at(f, j, ch) = to_float(pos(r, k));
                    if (ch < 2) p2.at(f, j, ch) = p3.at(f, j, ch);
                }
        }
        d.clips.push_back(MotionClip{MotionSequence(std::move(p2), Modality::Pose2D, native),
                                     MotionSequence(std::move(p3), Modality::Pose3D, native),
                                     MotionSequence(std::move(mesh), Modality::MeshParams, native, beta),
                                     "synth-" + std::to_string(i), "cluster-" + std::to_string(c)});
    }
    return d;
}

}  // namespace hic

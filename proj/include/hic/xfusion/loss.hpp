#pragma once

#include "hic/motion/tasks.hpp"
#include "hic/numeric/tape.hpp"

namespace hic {

struct LossWeights {
    double position = 1.0;
    double velocity = 0.5;
    double shape = 1.0;
};

struct LossTerms {
    Var total;
    double position = 0.0;
    double velocity = 0.0;
    double shape = 0.0;  // zero for pose-output domains
};

// position: mean over frames and native joints of ||pred - target||
// velocity: same mean over the first-order frame differences of the error
// shape:    mean squared error of beta, mesh-output domains only
// Virtual joints (index >= target native count) never contribute.
LossTerms motion_loss(Var prediction, Var shape, const TaskSample& sample, const LossWeights& weights);

// Mean per-joint position error after subtracting the root joint per frame,
// over frames and native joints, multiplied by unit_to_mm.
double mpjpe(const MotionSequence& prediction, const MotionSequence& target, double unit_to_mm = 1.0,
             std::size_t root = kRootJoint);

// Mean per-joint L2 in parameter space (no root alignment); the mesh-output metric.
double mean_parameter_l2(const MotionSequence& prediction, const MotionSequence& target);

}  // namespace hic

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hic/numeric/tape.hpp"

namespace hic {

using ScalarFunction = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
    // max |analytic - numeric| / max(1, |numeric|) over every coordinate
    double max_rel_error = 0.0;
    std::size_t worst_param = 0;
    Eigen::Index worst_coord = 0;
    std::vector<Mat> analytic;
};

// Compares reverse-mode gradients of f against central differences.
GradCheckResult grad_check(const ScalarFunction& f, std::span<const Mat> params, double step = 1e-5);

}  // namespace hic

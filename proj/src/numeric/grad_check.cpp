#include "hic/numeric/grad_check.hpp"

#include <cmath>

namespace hic {
namespace {

double evaluate(const ScalarFunction& f, std::span<const Mat> params) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const Mat& p : params) vars.push_back(tape.parameter(p));
    const Var out = f(tape, vars);
    if (out.rows() != 1 || out.cols() != 1) throw DimensionError("grad_check function must return a 1x1 value");
    return out.value()(0, 0);
}

}  // namespace

GradCheckResult grad_check(const ScalarFunction& f, std::span<const Mat> params, double step) {
    GradCheckResult result;
    {
        Tape tape;
        std::vector<Var> vars;
        for (const Mat& p : params) vars.push_back(tape.parameter(p));
        const Var out = f(tape, vars);
        tape.backward(out);
        for (const Var& v : vars) result.analytic.push_back(tape.grad(v));
    }

    std::vector<Mat> work(params.begin(), params.end());
    for (std::size_t p = 0; p < work.size(); ++p) {
        for (Eigen::Index i = 0; i < work[p].size(); ++i) {
            double& x = work[p].data()[i];
            const double saved = x;
            x = saved + step;
            const double up = evaluate(f, work);
            x = saved - step;
            const double down = evaluate(f, work);
            x = saved;
            const double numeric = (up - down) / (2.0 * step);
            if (!std::isfinite(numeric)) throw NumericError("non-finite central difference", "grad_check");
            const double err = std::abs(result.analytic[p].data()[i] - numeric) / std::max(1.0, std::abs(numeric));
            if (err > result.max_rel_error) {
                result.max_rel_error = err;
                result.worst_param = p;
                result.worst_coord = i;
            }
        }
    }
    return result;
}

}  // namespace hic

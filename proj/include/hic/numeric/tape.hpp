#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "hic/numeric/tensor.hpp"

namespace hic {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Mat& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
};

// Reverse-mode record of matrix operations. Each recorded operation stores its
// output and a closure that pushes the output gradient into its inputs.
// backward() replays closures in exact reverse order of recording and
// accumulates gradients additively, so a value used twice receives the sum.
class Tape {
public:
    using Backward = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Differentiable leaf (a parameter).
    Var parameter(Mat value);
    // Non-differentiable leaf (data, masks).
    Var constant(Mat value);

    // Records an operation. Rejects non-finite outputs with the op id.
    Var record(std::string op, Mat value, std::vector<Var> inputs, Backward backward);

    const Mat& value(Var v) const { return nodes_.at(v.id).value; }
    const Mat& value(std::size_t id) const { return nodes_.at(id).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

    // Gradient of the last backward() root w.r.t. v; zeros if v was not reached.
    Mat grad(Var v) const;
    // Output gradient of node id while its closure runs.
    const Mat& grad_of(std::size_t id) const { return grads_.at(id); }

    // Adds g into the gradient of v. No-op for constants.
    template <typename Derived>
    void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
        auto& node = nodes_.at(v.id);
        if (!node.requires_grad) return;
        Mat& acc = grads_.at(v.id);
        if (acc.size() == 0)
            acc = g;
        else
            acc += g;
    }

    // Seeds d(root)/d(root) = 1 for a 1x1 root and runs all closures in reverse.
    void backward(Var root);

    std::size_t size() const noexcept { return nodes_.size(); }
    const std::string& op_name(std::size_t id) const { return nodes_.at(id).op; }
    // Node ids whose closures ran during the last backward(), in call order.
    const std::vector<std::size_t>& last_backward_order() const noexcept { return visited_; }

private:
    struct Node {
        std::string op;
        Mat value;
        bool requires_grad = false;
        Backward backward;
    };

    std::vector<Node> nodes_;
    std::vector<Mat> grads_;
    std::vector<std::size_t> visited_;
};

inline const Mat& Var::value() const { return tape->value(*this); }

}  // namespace hic

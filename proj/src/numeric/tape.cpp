#include "hic/numeric/tape.hpp"

namespace hic {

Var Tape::parameter(Mat value) {
    nodes_.push_back({"parameter", std::move(value), true, nullptr});
    grads_.emplace_back();
    return {this, nodes_.size() - 1};
}

Var Tape::constant(Mat value) {
    nodes_.push_back({"constant", std::move(value), false, nullptr});
    grads_.emplace_back();
    return {this, nodes_.size() - 1};
}

Var Tape::record(std::string op, Mat value, std::vector<Var> inputs, Backward backward) {
    if (!all_finite(value))
        throw NumericError("non-finite output from op '" + op + "' (#" + std::to_string(nodes_.size()) + ")", op);
    bool needs = false;
    for (const Var& in : inputs) {
        if (in.tape != this) throw StateError("op '" + op + "' mixes values from different tapes");
        needs = needs || nodes_.at(in.id).requires_grad;
    }
    nodes_.push_back({std::move(op), std::move(value), needs, needs ? std::move(backward) : nullptr});
    grads_.emplace_back();
    return {this, nodes_.size() - 1};
}

Mat Tape::grad(Var v) const {
    const Mat& g = grads_.at(v.id);
    if (g.size() == 0) return Mat::Zero(value(v).rows(), value(v).cols());
    return g;
}

void Tape::backward(Var root) {
    const Mat& r = value(root);
    if (r.rows() != 1 || r.cols() != 1) throw DimensionError("backward root must be 1x1");
    for (auto& g : grads_) g.resize(0, 0);
    visited_.clear();
    if (!nodes_.at(root.id).requires_grad) return;
    grads_[root.id] = Mat::Ones(1, 1);
    for (std::size_t id = root.id + 1; id-- > 0;) {
        const Node& node = nodes_[id];
        if (!node.backward || grads_[id].size() == 0) continue;
        visited_.push_back(id);
        node.backward(*this, id);
    }
}

}  // namespace hic

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hic/numeric/errors.hpp"

namespace hic {

template <typename Scalar>
using MatrixR = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Mat = MatrixR<double>;
using Vec = Eigen::VectorXd;

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
    return m.derived().array().isFinite().all();
}

// Dense row-major n-dimensional array. Value type: copies are deep, nothing
// mutates through a const Tensor, and construction rejects NaN/Inf.
template <typename Scalar>
class Tensor {
public:
    using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using MatrixMap = Eigen::Map<MatrixR<Scalar>>;
    using ConstMatrixMap = Eigen::Map<const MatrixR<Scalar>>;

    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(Storage::Zero(checked_numel(shape_))) {}

    Tensor(Shape shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<std::size_t>(data_.size()) != checked_numel(shape_))
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_str(shape_));
        if (!all_finite(data_)) throw NumericError("tensor constructed with non-finite values", "construct");
    }

    Tensor(Shape shape, std::initializer_list<Scalar> values)
        : Tensor(std::move(shape), Eigen::Map<const Storage>(values.begin(), static_cast<Eigen::Index>(values.size()))) {}

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor from_matrix(const MatrixR<Scalar>& m) {
        return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                      Eigen::Map<const Storage>(m.data(), m.size()));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return static_cast<std::size_t>(data_.size()); }
    bool empty() const noexcept { return data_.size() == 0; }

    const Storage& flat() const noexcept { return data_; }
    Storage& flat() noexcept { return data_; }
    std::span<const Scalar> span() const noexcept { return {data_.data(), size()}; }

    Scalar operator[](std::size_t i) const { return data_[static_cast<Eigen::Index>(i)]; }
    Scalar& operator[](std::size_t i) { return data_[static_cast<Eigen::Index>(i)]; }

    Scalar at(std::size_t i, std::size_t j, std::size_t k) const { return data_[offset3(i, j, k)]; }
    Scalar& at(std::size_t i, std::size_t j, std::size_t k) { return data_[offset3(i, j, k)]; }

    // 2-D row-major view; rows * cols must equal size().
    ConstMatrixMap matrix(std::size_t rows, std::size_t cols) const {
        check_view(rows, cols);
        return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    }
    MatrixMap matrix(std::size_t rows, std::size_t cols) {
        check_view(rows, cols);
        return MatrixMap(data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    }
    // Collapses all leading axes: [d0, ..., dn] -> (d0*...*d{n-1}) x dn.
    ConstMatrixMap matrix() const { return matrix(size() / last_extent(), last_extent()); }
    MatrixMap matrix() { return matrix(size() / last_extent(), last_extent()); }

    Tensor reshaped(Shape shape) const {
        if (shape_numel(shape) != size())
            throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
        Tensor out;
        out.shape_ = std::move(shape);
        out.data_ = data_;
        return out;
    }

    template <typename Other>
    Tensor<Other> cast() const {
        Tensor<Other> out(shape_);
        out.flat() = data_.template cast<Other>();
        return out;
    }

    bool operator==(const Tensor& o) const {
        return shape_ == o.shape_ && data_.size() == o.data_.size() && (data_.array() == o.data_.array()).all();
    }

private:
    static std::size_t checked_numel(const Shape& s) {
        for (auto e : s)
            if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(s));
        return shape_numel(s);
    }
    std::size_t last_extent() const { return shape_.empty() ? 1 : shape_.back(); }
    Eigen::Index offset3(std::size_t i, std::size_t j, std::size_t k) const {
        return static_cast<Eigen::Index>((i * shape_[1] + j) * shape_[2] + k);
    }
    void check_view(std::size_t rows, std::size_t cols) const {
        if (rows * cols != size())
            throw DimensionError("cannot view " + shape_str(shape_) + " as " + std::to_string(rows) + "x" +
                                 std::to_string(cols));
    }

    Shape shape_;
    Storage data_;
};

using NdBuffer = Tensor<double>;

// Matrix product of two rank-2 buffers.
NdBuffer matmul(const NdBuffer& a, const NdBuffer& b);

// Softmax over the last axis with max subtraction.
NdBuffer softmax_lastdim(const NdBuffer& x);

// Row-wise softmax on a dense matrix; shared by the buffer and tape versions.
Mat softmax_rows(const Mat& x);

}  // namespace hic

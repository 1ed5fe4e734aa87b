#include "hic/numeric/tensor.hpp"

namespace hic {

NdBuffer matmul(const NdBuffer& a, const NdBuffer& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0))
        throw DimensionError("matmul shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const Mat out = a.matrix() * b.matrix();
    return NdBuffer::from_matrix(out);
}

Mat softmax_rows(const Mat& x) {
    Mat out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double peak = x.row(r).maxCoeff();
        out.row(r) = (x.row(r).array() - peak).exp().matrix();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

NdBuffer softmax_lastdim(const NdBuffer& x) {
    const Mat out = softmax_rows(Mat(x.matrix()));
    return NdBuffer(x.shape(), Eigen::Map<const Vec>(out.data(), out.size()));
}

}  // namespace hic

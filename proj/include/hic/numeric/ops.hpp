#pragma once

#include <span>
#include <vector>

#include "hic/numeric/tape.hpp"

// Differentiable operations on tape values. Every op here has an analytic
// backward pass and a finite-difference test in tests/test_numeric.cpp.
// "Block" ops treat the rows of their input as consecutive sequences of
// `block` rows each (e.g. F frames of one joint after a view permutation).
namespace hic {

Var matmul(Var a, Var b);
// a * b^T
Var matmul_bt(Var a, Var b);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
// x + 1 x n row broadcast over all rows of x.
Var add_row(Var x, Var row);
Var concat_cols(std::span<const Var> parts);
Var softmax_rows(Var x);
Var tanh(Var x);

// z[r,:] = sum_l alpha[r,l] * ys[l][r,:]
Var mix_levels(Var alpha, std::span<const Var> ys);

// out[i,:] = x[perm[i],:]
Var permute_rows(Var x, std::span<const std::size_t> perm);

// (J x n) -> (F*J x n), row f*J+j copies p[j,:].
Var tile_per_frame(Var p, std::size_t frames);
// (F x n) -> (F*J x n), row f*J+j copies p[f,:].
Var repeat_per_joint(Var p, std::size_t joints);

// Per block: softmax(Q K^T * scale) V.
Var block_attention(Var q, Var k, Var v, std::size_t block, double scale);
// Per block: adjacency * x_block with a fixed block x block matrix.
Var block_apply(const Mat& adjacency, Var x, std::size_t block);
// Per block causal diagonal recurrence:
//   s_t = a*s_{t-1} + b*u_t,  y_t = c*s_t + d*u_t  (all 1 x n rows, elementwise).
Var block_diag_scan(Var u, Var a, Var b, Var c, Var d, std::size_t block);

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);
// 1 x n mean over rows.
Var mean_rows(Var x);
// n x 1 Euclidean norms of rows; the gradient at a zero row is taken as 0.
Var row_norms(Var x);
// 1 x 1 weighted sum sum_i w_i * x_i of an n x 1 column.
Var weighted_sum(Var x, const Vec& weights);
// Rows (f+1)*J+j minus rows f*J+j: (F*J x n) -> ((F-1)*J x n).
Var frame_diff(Var x, std::size_t joints);
Var sum(Var x);
Var sum_squares(Var x);

}  // namespace hic

#include "hic/numeric/ops.hpp"

#include <cmath>
#include <memory>
#include <string>

namespace hic {
namespace {

Tape& tape_of(Var v) {
    if (v.tape == nullptr) throw StateError("Var is not attached to a tape");
    return *v.tape;
}

std::string dims(Var v) { return std::to_string(v.rows()) + "x" + std::to_string(v.cols()); }

void require_same_shape(const char* op, Var a, Var b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(op) + " shape mismatch: " + dims(a) + " vs " + dims(b));
}

void require_blocks(const char* op, Var x, std::size_t block) {
    if (block == 0 || static_cast<std::size_t>(x.rows()) % block != 0)
        throw DimensionError(std::string(op) + ": " + std::to_string(x.rows()) + " rows not divisible into blocks of " +
                             std::to_string(block));
}

}  // namespace

Var matmul(Var a, Var b) {
    if (a.cols() != b.rows()) throw DimensionError("matmul shape mismatch: " + dims(a) + " x " + dims(b));
    Mat out = a.value() * b.value();
    return tape_of(a).record("matmul", std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Mat& g = t.grad_of(self);
        t.accumulate(a, g * b.value().transpose());
        t.accumulate(b, a.value().transpose() * g);
    });
}

Var matmul_bt(Var a, Var b) {
    if (a.cols() != b.cols()) throw DimensionError("matmul_bt shape mismatch: " + dims(a) + " x " + dims(b) + "^T");
    Mat out = a.value() * b.value().transpose();
    return tape_of(a).record("matmul_bt", std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Mat& g = t.grad_of(self);
        t.accumulate(a, g * b.value());
        t.accumulate(b, g.transpose() * a.value());
    });
}

Var operator+(Var a, Var b) {
    require_same_shape("add", a, b);
    Mat out = a.value() + b.value();
    return tape_of(a).record("add", std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        t.accumulate(a, t.grad_of(self));
        t.accumulate(b, t.grad_of(self));
    });
}

Var operator-(Var a, Var b) {
    require_same_shape("sub", a, b);
    Mat out = a.value() - b.value();
    return tape_of(a).record("sub", std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        t.accumulate(a, t.grad_of(self));
        t.accumulate(b, -t.grad_of(self));
    });
}

Var hadamard(Var a, Var b) {
    require_same_shape("hadamard", a, b);
    Mat out = a.value().cwiseProduct(b.value());
    return tape_of(a).record("hadamard", std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Mat& g = t.grad_of(self);
        t.accumulate(a, g.cwiseProduct(b.value()));
        t.accumulate(b, g.cwiseProduct(a.value()));
    });
}

Var scale(Var a, double s) {
    Mat out = a.value() * s;
    return tape_of(a).record("scale", std::move(out), {a},
                             [a, s](Tape& t, std::size_t self) { t.accumulate(a, t.grad_of(self) * s); });
}

Var add_row(Var x, Var row) {
    if (row.rows() != 1 || row.cols() != x.cols())
        throw DimensionError("add_row expects 1x" + std::to_string(x.cols()) + " row, got " + dims(row));
    Mat out = x.value().rowwise() + row.value().row(0);
    return tape_of(x).record("add_row", std::move(out), {x, row}, [x, row](Tape& t, std::size_t self) {
        const Mat& g = t.grad_of(self);
        t.accumulate(x, g);
        t.accumulate(row, g.colwise().sum());
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw DimensionError("concat_cols needs at least one input");
    const Eigen::Index rows = parts[0].rows();
    Eigen::Index cols = 0;
    for (const Var& p : parts) {
        if (p.rows() != rows) throw DimensionError("concat_cols row mismatch: " + dims(parts[0]) + " vs " + dims(p));
        cols += p.cols();
    }
    Mat out(rows, cols);
    Eigen::Index at = 0;
    for (const Var& p : parts) {
        out.middleCols(at, p.cols()) = p.value();
        at += p.cols();
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return tape_of(parts[0]).record("concat_cols", std::move(out), inputs, [inputs](Tape& t, std::size_t self) {
        const Mat& g = t.grad_of(self);
        Eigen::Index at = 0;
        for (const Var& p : inputs) {
            t.accumulate(p, g.middleCols(at, p.cols()));
            at += p.cols();
        }
    });
}

Var softmax_rows(Var x) {
    Mat out = softmax_rows(x.value());
    return tape_of(x).record("softmax_rows", std::move(out), {x}, [x](Tape& t, std::size_t self) {
        const Mat& g = t.grad_of(self);
        const Mat& s = t.value(self);
        const Vec inner = g.cwiseProduct(s).rowwise().sum();
        t.accumulate(x, s.cwiseProduct((g.colwise() - inner)));
    });
}

Var tanh(Var x) {
    Mat out = x.value().array().tanh().matrix();
    return tape_of(x).record("tanh", std::move(out), {x}, [x](Tape& t, std::size_t self) {
        const Mat& y = t.value(self);
        t.accumulate(x, t.grad_of(self).cwiseProduct((1.0 - y.array().square()).matrix()));
    });
}

Var mix_levels(Var alpha, std::span<const Var> ys) {
    if (static_cast<std::size_t>(alpha.cols()) != ys.size())
        throw DimensionError("mix_levels: " + std::to_string(alpha.cols()) + " weights for " +
                             std::to_string(ys.size()) + " levels");
    for (const Var& y : ys)
        if (y.rows() != alpha.rows() || y.cols() != ys[0].cols())
            throw DimensionError("mix_levels level shape mismatch: " + dims(ys[0]) + " vs " + dims(y));
    Mat out = Mat::Zero(ys[0].rows(), ys[0].cols());
    for (std::size_t l = 0; l < ys.size(); ++l)
        out += alpha.value().col(static_cast<Eigen::Index>(l)).asDiagonal() * ys[l].value();
    std::vector<Var> levels(ys.begin(), ys.end());
    std::vector<Var> inputs = levels;
    inputs.push_back(alpha);
    return tape_of(alpha).record("mix_levels", std::move(out), inputs, [alpha, levels](Tape& t, std::size_t self) {
        const Mat& g = t.grad_of(self);
        Mat galpha(alpha.rows(), alpha.cols());
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const auto li = static_cast<Eigen::Index>(l);
            galpha.col(li) = g.cwiseProduct(levels[l].value()).rowwise().sum();
            t.accumulate(levels[l], alpha.value().col(li).asDiagonal() * g);
        }
        t.accumulate(alpha, galpha);
    });
}

Var permute_rows(Var x, std::span<const std::size_t> perm) {
    if (perm.size() != static_cast<std::size_t>(x.rows()))
        throw DimensionError("permute_rows: permutation of length " + std::to_string(perm.size()) + " for " + dims(x));
    Mat out(x.rows(), x.cols());
    for (std::size_t i = 0; i < perm.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.value().row(perm[i]);
    std::vector<std::size_t> p(perm.begin(), perm.end());
    return tape_of(x).record("permute_rows", std::move(out), {x}, [x, p](Tape& t, std::size_t self) {
        const Mat& g = t.grad_of(self);
        Mat gx(g.rows(), g.cols());
        for (std::size_t i = 0; i < p.size(); ++i) gx.row(p[i]) = g.row(static_cast<Eigen::Index>(i));
        t.accumulate(x, gx);
    });
}

Var tile_per_frame(Var p, std::size_t frames) {
    const Eigen::Index joints = p.rows();
    Mat out(static_cast<Eigen::Index>(frames) * joints, p.cols());
    for (std::size_t f = 0; f < frames; ++f) out.middleRows(static_cast<Eigen::Index>(f) * joints, joints) = p.value();
    return tape_of(p).record("tile_per_frame", std::move(out), {p}, [p, frames, joints](Tape& t, std::size_t self) {
        const Mat& g = t.grad_of(self);
        Mat gp = Mat::Zero(joints, g.cols());
        for (std::size_t f = 0; f < frames; ++f) gp += g.middleRows(static_cast<Eigen::Index>(f) * joints, joints);
        t.accumulate(p, gp);
    });
}

Var repeat_per_joint(Var p, std::size_t joints) {
    const Eigen::Index frames = p.rows();
    const auto j = static_cast<Eigen::Index>(joints);
    Mat out(frames * j, p.cols());
    for (Eigen::Index f = 0; f < frames; ++f) out.middleRows(f * j, j).rowwise() = p.value().row(f);
    return tape_of(p).record("repeat_per_joint", std::move(out), {p}, [p, frames, j](Tape& t, std::size_t self) {
        const Mat& g = t.grad_of(self);
        Mat gp(frames, g.cols());
        for (Eigen::Index f = 0; f < frames; ++f) gp.row(f) = g.middleRows(f * j, j).colwise().sum();
        t.accumulate(p, gp);
    });
}

Var block_attention(Var q, Var k, Var v, std::size_t block, double scale) {
    require_same_shape("block_attention q/k", q, k);
    if (v.rows() != q.rows()) throw DimensionError("block_attention value rows mismatch: " + dims(q) + " vs " + dims(v));
    require_blocks("block_attention", q, block);
    const auto b = static_cast<Eigen::Index>(block);
    const Eigen::Index nblocks = q.rows() / b;
    auto probs = std::make_shared<std::vector<Mat>>(static_cast<std::size_t>(nblocks));
    Mat out(q.rows(), v.cols());
    for (Eigen::Index n = 0; n < nblocks; ++n) {
        const Mat scores = q.value().middleRows(n * b, b) * k.value().middleRows(n * b, b).transpose() * scale;
        Mat p = softmax_rows(scores);
        out.middleRows(n * b, b) = p * v.value().middleRows(n * b, b);
        (*probs)[static_cast<std::size_t>(n)] = std::move(p);
    }
    return tape_of(q).record("block_attention", std::move(out), {q, k, v},
                             [q, k, v, b, nblocks, scale, probs](Tape& t, std::size_t self) {
                                 const Mat& g = t.grad_of(self);
                                 Mat gq(q.rows(), q.cols()), gk(k.rows(), k.cols()), gv(v.rows(), v.cols());
                                 for (Eigen::Index n = 0; n < nblocks; ++n) {
                                     const Mat& p = (*probs)[static_cast<std::size_t>(n)];
                                     const auto go = g.middleRows(n * b, b);
                                     gv.middleRows(n * b, b) = p.transpose() * go;
                                     const Mat gp = go * v.value().middleRows(n * b, b).transpose();
                                     const Vec inner = gp.cwiseProduct(p).rowwise().sum();
                                     const Mat gs = p.cwiseProduct(gp.colwise() - inner) * scale;
                                     gq.middleRows(n * b, b) = gs * k.value().middleRows(n * b, b);
                                     gk.middleRows(n * b, b) = gs.transpose() * q.value().middleRows(n * b, b);
                                 }
                                 t.accumulate(q, gq);
                                 t.accumulate(k, gk);
                                 t.accumulate(v, gv);
                             });
}

Var block_apply(const Mat& adjacency, Var x, std::size_t block) {
    require_blocks("block_apply", x, block);
    if (adjacency.rows() != static_cast<Eigen::Index>(block) || adjacency.cols() != adjacency.rows())
        throw DimensionError("block_apply adjacency must be " + std::to_string(block) + "x" + std::to_string(block));
    const auto b = static_cast<Eigen::Index>(block);
    const Eigen::Index nblocks = x.rows() / b;
    Mat out(x.rows(), x.cols());
    for (Eigen::Index n = 0; n < nblocks; ++n) out.middleRows(n * b, b) = adjacency * x.value().middleRows(n * b, b);
    return tape_of(x).record("block_apply", std::move(out), {x}, [adjacency, x, b, nblocks](Tape& t, std::size_t self) {
        const Mat& g = t.grad_of(self);
        Mat gx(g.rows(), g.cols());
        for (Eigen::Index n = 0; n < nblocks; ++n) gx.middleRows(n * b, b) = adjacency.transpose() * g.middleRows(n * b, b);
        t.accumulate(x, gx);
    });
}

Var block_diag_scan(Var u, Var a, Var b, Var c, Var d, std::size_t block) {
    require_blocks("block_diag_scan", u, block);
    for (Var p : {a, b, c, d})
        if (p.rows() != 1 || p.cols() != u.cols())
            throw DimensionError("block_diag_scan coefficients must be 1x" + std::to_string(u.cols()) + ", got " + dims(p));
    const auto T = static_cast<Eigen::Index>(block);
    const Eigen::Index nblocks = u.rows() / T;
    const auto av = a.value().row(0).array();
    const auto bv = b.value().row(0).array();
    const auto cv = c.value().row(0).array();
    const auto dv = d.value().row(0).array();
    auto states = std::make_shared<Mat>(u.rows(), u.cols());
    Mat out(u.rows(), u.cols());
    for (Eigen::Index n = 0; n < nblocks; ++n) {
        Eigen::ArrayXXd s = Eigen::ArrayXXd::Zero(1, u.cols());
        for (Eigen::Index t = 0; t < T; ++t) {
            const Eigen::Index r = n * T + t;
            const auto ut = u.value().row(r).array();
            s = av * s + bv * ut;
            states->row(r) = s.matrix();
            out.row(r) = (cv * s + dv * ut).matrix();
        }
    }
    return tape_of(u).record(
        "block_diag_scan", std::move(out), {u, a, b, c, d}, [u, a, b, c, d, T, nblocks, states](Tape& tp, std::size_t self) {
            const Mat& g = tp.grad_of(self);
            const Eigen::Index H = u.cols();
            const auto av = a.value().row(0).array();
            const auto bv = b.value().row(0).array();
            const auto cv = c.value().row(0).array();
            const auto dv = d.value().row(0).array();
            Mat gu(u.rows(), H);
            Eigen::ArrayXXd ga = Eigen::ArrayXXd::Zero(1, H), gb = ga, gc = ga, gd = ga;
            for (Eigen::Index n = 0; n < nblocks; ++n) {
                Eigen::ArrayXXd gs_next = Eigen::ArrayXXd::Zero(1, H);
                for (Eigen::Index t = T; t-- > 0;) {
                    const Eigen::Index r = n * T + t;
                    const auto gy = g.row(r).array();
                    const auto ut = u.value().row(r).array();
                    const auto st = states->row(r).array();
                    const Eigen::ArrayXXd gs = cv * gy + av * gs_next;
                    gc += gy * st;
                    gd += gy * ut;
                    gb += gs * ut;
                    if (t > 0) ga += gs * states->row(r - 1).array();
                    gu.row(r) = (dv * gy + bv * gs).matrix();
                    gs_next = gs;
                }
            }
            tp.accumulate(u, gu);
            tp.accumulate(a, ga.matrix());
            tp.accumulate(b, gb.matrix());
            tp.accumulate(c, gc.matrix());
            tp.accumulate(d, gd.matrix());
        });
}

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
    for (Var p : {gamma, beta})
        if (p.rows() != 1 || p.cols() != x.cols())
            throw DimensionError("layer_norm_rows affine must be 1x" + std::to_string(x.cols()) + ", got " + dims(p));
    const Eigen::Index n = x.cols();
    auto xhat = std::make_shared<Mat>(x.rows(), n);
    auto inv_std = std::make_shared<Vec>(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mu = x.value().row(r).mean();
        const double var = (x.value().row(r).array() - mu).square().mean();
        (*inv_std)[r] = 1.0 / std::sqrt(var + eps);
        xhat->row(r) = (x.value().row(r).array() - mu) * (*inv_std)[r];
    }
    Mat out = (xhat->array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
    return tape_of(x).record("layer_norm_rows", std::move(out), {x, gamma, beta},
                             [x, gamma, beta, xhat, inv_std, n](Tape& t, std::size_t self) {
                                 const Mat& g = t.grad_of(self);
                                 t.accumulate(gamma, g.cwiseProduct(*xhat).colwise().sum());
                                 t.accumulate(beta, g.colwise().sum());
                                 const Mat gh = g.array().rowwise() * gamma.value().row(0).array();
                                 Mat gx(g.rows(), n);
                                 for (Eigen::Index r = 0; r < g.rows(); ++r) {
                                     const double m1 = gh.row(r).mean();
                                     const double m2 = gh.row(r).dot(xhat->row(r)) / static_cast<double>(n);
                                     gx.row(r) = (gh.row(r).array() - m1 - xhat->row(r).array() * m2) * (*inv_std)[r];
                                 }
                                 t.accumulate(x, gx);
                             });
}

Var mean_rows(Var x) {
    Mat out = x.value().colwise().mean();
    return tape_of(x).record("mean_rows", std::move(out), {x}, [x](Tape& t, std::size_t self) {
        const Mat& g = t.grad_of(self);
        Mat gx(x.rows(), x.cols());
        gx.rowwise() = g.row(0) / static_cast<double>(x.rows());
        t.accumulate(x, gx);
    });
}

Var row_norms(Var x) {
    Mat out = x.value().rowwise().norm();
    return tape_of(x).record("row_norms", std::move(out), {x}, [x](Tape& t, std::size_t self) {
        const Mat& g = t.grad_of(self);
        const Mat& norms = t.value(self);
        Mat gx = Mat::Zero(x.rows(), x.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            if (norms(r, 0) > 0.0) gx.row(r) = x.value().row(r) * (g(r, 0) / norms(r, 0));
        t.accumulate(x, gx);
    });
}

Var weighted_sum(Var x, const Vec& weights) {
    if (x.cols() != 1 || x.rows() != weights.size())
        throw DimensionError("weighted_sum expects a " + std::to_string(weights.size()) + "x1 column, got " + dims(x));
    Mat out(1, 1);
    out(0, 0) = x.value().col(0).dot(weights);
    return tape_of(x).record("weighted_sum", std::move(out), {x}, [x, weights](Tape& t, std::size_t self) {
        t.accumulate(x, weights * t.grad_of(self)(0, 0));
    });
}

Var frame_diff(Var x, std::size_t joints) {
    const auto j = static_cast<Eigen::Index>(joints);
    if (j == 0 || x.rows() % j != 0 || x.rows() < 2 * j)
        throw DimensionError("frame_diff needs at least two frames of " + std::to_string(joints) + " rows, got " + dims(x));
    const Eigen::Index n = x.rows() - j;
    Mat out = x.value().bottomRows(n) - x.value().topRows(n);
    return tape_of(x).record("frame_diff", std::move(out), {x}, [x, n](Tape& t, std::size_t self) {
        const Mat& g = t.grad_of(self);
        Mat gx = Mat::Zero(x.rows(), x.cols());
        gx.bottomRows(n) += g;
        gx.topRows(n) -= g;
        t.accumulate(x, gx);
    });
}

Var sum(Var x) {
    Mat out(1, 1);
    out(0, 0) = x.value().sum();
    return tape_of(x).record("sum", std::move(out), {x}, [x](Tape& t, std::size_t self) {
        t.accumulate(x, Mat::Constant(x.rows(), x.cols(), t.grad_of(self)(0, 0)));
    });
}

Var sum_squares(Var x) {
    Mat out(1, 1);
    out(0, 0) = x.value().squaredNorm();
    return tape_of(x).record("sum_squares", std::move(out), {x}, [x](Tape& t, std::size_t self) {
        t.accumulate(x, x.value() * (2.0 * t.grad_of(self)(0, 0)));
    });
}

}  // namespace hic

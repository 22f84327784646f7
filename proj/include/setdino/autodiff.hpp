#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "setdino/common.hpp"
#include "setdino/tensor.hpp"

namespace setdino::ad {

// Reverse-mode tape over row-major Eigen matrices. Rows are the batch axis
// throughout (tokens, cells, views); every op is 2-D. One tape is built per
// training step and discarded afterwards. Real = float for training, double
// for finite-difference checks.
template <typename Real>
class Tape {
public:
    using M = Mat<Real>;

    struct Node {
        M value;
        M grad;  // allocated lazily on first accumulation
        std::function<void()> backprop;
        bool needs_grad = false;
    };

    bool grad_enabled = true;

    int size() const { return static_cast<int>(nodes_.size()); }

    const M& val(int id) const { return nodes_[id].value; }

    M& grad(int id) {
        Node& n = nodes_[id];
        if (n.grad.size() == 0) n.grad = M::Zero(n.value.rows(), n.value.cols());
        return n.grad;
    }

    bool needs_grad(int id) const { return nodes_[id].needs_grad; }
    bool has_grad(int id) const { return nodes_[id].grad.size() != 0; }

    int constant(M value) { return push(std::move(value), false, nullptr); }

    int leaf(M value, bool requires_grad = true) {
        return push(std::move(value), requires_grad && grad_enabled, nullptr);
    }

    void backward(int root) {
        grad(root).setOnes();
        for (int i = root; i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.backprop && n.grad.size() != 0) n.backprop();
        }
    }

    // releases intermediate activations; values of kept ids stay valid
    void clear() { nodes_.clear(); }

    // ---- ops -------------------------------------------------------------

    int matmul(int a, int b) {
        M y = val(a) * val(b);
        return push(std::move(y), needs_grad(a) || needs_grad(b), [this, a, b](int out) {
            const M& g = nodes_[out].grad;
            if (needs_grad(a)) grad(a).noalias() += g * val(b).transpose();
            if (needs_grad(b)) grad(b).noalias() += val(a).transpose() * g;
        });
    }

    // A is a fixed matrix (e.g. interpolation weights), not a node
    int matmul_const_left(M A, int b) {
        auto Ap = std::make_shared<M>(std::move(A));
        M y = (*Ap) * val(b);
        return push(std::move(y), needs_grad(b), [this, Ap, b](int out) {
            if (needs_grad(b)) grad(b).noalias() += Ap->transpose() * nodes_[out].grad;
        });
    }

    int add(int a, int b) {
        M y = val(a) + val(b);
        return push(std::move(y), needs_grad(a) || needs_grad(b), [this, a, b](int out) {
            const M& g = nodes_[out].grad;
            if (needs_grad(a)) grad(a) += g;
            if (needs_grad(b)) grad(b) += g;
        });
    }

    // broadcast a [1, n] bias over all rows
    int add_rowvec(int x, int b) {
        M y = val(x).rowwise() + val(b).row(0);
        return push(std::move(y), needs_grad(x) || needs_grad(b), [this, x, b](int out) {
            const M& g = nodes_[out].grad;
            if (needs_grad(x)) grad(x) += g;
            if (needs_grad(b)) grad(b).row(0) += g.colwise().sum();
        });
    }

    int scale(int x, Real s) {
        M y = val(x) * s;
        return push(std::move(y), needs_grad(x), [this, x, s](int out) {
            if (needs_grad(x)) grad(x) += nodes_[out].grad * s;
        });
    }

    // tile a [T, n] table over row blocks of x ([B*T, n])
    int add_tiled(int x, int e, int block_rows) {
        const int T = block_rows;
        const int B = static_cast<int>(val(x).rows()) / T;
        M y = val(x);
        for (int i = 0; i < B; ++i) y.middleRows(i * T, T) += val(e);
        return push(std::move(y), needs_grad(x) || needs_grad(e), [this, x, e, T, B](int out) {
            const M& g = nodes_[out].grad;
            if (needs_grad(x)) grad(x) += g;
            if (needs_grad(e)) {
                M& ge = grad(e);
                for (int i = 0; i < B; ++i) ge += g.middleRows(i * T, T);
            }
        });
    }

    // prepend a shared [1, d] row (class token) to every block of P rows:
    // [B*P, d] -> [B*(P+1), d]
    int prepend_row_per_block(int x, int row, int block_rows) {
        const int P = block_rows;
        const int B = static_cast<int>(val(x).rows()) / P;
        const int d = static_cast<int>(val(x).cols());
        M y(B * (P + 1), d);
        for (int i = 0; i < B; ++i) {
            y.row(i * (P + 1)) = val(row).row(0);
            y.middleRows(i * (P + 1) + 1, P) = val(x).middleRows(i * P, P);
        }
        return push(std::move(y), needs_grad(x) || needs_grad(row),
                    [this, x, row, P, B](int out) {
                        const M& g = nodes_[out].grad;
                        if (needs_grad(row)) {
                            M& gr = grad(row);
                            for (int i = 0; i < B; ++i) gr.row(0) += g.row(i * (P + 1));
                        }
                        if (needs_grad(x)) {
                            M& gx = grad(x);
                            for (int i = 0; i < B; ++i)
                                gx.middleRows(i * P, P) += g.middleRows(i * (P + 1) + 1, P);
                        }
                    });
    }

    // per-row layer norm with affine [1, d] gamma/beta
    int layer_norm(int x, int gamma, int beta, Real eps = Real(1e-6)) {
        const auto& X = val(x);
        const int rows = static_cast<int>(X.rows());
        const int d = static_cast<int>(X.cols());
        auto xhat = std::make_shared<M>(rows, d);
        auto inv_std = std::make_shared<Eigen::Matrix<Real, Eigen::Dynamic, 1>>(rows);
        M y(rows, d);
#pragma omp parallel for schedule(static) if (rows > 64)
        for (int r = 0; r < rows; ++r) {
            const Real mean = X.row(r).mean();
            const Real var = (X.row(r).array() - mean).square().sum() / d;
            const Real is = Real(1) / std::sqrt(var + eps);
            xhat->row(r) = ((X.row(r).array() - mean) * is).matrix();
            (*inv_std)(r) = is;
            y.row(r) = (xhat->row(r).array() * val(gamma).row(0).array()).matrix() +
                       val(beta).row(0);
        }
        const bool ng = needs_grad(x) || needs_grad(gamma) || needs_grad(beta);
        return push(std::move(y), ng, [this, x, gamma, beta, xhat, inv_std, d](int out) {
            const M& g = nodes_[out].grad;
            if (needs_grad(beta)) grad(beta).row(0) += g.colwise().sum();
            if (needs_grad(gamma))
                grad(gamma).row(0) += (g.array() * xhat->array()).colwise().sum().matrix();
            if (needs_grad(x)) {
                M& gx = grad(x);
                const auto& G = val(gamma);
                const int rows = static_cast<int>(g.rows());
#pragma omp parallel for schedule(static) if (rows > 64)
                for (int r = 0; r < rows; ++r) {
                    Eigen::Array<Real, 1, Eigen::Dynamic> dxhat =
                        g.row(r).array() * G.row(0).array();
                    const Real m1 = dxhat.sum() / d;
                    const Real m2 = (dxhat * xhat->row(r).array()).sum() / d;
                    gx.row(r) +=
                        (((dxhat - m1) - xhat->row(r).array() * m2) * (*inv_std)(r)).matrix();
                }
            }
        });
    }

    // exact (erf-based) GELU
    int gelu(int x) {
        const auto& X = val(x);
        M y = X.unaryExpr([](Real v) {
            return Real(0.5) * v * (Real(1) + std::erf(v * Real(M_SQRT1_2)));
        });
        return push(std::move(y), needs_grad(x), [this, x](int out) {
            if (!needs_grad(x)) return;
            const M& g = nodes_[out].grad;
            const auto& X = val(x);
            grad(x).array() +=
                g.array() * X.unaryExpr([](Real v) {
                                 const Real phi = std::exp(Real(-0.5) * v * v) *
                                                  Real(0.3989422804014327);
                                 const Real Phi =
                                     Real(0.5) * (Real(1) + std::erf(v * Real(M_SQRT1_2)));
                                 return Phi + v * phi;
                             }).array();
        });
    }

    // multi-head self-attention over per-image token blocks.
    // qkv: [B*T, 3d] laid out [q | k | v]; output [B*T, d].
    int mhsa(int qkv, int images, int tokens, int heads) {
        const int d = static_cast<int>(val(qkv).cols()) / 3;
        const int dh = d / heads;
        const Real scl = Real(1) / std::sqrt(static_cast<Real>(dh));
        auto probs = std::make_shared<std::vector<M>>(
            static_cast<std::size_t>(images) * heads);
        M y(static_cast<Eigen::Index>(images) * tokens, d);
        const auto& Q = val(qkv);
#pragma omp parallel for schedule(static) if (images > 1)
        for (int i = 0; i < images; ++i) {
            for (int h = 0; h < heads; ++h) {
                auto q = Q.block(i * tokens, h * dh, tokens, dh);
                auto k = Q.block(i * tokens, d + h * dh, tokens, dh);
                auto v = Q.block(i * tokens, 2 * d + h * dh, tokens, dh);
                M scores = (q * k.transpose()) * scl;
                M p = softmax_rows(scores);
                y.block(i * tokens, h * dh, tokens, dh).noalias() = p * v;
                (*probs)[static_cast<std::size_t>(i) * heads + h] = std::move(p);
            }
        }
        return push(std::move(y), needs_grad(qkv),
                    [this, qkv, images, tokens, heads, d, dh, scl, probs](int out) {
                        if (!needs_grad(qkv)) return;
                        const M& g = nodes_[out].grad;
                        const auto& Q = val(qkv);
                        M& gq = grad(qkv);
#pragma omp parallel for schedule(static) if (images > 1)
                        for (int i = 0; i < images; ++i) {
                            for (int h = 0; h < heads; ++h) {
                                const M& p = (*probs)[static_cast<std::size_t>(i) * heads + h];
                                auto q = Q.block(i * tokens, h * dh, tokens, dh);
                                auto k = Q.block(i * tokens, d + h * dh, tokens, dh);
                                auto v = Q.block(i * tokens, 2 * d + h * dh, tokens, dh);
                                auto go = g.block(i * tokens, h * dh, tokens, dh);
                                M dv = p.transpose() * go;
                                M dp = go * v.transpose();
                                M ds(tokens, tokens);
                                for (int r = 0; r < tokens; ++r) {
                                    const Real dot = dp.row(r).dot(p.row(r));
                                    ds.row(r) =
                                        (p.row(r).array() * (dp.row(r).array() - dot)).matrix();
                                }
                                gq.block(i * tokens, h * dh, tokens, dh).noalias() +=
                                    (ds * k) * scl;
                                gq.block(i * tokens, d + h * dh, tokens, dh).noalias() +=
                                    (ds.transpose() * q) * scl;
                                gq.block(i * tokens, 2 * d + h * dh, tokens, dh) += dv;
                            }
                        }
                    });
    }

    // y[i] = x[rows[i]]
    int gather_rows(int x, std::vector<int> rows) {
        auto idx = std::make_shared<std::vector<int>>(std::move(rows));
        M y(static_cast<Eigen::Index>(idx->size()), val(x).cols());
        for (std::size_t i = 0; i < idx->size(); ++i) y.row(i) = val(x).row((*idx)[i]);
        return push(std::move(y), needs_grad(x), [this, x, idx](int out) {
            if (!needs_grad(x)) return;
            const M& g = nodes_[out].grad;
            M& gx = grad(x);
            for (std::size_t i = 0; i < idx->size(); ++i) gx.row((*idx)[i]) += g.row(i);
        });
    }

    // mean over each listed row group -> one output row per group
    int group_mean_rows(int x, std::vector<std::vector<int>> groups) {
        auto grp = std::make_shared<std::vector<std::vector<int>>>(std::move(groups));
        M y(static_cast<Eigen::Index>(grp->size()), val(x).cols());
        for (std::size_t gi = 0; gi < grp->size(); ++gi) {
            const auto& rows = (*grp)[gi];
            if (rows.empty()) throw DataError("group_mean_rows: empty set");
            y.row(gi).setZero();
            for (int r : rows) y.row(gi) += val(x).row(r);
            y.row(gi) /= static_cast<Real>(rows.size());
        }
        return push(std::move(y), needs_grad(x), [this, x, grp](int out) {
            if (!needs_grad(x)) return;
            const M& g = nodes_[out].grad;
            M& gx = grad(x);
            for (std::size_t gi = 0; gi < grp->size(); ++gi) {
                const auto& rows = (*grp)[gi];
                const Real inv = Real(1) / static_cast<Real>(rows.size());
                for (int r : rows) gx.row(r) += g.row(gi) * inv;
            }
        });
    }

    int concat_rows(int a, int b) {
        M y(val(a).rows() + val(b).rows(), val(a).cols());
        y.topRows(val(a).rows()) = val(a);
        y.bottomRows(val(b).rows()) = val(b);
        return push(std::move(y), needs_grad(a) || needs_grad(b), [this, a, b](int out) {
            const M& g = nodes_[out].grad;
            if (needs_grad(a)) grad(a) += g.topRows(val(a).rows());
            if (needs_grad(b)) grad(b) += g.bottomRows(val(b).rows());
        });
    }

    int l2_normalize_rows(int x, Real eps = Real(1e-12)) {
        const auto& X = val(x);
        auto norms = std::make_shared<Eigen::Matrix<Real, Eigen::Dynamic, 1>>(X.rows());
        M y(X.rows(), X.cols());
        for (Eigen::Index r = 0; r < X.rows(); ++r) {
            const Real n = std::max(X.row(r).norm(), eps);
            (*norms)(r) = n;
            y.row(r) = X.row(r) / n;
        }
        return push(std::move(y), needs_grad(x), [this, x, norms](int out) {
            if (!needs_grad(x)) return;
            const M& g = nodes_[out].grad;
            const M& Y = nodes_[out].value;
            M& gx = grad(x);
            for (Eigen::Index r = 0; r < g.rows(); ++r) {
                const Real dot = g.row(r).dot(Y.row(r));
                gx.row(r) += (g.row(r) - Y.row(r) * dot) / (*norms)(r);
            }
        });
    }

    // columns of W normalized to unit L2 norm (weight-normalized prototypes)
    int l2_normalize_cols(int w, Real eps = Real(1e-12)) {
        const auto& W = val(w);
        auto norms = std::make_shared<Eigen::Matrix<Real, 1, Eigen::Dynamic>>(W.cols());
        M y(W.rows(), W.cols());
        for (Eigen::Index c = 0; c < W.cols(); ++c) {
            const Real n = std::max(W.col(c).norm(), eps);
            (*norms)(c) = n;
            y.col(c) = W.col(c) / n;
        }
        return push(std::move(y), needs_grad(w), [this, w, norms](int out) {
            if (!needs_grad(w)) return;
            const M& g = nodes_[out].grad;
            const M& Y = nodes_[out].value;
            M& gw = grad(w);
            for (Eigen::Index c = 0; c < g.cols(); ++c) {
                const Real dot = g.col(c).dot(Y.col(c));
                gw.col(c) += (g.col(c) - Y.col(c) * dot) / (*norms)(c);
            }
        });
    }

    int log_softmax_rows(int x) {
        const auto& X = val(x);
        M y(X.rows(), X.cols());
        for (Eigen::Index r = 0; r < X.rows(); ++r) {
            const Real mx = X.row(r).maxCoeff();
            const Real lse =
                mx + std::log((X.row(r).array() - mx).exp().sum());
            if (!std::isfinite(lse))
                throw NumericError("log_softmax_rows: non-finite logits");
            y.row(r) = X.row(r).array() - lse;
        }
        return push(std::move(y), needs_grad(x), [this, x](int out) {
            if (!needs_grad(x)) return;
            const M& g = nodes_[out].grad;
            const M& Y = nodes_[out].value;
            M& gx = grad(x);
            for (Eigen::Index r = 0; r < g.rows(); ++r) {
                const Real sum = g.row(r).sum();
                gx.row(r) += g.row(r) - (Y.row(r).array().exp() * sum).matrix();
            }
        });
    }

    // weighted cross-entropy between constant teacher probability rows and
    // student log-probability rows: sum_i w_i * (-teacher[ti] . logp[si])
    struct PairTerm {
        int teacher_row;
        int student_row;
        Real weight;
    };

    int cross_entropy_pairs(int log_probs, M teacher_probs, std::vector<PairTerm> terms) {
        auto T = std::make_shared<M>(std::move(teacher_probs));
        auto tm = std::make_shared<std::vector<PairTerm>>(std::move(terms));
        Real loss = 0;
        for (const auto& t : *tm)
            loss -= t.weight * T->row(t.teacher_row).dot(val(log_probs).row(t.student_row));
        M y(1, 1);
        y(0, 0) = loss;
        return push(std::move(y), needs_grad(log_probs), [this, log_probs, T, tm](int out) {
            if (!needs_grad(log_probs)) return;
            const Real g0 = nodes_[out].grad(0, 0);
            M& gx = grad(log_probs);
            for (const auto& t : *tm)
                gx.row(t.student_row) -= (g0 * t.weight) * T->row(t.teacher_row);
        });
    }

    // mean of all entries (scalar node)
    int mean_all(int x) {
        M y(1, 1);
        y(0, 0) = val(x).mean();
        return push(std::move(y), needs_grad(x), [this, x](int out) {
            if (!needs_grad(x)) return;
            const Real g0 = nodes_[out].grad(0, 0) / static_cast<Real>(val(x).size());
            grad(x).array() += g0;
        });
    }

private:
    template <typename F>
    int push(M value, bool needs, F&& back) {
        Node n;
        n.value = std::move(value);
        n.needs_grad = needs && grad_enabled;
        const int id = static_cast<int>(nodes_.size());
        if constexpr (!std::is_same_v<F, std::nullptr_t>) {
            if (grad_enabled && n.needs_grad)
                n.backprop = [this, id, f = std::forward<F>(back)]() { f(id); };
        }
        nodes_.push_back(std::move(n));
        return id;
    }

    int push(M value, bool needs, std::nullptr_t) {
        Node n;
        n.value = std::move(value);
        n.needs_grad = needs && grad_enabled;
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size() - 1);
    }

    std::deque<Node> nodes_;
};

}  // namespace setdino::ad

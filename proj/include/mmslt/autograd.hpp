#pragma once

// Reverse-mode autodiff over dense double matrices. Define-by-run: every op
// appends a node to a Graph (the tape); Graph::backward walks the tape in
// reverse creation order. Row index = sequence position, column = feature.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmslt/rng.hpp"

namespace mmslt::ag {

using Mat = Eigen::MatrixXd;
// 1 = real position, 0 = padding. Indexed by row.
using Mask = std::vector<std::uint8_t>;

inline Mask all_real(std::size_t n) { return Mask(n, 1); }

inline std::size_t mask_count(const Mask& m) {
    std::size_t c = 0;
    for (auto v : m) c += (v != 0);
    return c;
}

// A persistent tensor: lives across steps, collects gradients from graphs.
struct Param {
    std::string name;
    Mat value;
    Mat grad;    // empty until first accumulation
    Mat adam_m;  // optimizer slots, empty until first step
    Mat adam_v;
    bool trainable{true};
    bool decay{true};  // weight decay applies (off for biases/norms/embeddings)

    void zero_grad() {
        if (grad.size() != 0) grad.setZero();
    }
    std::uint64_t checksum() const;
};

class Graph;

struct Ref {
    Graph* g{nullptr};
    std::int32_t idx{-1};
    bool valid() const { return g != nullptr && idx >= 0; }
    const Mat& val() const;
    Eigen::Index rows() const { return val().rows(); }
    Eigen::Index cols() const { return val().cols(); }
};

class Graph {
public:
    struct Node {
        Mat value;
        Mat grad;  // empty until touched by backward
        bool requires_grad{false};
        std::function<void()> backprop;
        Param* bound{nullptr};
    };

    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    Ref make(Mat v, bool requires_grad) {
        nodes_.push_back(Node{std::move(v), {}, requires_grad && grad_enabled_, nullptr, nullptr});
        return Ref{this, static_cast<std::int32_t>(nodes_.size() - 1)};
    }

    Ref constant(Mat v) { return make(std::move(v), false); }

    Ref leaf(Param& p) {
        Ref r = make(p.value, p.trainable);
        nodes_[static_cast<std::size_t>(r.idx)].bound = &p;
        return r;
    }

    const Node& at(Ref r) const { return nodes_[static_cast<std::size_t>(r.idx)]; }
    Node& at(Ref r) { return nodes_[static_cast<std::size_t>(r.idx)]; }

    bool needs_grad(Ref r) const { return at(r).requires_grad; }

    const Mat& grad_of(Ref r) const { return at(r).grad; }

    void accum(Ref r, const Mat& dg) {
        Node& n = at(r);
        if (!n.requires_grad) return;
        if (n.grad.size() == 0) {
            n.grad = dg;
        } else {
            n.grad += dg;
        }
    }

    void set_backprop(Ref r, std::function<void()> fn) { at(r).backprop = std::move(fn); }

    // Seeds d(loss)/d(loss) = 1, runs the tape backwards, then flushes leaf
    // gradients into their bound Params.
    void backward(Ref loss) {
        Node& ln = at(loss);
        if (ln.value.rows() != 1 || ln.value.cols() != 1) {
            throw std::invalid_argument("backward: loss must be 1x1");
        }
        if (!ln.requires_grad) return;
        ln.grad = Mat::Ones(1, 1);
        for (std::int32_t i = loss.idx; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.requires_grad && n.grad.size() != 0 && n.backprop) n.backprop();
        }
        for (auto& n : nodes_) {
            if (n.bound != nullptr && n.bound->trainable && n.grad.size() != 0) {
                if (n.bound->grad.size() == 0) {
                    n.bound->grad = n.grad;
                } else {
                    n.bound->grad += n.grad;
                }
            }
        }
    }

    std::size_t size() const { return nodes_.size(); }
    bool grad_enabled() const { return grad_enabled_; }

private:
    std::deque<Node> nodes_;
    bool grad_enabled_;
};

inline const Mat& Ref::val() const { return g->at(*this).value; }

inline double scalar(Ref r) {
    if (r.rows() != 1 || r.cols() != 1) throw std::invalid_argument("scalar: node is not 1x1");
    return r.val()(0, 0);
}

namespace detail {
inline void require_same_graph(Ref a, Ref b, const char* op) {
    if (a.g != b.g) throw std::invalid_argument(std::string(op) + ": nodes from different graphs");
}
inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise / arithmetic
// ---------------------------------------------------------------------------

inline Ref add(Ref a, Ref b) {
    detail::require_same_graph(a, b, "add");
    detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
    Graph& g = *a.g;
    Ref out = g.make(a.val() + b.val(), g.needs_grad(a) || g.needs_grad(b));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, a, b, out] {
            const Mat& G = g.grad_of(out);
            g.accum(a, G);
            g.accum(b, G);
        });
    }
    return out;
}

inline Ref sub(Ref a, Ref b) {
    detail::require_same_graph(a, b, "sub");
    detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
    Graph& g = *a.g;
    Ref out = g.make(a.val() - b.val(), g.needs_grad(a) || g.needs_grad(b));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, a, b, out] {
            const Mat& G = g.grad_of(out);
            g.accum(a, G);
            g.accum(b, -G);
        });
    }
    return out;
}

inline Ref scale(Ref x, double c) {
    Graph& g = *x.g;
    Ref out = g.make(x.val() * c, g.needs_grad(x));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, x, out, c] { g.accum(x, g.grad_of(out) * c); });
    }
    return out;
}

// broadcast a 1xC row over all rows of x
inline Ref add_rowvec(Ref x, Ref b) {
    detail::require_same_graph(x, b, "add_rowvec");
    detail::require(b.rows() == 1 && b.cols() == x.cols(), "add_rowvec: bias must be 1 x cols(x)");
    Graph& g = *x.g;
    Mat v = x.val();
    v.rowwise() += b.val().row(0);
    Ref out = g.make(std::move(v), g.needs_grad(x) || g.needs_grad(b));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, x, b, out] {
            const Mat& G = g.grad_of(out);
            g.accum(x, G);
            g.accum(b, G.colwise().sum());
        });
    }
    return out;
}

// multiply every entry by a 1x1 node
inline Ref mul_scalar(Ref x, Ref s) {
    detail::require_same_graph(x, s, "mul_scalar");
    detail::require(s.rows() == 1 && s.cols() == 1, "mul_scalar: scalar must be 1x1");
    Graph& g = *x.g;
    Ref out = g.make(x.val() * s.val()(0, 0), g.needs_grad(x) || g.needs_grad(s));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, x, s, out] {
            const Mat& G = g.grad_of(out);
            g.accum(x, G * s.val()(0, 0));
            Mat ds(1, 1);
            ds(0, 0) = (G.array() * x.val().array()).sum();
            g.accum(s, ds);
        });
    }
    return out;
}

inline Ref exp_elem(Ref x) {
    Graph& g = *x.g;
    Ref out = g.make(x.val().array().exp().matrix(), g.needs_grad(x));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, x, out] {
            g.accum(x, (g.grad_of(out).array() * out.val().array()).matrix());
        });
    }
    return out;
}

inline Ref reciprocal_elem(Ref x) {
    Graph& g = *x.g;
    Ref out = g.make(x.val().array().inverse().matrix(), g.needs_grad(x));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, x, out] {
            g.accum(x, (-g.grad_of(out).array() * out.val().array().square()).matrix());
        });
    }
    return out;
}

namespace detail {
inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace detail

// exact GELU: x * Phi(x)
inline Ref gelu(Ref x) {
    Graph& g = *x.g;
    Mat v = x.val().unaryExpr(
        [](double t) { return 0.5 * t * (1.0 + std::erf(t * detail::kInvSqrt2)); });
    Ref out = g.make(std::move(v), g.needs_grad(x));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, x, out] {
            Mat d = x.val().unaryExpr([](double t) {
                const double phi = 0.5 * (1.0 + std::erf(t * detail::kInvSqrt2));
                return phi + t * detail::kInvSqrt2Pi * std::exp(-0.5 * t * t);
            });
            g.accum(x, (g.grad_of(out).array() * d.array()).matrix());
        });
    }
    return out;
}

inline Ref stop_gradient(Ref x) {
    return x.g->constant(x.val());
}

// ---------------------------------------------------------------------------
// matrix products
// ---------------------------------------------------------------------------

inline Ref matmul(Ref a, Ref b) {
    detail::require_same_graph(a, b, "matmul");
    detail::require(a.cols() == b.rows(), "matmul: inner dimensions differ");
    Graph& g = *a.g;
    Ref out = g.make(a.val() * b.val(), g.needs_grad(a) || g.needs_grad(b));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, a, b, out] {
            const Mat& G = g.grad_of(out);
            if (g.needs_grad(a)) g.accum(a, G * b.val().transpose());
            if (g.needs_grad(b)) g.accum(b, a.val().transpose() * G);
        });
    }
    return out;
}

// a * b^T
inline Ref matmul_nt(Ref a, Ref b) {
    detail::require_same_graph(a, b, "matmul_nt");
    detail::require(a.cols() == b.cols(), "matmul_nt: column dimensions differ");
    Graph& g = *a.g;
    Ref out = g.make(a.val() * b.val().transpose(), g.needs_grad(a) || g.needs_grad(b));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, a, b, out] {
            const Mat& G = g.grad_of(out);
            if (g.needs_grad(a)) g.accum(a, G * b.val());
            if (g.needs_grad(b)) g.accum(b, G.transpose() * a.val());
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// softmax / normalization
// ---------------------------------------------------------------------------

inline Ref softmax_rows(Ref x) {
    Graph& g = *x.g;
    Mat v = x.val();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        const double m = v.row(i).maxCoeff();
        v.row(i) = (v.row(i).array() - m).exp();
        v.row(i) /= v.row(i).sum();
    }
    Ref out = g.make(std::move(v), g.needs_grad(x));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, x, out] {
            const Mat& G = g.grad_of(out);
            const Mat& Y = out.val();
            Mat dx(Y.rows(), Y.cols());
            for (Eigen::Index i = 0; i < Y.rows(); ++i) {
                const double dot = G.row(i).dot(Y.row(i));
                dx.row(i) = (G.row(i).array() - dot) * Y.row(i).array();
            }
            g.accum(x, dx);
        });
    }
    return out;
}

inline Ref log_softmax_rows(Ref x) {
    Graph& g = *x.g;
    Mat v = x.val();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        const double m = v.row(i).maxCoeff();
        const double lse = m + std::log((v.row(i).array() - m).exp().sum());
        v.row(i).array() -= lse;
    }
    Ref out = g.make(std::move(v), g.needs_grad(x));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, x, out] {
            const Mat& G = g.grad_of(out);
            const Mat& Y = out.val();
            Mat dx(Y.rows(), Y.cols());
            for (Eigen::Index i = 0; i < Y.rows(); ++i) {
                const double s = G.row(i).sum();
                dx.row(i) = G.row(i) - s * Y.row(i).array().exp().matrix();
            }
            g.accum(x, dx);
        });
    }
    return out;
}

// rowwise layer norm with affine params gamma/beta (1xC)
inline Ref layer_norm(Ref x, Ref gamma, Ref beta, double eps = 1e-5) {
    detail::require_same_graph(x, gamma, "layer_norm");
    detail::require(gamma.rows() == 1 && gamma.cols() == x.cols(), "layer_norm: gamma shape");
    detail::require(beta.rows() == 1 && beta.cols() == x.cols(), "layer_norm: beta shape");
    Graph& g = *x.g;
    const Mat& xv = x.val();
    const auto n = static_cast<double>(xv.cols());
    Eigen::VectorXd mu = xv.rowwise().mean();
    Mat centered = xv.colwise() - mu;
    Eigen::VectorXd var = centered.array().square().rowwise().mean();
    Eigen::VectorXd inv_std = (var.array() + eps).rsqrt();
    Mat xhat = centered.array().colwise() * inv_std.array();
    Mat y = (xhat.array().rowwise() * gamma.val().row(0).array()).rowwise() +
            beta.val().row(0).array();
    Ref out = g.make(std::move(y), g.needs_grad(x) || g.needs_grad(gamma) || g.needs_grad(beta));
    if (g.needs_grad(out)) {
        // memo: xhat and inv_std reused in backward
        auto xhat_p = std::make_shared<Mat>(std::move(xhat));
        auto inv_std_p = std::make_shared<Eigen::VectorXd>(std::move(inv_std));
        g.set_backprop(out, [&g, x, gamma, beta, out, xhat_p, inv_std_p, n] {
            const Mat& G = g.grad_of(out);
            const Mat& xh = *xhat_p;
            if (g.needs_grad(gamma)) g.accum(gamma, (G.array() * xh.array()).colwise().sum().matrix());
            if (g.needs_grad(beta)) g.accum(beta, G.colwise().sum());
            if (g.needs_grad(x)) {
                Mat dxhat = G.array().rowwise() * gamma.val().row(0).array();
                Eigen::VectorXd sum_dxhat = dxhat.rowwise().sum();
                Eigen::VectorXd sum_dxhat_xhat = (dxhat.array() * xh.array()).rowwise().sum();
                Mat dx = (dxhat.array() - (sum_dxhat / n).replicate(1, xh.cols()).array() -
                          xh.array() * (sum_dxhat_xhat / n).replicate(1, xh.cols()).array())
                             .colwise() *
                         inv_std_p->array();
                g.accum(x, dx);
            }
        });
    }
    return out;
}

// rows scaled to unit L2 norm; throws on (near-)zero rows
inline Ref rownorm(Ref x) {
    Graph& g = *x.g;
    const Mat& xv = x.val();
    Eigen::VectorXd norms = xv.rowwise().norm();
    for (Eigen::Index i = 0; i < norms.size(); ++i) {
        if (norms(i) < 1e-12) throw std::invalid_argument("rownorm: zero-norm row");
    }
    Mat y = xv.array().colwise() / norms.array();
    Ref out = g.make(std::move(y), g.needs_grad(x));
    if (g.needs_grad(out)) {
        auto norms_p = std::make_shared<Eigen::VectorXd>(std::move(norms));
        g.set_backprop(out, [&g, x, out, norms_p] {
            const Mat& G = g.grad_of(out);
            const Mat& Y = out.val();
            Mat dx(Y.rows(), Y.cols());
            for (Eigen::Index i = 0; i < Y.rows(); ++i) {
                const double dot = G.row(i).dot(Y.row(i));
                dx.row(i) = (G.row(i) - dot * Y.row(i)) / (*norms_p)(i);
            }
            g.accum(x, dx);
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

inline Ref slice_cols(Ref x, Eigen::Index off, Eigen::Index n) {
    detail::require(off >= 0 && n >= 1 && off + n <= x.cols(), "slice_cols: out of range");
    Graph& g = *x.g;
    Ref out = g.make(x.val().middleCols(off, n), g.needs_grad(x));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, x, out, off, n] {
            Mat dx = Mat::Zero(x.rows(), x.cols());
            dx.middleCols(off, n) = g.grad_of(out);
            g.accum(x, dx);
        });
    }
    return out;
}

inline Ref slice_rows(Ref x, Eigen::Index off, Eigen::Index n) {
    detail::require(off >= 0 && n >= 1 && off + n <= x.rows(), "slice_rows: out of range");
    Graph& g = *x.g;
    Ref out = g.make(x.val().middleRows(off, n), g.needs_grad(x));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, x, out, off, n] {
            Mat dx = Mat::Zero(x.rows(), x.cols());
            dx.middleRows(off, n) = g.grad_of(out);
            g.accum(x, dx);
        });
    }
    return out;
}

inline Ref concat_cols(const std::vector<Ref>& parts) {
    detail::require(!parts.empty(), "concat_cols: empty");
    Graph& g = *parts.front().g;
    Eigen::Index cols = 0;
    bool req = false;
    for (Ref p : parts) {
        detail::require(p.rows() == parts.front().rows(), "concat_cols: row mismatch");
        cols += p.cols();
        req = req || g.needs_grad(p);
    }
    Mat v(parts.front().rows(), cols);
    Eigen::Index off = 0;
    for (Ref p : parts) {
        v.middleCols(off, p.cols()) = p.val();
        off += p.cols();
    }
    Ref out = g.make(std::move(v), req);
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, parts, out] {
            const Mat& G = g.grad_of(out);
            Eigen::Index o = 0;
            for (Ref p : parts) {
                g.accum(p, G.middleCols(o, p.cols()));
                o += p.cols();
            }
        });
    }
    return out;
}

inline Ref concat_cols(Ref a, Ref b) { return concat_cols(std::vector<Ref>{a, b}); }

inline Ref concat_rows(const std::vector<Ref>& parts) {
    detail::require(!parts.empty(), "concat_rows: empty");
    Graph& g = *parts.front().g;
    Eigen::Index rows = 0;
    bool req = false;
    for (Ref p : parts) {
        detail::require(p.cols() == parts.front().cols(), "concat_rows: column mismatch");
        rows += p.rows();
        req = req || g.needs_grad(p);
    }
    Mat v(rows, parts.front().cols());
    Eigen::Index off = 0;
    for (Ref p : parts) {
        v.middleRows(off, p.rows()) = p.val();
        off += p.rows();
    }
    Ref out = g.make(std::move(v), req);
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, parts, out] {
            const Mat& G = g.grad_of(out);
            Eigen::Index o = 0;
            for (Ref p : parts) {
                g.accum(p, G.middleRows(o, p.rows()));
                o += p.rows();
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// masked / sequence ops
// ---------------------------------------------------------------------------

inline Ref apply_mask_zero(Ref x, const Mask& mask) {
    detail::require(static_cast<Eigen::Index>(mask.size()) == x.rows(), "apply_mask_zero: mask length");
    Graph& g = *x.g;
    Mat v = x.val();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        if (!mask[static_cast<std::size_t>(i)]) v.row(i).setZero();
    }
    Ref out = g.make(std::move(v), g.needs_grad(x));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, x, out, mask] {
            Mat dx = g.grad_of(out);
            for (Eigen::Index i = 0; i < dx.rows(); ++i) {
                if (!mask[static_cast<std::size_t>(i)]) dx.row(i).setZero();
            }
            g.accum(x, dx);
        });
    }
    return out;
}

// mean over real rows -> 1xC; throws when no row is real
inline Ref masked_mean_rows(Ref x, const Mask& mask) {
    detail::require(static_cast<Eigen::Index>(mask.size()) == x.rows(), "masked_mean_rows: mask length");
    const auto n_real = mask_count(mask);
    detail::require(n_real > 0, "masked_mean_rows: all positions masked");
    Graph& g = *x.g;
    Mat v = Mat::Zero(1, x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (mask[static_cast<std::size_t>(i)]) v += x.val().row(i);
    }
    v /= static_cast<double>(n_real);
    Ref out = g.make(std::move(v), g.needs_grad(x));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, x, out, mask, n_real] {
            const Mat& G = g.grad_of(out);
            Mat dx = Mat::Zero(x.rows(), x.cols());
            for (Eigen::Index i = 0; i < dx.rows(); ++i) {
                if (mask[static_cast<std::size_t>(i)]) dx.row(i) = G.row(0) / static_cast<double>(n_real);
            }
            g.accum(x, dx);
        });
    }
    return out;
}

// temporal unfold with zero `same` padding: row t of the output is the
// concatenation of rows t-k/2 .. t+k/2 (k odd)
inline Ref im2col1d(Ref x, int k) {
    detail::require(k >= 1 && k % 2 == 1, "im2col1d: kernel must be odd");
    Graph& g = *x.g;
    const Eigen::Index T = x.rows();
    const Eigen::Index C = x.cols();
    const int pad = k / 2;
    Mat v = Mat::Zero(T, static_cast<Eigen::Index>(k) * C);
    for (Eigen::Index t = 0; t < T; ++t) {
        for (int j = 0; j < k; ++j) {
            const Eigen::Index src = t + j - pad;
            if (src >= 0 && src < T) v.row(t).segment(static_cast<Eigen::Index>(j) * C, C) = x.val().row(src);
        }
    }
    Ref out = g.make(std::move(v), g.needs_grad(x));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, x, out, k, pad, T, C] {
            const Mat& G = g.grad_of(out);
            Mat dx = Mat::Zero(T, C);
            for (Eigen::Index t = 0; t < T; ++t) {
                for (int j = 0; j < k; ++j) {
                    const Eigen::Index src = t + j - pad;
                    if (src >= 0 && src < T) dx.row(src) += G.row(t).segment(static_cast<Eigen::Index>(j) * C, C);
                }
            }
            g.accum(x, dx);
        });
    }
    return out;
}

// temporal max pool, window 2, stride 2, over real positions only. Window
// count is ceil(T/2); a window with a single real source copies it (edge
// behaviour for odd T), a window with no real source yields a zero row and a
// masked output position.
inline Ref masked_maxpool2(Ref x, const Mask& mask, Mask* pooled_mask) {
    detail::require(static_cast<Eigen::Index>(mask.size()) == x.rows(), "masked_maxpool2: mask length");
    detail::require(x.rows() >= 1, "masked_maxpool2: empty input");
    Graph& g = *x.g;
    const Eigen::Index T = x.rows();
    const Eigen::Index C = x.cols();
    const Eigen::Index Tp = (T + 1) / 2;
    Mat v = Mat::Zero(Tp, C);
    Mask pm(static_cast<std::size_t>(Tp), 0);
    // winner row index per output cell, -1 for masked windows
    auto winners = std::make_shared<std::vector<Eigen::Index>>(static_cast<std::size_t>(Tp * C), -1);
    for (Eigen::Index w = 0; w < Tp; ++w) {
        const Eigen::Index a = 2 * w;
        const Eigen::Index b = 2 * w + 1;
        const bool ra = mask[static_cast<std::size_t>(a)] != 0;
        const bool rb = b < T && mask[static_cast<std::size_t>(b)] != 0;
        if (!ra && !rb) continue;
        pm[static_cast<std::size_t>(w)] = 1;
        for (Eigen::Index c = 0; c < C; ++c) {
            Eigen::Index win;
            if (ra && rb) {
                win = x.val()(a, c) >= x.val()(b, c) ? a : b;
            } else {
                win = ra ? a : b;
            }
            v(w, c) = x.val()(win, c);
            (*winners)[static_cast<std::size_t>(w * C + c)] = win;
        }
    }
    if (pooled_mask != nullptr) *pooled_mask = pm;
    Ref out = g.make(std::move(v), g.needs_grad(x));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, x, out, winners, Tp, C] {
            const Mat& G = g.grad_of(out);
            Mat dx = Mat::Zero(x.rows(), x.cols());
            for (Eigen::Index w = 0; w < Tp; ++w) {
                for (Eigen::Index c = 0; c < C; ++c) {
                    const Eigen::Index win = (*winners)[static_cast<std::size_t>(w * C + c)];
                    if (win >= 0) dx(win, c) += G(w, c);
                }
            }
            g.accum(x, dx);
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

inline Ref sum_squares(Ref x) {
    Graph& g = *x.g;
    Mat v(1, 1);
    v(0, 0) = x.val().array().square().sum();
    Ref out = g.make(std::move(v), g.needs_grad(x));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, x, out] { g.accum(x, 2.0 * g.grad_of(out)(0, 0) * x.val()); });
    }
    return out;
}

inline Ref sum_all(Ref x) {
    Graph& g = *x.g;
    Mat v(1, 1);
    v(0, 0) = x.val().sum();
    Ref out = g.make(std::move(v), g.needs_grad(x));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, x, out] {
            g.accum(x, Mat::Constant(x.rows(), x.cols(), g.grad_of(out)(0, 0)));
        });
    }
    return out;
}

inline Ref sum_diag(Ref x) {
    detail::require(x.rows() == x.cols(), "sum_diag: matrix not square");
    Graph& g = *x.g;
    Mat v(1, 1);
    v(0, 0) = x.val().diagonal().sum();
    Ref out = g.make(std::move(v), g.needs_grad(x));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, x, out] {
            Mat dx = Mat::Zero(x.rows(), x.cols());
            dx.diagonal().setConstant(g.grad_of(out)(0, 0));
            g.accum(x, dx);
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// lookup / loss kernels
// ---------------------------------------------------------------------------

// gathers rows of a table node by id; gradient scatter-adds back
inline Ref embedding_rows(Ref table, const std::vector<int>& ids) {
    Graph& g = *table.g;
    detail::require(!ids.empty(), "embedding_rows: empty id list");
    for (int id : ids) {
        detail::require(id >= 0 && id < table.rows(), "embedding_rows: id out of range");
    }
    Mat v(static_cast<Eigen::Index>(ids.size()), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = table.val().row(ids[i]);
    Ref out = g.make(std::move(v), g.needs_grad(table));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, table, out, ids] {
            const Mat& G = g.grad_of(out);
            Mat dt = Mat::Zero(table.rows(), table.cols());
            for (std::size_t i = 0; i < ids.size(); ++i) dt.row(ids[i]) += G.row(static_cast<Eigen::Index>(i));
            g.accum(table, dt);
        });
    }
    return out;
}

// label-smoothed NLL over log-probability rows, mean over real positions:
// (1-eps) * -logp[t, y_t] + eps * mean_v(-logp[t, v])
inline Ref nll_smoothed(Ref logp, const std::vector<int>& targets, const Mask& mask, double eps) {
    detail::require(static_cast<Eigen::Index>(targets.size()) == logp.rows(), "nll_smoothed: target length");
    detail::require(mask.size() == targets.size(), "nll_smoothed: mask length");
    detail::require(eps >= 0.0 && eps < 1.0, "nll_smoothed: smoothing out of range");
    Graph& g = *logp.g;
    const auto n_real = mask_count(mask);
    detail::require(n_real > 0, "nll_smoothed: no real positions");
    const auto vocab = static_cast<double>(logp.cols());
    double total = 0.0;
    for (Eigen::Index t = 0; t < logp.rows(); ++t) {
        if (!mask[static_cast<std::size_t>(t)]) continue;
        const int y = targets[static_cast<std::size_t>(t)];
        detail::require(y >= 0 && y < logp.cols(), "nll_smoothed: target id out of range");
        total += -(1.0 - eps) * logp.val()(t, y) - eps * logp.val().row(t).mean();
    }
    Mat v(1, 1);
    v(0, 0) = total / static_cast<double>(n_real);
    Ref out = g.make(std::move(v), g.needs_grad(logp));
    if (g.needs_grad(out)) {
        g.set_backprop(out, [&g, logp, out, targets, mask, eps, n_real, vocab] {
            const double G = g.grad_of(out)(0, 0) / static_cast<double>(n_real);
            Mat dx = Mat::Zero(logp.rows(), logp.cols());
            for (Eigen::Index t = 0; t < logp.rows(); ++t) {
                if (!mask[static_cast<std::size_t>(t)]) continue;
                dx.row(t).setConstant(-G * eps / vocab);
                dx(t, targets[static_cast<std::size_t>(t)]) += -G * (1.0 - eps);
            }
            g.accum(logp, dx);
        });
    }
    return out;
}

inline std::uint64_t Param::checksum() const {
    return fnv1a(value.data(), static_cast<std::size_t>(value.size()) * sizeof(double));
}

}  // namespace mmslt::ag

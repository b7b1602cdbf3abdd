#pragma once

// Training objectives. Stage 1: masked mean-squared description regression
// plus symmetric InfoNCE over cosine similarities with a learnable
// temperature; stage 2: label-smoothed token cross-entropy. All reductions
// use real-position counts, so padding never shifts a value.

#include <vector>

#include "mmslt/autograd.hpp"

namespace mmslt {

using ag::Graph;
using ag::Mask;
using ag::Mat;
using ag::Ref;

// mean over real (item, position) pairs of ||d_hat - d||^2
inline Ref dm_loss(Graph& g, const std::vector<Ref>& d_hat, const std::vector<Ref>& d_ref,
                   const std::vector<Mask>& masks) {
    if (d_hat.size() != d_ref.size() || d_hat.size() != masks.size() || d_hat.empty()) {
        throw std::invalid_argument("dm_loss: batch size mismatch");
    }
    std::size_t n_real = 0;
    Ref total;
    for (std::size_t j = 0; j < d_hat.size(); ++j) {
        if (d_hat[j].rows() != d_ref[j].rows() || d_hat[j].cols() != d_ref[j].cols()) {
            throw std::invalid_argument("dm_loss: shape mismatch");
        }
        if (static_cast<std::size_t>(d_hat[j].rows()) != masks[j].size()) {
            throw std::invalid_argument("dm_loss: mask length mismatch");
        }
        n_real += ag::mask_count(masks[j]);
        Ref diff = ag::apply_mask_zero(ag::sub(d_hat[j], d_ref[j]), masks[j]);
        Ref sq = ag::sum_squares(diff);
        total = total.valid() ? ag::add(total, sq) : sq;
    }
    if (n_real == 0) throw std::invalid_argument("dm_loss: no real positions");
    return ag::scale(total, 1.0 / static_cast<double>(n_real));
}

inline double dm_loss_value(const std::vector<Mat>& d_hat, const std::vector<Mat>& d_ref,
                            const std::vector<Mask>& masks) {
    Graph g;
    std::vector<Ref> a, b;
    for (const auto& m : d_hat) a.push_back(g.constant(m));
    for (const auto& m : d_ref) b.push_back(g.constant(m));
    return ag::scalar(dm_loss(g, a, b, masks));
}

// masked average pooling over the sequence axis -> 1 x C
inline Ref global_pool(Graph& g, Ref seq, const Mask& mask) {
    (void)g;
    return ag::masked_mean_rows(seq, mask);
}

inline Mat global_pool_value(const Mat& seq, const Mask& mask) {
    Graph g(false);
    return global_pool(g, g.constant(seq), mask).val();
}

// symmetric InfoNCE over cosine similarities; tau is a positive 1x1 node
inline Ref align_loss(Graph& g, Ref m_glob, Ref l_glob, Ref tau) {
    if (m_glob.rows() != l_glob.rows() || m_glob.cols() != l_glob.cols()) {
        throw std::invalid_argument("align_loss: M/L shape mismatch");
    }
    if (m_glob.rows() < 1) throw std::invalid_argument("align_loss: empty batch");
    const auto batch = static_cast<double>(m_glob.rows());
    Ref mn = ag::rownorm(m_glob);
    Ref ln = ag::rownorm(l_glob);
    Ref inv_tau = ag::reciprocal_elem(tau);
    Ref sim_ml = ag::mul_scalar(ag::matmul_nt(mn, ln), inv_tau);
    Ref sim_lm = ag::mul_scalar(ag::matmul_nt(ln, mn), inv_tau);
    Ref pos = ag::add(ag::sum_diag(ag::log_softmax_rows(sim_ml)),
                      ag::sum_diag(ag::log_softmax_rows(sim_lm)));
    return ag::scale(pos, -1.0 / (2.0 * batch));
}

inline double align_loss_value(const Mat& m_glob, const Mat& l_glob, double tau) {
    Graph g;
    return ag::scalar(
        align_loss(g, g.constant(m_glob), g.constant(l_glob), g.constant(Mat::Constant(1, 1, tau))));
}

// L_MMLP = L_ALIGN + lambda * L_DM
inline Ref mmlp_loss(Graph& g, Ref align, Ref dm, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("mmlp_loss: lambda must be >= 0");
    (void)g;
    return ag::add(align, ag::scale(dm, lambda));
}

inline double mmlp_loss_value(double align, double dm, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("mmlp_loss: lambda must be >= 0");
    return align + lambda * dm;
}

// label-smoothed cross entropy over logits rows, mean over real positions
inline Ref slt_loss(Graph& g, Ref logits, const std::vector<int>& targets, const Mask& mask,
                    double smoothing) {
    (void)g;
    return ag::nll_smoothed(ag::log_softmax_rows(logits), targets, mask, smoothing);
}

inline double slt_loss_value(const Mat& logits, const std::vector<int>& targets, const Mask& mask,
                             double smoothing) {
    Graph g;
    return ag::scalar(slt_loss(g, g.constant(logits), targets, mask, smoothing));
}

}  // namespace mmslt

#pragma once

// Central finite-difference gradient checking. The caller runs one backward
// pass so the params carry analytic gradients, then hands us a fresh
// value-only evaluation of the same loss.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mmslt/autograd.hpp"

namespace testsupport {

using mmslt::ag::Mat;
using mmslt::ag::Param;

// worst relative error between analytic grads (already in p->grad) and
// central differences of `loss_value` with step h
inline double max_grad_rel_err(const std::vector<Param*>& params,
                               const std::function<double()>& loss_value, double h = 1e-5) {
    double worst = 0.0;
    for (Param* p : params) {
        for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
            for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
                const double orig = p->value(r, c);
                p->value(r, c) = orig + h;
                const double fp = loss_value();
                p->value(r, c) = orig - h;
                const double fm = loss_value();
                p->value(r, c) = orig;
                const double fd = (fp - fm) / (2.0 * h);
                const double analytic = p->grad.size() != 0 ? p->grad(r, c) : 0.0;
                const double denom = std::max({std::abs(analytic), std::abs(fd), 1e-6});
                worst = std::max(worst, std::abs(analytic - fd) / denom);
            }
        }
    }
    return worst;
}

}  // namespace testsupport

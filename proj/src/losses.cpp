// SPDX-License-Identifier: Apache-2.0
#include "losses.hpp"

#include <cmath>
#include <string>

#include "errors.hpp"

namespace clp {

void LossWeights::validate() const {
    if (!(lambda_diff >= 0.0)) throw_invalid("lambda_diff: must be >= 0");
    if (!(lambda_contrast >= 0.0)) throw_invalid("lambda_contrast: must be >= 0");
    if (!(margin > 0.0)) throw_invalid("margin: must be > 0");
}

double diffusion_loss(std::span<const Vec> preds, std::span<const Vec> targets) {
    require_same_dim(preds.size(), targets.size(), "diffusion_loss: batch");
    if (preds.empty()) {
        throw_invalid("diffusion_loss: empty batch");
    }
    const std::size_t dim = preds[0].size();
    double total = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        require_same_dim(preds[i].size(), targets[i].size(), "diffusion_loss");
        require_same_dim(preds[i].size(), dim, "diffusion_loss");
        total += squared_distance(targets[i], preds[i]);
    }
    return total / (static_cast<double>(preds.size()) * static_cast<double>(dim));
}

double l2_view_loss(std::span<const Vec> preds_by_view) {
    const std::size_t k = preds_by_view.size();
    if (k < 2) {
        throw_invalid("l2_view_loss: needs at least 2 views, got " + std::to_string(k));
    }
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            require_same_dim(preds_by_view[i].size(), preds_by_view[j].size(),
                             "l2_view_loss");
            total += squared_distance(preds_by_view[i], preds_by_view[j]);
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

std::pair<double, double> triplet_distances(const Vec& anchor, const Vec& positive,
                                            const Vec& negative) {
    require_same_dim(anchor.size(), positive.size(), "triplet_distances: positive");
    require_same_dim(anchor.size(), negative.size(), "triplet_distances: negative");
    return {l2_distance(anchor, positive), l2_distance(anchor, negative)};
}

double triplet_loss(double d_pos, double d_neg, double m) {
    if (!(d_pos >= 0.0)) throw_invalid("d_pos: must be >= 0");
    if (!(d_neg >= 0.0)) throw_invalid("d_neg: must be >= 0");
    if (!(m > 0.0)) throw_invalid("m: must be > 0");
    const double hinge = m + (d_pos - d_neg);
    return hinge > 0.0 ? hinge : 0.0;
}

LossReport total_loss(double l_diff, double l_2, double l_tri,
                      const LossWeights& weights) {
    weights.validate();
    if (!std::isfinite(l_diff)) throw_numeric("total_loss: l_diff is not finite");
    if (!std::isfinite(l_2)) throw_numeric("total_loss: l_2 is not finite");
    if (!std::isfinite(l_tri)) throw_numeric("total_loss: l_tri is not finite");
    LossReport r;
    r.l_diff = l_diff;
    r.l_2 = l_2;
    r.l_tri = l_tri;
    r.l_contrast = l_2 + l_tri;
    r.l_total = weights.lambda_diff * l_diff + weights.lambda_contrast * r.l_contrast;
    if (!std::isfinite(r.l_total)) throw_numeric("total_loss: l_total is not finite");
    return r;
}

}  // namespace clp

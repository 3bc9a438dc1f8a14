// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <utility>
#include <vector>

#include "vec.hpp"

namespace clp {

struct LossWeights {
    double lambda_diff = 1.0;
    double lambda_contrast = 1.0;
    double margin = 0.5;

    void validate() const;
};

struct LossReport {
    double l_diff = 0.0;
    double l_2 = 0.0;
    double l_tri = 0.0;
    double l_contrast = 0.0;  // l_2 + l_tri
    double l_total = 0.0;     // lambda_diff * l_diff + lambda_contrast * l_contrast
};

// Mean squared error over a batch of prediction/target pairs, averaged over
// batch and dimension. Targets are the injected noise or the clean latent
// depending on the denoiser parameterization; the arithmetic is identical.
double diffusion_loss(std::span<const Vec> preds, std::span<const Vec> targets);

// Per-identity view-consistency penalty: mean over all unordered view pairs
// (i, j), i != j, of the squared L2 distance between predictions. All
// predictions must come from the same noised latent and timestep; the batch
// builder enforces that.
double l2_view_loss(std::span<const Vec> preds_by_view);

// Un-squared L2 distances of (anchor, positive) and (anchor, negative).
std::pair<double, double> triplet_distances(const Vec& anchor, const Vec& positive,
                                            const Vec& negative);

// Margin hinge: max(0, m + d_pos - d_neg).
double triplet_loss(double d_pos, double d_neg, double m);

// Combines the parts into a full report; errors on non-finite inputs naming
// the offending term.
LossReport total_loss(double l_diff, double l_2, double l_tri,
                      const LossWeights& weights);

}  // namespace clp

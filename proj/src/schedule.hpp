// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "vec.hpp"

namespace clp {

enum class ScheduleKind { Linear, Cosine };

ScheduleKind schedule_kind_from_string(const std::string& s);
const char* to_string(ScheduleKind kind);

// Which fixed reverse-process variance the sampler uses.
enum class SigmaKind { PosteriorVar, Beta };

SigmaKind sigma_kind_from_string(const std::string& s);
const char* to_string(SigmaKind kind);

// Per-timestep constants of the forward/reverse diffusion processes.
//
// Timesteps run t = 1..T. alpha_bar(0) == 1 by convention, which makes the
// t == 1 posterior degenerate (variance 0) so sampling terminates
// deterministically. All values are computed and stored in double precision.
// Immutable after construction; safe for concurrent reads.
class NoiseSchedule {
public:
    static NoiseSchedule build(ScheduleKind kind, int timesteps,
                               double beta_start, double beta_end);

    int timesteps() const { return static_cast<int>(betas_.size()); }
    ScheduleKind kind() const { return kind_; }
    double beta_start() const { return beta_start_; }
    double beta_end() const { return beta_end_; }

    double beta(int t) const { return betas_[index(t)]; }
    double alpha(int t) const { return alphas_[index(t)]; }
    // Valid for t in [0, T]; alpha_bar(0) == 1.
    double alpha_bar(int t) const;
    double posterior_var(int t) const { return posterior_vars_[index(t)]; }

    double sigma(int t, SigmaKind kind) const;

    const Vec& betas() const { return betas_; }
    const Vec& alphas() const { return alphas_; }
    const Vec& alpha_bars() const { return alpha_bars_; }
    const Vec& posterior_vars() const { return posterior_vars_; }

private:
    NoiseSchedule() = default;
    std::size_t index(int t) const;
    void validate_invariants() const;

    ScheduleKind kind_ = ScheduleKind::Linear;
    double beta_start_ = 0.0;
    double beta_end_ = 0.0;
    Vec betas_;
    Vec alphas_;
    Vec alpha_bars_;
    Vec posterior_vars_;
};

// Closed-form forward marginal: w_t = sqrt(alpha_bar_t) * w0 + sqrt(1 - alpha_bar_t) * eps.
Vec q_sample(const Vec& w0, int t, const Vec& eps, const NoiseSchedule& sched);

struct PosteriorMoments {
    Vec mean;
    double var;
};

// Mean and variance of the forward-process posterior q(w_{t-1} | w_t, w_0).
PosteriorMoments posterior_mean_var(const Vec& w0, const Vec& wt, int t,
                                    const NoiseSchedule& sched);

// Reverse-step mean parameterized by a noise prediction.
Vec mu_from_eps(const Vec& wt, int t, const Vec& eps_pred, const NoiseSchedule& sched);

// Clean-latent estimate from a noise prediction; exact inverse of q_sample
// with respect to eps.
Vec w0_from_eps(const Vec& wt, int t, const Vec& eps_pred, const NoiseSchedule& sched);

// Reverse-step mean parameterized by a clean-latent prediction. Identical to
// posterior_mean_var(w0_pred, wt, t).mean.
Vec mu_from_w0(const Vec& wt, int t, const Vec& w0_pred, const NoiseSchedule& sched);

// Noise implied by a clean-latent prediction; exact inverse of w0_from_eps.
Vec eps_from_w0(const Vec& wt, int t, const Vec& w0_pred, const NoiseSchedule& sched);

}  // namespace clp

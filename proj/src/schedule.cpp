// SPDX-License-Identifier: Apache-2.0
#include "schedule.hpp"

#include <cmath>
#include <numbers>

#include "errors.hpp"

namespace clp {

namespace {

constexpr double kCosineOffset = 0.008;
constexpr double kMaxBeta = 0.999;

double cosine_signal(double frac) {
    const double arg = (frac + kCosineOffset) / (1.0 + kCosineOffset) *
                       std::numbers::pi / 2.0;
    const double c = std::cos(arg);
    return c * c;
}

}  // namespace

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::Linear;
    if (s == "cosine") return ScheduleKind::Cosine;
    throw_invalid("schedule kind: expected 'linear' or 'cosine', got '" + s + "'");
}

const char* to_string(ScheduleKind kind) {
    return kind == ScheduleKind::Linear ? "linear" : "cosine";
}

SigmaKind sigma_kind_from_string(const std::string& s) {
    if (s == "posterior") return SigmaKind::PosteriorVar;
    if (s == "beta") return SigmaKind::Beta;
    throw_invalid("sigma kind: expected 'posterior' or 'beta', got '" + s + "'");
}

const char* to_string(SigmaKind kind) {
    return kind == SigmaKind::PosteriorVar ? "posterior" : "beta";
}

NoiseSchedule NoiseSchedule::build(ScheduleKind kind, int timesteps,
                                   double beta_start, double beta_end) {
    if (timesteps < 1) {
        throw_invalid("timesteps: must be >= 1, got " + std::to_string(timesteps));
    }
    if (!(beta_start > 0.0 && beta_start < 1.0)) {
        throw_invalid("beta_start: must be in (0, 1), got " + std::to_string(beta_start));
    }
    if (!(beta_end > 0.0 && beta_end < 1.0)) {
        throw_invalid("beta_end: must be in (0, 1), got " + std::to_string(beta_end));
    }
    if (beta_start > beta_end) {
        throw_invalid("beta_start: must be <= beta_end");
    }
    if (kind == ScheduleKind::Linear && timesteps > 1 && beta_start == beta_end) {
        throw_invalid("beta_end: linear schedule with timesteps > 1 requires beta_start < beta_end");
    }

    NoiseSchedule s;
    s.kind_ = kind;
    s.beta_start_ = beta_start;
    s.beta_end_ = beta_end;
    s.betas_.resize(timesteps);

    if (kind == ScheduleKind::Linear) {
        if (timesteps == 1) {
            s.betas_[0] = beta_start;
        } else {
            const double step = (beta_end - beta_start) / (timesteps - 1);
            for (int i = 0; i < timesteps; ++i) {
                s.betas_[i] = beta_start + step * i;
            }
            s.betas_[timesteps - 1] = beta_end;
        }
    } else {
        // Betas derived from ratios of the squared-cosine signal curve;
        // beta_start/beta_end do not apply to this kind.
        for (int i = 0; i < timesteps; ++i) {
            const double f0 = cosine_signal(static_cast<double>(i) / timesteps);
            const double f1 = cosine_signal(static_cast<double>(i + 1) / timesteps);
            s.betas_[i] = std::min(1.0 - f1 / f0, kMaxBeta);
        }
    }

    s.alphas_.resize(timesteps);
    s.alpha_bars_.resize(timesteps);
    s.posterior_vars_.resize(timesteps);
    double running = 1.0;
    for (int i = 0; i < timesteps; ++i) {
        s.alphas_[i] = 1.0 - s.betas_[i];
        const double prev_bar = running;  // alpha_bar at t-1, with alpha_bar(0) = 1
        running *= s.alphas_[i];
        s.alpha_bars_[i] = running;
        s.posterior_vars_[i] = (1.0 - prev_bar) / (1.0 - running) * s.betas_[i];
    }

    s.validate_invariants();
    return s;
}

void NoiseSchedule::validate_invariants() const {
    const int T = timesteps();
    for (int i = 0; i < T; ++i) {
        if (!(betas_[i] > 0.0 && betas_[i] < 1.0)) {
            throw Error(ErrorCode::Internal, "schedule: beta out of (0,1) at t=" +
                                                 std::to_string(i + 1));
        }
        if (i > 0 && !(betas_[i] > betas_[i - 1])) {
            throw Error(ErrorCode::Internal,
                        "schedule: betas not strictly increasing at t=" +
                            std::to_string(i + 1));
        }
        if (i > 0 && !(alpha_bars_[i] < alpha_bars_[i - 1])) {
            throw Error(ErrorCode::Internal,
                        "schedule: alpha_bar not strictly decreasing at t=" +
                            std::to_string(i + 1));
        }
    }
    if (!(alpha_bars_[0] < 1.0)) {
        throw Error(ErrorCode::Internal, "schedule: alpha_bar(1) must be < 1");
    }
}

std::size_t NoiseSchedule::index(int t) const {
    if (t < 1 || t > timesteps()) {
        throw_invalid("t: must be in [1, " + std::to_string(timesteps()) +
                      "], got " + std::to_string(t));
    }
    return static_cast<std::size_t>(t - 1);
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t == 0) {
        return 1.0;
    }
    return alpha_bars_[index(t)];
}

double NoiseSchedule::sigma(int t, SigmaKind kind) const {
    const double var = kind == SigmaKind::PosteriorVar ? posterior_var(t) : beta(t);
    return std::sqrt(var);
}

Vec q_sample(const Vec& w0, int t, const Vec& eps, const NoiseSchedule& sched) {
    require_same_dim(w0.size(), eps.size(), "q_sample");
    const double ab = sched.alpha_bar(t);
    const double signal = std::sqrt(ab);
    const double noise = std::sqrt(1.0 - ab);
    Vec out(w0.size());
    for (std::size_t i = 0; i < w0.size(); ++i) {
        out[i] = signal * w0[i] + noise * eps[i];
    }
    return out;
}

PosteriorMoments posterior_mean_var(const Vec& w0, const Vec& wt, int t,
                                    const NoiseSchedule& sched) {
    require_same_dim(w0.size(), wt.size(), "posterior_mean_var");
    const double ab_prev = sched.alpha_bar(t - 1);
    const double ab = sched.alpha_bar(t);
    const double c0 = std::sqrt(ab_prev) * sched.beta(t) / (1.0 - ab);
    const double ct = std::sqrt(sched.alpha(t)) * (1.0 - ab_prev) / (1.0 - ab);
    PosteriorMoments out;
    out.mean.resize(w0.size());
    for (std::size_t i = 0; i < w0.size(); ++i) {
        out.mean[i] = c0 * w0[i] + ct * wt[i];
    }
    out.var = sched.posterior_var(t);
    return out;
}

Vec mu_from_eps(const Vec& wt, int t, const Vec& eps_pred, const NoiseSchedule& sched) {
    require_same_dim(wt.size(), eps_pred.size(), "mu_from_eps");
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha(t));
    const double coef = sched.beta(t) / std::sqrt(1.0 - sched.alpha_bar(t));
    Vec out(wt.size());
    for (std::size_t i = 0; i < wt.size(); ++i) {
        out[i] = inv_sqrt_alpha * (wt[i] - coef * eps_pred[i]);
    }
    return out;
}

Vec w0_from_eps(const Vec& wt, int t, const Vec& eps_pred, const NoiseSchedule& sched) {
    require_same_dim(wt.size(), eps_pred.size(), "w0_from_eps");
    const double ab = sched.alpha_bar(t);
    const double inv_sqrt_ab = 1.0 / std::sqrt(ab);
    const double coef = std::sqrt(1.0 - ab);
    Vec out(wt.size());
    for (std::size_t i = 0; i < wt.size(); ++i) {
        out[i] = inv_sqrt_ab * (wt[i] - coef * eps_pred[i]);
    }
    return out;
}

Vec mu_from_w0(const Vec& wt, int t, const Vec& w0_pred, const NoiseSchedule& sched) {
    require_same_dim(wt.size(), w0_pred.size(), "mu_from_w0");
    return posterior_mean_var(w0_pred, wt, t, sched).mean;
}

Vec eps_from_w0(const Vec& wt, int t, const Vec& w0_pred, const NoiseSchedule& sched) {
    require_same_dim(wt.size(), w0_pred.size(), "eps_from_w0");
    const double ab = sched.alpha_bar(t);
    const double signal = std::sqrt(ab);
    const double inv_noise = 1.0 / std::sqrt(1.0 - ab);
    Vec out(wt.size());
    for (std::size_t i = 0; i < wt.size(); ++i) {
        out[i] = (wt[i] - signal * w0_pred[i]) * inv_noise;
    }
    return out;
}

}  // namespace clp

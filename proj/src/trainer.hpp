// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "data.hpp"
#include "losses.hpp"
#include "network.hpp"
#include "schedule.hpp"

namespace clp {

struct TrainConfig {
    int iterations = 2000;
    double learning_rate = 1e-3;
    int n_identities = 16;
    int k_views = 4;
    LossWeights weights;
    uint64_t seed = 1;
    int checkpoint_interval = 500;  // 0 disables intermediate checkpoints
    int log_echo_interval = 0;      // 0 disables stderr progress echo
    double grad_clip = 0.0;         // global-norm clip; 0 disables
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double pseudo_text_fraction = 0.5;
    double pseudo_text_xi = 0.1;
    bool use_l2 = true;       // ablation switch for the view-consistency term
    bool use_triplet = true;  // ablation switch for the triplet term

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

// First/second-moment adaptive update with bias correction.
struct Adam {
    Vec m;
    Vec v;
    int64_t step_count = 0;

    void init(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        step_count = 0;
    }

    void update(std::span<double> params, std::span<const double> grads, double lr,
                double beta1, double beta2, double eps);
};

// One training step with every random choice resolved: selected identities,
// shared (eps, t) per identity, per-view embeddings and dropout flags, and
// the mined triplets. Loss evaluation on a plan is a pure function of the
// parameters, which is what the finite-difference checks rely on.
struct BatchPlan {
    TrainingBatch batch;
    struct Triplet {
        int anchor;
        int positive;
        int negative;
    };
    std::vector<Triplet> triplets;
    // Per identity slot: views eligible for contrastive terms (condition not
    // dropped); groups with fewer than 2 entries are skipped.
    std::vector<std::vector<int>> view_groups;
    bool triplet_degenerate = false;  // batch offered no triplet candidates
};

BatchPlan plan_batch(const Dataset& ds, const NoiseSchedule& sched,
                     const TrainConfig& cfg, const PriorNetwork& net, Rng& rng);

// Loss (and optionally parameter gradients) for a fully resolved plan.
// Contrastive terms are computed on clean-latent predictions only; for a
// noise-predicting network they are applied to the reconstructed w0, whose
// chain rule scales gradients by -sqrt(1-alpha_bar)/sqrt(alpha_bar).
// Dropped-condition predictions never enter the contrastive terms.
LossReport compute_batch_loss(const PriorNetwork& net, const BatchPlan& plan,
                              const NoiseSchedule& sched, const TrainConfig& cfg,
                              std::vector<double>* grads);

struct StepOutcome {
    LossReport report;
    bool triplet_degenerate = false;
    double wall_ms = 0.0;
};

using LogCallback = std::function<void(const std::string& jsonl_record)>;

// Binds schedule, network, losses and batches into the optimization loop.
// Single logical stream: one trainer owns the parameters and the RNG, and a
// fixed (seed, config, dataset) reproduces trajectories bit-for-bit.
class Trainer {
public:
    Trainer(PriorNetwork net, NoiseSchedule sched, TrainConfig cfg);

    StepOutcome train_step(const Dataset& ds);

    // Runs up to cfg.iterations, appending one structured record per step to
    // log_path (when set) and checkpointing at the configured interval.
    void run(const Dataset& ds, const std::string& checkpoint_path,
             const std::string& log_path, const LogCallback& callback = {});

    void save_checkpoint(const std::string& path) const;
    static Trainer load_checkpoint(const std::string& path);

    int64_t step() const { return step_; }
    const PriorNetwork& network() const { return net_; }
    PriorNetwork& network() { return net_; }
    const NoiseSchedule& schedule() const { return sched_; }
    const TrainConfig& config() const { return cfg_; }
    TrainConfig& config() { return cfg_; }
    Rng& rng() { return rng_; }
    const Adam& optimizer() const { return adam_; }

private:
    PriorNetwork net_;
    NoiseSchedule sched_;
    TrainConfig cfg_;
    Rng rng_;
    Adam adam_;
    int64_t step_ = 0;
};

}  // namespace clp

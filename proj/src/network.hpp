// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vec.hpp"

namespace clp {

enum class ParamKind { PredictW0, PredictEps };

ParamKind param_kind_from_string(const std::string& s);
const char* to_string(ParamKind kind);

struct PriorConfig {
    int latent_dim = 512;
    int embed_dim = 512;
    ParamKind param_kind = ParamKind::PredictW0;
    int depth = 4;
    int width = 256;
    int heads = 4;
    double cond_dropout_prob = 0.1;
    int extended_layers = 0;  // 0 => plain W; > 0 => W+ with that many layers

    // Network input/output dimension: latent_dim, or layers * latent_dim in
    // W+ mode (the layers are flattened into one token block).
    int io_dim() const {
        return extended_layers > 0 ? extended_layers * latent_dim : latent_dim;
    }

    void validate() const;
    bool operator==(const PriorConfig&) const = default;
};

struct TensorInfo {
    std::string name;
    std::size_t offset;
    int rows;
    int cols;  // 1 for vectors
    std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

// Sinusoidal timestep features: interleaved (sin, cos) pairs over a geometric
// frequency ladder, so t == 0 maps to (0, 1, 0, 1, ...). Injective over the
// timestep ranges used here; dim must be even.
Vec timestep_features(double t, int dim);

// Classifier-free guidance combination: uncond + scale * (cond - uncond).
// scale == 1 returns cond and scale == 0 returns uncond bit-exactly.
Vec apply_cfg(const Vec& cond_pred, const Vec& uncond_pred, double scale);

// The learnable denoiser: a causal transformer over the token sequence
// [condition, timestep, noised latent, query], with the prediction read from
// the query position. Predicts the clean latent or the injected noise
// depending on config. Forward passes are const and safe to run concurrently;
// parameter updates require exclusive access.
class PriorNetwork {
public:
    PriorNetwork(const PriorConfig& cfg, uint64_t init_seed);

    const PriorConfig& config() const { return cfg_; }
    std::size_t param_count() const { return params_.size(); }
    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }
    const std::vector<TensorInfo>& layout() const { return layout_; }

    // Named sub-view into the flat parameter vector.
    std::span<double> param_view(const std::string& name);
    std::span<const double> param_view(const std::string& name) const;

    std::span<const double> null_embedding() const { return param_view("null_embedding"); }

    static constexpr int kTokens = 4;

    // Per-call activation cache; required for backward().
    struct Cache {
        Vec cond;       // embedding actually used (input e or the null embedding)
        bool dropped = false;
        Vec tfeat;      // timestep features [width]
        Vec wt;         // noised latent [io_dim]
        int t = 0;
        Vec x_in;       // token stream after embeddings + positions [kTokens * width]
        struct Block {
            Vec x;                    // block input
            Vec ln1_mean, ln1_rstd;   // [kTokens]
            Vec n1;                   // normalized stream
            Vec q, k, v;              // [kTokens * width]
            Vec attn;                 // softmax weights [heads * kTokens * kTokens]
            Vec o;                    // attention output, heads concatenated
            Vec x_mid;                // after attention residual
            Vec ln2_mean, ln2_rstd;
            Vec n2;
            Vec h_pre;                // mlp pre-activation [kTokens * 4 * width]
            Vec h_act;                // gelu(h_pre)
        };
        std::vector<Block> blocks;
        Vec x_out;                    // stream after last block
        Vec lnf_mean, lnf_rstd;       // [kTokens]
        Vec nf;                       // final normalized stream
    };

    // Runs the denoiser on (w_t, t, e). When drop_cond is set the condition is
    // replaced by the learned null embedding and `e` is never read, so the
    // output is bit-identical for any e. Deterministic given (inputs, params).
    Vec forward(const Vec& wt, int t, const Vec& e, bool drop_cond,
                Cache* cache = nullptr) const;

    // Accumulates parameter gradients for one cached forward pass given the
    // loss gradient at the network output. `grads` must have param_count()
    // entries and is added to, not overwritten.
    void backward(const Cache& cache, const Vec& d_out, std::span<double> grads) const;

    // Timestep token before the learned projection; exposed for verification.
    Vec timestep_features_for(int t) const;

private:
    void build_layout();
    void init_params(uint64_t seed);
    std::span<const double> view(int idx) const;

    // Cached layout indices for the hot path.
    struct BlockIdx {
        int ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
        int ln2_g, ln2_b, w1, b1, w2, b2;
    };

    PriorConfig cfg_;
    std::vector<double> params_;
    std::vector<TensorInfo> layout_;
    int idx_cond_w_, idx_cond_b_, idx_time_w_, idx_time_b_;
    int idx_lat_w_, idx_lat_b_, idx_query_, idx_pos_, idx_null_;
    std::vector<BlockIdx> block_idx_;
    int idx_lnf_g_, idx_lnf_b_, idx_head_w_, idx_head_b_;
};

}  // namespace clp

// SPDX-License-Identifier: Apache-2.0
#include "network.hpp"

#include <cmath>
#include <numbers>

#include "errors.hpp"
#include "rng.hpp"

namespace clp {

namespace {

constexpr double kLnEps = 1e-5;

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

// out = M x (+ out when accumulate)
void matvec(std::span<const double> m, int rows, int cols,
            const double* x, double* out, bool accumulate = false) {
    for (int r = 0; r < rows; ++r) {
        const double* row = m.data() + static_cast<std::size_t>(r) * cols;
        double s = 0.0;
        for (int c = 0; c < cols; ++c) {
            s += row[c] * x[c];
        }
        if (accumulate) {
            out[r] += s;
        } else {
            out[r] = s;
        }
    }
}

// out += M^T y
void matvec_transposed_acc(std::span<const double> m, int rows, int cols,
                           const double* y, double* out) {
    for (int r = 0; r < rows; ++r) {
        const double* row = m.data() + static_cast<std::size_t>(r) * cols;
        const double yr = y[r];
        for (int c = 0; c < cols; ++c) {
            out[c] += row[c] * yr;
        }
    }
}

// dM += y x^T
void outer_acc(std::span<double> dm, int rows, int cols,
               const double* y, const double* x) {
    for (int r = 0; r < rows; ++r) {
        double* row = dm.data() + static_cast<std::size_t>(r) * cols;
        const double yr = y[r];
        for (int c = 0; c < cols; ++c) {
            row[c] += yr * x[c];
        }
    }
}

void layer_norm(const double* x, int n, std::span<const double> gamma,
                std::span<const double> beta, double* out, double* mean_out,
                double* rstd_out) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
        mean += x[i];
    }
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        var += d * d;
    }
    var /= n;
    const double rstd = 1.0 / std::sqrt(var + kLnEps);
    for (int i = 0; i < n; ++i) {
        out[i] = gamma[i] * ((x[i] - mean) * rstd) + beta[i];
    }
    *mean_out = mean;
    *rstd_out = rstd;
}

// dx += backward of layer_norm; accumulates parameter grads for gamma/beta.
void layer_norm_backward(const double* x, int n, double mean, double rstd,
                         std::span<const double> gamma, const double* dy,
                         std::span<double> dgamma, std::span<double> dbeta,
                         double* dx_acc) {
    double m1 = 0.0;  // mean of dxhat
    double m2 = 0.0;  // mean of dxhat * xhat
    for (int i = 0; i < n; ++i) {
        const double xhat = (x[i] - mean) * rstd;
        const double dxhat = dy[i] * gamma[i];
        dgamma[i] += dy[i] * xhat;
        dbeta[i] += dy[i];
        m1 += dxhat;
        m2 += dxhat * xhat;
    }
    m1 /= n;
    m2 /= n;
    for (int i = 0; i < n; ++i) {
        const double xhat = (x[i] - mean) * rstd;
        const double dxhat = dy[i] * gamma[i];
        dx_acc[i] += rstd * (dxhat - m1 - xhat * m2);
    }
}

}  // namespace

ParamKind param_kind_from_string(const std::string& s) {
    if (s == "predict_w0") return ParamKind::PredictW0;
    if (s == "predict_eps") return ParamKind::PredictEps;
    throw_invalid("param_kind: expected 'predict_w0' or 'predict_eps', got '" + s + "'");
}

const char* to_string(ParamKind kind) {
    return kind == ParamKind::PredictW0 ? "predict_w0" : "predict_eps";
}

void PriorConfig::validate() const {
    if (latent_dim < 1) throw_invalid("latent_dim: must be >= 1");
    if (embed_dim < 1) throw_invalid("embed_dim: must be >= 1");
    if (depth < 1) throw_invalid("depth: must be >= 1");
    if (width < 1) throw_invalid("width: must be >= 1");
    if (heads < 1) throw_invalid("heads: must be >= 1");
    if (width % 2 != 0) throw_invalid("width: must be even (sin/cos timestep pairs)");
    if (width % heads != 0) throw_invalid("heads: must divide width");
    if (!(cond_dropout_prob >= 0.0 && cond_dropout_prob < 1.0)) {
        throw_invalid("cond_dropout_prob: must be in [0, 1)");
    }
    if (extended_layers < 0) throw_invalid("extended_layers: must be >= 0");
}

Vec timestep_features(double t, int dim) {
    if (dim < 2 || dim % 2 != 0) {
        throw_invalid("timestep_features: dim must be a positive even number");
    }
    Vec out(dim);
    const int pairs = dim / 2;
    for (int i = 0; i < pairs; ++i) {
        // Frequencies fall geometrically from 1 to ~1/10000.
        const double freq = pairs > 1
                                ? std::pow(10000.0, -static_cast<double>(i) / (pairs - 1))
                                : 1.0;
        out[2 * i] = std::sin(t * freq);
        out[2 * i + 1] = std::cos(t * freq);
    }
    return out;
}

Vec apply_cfg(const Vec& cond_pred, const Vec& uncond_pred, double scale) {
    require_same_dim(cond_pred.size(), uncond_pred.size(), "apply_cfg");
    if (scale == 1.0) return cond_pred;
    if (scale == 0.0) return uncond_pred;
    Vec out(cond_pred.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = uncond_pred[i] + scale * (cond_pred[i] - uncond_pred[i]);
    }
    return out;
}

PriorNetwork::PriorNetwork(const PriorConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    build_layout();
    init_params(init_seed);
}

void PriorNetwork::build_layout() {
    const int W = cfg_.width;
    const int E = cfg_.embed_dim;
    const int IO = cfg_.io_dim();
    const int M = 4 * W;

    layout_.clear();
    std::size_t offset = 0;
    auto add = [&](const std::string& name, int rows, int cols) {
        layout_.push_back({name, offset, rows, cols});
        offset += static_cast<std::size_t>(rows) * cols;
        return static_cast<int>(layout_.size()) - 1;
    };

    idx_cond_w_ = add("embed.cond.w", W, E);
    idx_cond_b_ = add("embed.cond.b", W, 1);
    idx_time_w_ = add("embed.time.w", W, W);
    idx_time_b_ = add("embed.time.b", W, 1);
    idx_lat_w_ = add("embed.latent.w", W, IO);
    idx_lat_b_ = add("embed.latent.b", W, 1);
    idx_query_ = add("embed.query", W, 1);
    idx_pos_ = add("embed.pos", kTokens, W);
    idx_null_ = add("null_embedding", E, 1);

    block_idx_.clear();
    for (int b = 0; b < cfg_.depth; ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        BlockIdx bi;
        bi.ln1_g = add(p + "ln1.gamma", W, 1);
        bi.ln1_b = add(p + "ln1.beta", W, 1);
        bi.wq = add(p + "attn.wq", W, W);
        bi.bq = add(p + "attn.bq", W, 1);
        bi.wk = add(p + "attn.wk", W, W);
        bi.bk = add(p + "attn.bk", W, 1);
        bi.wv = add(p + "attn.wv", W, W);
        bi.bv = add(p + "attn.bv", W, 1);
        bi.wo = add(p + "attn.wo", W, W);
        bi.bo = add(p + "attn.bo", W, 1);
        bi.ln2_g = add(p + "ln2.gamma", W, 1);
        bi.ln2_b = add(p + "ln2.beta", W, 1);
        bi.w1 = add(p + "mlp.w1", M, W);
        bi.b1 = add(p + "mlp.b1", M, 1);
        bi.w2 = add(p + "mlp.w2", W, M);
        bi.b2 = add(p + "mlp.b2", W, 1);
        block_idx_.push_back(bi);
    }

    idx_lnf_g_ = add("final_ln.gamma", W, 1);
    idx_lnf_b_ = add("final_ln.beta", W, 1);
    idx_head_w_ = add("head.w", IO, W);
    idx_head_b_ = add("head.b", IO, 1);

    params_.assign(offset, 0.0);
}

void PriorNetwork::init_params(uint64_t seed) {
    Rng rng(seed);
    for (const auto& info : layout_) {
        double* p = params_.data() + info.offset;
        const std::size_t n = info.size();
        const auto& name = info.name;
        const bool is_gamma = name.ends_with("gamma");
        const bool is_bias = name.ends_with(".b") || name.ends_with("beta") ||
                             name.ends_with(".bq") || name.ends_with(".bk") ||
                             name.ends_with(".bv") || name.ends_with(".bo") ||
                             name.ends_with(".b1") || name.ends_with(".b2");
        if (is_gamma) {
            for (std::size_t i = 0; i < n; ++i) p[i] = 1.0;
        } else if (is_bias) {
            // zeros; head.b is also near-zero via the head rule below
        } else if (name == "embed.query" || name == "embed.pos") {
            for (std::size_t i = 0; i < n; ++i) p[i] = 0.02 * rng.gaussian();
        } else if (name == "null_embedding") {
            const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.embed_dim));
            for (std::size_t i = 0; i < n; ++i) p[i] = scale * rng.gaussian();
        } else if (name == "head.w") {
            // Near-zero head keeps early predictions small.
            for (std::size_t i = 0; i < n; ++i) p[i] = 1e-4 * rng.gaussian();
        } else {
            const double scale = 1.0 / std::sqrt(static_cast<double>(info.cols));
            for (std::size_t i = 0; i < n; ++i) p[i] = scale * rng.gaussian();
        }
    }
}

std::span<const double> PriorNetwork::view(int idx) const {
    const auto& info = layout_[idx];
    return {params_.data() + info.offset, info.size()};
}

std::span<double> PriorNetwork::param_view(const std::string& name) {
    for (const auto& info : layout_) {
        if (info.name == name) {
            return {params_.data() + info.offset, info.size()};
        }
    }
    throw_invalid("param_view: no tensor named '" + name + "'");
}

std::span<const double> PriorNetwork::param_view(const std::string& name) const {
    for (const auto& info : layout_) {
        if (info.name == name) {
            return {params_.data() + info.offset, info.size()};
        }
    }
    throw_invalid("param_view: no tensor named '" + name + "'");
}

Vec PriorNetwork::timestep_features_for(int t) const {
    return timestep_features(static_cast<double>(t), cfg_.width);
}

Vec PriorNetwork::forward(const Vec& wt, int t, const Vec& e, bool drop_cond,
                          Cache* cache) const {
    const int W = cfg_.width;
    const int IO = cfg_.io_dim();
    const int H = cfg_.heads;
    const int Dh = W / H;
    const int S = kTokens;
    const int M = 4 * W;

    if (t < 1) {
        throw_invalid("t: must be >= 1, got " + std::to_string(t));
    }
    require_same_dim(wt.size(), static_cast<std::size_t>(IO), "forward: wt");
    if (!drop_cond) {
        require_same_dim(e.size(), static_cast<std::size_t>(cfg_.embed_dim),
                         "forward: condition embedding");
    }

    Cache local;
    Cache& c = cache ? *cache : local;
    c.dropped = drop_cond;
    c.t = t;
    c.wt = wt;
    if (drop_cond) {
        auto nv = view(idx_null_);
        c.cond.assign(nv.begin(), nv.end());
    } else {
        c.cond = e;
    }
    c.tfeat = timestep_features(static_cast<double>(t), W);

    Vec x(static_cast<std::size_t>(S) * W);
    matvec(view(idx_cond_w_), W, cfg_.embed_dim, c.cond.data(), x.data());
    matvec(view(idx_time_w_), W, W, c.tfeat.data(), x.data() + W);
    matvec(view(idx_lat_w_), W, IO, c.wt.data(), x.data() + 2 * W);
    {
        auto bq = view(idx_cond_b_);
        auto bt = view(idx_time_b_);
        auto bl = view(idx_lat_b_);
        auto q = view(idx_query_);
        auto pos = view(idx_pos_);
        for (int i = 0; i < W; ++i) {
            x[i] += bq[i] + pos[i];
            x[W + i] += bt[i] + pos[W + i];
            x[2 * W + i] += bl[i] + pos[2 * W + i];
            x[3 * W + i] = q[i] + pos[3 * W + i];
        }
    }
    c.x_in = x;

    c.blocks.assign(cfg_.depth, {});
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(Dh));

    for (int b = 0; b < cfg_.depth; ++b) {
        const BlockIdx& bi = block_idx_[b];
        auto& cb = c.blocks[b];
        cb.x = x;

        cb.ln1_mean.resize(S);
        cb.ln1_rstd.resize(S);
        cb.n1.resize(x.size());
        for (int i = 0; i < S; ++i) {
            layer_norm(cb.x.data() + i * W, W, view(bi.ln1_g), view(bi.ln1_b),
                       cb.n1.data() + i * W, &cb.ln1_mean[i], &cb.ln1_rstd[i]);
        }

        cb.q.resize(x.size());
        cb.k.resize(x.size());
        cb.v.resize(x.size());
        for (int i = 0; i < S; ++i) {
            const double* n1i = cb.n1.data() + i * W;
            matvec(view(bi.wq), W, W, n1i, cb.q.data() + i * W);
            matvec(view(bi.wk), W, W, n1i, cb.k.data() + i * W);
            matvec(view(bi.wv), W, W, n1i, cb.v.data() + i * W);
            auto vbq = view(bi.bq);
            auto vbk = view(bi.bk);
            auto vbv = view(bi.bv);
            for (int j = 0; j < W; ++j) {
                cb.q[i * W + j] += vbq[j];
                cb.k[i * W + j] += vbk[j];
                cb.v[i * W + j] += vbv[j];
            }
        }

        cb.attn.assign(static_cast<std::size_t>(H) * S * S, 0.0);
        cb.o.assign(x.size(), 0.0);
        for (int h = 0; h < H; ++h) {
            for (int i = 0; i < S; ++i) {
                // causal: token i attends to positions 0..i
                double logits[kTokens];
                double maxv = -1e300;
                for (int j = 0; j <= i; ++j) {
                    double s = 0.0;
                    const double* qh = cb.q.data() + i * W + h * Dh;
                    const double* kh = cb.k.data() + j * W + h * Dh;
                    for (int d = 0; d < Dh; ++d) {
                        s += qh[d] * kh[d];
                    }
                    logits[j] = s * inv_sqrt_dh;
                    maxv = std::max(maxv, logits[j]);
                }
                double denom = 0.0;
                for (int j = 0; j <= i; ++j) {
                    logits[j] = std::exp(logits[j] - maxv);
                    denom += logits[j];
                }
                double* arow = cb.attn.data() + (static_cast<std::size_t>(h) * S + i) * S;
                for (int j = 0; j <= i; ++j) {
                    arow[j] = logits[j] / denom;
                }
                double* oh = cb.o.data() + i * W + h * Dh;
                for (int j = 0; j <= i; ++j) {
                    const double* vh = cb.v.data() + j * W + h * Dh;
                    const double a = arow[j];
                    for (int d = 0; d < Dh; ++d) {
                        oh[d] += a * vh[d];
                    }
                }
            }
        }

        for (int i = 0; i < S; ++i) {
            matvec(view(bi.wo), W, W, cb.o.data() + i * W, x.data() + i * W, true);
            auto vbo = view(bi.bo);
            for (int j = 0; j < W; ++j) {
                x[i * W + j] += vbo[j];
            }
        }
        cb.x_mid = x;

        cb.ln2_mean.resize(S);
        cb.ln2_rstd.resize(S);
        cb.n2.resize(x.size());
        for (int i = 0; i < S; ++i) {
            layer_norm(cb.x_mid.data() + i * W, W, view(bi.ln2_g), view(bi.ln2_b),
                       cb.n2.data() + i * W, &cb.ln2_mean[i], &cb.ln2_rstd[i]);
        }

        cb.h_pre.resize(static_cast<std::size_t>(S) * M);
        cb.h_act.resize(cb.h_pre.size());
        for (int i = 0; i < S; ++i) {
            matvec(view(bi.w1), M, W, cb.n2.data() + i * W, cb.h_pre.data() + i * M);
            auto vb1 = view(bi.b1);
            for (int j = 0; j < M; ++j) {
                double& hp = cb.h_pre[static_cast<std::size_t>(i) * M + j];
                hp += vb1[j];
                cb.h_act[static_cast<std::size_t>(i) * M + j] = gelu(hp);
            }
            matvec(view(bi.w2), W, M, cb.h_act.data() + static_cast<std::size_t>(i) * M,
                   x.data() + i * W, true);
            auto vb2 = view(bi.b2);
            for (int j = 0; j < W; ++j) {
                x[i * W + j] += vb2[j];
            }
        }
    }

    c.x_out = x;
    c.lnf_mean.resize(S);
    c.lnf_rstd.resize(S);
    c.nf.resize(x.size());
    for (int i = 0; i < S; ++i) {
        layer_norm(c.x_out.data() + i * W, W, view(idx_lnf_g_), view(idx_lnf_b_),
                   c.nf.data() + i * W, &c.lnf_mean[i], &c.lnf_rstd[i]);
    }

    Vec out(IO);
    matvec(view(idx_head_w_), IO, W, c.nf.data() + (S - 1) * W, out.data());
    auto hb = view(idx_head_b_);
    for (int i = 0; i < IO; ++i) {
        out[i] += hb[i];
    }
    return out;
}

void PriorNetwork::backward(const Cache& c, const Vec& d_out,
                            std::span<double> grads) const {
    const int W = cfg_.width;
    const int IO = cfg_.io_dim();
    const int H = cfg_.heads;
    const int Dh = W / H;
    const int S = kTokens;
    const int M = 4 * W;

    require_same_dim(d_out.size(), static_cast<std::size_t>(IO), "backward: d_out");
    require_same_dim(grads.size(), params_.size(), "backward: grads");

    auto g = [&](int idx) -> std::span<double> {
        const auto& info = layout_[idx];
        return {grads.data() + info.offset, info.size()};
    };

    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(Dh));

    // head
    outer_acc(g(idx_head_w_), IO, W, d_out.data(), c.nf.data() + (S - 1) * W);
    {
        auto dhb = g(idx_head_b_);
        for (int i = 0; i < IO; ++i) {
            dhb[i] += d_out[i];
        }
    }
    Vec dnf(static_cast<std::size_t>(S) * W, 0.0);
    matvec_transposed_acc(view(idx_head_w_), IO, W, d_out.data(), dnf.data() + (S - 1) * W);

    // final layer norm (only the query token carries gradient, but the loop
    // is uniform and the other tokens have zero dy)
    Vec dx(static_cast<std::size_t>(S) * W, 0.0);
    for (int i = S - 1; i >= 0; --i) {
        layer_norm_backward(c.x_out.data() + i * W, W, c.lnf_mean[i], c.lnf_rstd[i],
                            view(idx_lnf_g_), dnf.data() + i * W, g(idx_lnf_g_),
                            g(idx_lnf_b_), dx.data() + i * W);
    }

    Vec dn(static_cast<std::size_t>(S) * W);
    Vec dq(static_cast<std::size_t>(S) * W);
    Vec dk(static_cast<std::size_t>(S) * W);
    Vec dv(static_cast<std::size_t>(S) * W);
    Vec dh_act(static_cast<std::size_t>(S) * M);
    Vec dh_pre(static_cast<std::size_t>(S) * M);

    for (int b = cfg_.depth - 1; b >= 0; --b) {
        const BlockIdx& bi = block_idx_[b];
        const auto& cb = c.blocks[b];

        // mlp branch: x_next = x_mid + W2 gelu(W1 ln2(x_mid) + b1) + b2
        std::fill(dn.begin(), dn.end(), 0.0);
        for (int i = 0; i < S; ++i) {
            const double* dmlp = dx.data() + i * W;  // grad at block output
            outer_acc(g(bi.w2), W, M, dmlp, cb.h_act.data() + static_cast<std::size_t>(i) * M);
            auto db2 = g(bi.b2);
            for (int j = 0; j < W; ++j) {
                db2[j] += dmlp[j];
            }
            double* dha = dh_act.data() + static_cast<std::size_t>(i) * M;
            std::fill(dha, dha + M, 0.0);
            matvec_transposed_acc(view(bi.w2), W, M, dmlp, dha);
            double* dhp = dh_pre.data() + static_cast<std::size_t>(i) * M;
            const double* hp = cb.h_pre.data() + static_cast<std::size_t>(i) * M;
            for (int j = 0; j < M; ++j) {
                dhp[j] = dha[j] * gelu_grad(hp[j]);
            }
            outer_acc(g(bi.w1), M, W, dhp, cb.n2.data() + i * W);
            auto db1 = g(bi.b1);
            for (int j = 0; j < M; ++j) {
                db1[j] += dhp[j];
            }
            matvec_transposed_acc(view(bi.w1), M, W, dhp, dn.data() + i * W);
        }
        // dx (at x_mid) = residual grad + ln2 backward of dn
        for (int i = 0; i < S; ++i) {
            layer_norm_backward(cb.x_mid.data() + i * W, W, cb.ln2_mean[i],
                                cb.ln2_rstd[i], view(bi.ln2_g), dn.data() + i * W,
                                g(bi.ln2_g), g(bi.ln2_b), dx.data() + i * W);
        }

        // attention branch: x_mid = x + Wo o + bo
        std::fill(dq.begin(), dq.end(), 0.0);
        std::fill(dk.begin(), dk.end(), 0.0);
        std::fill(dv.begin(), dv.end(), 0.0);
        Vec dov(static_cast<std::size_t>(S) * W, 0.0);
        for (int i = 0; i < S; ++i) {
            const double* datt = dx.data() + i * W;
            outer_acc(g(bi.wo), W, W, datt, cb.o.data() + i * W);
            auto dbo = g(bi.bo);
            for (int j = 0; j < W; ++j) {
                dbo[j] += datt[j];
            }
            matvec_transposed_acc(view(bi.wo), W, W, datt, dov.data() + i * W);
        }
        for (int h = 0; h < H; ++h) {
            for (int i = 0; i < S; ++i) {
                const double* arow = cb.attn.data() + (static_cast<std::size_t>(h) * S + i) * S;
                const double* doh = dov.data() + i * W + h * Dh;
                double da[kTokens] = {0, 0, 0, 0};
                for (int j = 0; j <= i; ++j) {
                    const double* vh = cb.v.data() + j * W + h * Dh;
                    double s = 0.0;
                    for (int d = 0; d < Dh; ++d) {
                        s += doh[d] * vh[d];
                    }
                    da[j] = s;
                    double* dvh = dv.data() + j * W + h * Dh;
                    const double a = arow[j];
                    for (int d = 0; d < Dh; ++d) {
                        dvh[d] += a * doh[d];
                    }
                }
                double srow = 0.0;
                for (int j = 0; j <= i; ++j) {
                    srow += arow[j] * da[j];
                }
                for (int j = 0; j <= i; ++j) {
                    const double dlogit = arow[j] * (da[j] - srow) * inv_sqrt_dh;
                    const double* kh = cb.k.data() + j * W + h * Dh;
                    const double* qh = cb.q.data() + i * W + h * Dh;
                    double* dqh = dq.data() + i * W + h * Dh;
                    double* dkh = dk.data() + j * W + h * Dh;
                    for (int d = 0; d < Dh; ++d) {
                        dqh[d] += dlogit * kh[d];
                        dkh[d] += dlogit * qh[d];
                    }
                }
            }
        }
        std::fill(dn.begin(), dn.end(), 0.0);
        for (int i = 0; i < S; ++i) {
            const double* n1i = cb.n1.data() + i * W;
            outer_acc(g(bi.wq), W, W, dq.data() + i * W, n1i);
            outer_acc(g(bi.wk), W, W, dk.data() + i * W, n1i);
            outer_acc(g(bi.wv), W, W, dv.data() + i * W, n1i);
            auto dbq = g(bi.bq);
            auto dbk = g(bi.bk);
            auto dbv = g(bi.bv);
            for (int j = 0; j < W; ++j) {
                dbq[j] += dq[i * W + j];
                dbk[j] += dk[i * W + j];
                dbv[j] += dv[i * W + j];
            }
            matvec_transposed_acc(view(bi.wq), W, W, dq.data() + i * W, dn.data() + i * W);
            matvec_transposed_acc(view(bi.wk), W, W, dk.data() + i * W, dn.data() + i * W);
            matvec_transposed_acc(view(bi.wv), W, W, dv.data() + i * W, dn.data() + i * W);
        }
        for (int i = 0; i < S; ++i) {
            layer_norm_backward(cb.x.data() + i * W, W, cb.ln1_mean[i], cb.ln1_rstd[i],
                                view(bi.ln1_g), dn.data() + i * W, g(bi.ln1_g),
                                g(bi.ln1_b), dx.data() + i * W);
        }
    }

    // embeddings
    {
        auto dpos = g(idx_pos_);
        for (std::size_t i = 0; i < dpos.size(); ++i) {
            dpos[i] += dx[i];
        }
        auto dquery = g(idx_query_);
        for (int i = 0; i < W; ++i) {
            dquery[i] += dx[3 * W + i];
        }
        outer_acc(g(idx_lat_w_), W, IO, dx.data() + 2 * W, c.wt.data());
        auto dbl = g(idx_lat_b_);
        for (int i = 0; i < W; ++i) {
            dbl[i] += dx[2 * W + i];
        }
        outer_acc(g(idx_time_w_), W, W, dx.data() + W, c.tfeat.data());
        auto dbt = g(idx_time_b_);
        for (int i = 0; i < W; ++i) {
            dbt[i] += dx[W + i];
        }
        outer_acc(g(idx_cond_w_), W, cfg_.embed_dim, dx.data(), c.cond.data());
        auto dbc = g(idx_cond_b_);
        for (int i = 0; i < W; ++i) {
            dbc[i] += dx[i];
        }
        if (c.dropped) {
            matvec_transposed_acc(view(idx_cond_w_), W, cfg_.embed_dim, dx.data(),
                                  g(idx_null_).data());
        }
    }
}

}  // namespace clp

// SPDX-License-Identifier: Apache-2.0
#include "data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "errors.hpp"
#include "serialize.hpp"

namespace clp {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr int kPoseFeatureDim = 6;

// Per-entry scales chosen so the view term varies slightly more than the
// identity term; identity recovery stays feasible while view sensitivity is
// strong enough for the invariance objective to matter.
constexpr double kLatentActivation = 0.8;  // std of B w entries
constexpr double kPoseScale = 1.0;         // std of C entries

Vec normalized(Vec v) {
    const double n = l2_norm(v);
    if (n == 0.0) {
        throw_numeric("normalize: zero-norm vector");
    }
    for (auto& x : v) {
        x /= n;
    }
    return v;
}

uint64_t hash_doubles(uint64_t h, std::span<const double> values) {
    for (double v : values) {
        uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        h = splitmix64(h ^ bits);
    }
    return h;
}

}  // namespace

SyntheticBackend::SyntheticBackend(uint64_t seed, int latent_dim, int embed_dim,
                                   double view_noise)
    : seed_(seed), latent_dim_(latent_dim), embed_dim_(embed_dim),
      view_noise_(view_noise) {
    if (latent_dim < 2) throw_invalid("latent_dim: must be >= 2");
    if (embed_dim < 2) throw_invalid("embed_dim: must be >= 2");
    if (view_noise < 0.0) throw_invalid("view_noise: must be >= 0");

    Rng rng = Rng::derived(seed, 0xC0FFEE);
    const double a_scale = 1.0 / std::sqrt(static_cast<double>(embed_dim));
    const double b_scale = kLatentActivation / std::sqrt(static_cast<double>(latent_dim));

    map_a_.assign(embed_dim, Vec(embed_dim));
    for (auto& row : map_a_) {
        for (auto& v : row) v = a_scale * rng.gaussian();
    }
    map_b_.assign(embed_dim, Vec(latent_dim));
    for (auto& row : map_b_) {
        for (auto& v : row) v = b_scale * rng.gaussian();
    }
    map_c_.assign(embed_dim, Vec(kPoseFeatureDim));
    for (auto& row : map_c_) {
        for (auto& v : row) v = kPoseScale * rng.gaussian();
    }
}

Vec SyntheticBackend::pose_features(const CameraPose& p) {
    const double y = p.yaw_deg * kDegToRad;
    const double pt = p.pitch_deg * kDegToRad;
    return {std::sin(y), std::cos(y), std::sin(2.0 * y), std::cos(2.0 * y),
            std::sin(pt), std::cos(pt)};
}

SyntheticBackend::Image SyntheticBackend::render(const Vec& w, const CameraPose& p) const {
    require_same_dim(w.size(), static_cast<std::size_t>(latent_dim_), "render: latent");

    Vec hidden(embed_dim_);
    for (int i = 0; i < embed_dim_; ++i) {
        hidden[i] = std::tanh(dot(map_b_[i], w));
    }
    const Vec phi = pose_features(p);
    Image img(embed_dim_);
    for (int i = 0; i < embed_dim_; ++i) {
        img[i] = dot(map_a_[i], hidden) + dot(map_c_[i], phi);
    }
    if (view_noise_ > 0.0) {
        // View noise is keyed off (world seed, w, p) so rendering is a pure
        // function of its inputs.
        uint64_t h = splitmix64(seed_ ^ 0x5EEDF00DULL);
        h = hash_doubles(h, w);
        h = hash_doubles(h, std::span<const double>(&p.yaw_deg, 1));
        h = hash_doubles(h, std::span<const double>(&p.pitch_deg, 1));
        Rng noise_rng(h);
        for (int i = 0; i < embed_dim_; ++i) {
            img[i] += view_noise_ * noise_rng.gaussian();
        }
    }
    return img;
}

CondEmbedding SyntheticBackend::encode_image(const Image& img) const {
    require_same_dim(img.size(), static_cast<std::size_t>(embed_dim_), "encode_image");
    return {normalized(img), CondSource::ImageView};
}

CondEmbedding SyntheticBackend::embed_text(const std::string& prompt) const {
    Rng rng(derive_seed(seed_ ^ 0x7E87ULL, fnv1a(prompt)));
    Vec v = rng.gaussian_vector(embed_dim_);
    return {normalized(std::move(v)), CondSource::Text};
}

std::unique_ptr<SyntheticBackend> synth_world(uint64_t seed, int latent_dim,
                                              int embed_dim, double view_noise) {
    return std::make_unique<SyntheticBackend>(seed, latent_dim, embed_dim, view_noise);
}

void ExternalBackendStub::unavailable(const char* op) const {
    throw_unsupported("backend '" + name_ + "': " + op +
                      " requires integration mode with a pretrained "
                      "encoder/generator checkpoint; not available in this build");
}

int ExternalBackendStub::latent_dim() const { unavailable("latent_dim"); }
int ExternalBackendStub::embed_dim() const { unavailable("embed_dim"); }
std::pair<double, double> ExternalBackendStub::yaw_range_deg() const {
    unavailable("yaw_range_deg");
}
BackendAdapter::Image ExternalBackendStub::render(const Vec&, const CameraPose&) const {
    unavailable("render");
}
CondEmbedding ExternalBackendStub::encode_image(const Image&) const {
    unavailable("encode_image");
}
CondEmbedding ExternalBackendStub::embed_text(const std::string&) const {
    unavailable("embed_text");
}

void Dataset::validate() const {
    if (latent_dim < 1) throw_invalid("dataset: latent_dim must be >= 1");
    if (embed_dim < 1) throw_invalid("dataset: embed_dim must be >= 1");
    if (k_views < 1) throw_invalid("dataset: k_views must be >= 1");
    for (const auto& id : identities) {
        if (static_cast<int>(id.views.size()) != k_views) {
            throw_invalid("dataset: identity " + std::to_string(id.identity_id) +
                          " has " + std::to_string(id.views.size()) +
                          " views, expected " + std::to_string(k_views));
        }
        if (!all_finite(id.w0)) {
            throw_numeric("dataset: non-finite latent for identity " +
                          std::to_string(id.identity_id));
        }
        for (const auto& view : id.views) {
            if (!all_finite(view.embedding.values)) {
                throw_numeric("dataset: non-finite embedding for identity " +
                              std::to_string(id.identity_id));
            }
            if (normalized) {
                const double n = l2_norm(view.embedding.values);
                if (std::abs(n - 1.0) > 1e-6) {
                    throw_invalid("dataset: embedding norm " + std::to_string(n) +
                                  " violates unit-norm invariant");
                }
            }
        }
    }
}

Dataset generate_dataset(const BackendAdapter& backend, const GenOptions& opts) {
    if (opts.n_identities < 1) throw_invalid("n_identities: must be >= 1");
    if (opts.k_views < 2) throw_invalid("k_views: must be >= 2 for contrastive training");

    const auto [yaw_lo, yaw_hi] = backend.yaw_range_deg();

    Dataset ds;
    ds.latent_dim = backend.latent_dim();
    ds.embed_dim = backend.embed_dim();
    ds.k_views = opts.k_views;
    ds.seed = opts.seed;
    ds.normalized = backend.normalizes();
    ds.descriptor = opts.descriptor;
    ds.identities.resize(opts.n_identities);

    for (int i = 0; i < opts.n_identities; ++i) {
        Rng rng = Rng::derived(opts.seed, static_cast<uint64_t>(i));
        auto& id = ds.identities[i];
        id.identity_id = i;
        id.w0 = rng.gaussian_vector(ds.latent_dim);
        for (auto& v : id.w0) {
            v = round_f32(v);
        }
        id.views.resize(opts.k_views);
        for (auto& view : id.views) {
            view.pose.yaw_deg = round_f32(rng.uniform(yaw_lo, yaw_hi));
            view.pose.pitch_deg = round_f32(opts.pitch_deg);
            try {
                view.embedding = backend.embed_view(id.w0, view.pose);
            } catch (const Error& e) {
                throw Error(e.code(), "generate_dataset: identity " +
                                          std::to_string(i) + ": " + e.what());
            }
            for (auto& v : view.embedding.values) {
                v = round_f32(v);
            }
        }
    }
    ds.validate();
    return ds;
}

namespace {

constexpr char kDatasetMagic[8] = {'C', 'L', 'P', 'D', 'S', 'E', 'T', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

void write_f32(std::ofstream& out, double v) {
    const float f = static_cast<float>(v);
    write_pod(out, f);
}

double read_f32(std::ifstream& in) {
    float f = 0.0f;
    read_pod(in, f);
    return static_cast<double>(f);
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw_io("save_dataset: cannot open '" + path + "' for writing");
    }
    out.write(kDatasetMagic, sizeof(kDatasetMagic));
    write_pod(out, uint32_t{1});  // format version
    write_pod(out, static_cast<uint32_t>(ds.identities.size()));
    write_pod(out, static_cast<uint32_t>(ds.k_views));
    write_pod(out, static_cast<uint32_t>(ds.latent_dim));
    write_pod(out, static_cast<uint32_t>(ds.embed_dim));
    write_pod(out, uint32_t{2});  // pose values per view
    write_pod(out, static_cast<uint8_t>(ds.normalized ? 1 : 0));
    const uint8_t pad[3] = {0, 0, 0};
    out.write(reinterpret_cast<const char*>(pad), sizeof(pad));
    write_pod(out, ds.seed);
    write_pod(out, static_cast<uint32_t>(ds.descriptor.size()));
    out.write(ds.descriptor.data(), static_cast<std::streamsize>(ds.descriptor.size()));

    // Fixed-stride records: w0, then k x (pose, embedding), all f32.
    for (const auto& id : ds.identities) {
        for (double v : id.w0) write_f32(out, v);
        for (const auto& view : id.views) {
            write_f32(out, view.pose.yaw_deg);
            write_f32(out, view.pose.pitch_deg);
            for (double v : view.embedding.values) write_f32(out, v);
        }
    }
    if (!out) {
        throw_io("save_dataset: write failed for '" + path + "'");
    }
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw_io("load_dataset: cannot open '" + path + "'");
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0) {
        throw_io("load_dataset: '" + path + "' is not a dataset file");
    }
    uint32_t version = 0;
    read_pod(in, version);
    if (version != 1) {
        throw_unsupported("load_dataset: unsupported format version " +
                          std::to_string(version) + " (this build reads version 1)");
    }
    uint32_t n = 0, k = 0, latent_dim = 0, embed_dim = 0, pose_dim = 0;
    read_pod(in, n);
    read_pod(in, k);
    read_pod(in, latent_dim);
    read_pod(in, embed_dim);
    read_pod(in, pose_dim);
    uint8_t normalized = 0;
    read_pod(in, normalized);
    char pad[3];
    in.read(pad, sizeof(pad));
    Dataset ds;
    read_pod(in, ds.seed);
    uint32_t desc_len = 0;
    read_pod(in, desc_len);
    ds.descriptor.resize(desc_len);
    in.read(ds.descriptor.data(), desc_len);
    if (pose_dim != 2) {
        throw_unsupported("load_dataset: unexpected pose record size " +
                          std::to_string(pose_dim));
    }

    ds.latent_dim = static_cast<int>(latent_dim);
    ds.embed_dim = static_cast<int>(embed_dim);
    ds.k_views = static_cast<int>(k);
    ds.normalized = normalized != 0;
    ds.identities.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
        auto& id = ds.identities[i];
        id.identity_id = static_cast<int>(i);
        id.w0.resize(latent_dim);
        for (auto& v : id.w0) v = read_f32(in);
        id.views.resize(k);
        for (auto& view : id.views) {
            view.pose.yaw_deg = read_f32(in);
            view.pose.pitch_deg = read_f32(in);
            view.embedding.values.resize(embed_dim);
            for (auto& v : view.embedding.values) v = read_f32(in);
            view.embedding.source = CondSource::ImageView;
        }
    }
    if (!in) {
        throw_io("load_dataset: truncated file '" + path + "'");
    }
    ds.validate();
    return ds;
}

CondEmbedding pseudo_text_augment(const CondEmbedding& e_img, double xi, Rng& rng) {
    if (xi < 0.0) {
        throw_invalid("xi: must be >= 0");
    }
    const double norm = l2_norm(e_img.values);
    if (norm == 0.0) {
        throw_invalid("pseudo_text_augment: zero-norm embedding");
    }
    Vec eta = rng.gaussian_vector(e_img.values.size());
    const double eta_norm = l2_norm(eta);
    Vec out(e_img.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = e_img.values[i] + xi * norm * (eta[i] / eta_norm);
    }
    return {normalized(std::move(out)), CondSource::PseudoText};
}

CondEmbedding pseudo_text_augment(const CondEmbedding& e_img, double xi, uint64_t seed) {
    Rng rng(seed);
    return pseudo_text_augment(e_img, xi, rng);
}

TrainingBatch make_batch(const Dataset& ds, int n_identities, int k,
                         const NoiseSchedule& sched, Rng& rng,
                         const BatchOptions& opts) {
    const int available = static_cast<int>(ds.identities.size());
    if (n_identities < 1) {
        throw_invalid("n_identities: must be >= 1");
    }
    if (n_identities > available) {
        throw_invalid("make_batch: dataset holds " + std::to_string(available) +
                      " identities, need " + std::to_string(n_identities));
    }
    if (k < 1 || k > ds.k_views) {
        throw_invalid("make_batch: dataset provides " + std::to_string(ds.k_views) +
                      " views per identity, need " + std::to_string(k));
    }

    // Partial Fisher-Yates for identities without replacement.
    std::vector<int> order(available);
    for (int i = 0; i < available; ++i) order[i] = i;
    for (int i = 0; i < n_identities; ++i) {
        const int j = static_cast<int>(rng.uniform_int(i, available - 1));
        std::swap(order[i], order[j]);
    }

    TrainingBatch batch;
    batch.k = k;
    batch.identities.resize(n_identities);
    for (int slot = 0; slot < n_identities; ++slot) {
        const auto& src = ds.identities[order[slot]];
        auto& bi = batch.identities[slot];
        bi.dataset_index = order[slot];
        bi.t = static_cast<int>(rng.uniform_int(1, sched.timesteps()));
        bi.eps = rng.gaussian_vector(src.w0.size());
        bi.w0 = src.w0;
        bi.wt = q_sample(src.w0, bi.t, bi.eps, sched);

        std::vector<int> vorder(ds.k_views);
        for (int i = 0; i < ds.k_views; ++i) vorder[i] = i;
        for (int i = 0; i < k; ++i) {
            const int j = static_cast<int>(rng.uniform_int(i, ds.k_views - 1));
            std::swap(vorder[i], vorder[j]);
        }
        for (int v = 0; v < k; ++v) {
            BatchView view;
            view.identity_slot = slot;
            view.view_index = vorder[v];
            view.embedding = src.views[vorder[v]].embedding;
            if (opts.pseudo_text_fraction > 0.0 &&
                rng.bernoulli(opts.pseudo_text_fraction)) {
                view.embedding =
                    pseudo_text_augment(view.embedding, opts.pseudo_text_xi, rng);
            }
            batch.views.push_back(std::move(view));
        }
    }
    return batch;
}

}  // namespace clp

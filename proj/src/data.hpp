// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rng.hpp"
#include "schedule.hpp"
#include "vec.hpp"

namespace clp {

enum class CondSource : uint8_t { ImageView = 0, PseudoText = 1, Text = 2 };

struct CondEmbedding {
    Vec values;
    CondSource source = CondSource::ImageView;
};

struct CameraPose {
    double yaw_deg = 0.0;
    double pitch_deg = 0.0;
};

// Encoder/generator stack behind the training data. Real pretrained backends
// implement this interface out of tree; the synthetic world below stands in
// at desk scale. `render` must be deterministic for fixed (w, p) and
// `encode_image` must map identical images to identical embeddings.
class BackendAdapter {
public:
    using Image = Vec;

    virtual ~BackendAdapter() = default;

    virtual int latent_dim() const = 0;
    virtual int embed_dim() const = 0;
    virtual std::pair<double, double> yaw_range_deg() const = 0;
    virtual bool normalizes() const { return true; }

    virtual Image render(const Vec& w, const CameraPose& p) const = 0;
    virtual CondEmbedding encode_image(const Image& img) const = 0;
    virtual CondEmbedding embed_text(const std::string& prompt) const = 0;

    CondEmbedding embed_view(const Vec& w, const CameraPose& p) const {
        return encode_image(render(w, p));
    }
};

// Fixed seeded nonlinear map from (latent, pose) to a unit embedding:
//   g(w, p) = normalize(A tanh(B w) + C phi(p) + view noise)
// with A, B, C drawn once from the seed and phi a trigonometric pose
// featurization. The per-view noise is a pure function of (seed, w, p), so g
// is deterministic and identical seeds give identical worlds.
class SyntheticBackend final : public BackendAdapter {
public:
    SyntheticBackend(uint64_t seed, int latent_dim, int embed_dim,
                     double view_noise = 0.05);

    int latent_dim() const override { return latent_dim_; }
    int embed_dim() const override { return embed_dim_; }
    std::pair<double, double> yaw_range_deg() const override { return {-45.0, 45.0}; }

    Image render(const Vec& w, const CameraPose& p) const override;
    CondEmbedding encode_image(const Image& img) const override;
    // Deterministic hash-based stand-in so the text path can be exercised
    // without a real text encoder; not a semantic embedding.
    CondEmbedding embed_text(const std::string& prompt) const override;

    uint64_t seed() const { return seed_; }
    double view_noise() const { return view_noise_; }

    // Latents of this world are standard Gaussian.
    Vec sample_latent(Rng& rng) const { return rng.gaussian_vector(latent_dim_); }

    static Vec pose_features(const CameraPose& p);

private:
    uint64_t seed_;
    int latent_dim_;
    int embed_dim_;
    double view_noise_;
    std::vector<Vec> map_a_;  // embed_dim x embed_dim
    std::vector<Vec> map_b_;  // embed_dim x latent_dim
    std::vector<Vec> map_c_;  // embed_dim x pose feature dim
};

std::unique_ptr<SyntheticBackend> synth_world(uint64_t seed, int latent_dim,
                                              int embed_dim,
                                              double view_noise = 0.05);

// Placeholder for pretrained encoder/generator stacks; every call reports
// that integration mode is required rather than silently skipping.
class ExternalBackendStub final : public BackendAdapter {
public:
    explicit ExternalBackendStub(std::string name) : name_(std::move(name)) {}

    int latent_dim() const override;
    int embed_dim() const override;
    std::pair<double, double> yaw_range_deg() const override;
    Image render(const Vec&, const CameraPose&) const override;
    CondEmbedding encode_image(const Image&) const override;
    CondEmbedding embed_text(const std::string&) const override;

private:
    [[noreturn]] void unavailable(const char* op) const;
    std::string name_;
};

struct ViewRecord {
    CameraPose pose;
    CondEmbedding embedding;
};

struct IdentitySample {
    int identity_id = 0;
    Vec w0;
    std::vector<ViewRecord> views;
};

struct Dataset {
    int latent_dim = 0;
    int embed_dim = 0;
    int k_views = 0;
    uint64_t seed = 0;
    bool normalized = true;
    std::string descriptor;
    std::vector<IdentitySample> identities;

    void validate() const;
};

struct GenOptions {
    int n_identities = 64;
    int k_views = 8;
    uint64_t seed = 0;
    double pitch_deg = 0.0;  // pose sampling mirrors face backends: yaw only
    std::string descriptor;
};

// Deterministic per (seed, identity index): each identity derives its own
// stream, so fanning generation out across identities cannot change the
// result. All stored values are rounded to f32 so the in-memory dataset is
// bit-identical with a save/load round trip.
Dataset generate_dataset(const BackendAdapter& backend, const GenOptions& opts);

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// Image embedding perturbed on the unit sphere to stand in for a paired text
// embedding: normalize(e + xi * |e| * unit_gaussian).
CondEmbedding pseudo_text_augment(const CondEmbedding& e_img, double xi, Rng& rng);
CondEmbedding pseudo_text_augment(const CondEmbedding& e_img, double xi, uint64_t seed);

struct BatchView {
    int identity_slot = 0;  // index into TrainingBatch::identities
    int view_index = 0;     // view index within the source identity
    CondEmbedding embedding;
    bool cond_dropped = false;  // set by the trainer
};

struct BatchIdentity {
    int dataset_index = 0;
    int t = 0;
    Vec eps;
    Vec wt;  // q_sample(w0, t, eps); shared by all views of the identity
    Vec w0;
};

struct TrainingBatch {
    std::vector<BatchIdentity> identities;
    std::vector<BatchView> views;
    int k = 0;
};

struct BatchOptions {
    double pseudo_text_fraction = 0.0;
    double pseudo_text_xi = 0.1;
};

// Samples identities without replacement and one (eps, t) pair per identity
// (t uniform on [1, T]); all views of an identity share the same noised
// latent.
TrainingBatch make_batch(const Dataset& ds, int n_identities, int k,
                         const NoiseSchedule& sched, Rng& rng,
                         const BatchOptions& opts = {});

}  // namespace clp

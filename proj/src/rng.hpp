// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace clp {

// splitmix64 finalizer; used to derive well-separated child seeds.
uint64_t splitmix64(uint64_t x);

// Child seed for stream `stream` of a base seed. Pure function, so parallel
// and serial consumers of the same (base, stream) see identical sequences.
uint64_t derive_seed(uint64_t base, uint64_t stream);

// Deterministic random source. Every draw is defined purely in terms of the
// mt19937_64 output sequence (no distribution objects with hidden state), so
// the full state serializes to a string and replays bit-for-bit.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : engine_(seed) {}

    static Rng derived(uint64_t base, uint64_t stream) {
        return Rng(derive_seed(base, stream));
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform();

    double uniform(double lo, double hi);

    // Uniform integer in [lo, hi], inclusive. Rejection sampled, no modulo bias.
    int64_t uniform_int(int64_t lo, int64_t hi);

    // Standard normal via Box-Muller. Always consumes exactly two uniforms.
    double gaussian();

    std::vector<double> gaussian_vector(std::size_t n);

    bool bernoulli(double p);

    std::string save_state() const;
    void restore_state(const std::string& state);

private:
    std::mt19937_64 engine_;
};

}  // namespace clp

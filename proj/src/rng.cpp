// SPDX-License-Identifier: Apache-2.0
#include "rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "errors.hpp"

namespace clp {

uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t base, uint64_t stream) {
    return splitmix64(splitmix64(base) ^ (stream + 1));
}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
    if (lo > hi) {
        throw_invalid("uniform_int: empty range [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
    }
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    if (span == 0) {  // full 64-bit range
        return static_cast<int64_t>(engine_());
    }
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t draw;
    do {
        draw = engine_();
    } while (draw >= limit);
    return lo + static_cast<int64_t>(draw % span);
}

double Rng::gaussian() {
    // u1 in (0, 1] so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> Rng::gaussian_vector(std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) {
        v = gaussian();
    }
    return out;
}

bool Rng::bernoulli(double p) {
    return uniform() < p;
}

std::string Rng::save_state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::restore_state(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
    if (is.fail()) {
        throw_invalid("rng: malformed serialized state");
    }
}

}  // namespace clp

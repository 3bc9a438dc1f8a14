// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vec.hpp"

namespace clp {

// FNV-1a over a byte range; used for content hashes of reports and files.
uint64_t fnv1a(std::span<const unsigned char> bytes);
uint64_t fnv1a(const std::string& s);
std::string to_hex(uint64_t v);

uint64_t hash_file(const std::string& path);

// Canonical text form of a JSON value: object keys sorted, doubles printed
// with "%.17g" so the serialization is a pure function of the values.
std::string canonical_json(const nlohmann::json& j);
std::string content_hash(const nlohmann::json& j);

// Round to the nearest 32-bit float; file formats store f32 and in-memory
// data is kept bit-identical with what a reload would produce.
double round_f32(double v);

// Flat vector container with a small header (count, dim, seed, guidance
// scale) and 32-bit-float records; carries the effective configuration as an
// embedded metadata string for provenance.
struct VecFile {
    uint32_t dim = 0;
    uint32_t count = 0;
    uint64_t seed = 0;
    double guidance_scale = 0.0;
    std::string meta;
    std::vector<Vec> rows;
};

void write_vecfile(const std::string& path, const VecFile& f);
VecFile read_vecfile(const std::string& path);

}  // namespace clp

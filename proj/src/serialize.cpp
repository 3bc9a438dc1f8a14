// SPDX-License-Identifier: Apache-2.0
#include "serialize.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "errors.hpp"

namespace clp {

namespace {

constexpr uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr uint64_t kFnvPrime = 1099511628211ULL;

void format_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

void canonical_dump(const nlohmann::json& j, std::string& out) {
    using value_t = nlohmann::json::value_t;
    switch (j.type()) {
        case value_t::object: {
            out += '{';
            bool first = true;
            // nlohmann objects iterate in key order already
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ',';
                first = false;
                out += nlohmann::json(it.key()).dump();
                out += ':';
                canonical_dump(it.value(), out);
            }
            out += '}';
            break;
        }
        case value_t::array: {
            out += '[';
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ',';
                canonical_dump(j[i], out);
            }
            out += ']';
            break;
        }
        case value_t::number_float:
            format_double(out, j.get<double>());
            break;
        default:
            out += j.dump();
            break;
    }
}

}  // namespace

uint64_t fnv1a(std::span<const unsigned char> bytes) {
    uint64_t h = kFnvOffset;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= kFnvPrime;
    }
    return h;
}

uint64_t fnv1a(const std::string& s) {
    return fnv1a(std::span<const unsigned char>(
        reinterpret_cast<const unsigned char*>(s.data()), s.size()));
}

std::string to_hex(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw_io("hash_file: cannot open '" + path + "'");
    }
    uint64_t h = kFnvOffset;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= kFnvPrime;
        }
    }
    return h;
}

std::string canonical_json(const nlohmann::json& j) {
    std::string out;
    canonical_dump(j, out);
    return out;
}

std::string content_hash(const nlohmann::json& j) {
    return to_hex(fnv1a(canonical_json(j)));
}

double round_f32(double v) {
    return static_cast<double>(static_cast<float>(v));
}

namespace {

constexpr char kVecMagic[8] = {'C', 'L', 'P', 'V', 'E', 'C', 'S', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void write_vecfile(const std::string& path, const VecFile& f) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw_io("write_vecfile: cannot open '" + path + "' for writing");
    }
    out.write(kVecMagic, sizeof(kVecMagic));
    const uint32_t version = 1;
    write_pod(out, version);
    write_pod(out, f.dim);
    write_pod(out, f.count);
    write_pod(out, f.seed);
    write_pod(out, f.guidance_scale);
    const uint32_t meta_len = static_cast<uint32_t>(f.meta.size());
    write_pod(out, meta_len);
    out.write(f.meta.data(), meta_len);
    if (f.rows.size() != f.count) {
        throw_invalid("write_vecfile: count does not match rows");
    }
    for (const auto& row : f.rows) {
        require_same_dim(row.size(), f.dim, "write_vecfile: row");
        for (double v : row) {
            const float fv = static_cast<float>(v);
            write_pod(out, fv);
        }
    }
    if (!out) {
        throw_io("write_vecfile: write failed for '" + path + "'");
    }
}

VecFile read_vecfile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw_io("read_vecfile: cannot open '" + path + "'");
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kVecMagic, sizeof(magic)) != 0) {
        throw_io("read_vecfile: '" + path + "' is not a vector file");
    }
    uint32_t version = 0;
    read_pod(in, version);
    if (version != 1) {
        throw_unsupported("read_vecfile: unsupported format version " +
                          std::to_string(version) + " (this build reads version 1)");
    }
    VecFile f;
    read_pod(in, f.dim);
    read_pod(in, f.count);
    read_pod(in, f.seed);
    read_pod(in, f.guidance_scale);
    uint32_t meta_len = 0;
    read_pod(in, meta_len);
    f.meta.resize(meta_len);
    in.read(f.meta.data(), meta_len);
    f.rows.assign(f.count, Vec(f.dim));
    for (auto& row : f.rows) {
        for (auto& v : row) {
            float fv = 0.0f;
            read_pod(in, fv);
            v = static_cast<double>(fv);
        }
    }
    if (!in) {
        throw_io("read_vecfile: truncated file '" + path + "'");
    }
    return f;
}

}  // namespace clp

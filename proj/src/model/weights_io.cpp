// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

// Weight file layout (all integers little-endian):
//   magic "CEIW" | u32 version | u32 vocab | u32 dim | u32 layers | u32 heads
//   | u32 max_seq | f64 norm_epsilon | u64 seed | u64 param_count | u64 hash
//   | param_count x f32 payload in canonical tensor order

#include "cei/error.hpp"
#include "cei/model.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace cei {
namespace {

constexpr std::array<char, 4> kMagic = {'C', 'E', 'I', 'W'};
constexpr std::size_t kHeaderSize = 4 + 4 * 6 + 8 * 4;
constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, unsigned char byte) {
    h ^= byte;
    h *= kFnvPrime;
}

template <class T>
void put_le(std::string& out, T value) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    const U bits = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <class T>
T get_le(const unsigned char* p) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(p[i]) << (8 * i);
    return std::bit_cast<T>(bits);
}

void append_payload(const DecoderWeights& weights, std::string& out) {
    weights.for_each_tensor([&](std::string_view, const double* data, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) put_le(out, static_cast<float>(data[i]));
    });
}

std::uint64_t fnv1a(const unsigned char* data, std::size_t n) {
    std::uint64_t h = kFnvOffset;
    for (std::size_t i = 0; i < n; ++i) fnv_mix(h, data[i]);
    return h;
}

}  // namespace

std::uint64_t DecoderWeights::content_hash() const {
    std::string payload;
    payload.reserve(parameter_count() * 4);
    append_payload(*this, payload);
    return fnv1a(reinterpret_cast<const unsigned char*>(payload.data()), payload.size());
}

void save_weights(const DecoderWeights& weights, const std::filesystem::path& destination) {
    const ModelConfig& c = weights.config;
    std::string payload;
    payload.reserve(weights.parameter_count() * 4);
    append_payload(weights, payload);

    std::string out(kMagic.begin(), kMagic.end());
    put_le(out, kWeightFileVersion);
    put_le(out, static_cast<std::uint32_t>(c.vocab_size));
    put_le(out, static_cast<std::uint32_t>(c.dim));
    put_le(out, static_cast<std::uint32_t>(c.num_layers));
    put_le(out, static_cast<std::uint32_t>(c.num_heads));
    put_le(out, static_cast<std::uint32_t>(c.max_seq));
    put_le(out, c.norm_epsilon);
    put_le(out, c.seed);
    put_le(out, static_cast<std::uint64_t>(weights.parameter_count()));
    put_le(out, fnv1a(reinterpret_cast<const unsigned char*>(payload.data()), payload.size()));
    out += payload;

    std::error_code ec;
    if (destination.has_parent_path()) {
        std::filesystem::create_directories(destination.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + destination.parent_path().string() + ": " + ec.message());
    }
    const auto tmp = std::filesystem::path(destination.string() + ".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw IoError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, destination, ec);
    if (ec) throw IoError("cannot move weights into place at " + destination.string() + ": " + ec.message());
}

DecoderWeights load_weights(const std::filesystem::path& source) {
    std::ifstream f(source, std::ios::binary);
    if (!f) throw IoError("cannot open weight file " + source.string());
    const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());

    if (bytes.size() < kHeaderSize) throw FormatError("weight file is truncated (header)");
    if (std::memcmp(p, kMagic.data(), kMagic.size()) != 0) throw FormatError("not a weight file (bad magic)");
    const auto version = get_le<std::uint32_t>(p + 4);
    if (version != kWeightFileVersion) {
        throw FormatError("unsupported weight file version " + std::to_string(version));
    }
    ModelConfig c;
    c.vocab_size = static_cast<int>(get_le<std::uint32_t>(p + 8));
    c.dim = static_cast<int>(get_le<std::uint32_t>(p + 12));
    c.num_layers = static_cast<int>(get_le<std::uint32_t>(p + 16));
    c.num_heads = static_cast<int>(get_le<std::uint32_t>(p + 20));
    c.max_seq = static_cast<int>(get_le<std::uint32_t>(p + 24));
    c.norm_epsilon = get_le<double>(p + 28);
    c.seed = get_le<std::uint64_t>(p + 36);
    const auto param_count = get_le<std::uint64_t>(p + 44);
    const auto stored_hash = get_le<std::uint64_t>(p + 52);

    DecoderWeights w;
    try {
        w = make_zero_weights(c);
    } catch (const ConfigError& e) {
        throw FormatError(std::string("weight file header holds an invalid config: ") + e.what());
    }
    if (param_count != w.parameter_count()) throw FormatError("parameter count does not match the config");
    const std::size_t payload_size = static_cast<std::size_t>(param_count) * 4;
    if (bytes.size() < kHeaderSize + payload_size) throw FormatError("weight file is truncated (payload)");
    if (bytes.size() > kHeaderSize + payload_size) throw FormatError("trailing bytes after weight payload");

    const unsigned char* payload = p + kHeaderSize;
    if (fnv1a(payload, payload_size) != stored_hash) throw FormatError("weight file hash mismatch");

    std::size_t offset = 0;
    w.for_each_tensor([&](std::string_view, double* data, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i, offset += 4) data[i] = get_le<float>(payload + offset);
    });
    bool finite = true;
    w.for_each_tensor([&](std::string_view, const double* data, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) finite = finite && std::isfinite(data[i]);
    });
    if (!finite) throw FormatError("weight file holds non-finite parameters");
    return w;
}

}  // namespace cei

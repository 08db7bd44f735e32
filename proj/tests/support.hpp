// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cei/model.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace cei::test {

using Rows = std::vector<std::vector<double>>;

inline ModelConfig tiny_config(int vocab, int dim, int layers, int heads, std::uint64_t seed, int max_seq = 64) {
    ModelConfig c;
    c.vocab_size = vocab;
    c.dim = dim;
    c.num_layers = layers;
    c.num_heads = heads;
    c.max_seq = max_seq;
    c.seed = seed;
    return c;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
}

inline std::vector<TokenId> random_tokens(std::size_t n, int vocab, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, vocab - 1);
    std::vector<TokenId> out(n);
    for (auto& t : out) t = pick(rng);
    return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("cei_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Loop-based reference decoder written without Eigen expressions. Shares no
// code with the library; used as an oracle for the forward pass.
namespace naive {

inline double at(const Matrix& m, Eigen::Index r, Eigen::Index c) { return m.data()[r * m.cols() + c]; }

inline std::vector<double> rms(const std::vector<double>& x, const Vector& g, double eps) {
    double ss = 0.0;
    for (double v : x) ss += v * v;
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.size()) + eps);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * inv * g[static_cast<Eigen::Index>(i)];
    return out;
}

inline std::vector<double> matvec(const std::vector<double>& x, const Matrix& w) {
    std::vector<double> out(static_cast<std::size_t>(w.cols()), 0.0);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) out[static_cast<std::size_t>(j)] += x[static_cast<std::size_t>(i)] * at(w, i, j);
    }
    return out;
}

inline void rotate(std::vector<double>& v, int head_dim, int pos) {
    for (std::size_t h0 = 0; h0 < v.size(); h0 += static_cast<std::size_t>(head_dim)) {
        for (int i = 0; i < head_dim / 2; ++i) {
            const double theta = pos / std::pow(10000.0, 2.0 * i / head_dim);
            const double a = v[h0 + 2 * i];
            const double b = v[h0 + 2 * i + 1];
            v[h0 + 2 * i] = a * std::cos(theta) - b * std::sin(theta);
            v[h0 + 2 * i + 1] = a * std::sin(theta) + b * std::cos(theta);
        }
    }
}

inline double gelu(double x) {
    const double pi = 3.14159265358979323846;
    return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / pi) * (x + 0.044715 * x * x * x)));
}

/// Hidden states [layer][position][dim] for the full input sequence.
inline std::vector<Rows> forward(const DecoderWeights& w, const Rows& inputs) {
    const auto& cfg = w.config;
    const int d = cfg.dim;
    const int hd = d / cfg.num_heads;
    const std::size_t T = inputs.size();
    Rows x = inputs;
    std::vector<Rows> hidden;
    for (const auto& lw : w.layers) {
        Rows q(T), k(T), v(T);
        for (std::size_t t = 0; t < T; ++t) {
            const auto a = rms(x[t], lw.attn_norm, cfg.norm_epsilon);
            q[t] = matvec(a, lw.wq);
            k[t] = matvec(a, lw.wk);
            v[t] = matvec(a, lw.wv);
            rotate(q[t], hd, static_cast<int>(t));
            rotate(k[t], hd, static_cast<int>(t));
        }
        for (std::size_t t = 0; t < T; ++t) {
            std::vector<double> concat(static_cast<std::size_t>(d), 0.0);
            for (int h = 0; h < cfg.num_heads; ++h) {
                std::vector<double> s(t + 1);
                double peak = -1e300;
                for (std::size_t j = 0; j <= t; ++j) {
                    double dotp = 0.0;
                    for (int i = 0; i < hd; ++i) dotp += q[t][h * hd + i] * k[j][h * hd + i];
                    s[j] = dotp / std::sqrt(static_cast<double>(hd));
                    peak = std::max(peak, s[j]);
                }
                double z = 0.0;
                for (auto& e : s) z += (e = std::exp(e - peak));
                for (std::size_t j = 0; j <= t; ++j) {
                    for (int i = 0; i < hd; ++i) concat[h * hd + i] += s[j] / z * v[j][h * hd + i];
                }
            }
            const auto o = matvec(concat, lw.wo);
            for (int i = 0; i < d; ++i) x[t][i] += o[i];
            auto up = matvec(rms(x[t], lw.ffn_norm, cfg.norm_epsilon), lw.w_up);
            for (auto& u : up) u = gelu(u);
            const auto down = matvec(up, lw.w_down);
            for (int i = 0; i < d; ++i) x[t][i] += down[i];
        }
        hidden.push_back(x);
    }
    return hidden;
}

inline std::vector<double> logits(const DecoderWeights& w, const std::vector<double>& h) {
    const auto n = rms(h, w.final_norm, w.config.norm_epsilon);
    std::vector<double> out(static_cast<std::size_t>(w.config.vocab_size), 0.0);
    for (int t = 0; t < w.config.vocab_size; ++t) {
        for (int i = 0; i < w.config.dim; ++i) out[t] += n[i] * at(w.embedding, t, i);
    }
    return out;
}

inline std::vector<double> softmax(const std::vector<double>& z) {
    double peak = z[0];
    for (double v : z) peak = std::max(peak, v);
    std::vector<double> p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) sum += (p[i] = std::exp(z[i] - peak));
    for (auto& v : p) v /= sum;
    return p;
}

inline Rows inputs_of(const DecoderWeights& w, const Matrix& prefix, const std::vector<TokenId>& tokens) {
    Rows rows;
    for (Eigen::Index r = 0; r < prefix.rows(); ++r) {
        rows.emplace_back(prefix.row(r).data(), prefix.row(r).data() + prefix.cols());
    }
    for (TokenId t : tokens) {
        std::vector<double> e(static_cast<std::size_t>(w.config.dim));
        for (int i = 0; i < w.config.dim; ++i) e[i] = at(w.embedding, t, i);
        rows.push_back(e);
    }
    return rows;
}

}  // namespace naive
}  // namespace cei::test

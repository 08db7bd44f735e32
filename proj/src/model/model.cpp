// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/model.hpp"

#include "cei/error.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace cei {

void ModelConfig::validate() const {
    if (vocab_size <= 0 || dim <= 0 || num_layers <= 0 || num_heads <= 0) {
        throw ConfigError("model dimensions must be positive");
    }
    if (dim % num_heads != 0) {
        throw ConfigError("dim " + std::to_string(dim) + " is not divisible by num_heads " +
                          std::to_string(num_heads));
    }
    if (head_dim() % 2 != 0) throw ConfigError("rotary encoding needs an even head width");
    if (max_seq < 2) throw ConfigError("max_seq must be at least 2");
    if (!(norm_epsilon > 0.0) || !std::isfinite(norm_epsilon)) {
        throw ConfigError("norm_epsilon must be a positive finite number");
    }
}

void KvCache::truncate(int positions) {
    for (auto& k : keys) k.resize(static_cast<std::size_t>(positions));
    for (auto& v : values) v.resize(static_cast<std::size_t>(positions));
}

DecoderWeights make_zero_weights(const ModelConfig& config) {
    config.validate();
    const int d = config.dim;
    DecoderWeights w;
    w.config = config;
    w.embedding = Matrix::Zero(config.vocab_size, d);
    w.layers.resize(static_cast<std::size_t>(config.num_layers));
    for (auto& layer : w.layers) {
        layer.wq = Matrix::Zero(d, d);
        layer.wk = Matrix::Zero(d, d);
        layer.wv = Matrix::Zero(d, d);
        layer.wo = Matrix::Zero(d, d);
        layer.w_up = Matrix::Zero(d, config.ffn_dim());
        layer.w_down = Matrix::Zero(config.ffn_dim(), d);
        layer.attn_norm = Vector::Ones(d);
        layer.ffn_norm = Vector::Ones(d);
    }
    w.final_norm = Vector::Ones(d);
    return w;
}

DecoderWeights init_random(const ModelConfig& config) {
    DecoderWeights w = make_zero_weights(config);
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(config.dim)));
    w.for_each_tensor([&](std::string_view name, double* data, Eigen::Index n) {
        if (name.ends_with("norm")) return;
        for (Eigen::Index i = 0; i < n; ++i) data[i] = normal(rng);
    });
    round_to_storage_precision(w);
    return w;
}

void round_to_storage_precision(DecoderWeights& weights) {
    weights.for_each_tensor([](std::string_view, double* data, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) data[i] = static_cast<double>(static_cast<float>(data[i]));
    });
}

std::size_t DecoderWeights::parameter_count() const {
    std::size_t total = 0;
    for_each_tensor([&](std::string_view, const double*, Eigen::Index n) { total += static_cast<std::size_t>(n); });
    return total;
}

RowVector embed_token(const DecoderWeights& weights, TokenId id) {
    if (id < 0 || id >= weights.config.vocab_size) {
        throw InputError("token id " + std::to_string(id) + " outside vocabulary of size " +
                         std::to_string(weights.config.vocab_size));
    }
    return weights.embedding.row(id);
}

Matrix build_inputs(const DecoderWeights& weights, const Matrix& prefix, std::span<const TokenId> token_ids) {
    const int d = weights.config.dim;
    if (prefix.rows() > 0 && prefix.cols() != d) {
        throw InputError("prefix embeddings have width " + std::to_string(prefix.cols()) + ", expected " +
                         std::to_string(d));
    }
    Matrix x(prefix.rows() + static_cast<Eigen::Index>(token_ids.size()), d);
    if (prefix.rows() > 0) x.topRows(prefix.rows()) = prefix;
    for (std::size_t i = 0; i < token_ids.size(); ++i) {
        x.row(prefix.rows() + static_cast<Eigen::Index>(i)) = embed_token(weights, token_ids[i]);
    }
    return x;
}

namespace detail {

SequenceActivations forward_sequence(const DecoderWeights& weights, const Matrix& inputs, bool compute_logits) {
    const ModelConfig& cfg = weights.config;
    const int d = cfg.dim;
    const int hd = cfg.head_dim();
    const Eigen::Index T = inputs.rows();
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    SequenceActivations acts;
    acts.layers.resize(weights.layers.size());
    Matrix x = inputs;
    for (std::size_t l = 0; l < weights.layers.size(); ++l) {
        const LayerWeights& lw = weights.layers[l];
        LayerActivations& a = acts.layers[l];
        a.input = x;
        a.attn_in = ops::rms_norm_rows(x, lw.attn_norm, cfg.norm_epsilon, &a.attn_inv_rms);
        a.q = a.attn_in * lw.wq;
        a.k = a.attn_in * lw.wk;
        a.v = a.attn_in * lw.wv;
        for (Eigen::Index t = 0; t < T; ++t) {
            ops::rope_in_place(a.q.row(t).data(), d, hd, static_cast<int>(t));
            ops::rope_in_place(a.k.row(t).data(), d, hd, static_cast<int>(t));
        }
        a.attn_out = Matrix::Zero(T, d);
        a.probs.resize(static_cast<std::size_t>(cfg.num_heads));
        for (int h = 0; h < cfg.num_heads; ++h) {
            const auto qh = a.q.middleCols(h * hd, hd);
            const auto kh = a.k.middleCols(h * hd, hd);
            Matrix scores = (qh * kh.transpose()) * scale;
            Matrix& p = a.probs[static_cast<std::size_t>(h)];
            p = Matrix::Zero(T, T);
            for (Eigen::Index i = 0; i < T; ++i) {
                const Vector row = scores.row(i).head(i + 1).transpose();
                p.row(i).head(i + 1) = softmax(row).transpose();
            }
            a.attn_out.middleCols(h * hd, hd) = p * a.v.middleCols(h * hd, hd);
        }
        a.mid = x + a.attn_out * lw.wo;
        a.ffn_in = ops::rms_norm_rows(a.mid, lw.ffn_norm, cfg.norm_epsilon, &a.ffn_inv_rms);
        a.up = a.ffn_in * lw.w_up;
        a.act = a.up.unaryExpr([](double v) { return ops::gelu(v); });
        a.output = a.mid + a.act * lw.w_down;
        x = a.output;
    }
    acts.final_normed = ops::rms_norm_rows(x, weights.final_norm, cfg.norm_epsilon, &acts.final_inv_rms);
    if (compute_logits) acts.logits = acts.final_normed * weights.embedding.transpose();
    return acts;
}

}  // namespace detail

namespace {

void check_tokens(const DecoderWeights& weights, std::span<const TokenId> token_ids) {
    for (TokenId id : token_ids) {
        if (id < 0 || id >= weights.config.vocab_size) {
            throw InputError("token id " + std::to_string(id) + " outside vocabulary of size " +
                             std::to_string(weights.config.vocab_size));
        }
    }
}

}  // namespace

std::pair<LayerTrace, SequenceState> forward_full(const DecoderWeights& weights, const Matrix& prefix,
                                                  std::span<const TokenId> token_ids) {
    check_tokens(weights, token_ids);
    const auto total = prefix.rows() + static_cast<Eigen::Index>(token_ids.size());
    if (total == 0) throw InputError("forward_full needs at least one position");
    if (total > weights.config.max_seq) {
        throw CapacityError("sequence of " + std::to_string(total) + " positions exceeds max_seq " +
                            std::to_string(weights.config.max_seq));
    }
    const Matrix inputs = build_inputs(weights, prefix, token_ids);
    const auto acts = detail::forward_sequence(weights, inputs, false);

    LayerTrace trace;
    trace.position = static_cast<int>(total - 1);
    SequenceState state;
    state.prefix_embeddings = prefix;
    state.prompt_token_ids.assign(token_ids.begin(), token_ids.end());
    state.cache = KvCache(weights.config.num_layers);
    for (std::size_t l = 0; l < acts.layers.size(); ++l) {
        const auto& a = acts.layers[l];
        trace.hidden_by_layer.push_back(a.output.row(total - 1).transpose());
        for (Eigen::Index t = 0; t < total; ++t) {
            state.cache.keys[l].push_back(a.k.row(t));
            state.cache.values[l].push_back(a.v.row(t));
        }
    }
    trace.final_logits = unembed(weights, trace.hidden_by_layer.back());
    return {std::move(trace), std::move(state)};
}

std::vector<Matrix> all_layer_hiddens(const DecoderWeights& weights, const Matrix& prefix,
                                      std::span<const TokenId> token_ids) {
    check_tokens(weights, token_ids);
    const Matrix inputs = build_inputs(weights, prefix, token_ids);
    if (inputs.rows() == 0) throw InputError("all_layer_hiddens needs at least one position");
    if (inputs.rows() > weights.config.max_seq) throw CapacityError("sequence exceeds max_seq");
    auto acts = detail::forward_sequence(weights, inputs, false);
    std::vector<Matrix> out;
    out.reserve(acts.layers.size());
    for (auto& a : acts.layers) out.push_back(std::move(a.output));
    return out;
}

PositionResult compute_position(const DecoderWeights& weights, const KvCache& cache, const RowVector& input,
                                int position, const std::optional<Injection>& injection) {
    const ModelConfig& cfg = weights.config;
    const int d = cfg.dim;
    const int hd = cfg.head_dim();
    if (position >= cfg.max_seq) {
        throw CapacityError("position " + std::to_string(position) + " exceeds max_seq " +
                            std::to_string(cfg.max_seq));
    }
    if (cache.length() != position) throw InputError("cache length does not match the position being computed");
    if (input.size() != d) throw InputError("input row has the wrong width");
    if (injection) {
        if (injection->layer < 1 || injection->layer > cfg.num_layers) {
            throw InputError("injection layer outside [1, L]");
        }
        if (!injection->context || injection->context->size() != d) {
            throw InputError("injection context has the wrong dimension");
        }
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    PositionResult result;
    result.trace.position = position;
    RowVector x = input;
    for (int l = 0; l < cfg.num_layers; ++l) {
        const LayerWeights& lw = weights.layers[static_cast<std::size_t>(l)];
        const RowVector a = ops::rms_norm(x, lw.attn_norm, cfg.norm_epsilon);
        RowVector q = a * lw.wq;
        RowVector k = a * lw.wk;
        RowVector v = a * lw.wv;
        ops::rope_in_place(q.data(), d, hd, position);
        ops::rope_in_place(k.data(), d, hd, position);

        const auto& past_k = cache.keys[static_cast<std::size_t>(l)];
        const auto& past_v = cache.values[static_cast<std::size_t>(l)];
        RowVector attn = RowVector::Zero(d);
        Vector scores(position + 1);
        for (int h = 0; h < cfg.num_heads; ++h) {
            const auto qh = q.segment(h * hd, hd);
            for (int j = 0; j < position; ++j) scores[j] = qh.dot(past_k[static_cast<std::size_t>(j)].segment(h * hd, hd)) * scale;
            scores[position] = qh.dot(k.segment(h * hd, hd)) * scale;
            const Vector p = softmax(scores);
            auto out = attn.segment(h * hd, hd);
            for (int j = 0; j < position; ++j) out += p[j] * past_v[static_cast<std::size_t>(j)].segment(h * hd, hd);
            out += p[position] * v.segment(h * hd, hd);
        }
        x += attn * lw.wo;
        const RowVector b = ops::rms_norm(x, lw.ffn_norm, cfg.norm_epsilon);
        const RowVector up = b * lw.w_up;
        const RowVector act = up.unaryExpr([](double u) { return ops::gelu(u); });
        x += act * lw.w_down;

        if (injection && injection->layer == l + 1) {
            x = ops::convex_blend(x.transpose(), *injection->context, injection->alpha).transpose();
        }
        result.trace.hidden_by_layer.push_back(x.transpose());
        result.keys.push_back(std::move(k));
        result.values.push_back(std::move(v));
    }
    result.trace.final_logits = unembed(weights, result.trace.hidden_by_layer.back());
    return result;
}

void append_position(KvCache& cache, PositionResult&& result) {
    for (std::size_t l = 0; l < cache.keys.size(); ++l) {
        cache.keys[l].push_back(std::move(result.keys[l]));
        cache.values[l].push_back(std::move(result.values[l]));
    }
}

LayerTrace forward_step(const DecoderWeights& weights, SequenceState& state, TokenId new_token_id) {
    const RowVector input = embed_token(weights, new_token_id);
    const int position = state.position_count();
    if (position >= weights.config.max_seq) {
        throw CapacityError("sequence is full (max_seq " + std::to_string(weights.config.max_seq) + ")");
    }
    auto result = compute_position(weights, state.cache, input, position);
    LayerTrace trace = result.trace;
    append_position(state.cache, std::move(result));
    state.generated_token_ids.push_back(new_token_id);
    return trace;
}

Vector unembed(const DecoderWeights& weights, const Vector& hidden) {
    if (hidden.size() != weights.config.dim) throw InputError("hidden vector has the wrong dimension");
    if (!hidden.allFinite()) throw NumericError("hidden state is not finite");
    const RowVector normed = ops::rms_norm(hidden.transpose(), weights.final_norm, weights.config.norm_epsilon);
    return weights.embedding * normed.transpose();
}

TokenId greedy_next(const Vector& logits) {
    if (!logits.allFinite()) throw NumericError("logits are not finite");
    return static_cast<TokenId>(argmax(logits));
}

}  // namespace cei

// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cei/ops.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

namespace cei {

struct ModelConfig {
    int vocab_size = 256;
    int dim = 64;
    int num_layers = 8;
    int num_heads = 4;
    int max_seq = 640;
    double norm_epsilon = 1e-5;
    std::uint64_t seed = 0;

    int head_dim() const { return dim / num_heads; }
    int ffn_dim() const { return 4 * dim; }

    /// Throws ConfigError unless every invariant holds (positive sizes, H | d,
    /// even head width for rotary encoding, max_seq >= 2, eps > 0).
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LayerWeights {
    Matrix wq, wk, wv, wo;  // [d x d]
    Matrix w_up;            // [d x 4d]
    Matrix w_down;          // [4d x d]
    Vector attn_norm;       // [d]
    Vector ffn_norm;        // [d]
};

/// Tied-embedding pre-norm decoder. The embedding matrix doubles as the
/// unembedding (used transposed). Parameters are held in double precision
/// but stay float32-representable so the weight file round-trips exactly.
struct DecoderWeights {
    ModelConfig config;
    Matrix embedding;  // [|V| x d]
    std::vector<LayerWeights> layers;
    Vector final_norm;  // [d]

    /// FNV-1a over the little-endian float32 bytes of every parameter, in
    /// canonical order.
    std::uint64_t content_hash() const;

    std::size_t parameter_count() const;

    /// Visits every parameter tensor in canonical order as (name, data, size).
    template <class Fn>
    void for_each_tensor(Fn&& fn) {
        visit_tensors(*this, fn);
    }
    template <class Fn>
    void for_each_tensor(Fn&& fn) const {
        visit_tensors(*this, fn);
    }

private:
    template <class Self, class Fn>
    static void visit_tensors(Self& self, Fn& fn) {
        fn(std::string_view{"embedding"}, self.embedding.data(), self.embedding.size());
        for (auto& layer : self.layers) {
            fn(std::string_view{"wq"}, layer.wq.data(), layer.wq.size());
            fn(std::string_view{"wk"}, layer.wk.data(), layer.wk.size());
            fn(std::string_view{"wv"}, layer.wv.data(), layer.wv.size());
            fn(std::string_view{"wo"}, layer.wo.data(), layer.wo.size());
            fn(std::string_view{"w_up"}, layer.w_up.data(), layer.w_up.size());
            fn(std::string_view{"w_down"}, layer.w_down.data(), layer.w_down.size());
            fn(std::string_view{"attn_norm"}, layer.attn_norm.data(), layer.attn_norm.size());
            fn(std::string_view{"ffn_norm"}, layer.ffn_norm.data(), layer.ffn_norm.size());
        }
        fn(std::string_view{"final_norm"}, self.final_norm.data(), self.final_norm.size());
    }
};

/// Zero-initialised weights with the shapes implied by config.
DecoderWeights make_zero_weights(const ModelConfig& config);

/// Seeded Gaussian init, std 1/sqrt(d) for matrices, unit norm scales.
DecoderWeights init_random(const ModelConfig& config);

/// Rounds every parameter to float32 precision.
void round_to_storage_precision(DecoderWeights& weights);

/// Per-layer attention cache. Keys are stored after the rotary rotation.
struct KvCache {
    std::vector<std::vector<RowVector>> keys;    // [layer][position]
    std::vector<std::vector<RowVector>> values;  // [layer][position]

    explicit KvCache(int num_layers = 0) : keys(num_layers), values(num_layers) {}
    int length() const { return keys.empty() ? 0 : static_cast<int>(keys.front().size()); }
    void truncate(int positions);
};

struct SequenceState {
    Matrix prefix_embeddings;  // [N_v x d]
    std::vector<TokenId> prompt_token_ids;
    std::vector<TokenId> generated_token_ids;
    KvCache cache;

    int position_count() const {
        return static_cast<int>(prefix_embeddings.rows() + prompt_token_ids.size() +
                                generated_token_ids.size());
    }
};

struct LayerTrace {
    int position = 0;
    std::vector<Vector> hidden_by_layer;  // index l-1 holds the output of layer l
    Vector final_logits;
};

/// Convex blend of the residual stream with a fixed vector, applied to the
/// output of one layer at the position being computed.
struct Injection {
    int layer = 0;  // 1-based
    double alpha = 0.0;
    const Vector* context = nullptr;
};

/// One position evaluated against a cache, with the key/value rows it would
/// append. Nothing is committed until append_position().
struct PositionResult {
    LayerTrace trace;
    std::vector<RowVector> keys;
    std::vector<RowVector> values;
};

/// Batched causal forward over [prefix; embedded tokens]. Returns the trace at
/// the last position and a state whose cache covers every position.
std::pair<LayerTrace, SequenceState> forward_full(const DecoderWeights& weights, const Matrix& prefix,
                                                  std::span<const TokenId> token_ids);

/// One new token against the cache of state. Updates state in place.
LayerTrace forward_step(const DecoderWeights& weights, SequenceState& state, TokenId new_token_id);

/// Incremental evaluation of an arbitrary input row at `position`.
PositionResult compute_position(const DecoderWeights& weights, const KvCache& cache, const RowVector& input,
                                int position, const std::optional<Injection>& injection = std::nullopt);

void append_position(KvCache& cache, PositionResult&& result);

/// Hidden states of every layer at every position, via the batched path.
/// Element [l][t] is the output of layer l+1 at position t.
std::vector<Matrix> all_layer_hiddens(const DecoderWeights& weights, const Matrix& prefix,
                                      std::span<const TokenId> token_ids);

/// final_norm followed by multiplication with the transposed embedding.
Vector unembed(const DecoderWeights& weights, const Vector& hidden);

/// Argmax with lowest-id tie break.
TokenId greedy_next(const Vector& logits);

/// Embedding row for a token (as a row vector). Throws InputError if out of range.
RowVector embed_token(const DecoderWeights& weights, TokenId id);

/// Stacks prefix rows and token embeddings into the decoder input.
Matrix build_inputs(const DecoderWeights& weights, const Matrix& prefix, std::span<const TokenId> token_ids);

void save_weights(const DecoderWeights& weights, const std::filesystem::path& destination);
DecoderWeights load_weights(const std::filesystem::path& source);

/// Current weight file version.
inline constexpr std::uint32_t kWeightFileVersion = 1;

namespace detail {

/// Intermediate activations of the batched forward, kept for backprop.
struct LayerActivations {
    Matrix input;       // [T x d] residual stream entering the layer
    Matrix attn_in;     // normed input
    Vector attn_inv_rms;
    Matrix q, k, v;     // q, k after rotary encoding
    std::vector<Matrix> probs;  // per head [T x T]
    Matrix attn_out;    // concatenated heads before wo
    Matrix mid;         // residual after attention
    Matrix ffn_in;      // normed mid
    Vector ffn_inv_rms;
    Matrix up;          // pre-activation
    Matrix act;         // gelu(up)
    Matrix output;      // residual after ffn
};

struct SequenceActivations {
    std::vector<LayerActivations> layers;
    Matrix final_normed;
    Vector final_inv_rms;
    Matrix logits;  // [T x |V|]
};

SequenceActivations forward_sequence(const DecoderWeights& weights, const Matrix& inputs,
                                     bool compute_logits = true);

}  // namespace detail
}  // namespace cei

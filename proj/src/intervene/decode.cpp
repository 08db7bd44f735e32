// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/error.hpp"
#include "cei/intervene.hpp"

#include <numeric>

namespace cei {

ContextEmbedding extract_context_embedding(const DecoderWeights& weights, const Matrix& prefix,
                                           std::span<const TokenId> prompt_token_ids) {
    if (prefix.rows() + static_cast<Eigen::Index>(prompt_token_ids.size()) == 0) {
        throw InputError("context embedding needs at least one input position");
    }
    const auto [trace, state] = forward_full(weights, prefix, prompt_token_ids);
    return ContextEmbedding{trace.hidden_by_layer.back(), trace.position, weights.content_hash()};
}

Vector blend(const Vector& hidden, const ContextEmbedding& context, double alpha) {
    if (hidden.size() != context.vector.size()) throw InputError("blend dimension mismatch");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("blend weight must lie in [0, 1]");
    return ops::convex_blend(hidden, context.vector, alpha);
}

namespace {

struct BranchRequest {
    int length = 0;
    std::vector<BranchRecord>* out = nullptr;
};

std::vector<TokenId> greedy_branch(const DecoderWeights& weights, KvCache cache, int position,
                                   PositionResult probe, TokenId first, int length,
                                   const std::optional<TokenId>& eos) {
    std::vector<TokenId> tokens{first};
    append_position(cache, std::move(probe));
    ++position;
    while (static_cast<int>(tokens.size()) < length) {
        if (eos && tokens.back() == *eos) break;
        if (position >= weights.config.max_seq) break;
        auto r = compute_position(weights, cache, embed_token(weights, tokens.back()), position);
        tokens.push_back(greedy_next(r.trace.final_logits));
        append_position(cache, std::move(r));
        ++position;
    }
    return tokens;
}

DecodeTrace run_decode(const DecoderWeights& weights, const Matrix& prefix, std::span<const TokenId> prompt,
                       const InjectionPolicy& policy, const DecodeOptions& options, const BranchRequest* branching) {
    policy.validate(weights.config);
    if (options.max_new_tokens < 0) throw InputError("max_new_tokens must be non-negative");
    const Eigen::Index n_inputs = prefix.rows() + static_cast<Eigen::Index>(prompt.size());
    if (n_inputs == 0) throw InputError("decoding needs at least one input position");

    DecodeTrace trace;
    trace.policy = policy;
    trace.provenance.model_hash = weights.content_hash();
    trace.provenance.seed = weights.config.seed;
    if (options.max_new_tokens == 0) {
        // Still reject malformed inputs.
        build_inputs(weights, prefix, prompt);
        return trace;
    }

    auto [first, state] = forward_full(weights, prefix, prompt);
    const ContextEmbedding context{first.hidden_by_layer.back(), first.position, trace.provenance.model_hash};

    // The last input position is recomputed as decoding step 1 so that the
    // first generated token passes through the same (possibly injected) path
    // as every later one.
    KvCache cache = std::move(state.cache);
    int position = static_cast<int>(n_inputs - 1);
    cache.truncate(position);
    RowVector input = prompt.empty() ? RowVector(prefix.row(prefix.rows() - 1)) : embed_token(weights, prompt.back());

    for (int step = 1; step <= options.max_new_tokens; ++step) {
        PositionResult probe = compute_position(weights, cache, input, position);
        StepRecord rec;
        rec.step = step;
        rec.probe_argmax = greedy_next(probe.trace.final_logits);

        switch (policy.mode) {
            case InjectionMode::Off: break;
            case InjectionMode::Static: rec.alpha_used = policy.alpha; break;
            case InjectionMode::Dynamic: {
                const double mass = profile_from_trace(weights, probe.trace, policy.probe_k).mean_mass;
                rec.mean_mass = mass;
                rec.alpha_used = schedule(policy.scheduler, mass, policy.alpha_max, policy.beta);
                break;
            }
        }

        // A zero weight leaves the residual stream untouched, so the probe pass
        // already is the injected pass.
        PositionResult main = rec.alpha_used == 0.0
                                  ? probe
                                  : compute_position(weights, cache, input, position,
                                                     Injection{policy.inject_layer, rec.alpha_used, &context.vector});
        rec.injected_argmax = greedy_next(main.trace.final_logits);
        rec.swapped = rec.probe_argmax != rec.injected_argmax;
        rec.chosen = rec.injected_argmax;

        if (options.observer) options.observer(StepObservation{step, &probe.trace, &main.trace});

        if (branching && rec.swapped) {
            BranchRecord branch;
            branch.branch_step = step;
            branch.baseline_continuation = greedy_branch(weights, cache, position, std::move(probe), rec.probe_argmax,
                                                         branching->length, options.eos_token);
            branching->out->push_back(std::move(branch));
        }

        append_position(cache, std::move(main));
        ++position;
        trace.tokens.push_back(rec.chosen);
        trace.steps.push_back(rec);
        if (options.eos_token && rec.chosen == *options.eos_token) break;
        input = embed_token(weights, rec.chosen);
    }
    return trace;
}

void require_mode(const InjectionPolicy& policy, InjectionMode mode) {
    if (policy.mode != mode) {
        throw InputError("policy mode is " + to_string(policy.mode) + ", expected " + to_string(mode));
    }
}

}  // namespace

DecodeTrace decode_baseline(const DecoderWeights& weights, const Matrix& prefix, std::span<const TokenId> prompt,
                            const DecodeOptions& options) {
    return run_decode(weights, prefix, prompt, InjectionPolicy::off(), options, nullptr);
}

DecodeTrace decode_static(const DecoderWeights& weights, const Matrix& prefix, std::span<const TokenId> prompt,
                          const InjectionPolicy& policy, const DecodeOptions& options) {
    require_mode(policy, InjectionMode::Static);
    return run_decode(weights, prefix, prompt, policy, options, nullptr);
}

DecodeTrace decode_dynamic(const DecoderWeights& weights, const Matrix& prefix, std::span<const TokenId> prompt,
                           const InjectionPolicy& policy, const DecodeOptions& options) {
    require_mode(policy, InjectionMode::Dynamic);
    return run_decode(weights, prefix, prompt, policy, options, nullptr);
}

DecodeTrace decode(const DecoderWeights& weights, const Matrix& prefix, std::span<const TokenId> prompt,
                   const InjectionPolicy& policy, const DecodeOptions& options) {
    return run_decode(weights, prefix, prompt, policy, options, nullptr);
}

BranchedResult branched_decode(const DecoderWeights& weights, const Matrix& prefix, std::span<const TokenId> prompt,
                               const InjectionPolicy& policy, int branch_length, const DecodeOptions& options) {
    if (policy.mode == InjectionMode::Off) throw InputError("branched decoding needs a static or dynamic policy");
    if (branch_length < 1) throw InputError("branch_length must be at least 1");
    BranchedResult result;
    const BranchRequest request{branch_length, &result.branches};
    result.trace = run_decode(weights, prefix, prompt, policy, options, &request);
    for (auto& branch : result.branches) {
        const auto begin = static_cast<std::size_t>(branch.branch_step - 1);
        const auto end = std::min(result.trace.tokens.size(), begin + static_cast<std::size_t>(branch_length));
        branch.main_continuation.assign(result.trace.tokens.begin() + static_cast<std::ptrdiff_t>(begin),
                                        result.trace.tokens.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return result;
}

double mean_effective_alpha(std::span<const DecodeTrace> traces) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& t : traces) {
        for (const auto& s : t.steps) sum += s.alpha_used;
        n += t.steps.size();
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace cei

// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cei/lens.hpp"
#include "cei/model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace cei {

enum class InjectionMode { Off, Static, Dynamic };
enum class SchedulerKind { HalfCosine, Linear };

std::string to_string(InjectionMode mode);
std::string to_string(SchedulerKind kind);
InjectionMode parse_injection_mode(const std::string& text);
SchedulerKind parse_scheduler_kind(const std::string& text);

struct InjectionPolicy {
    InjectionMode mode = InjectionMode::Off;
    double alpha = 0.0;      // static weight
    double alpha_max = 0.0;  // dynamic ceiling
    double beta = 1.0;       // dynamic cutoff on mean top-K mass
    SchedulerKind scheduler = SchedulerKind::HalfCosine;
    int inject_layer = 1;    // 1-based
    int probe_k = 40;

    static InjectionPolicy off();
    static InjectionPolicy fixed(double alpha, int inject_layer);
    static InjectionPolicy scheduled(double alpha_max, double beta, int inject_layer,
                                     SchedulerKind scheduler = SchedulerKind::HalfCosine, int probe_k = 40);

    /// Throws ConfigError when a field is out of range for the model.
    void validate(const ModelConfig& config) const;
};

/// Final-layer hidden state at the last input position, reused as the
/// injection target.
struct ContextEmbedding {
    Vector vector;
    int source_position = 0;
    std::uint64_t model_hash = 0;
};

struct StepRecord {
    int step = 0;  // 1-based
    TokenId probe_argmax = 0;
    TokenId injected_argmax = 0;
    std::optional<double> mean_mass;  // dynamic mode only
    double alpha_used = 0.0;
    bool swapped = false;
    TokenId chosen = 0;
};

struct Provenance {
    std::uint64_t model_hash = 0;
    std::uint64_t seed = 0;
    std::string source;  // e.g. scene id
};

struct DecodeTrace {
    InjectionPolicy policy;
    std::vector<StepRecord> steps;
    std::vector<TokenId> tokens;
    Provenance provenance;
};

struct BranchRecord {
    int branch_step = 0;
    std::vector<TokenId> baseline_continuation;
    std::vector<TokenId> main_continuation;
};

struct BranchedResult {
    DecodeTrace trace;
    std::vector<BranchRecord> branches;
};

/// Per-step view of both forward passes, for analysis and tests.
struct StepObservation {
    int step = 0;
    const LayerTrace* probe = nullptr;     // pass without injection
    const LayerTrace* injected = nullptr;  // pass that is kept
};

struct DecodeOptions {
    int max_new_tokens = 64;
    std::optional<TokenId> eos_token;
    std::function<void(const StepObservation&)> observer;
};

ContextEmbedding extract_context_embedding(const DecoderWeights& weights, const Matrix& prefix,
                                           std::span<const TokenId> prompt_token_ids);

/// (1 - alpha) h + alpha c.
Vector blend(const Vector& hidden, const ContextEmbedding& context, double alpha);

double schedule_half_cosine(double mean_mass, double alpha_max, double beta);
double schedule_linear(double mean_mass, double alpha_max, double beta);
double schedule(SchedulerKind kind, double mean_mass, double alpha_max, double beta);

DecodeTrace decode_baseline(const DecoderWeights& weights, const Matrix& prefix, std::span<const TokenId> prompt,
                            const DecodeOptions& options);
DecodeTrace decode_static(const DecoderWeights& weights, const Matrix& prefix, std::span<const TokenId> prompt,
                          const InjectionPolicy& policy, const DecodeOptions& options);
DecodeTrace decode_dynamic(const DecoderWeights& weights, const Matrix& prefix, std::span<const TokenId> prompt,
                           const InjectionPolicy& policy, const DecodeOptions& options);

/// Dispatches on policy.mode.
DecodeTrace decode(const DecoderWeights& weights, const Matrix& prefix, std::span<const TokenId> prompt,
                   const InjectionPolicy& policy, const DecodeOptions& options);

/// Decodes with injection; whenever a step's injected argmax differs from its
/// probe argmax, a snapshot of the pre-step cache is continued greedily without
/// injection from the probe argmax for branch_length tokens.
BranchedResult branched_decode(const DecoderWeights& weights, const Matrix& prefix, std::span<const TokenId> prompt,
                               const InjectionPolicy& policy, int branch_length, const DecodeOptions& options);

/// Mean alpha_used over every step of the given traces (0 if no steps).
double mean_effective_alpha(std::span<const DecodeTrace> traces);

inline constexpr int kTraceSchemaVersion = 1;

nlohmann::json to_json(const InjectionPolicy& policy);
InjectionPolicy policy_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StepRecord& record);
nlohmann::json to_json(const BranchRecord& record);

/// JSON-lines: one "trace" header line, one "step" line per step, one "end"
/// line with the token list.
std::string trace_to_jsonl(const DecodeTrace& trace);
std::string branches_to_jsonl(const std::string& source, std::span<const BranchRecord> branches);

}  // namespace cei

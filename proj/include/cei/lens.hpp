// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cei/model.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace cei {

enum class TokenLabel { unlabeled, truthful, hallucinatory };

std::string to_string(TokenLabel label);
TokenLabel parse_token_label(const std::string& text);

/// Top-K token ids of the final-layer distribution, in descending probability
/// (ties by lowest id).
struct DecisionSet {
    int k = 0;
    std::vector<TokenId> token_ids;
    int source_position = -1;
};

/// Lens mass curve for one target token: M_K(l) for l = 1..L and its mean.
struct CommitmentProfile {
    std::vector<double> mass_by_layer;
    double mean_mass = 0.0;
    int k = 0;
    int target_position = -1;
    TokenLabel label = TokenLabel::unlabeled;
};

struct ProfileAggregate {
    std::vector<double> mean_curve;
    std::vector<double> std_curve;  // population standard deviation
    int count = 0;
    TokenLabel label = TokenLabel::unlabeled;
};

inline constexpr int kHistogramBins = 20;

/// Counts of mean_mass in 20 equal bins over [0, 1]; 1.0 lands in the last bin.
struct MassHistogram {
    TokenLabel label = TokenLabel::unlabeled;
    std::array<int, kHistogramBins> counts{};
};

struct AggregateResult {
    std::vector<ProfileAggregate> aggregates;  // one per label present, ordered by label
    std::vector<MassHistogram> histograms;     // same order
};

/// Early-exit vocabulary distribution of an intermediate hidden state.
Vector layer_distribution(const DecoderWeights& weights, const Vector& hidden);

DecisionSet decision_set(const Vector& p_final, int k, int source_position = -1);

/// Probability that p places on the decision set.
double topk_mass(const Vector& p, const DecisionSet& set);

double mean_topk_mass(std::span<const double> mass_by_layer);

/// M_K(l) for every layer of a trace, with S_K built from the trace's own
/// final-layer distribution.
CommitmentProfile profile_from_trace(const DecoderWeights& weights, const LayerTrace& trace, int k);

/// Runs the decoder over everything before target_position in
/// [prefix; token_ids] (position indices count prefix rows first) and builds
/// the commitment profile of the prediction made at target_position - 1.
CommitmentProfile commitment_profile(const DecoderWeights& weights, const Matrix& prefix,
                                     std::span<const TokenId> token_ids, int target_position, int k);

AggregateResult aggregate_profiles(std::span<const CommitmentProfile> profiles);

nlohmann::json to_json(const CommitmentProfile& profile);
nlohmann::json to_json(const ProfileAggregate& aggregate);
nlohmann::json to_json(const MassHistogram& histogram);
CommitmentProfile profile_from_json(const nlohmann::json& j);

}  // namespace cei

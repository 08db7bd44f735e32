// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/lens.hpp"

#include "cei/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cei {

std::string to_string(TokenLabel label) {
    switch (label) {
        case TokenLabel::truthful: return "truthful";
        case TokenLabel::hallucinatory: return "hallucinatory";
        case TokenLabel::unlabeled: break;
    }
    return "unlabeled";
}

TokenLabel parse_token_label(const std::string& text) {
    if (text == "truthful") return TokenLabel::truthful;
    if (text == "hallucinatory") return TokenLabel::hallucinatory;
    if (text == "unlabeled") return TokenLabel::unlabeled;
    throw InputError("unknown token label '" + text + "'");
}

Vector layer_distribution(const DecoderWeights& weights, const Vector& hidden) {
    return softmax(unembed(weights, hidden));
}

DecisionSet decision_set(const Vector& p_final, int k, int source_position) {
    const auto n = static_cast<int>(p_final.size());
    if (k < 1 || k > n) {
        throw InputError("decision set size " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    }
    std::vector<TokenId> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](TokenId a, TokenId b) {
        if (p_final[a] != p_final[b]) return p_final[a] > p_final[b];
        return a < b;
    });
    order.resize(static_cast<std::size_t>(k));
    return DecisionSet{k, std::move(order), source_position};
}

double topk_mass(const Vector& p, const DecisionSet& set) {
    double mass = 0.0;
    for (TokenId id : set.token_ids) {
        if (id < 0 || id >= p.size()) throw InputError("decision set id outside the distribution");
        mass += p[id];
    }
    return std::clamp(mass, 0.0, 1.0);
}

double mean_topk_mass(std::span<const double> mass_by_layer) {
    if (mass_by_layer.empty()) throw InputError("mean_topk_mass of an empty curve");
    return std::accumulate(mass_by_layer.begin(), mass_by_layer.end(), 0.0) /
           static_cast<double>(mass_by_layer.size());
}

CommitmentProfile profile_from_trace(const DecoderWeights& weights, const LayerTrace& trace, int k) {
    const DecisionSet set = decision_set(softmax(trace.final_logits), k, trace.position);
    CommitmentProfile profile;
    profile.k = k;
    profile.mass_by_layer.reserve(trace.hidden_by_layer.size());
    for (const Vector& hidden : trace.hidden_by_layer) {
        profile.mass_by_layer.push_back(topk_mass(layer_distribution(weights, hidden), set));
    }
    profile.mean_mass = mean_topk_mass(profile.mass_by_layer);
    return profile;
}

CommitmentProfile commitment_profile(const DecoderWeights& weights, const Matrix& prefix,
                                     std::span<const TokenId> token_ids, int target_position, int k) {
    const auto n_prefix = static_cast<int>(prefix.rows());
    const int total = n_prefix + static_cast<int>(token_ids.size());
    const int first = std::max(1, n_prefix);
    if (target_position < first || target_position >= total) {
        throw InputError("target position " + std::to_string(target_position) + " does not index a token in [" +
                         std::to_string(first) + ", " + std::to_string(total - 1) + "]");
    }
    // Everything strictly before the target is context; the target itself is
    // what the last context position predicts.
    const auto tokens_before = static_cast<std::size_t>(target_position - n_prefix);
    const auto [trace, state] = forward_full(weights, prefix, token_ids.first(tokens_before));
    CommitmentProfile profile = profile_from_trace(weights, trace, k);
    profile.target_position = target_position;
    return profile;
}

AggregateResult aggregate_profiles(std::span<const CommitmentProfile> profiles) {
    AggregateResult result;
    if (profiles.empty()) return result;
    const std::size_t depth = profiles.front().mass_by_layer.size();
    const int k = profiles.front().k;
    for (const auto& p : profiles) {
        if (p.mass_by_layer.size() != depth || p.k != k) {
            throw InputError("profiles disagree on layer count or K");
        }
    }
    std::map<TokenLabel, std::vector<const CommitmentProfile*>> groups;
    for (const auto& p : profiles) groups[p.label].push_back(&p);

    for (const auto& [label, members] : groups) {
        ProfileAggregate agg;
        agg.label = label;
        agg.count = static_cast<int>(members.size());
        agg.mean_curve.assign(depth, 0.0);
        agg.std_curve.assign(depth, 0.0);
        const double n = static_cast<double>(members.size());
        for (std::size_t l = 0; l < depth; ++l) {
            double sum = 0.0;
            for (const auto* p : members) sum += p->mass_by_layer[l];
            const double mean = sum / n;
            double sq = 0.0;
            for (const auto* p : members) sq += (p->mass_by_layer[l] - mean) * (p->mass_by_layer[l] - mean);
            agg.mean_curve[l] = mean;
            agg.std_curve[l] = std::sqrt(sq / n);
        }
        result.aggregates.push_back(std::move(agg));

        MassHistogram hist;
        hist.label = label;
        for (const auto* p : members) {
            const int bin = std::clamp(static_cast<int>(p->mean_mass * kHistogramBins), 0, kHistogramBins - 1);
            ++hist.counts[static_cast<std::size_t>(bin)];
        }
        result.histograms.push_back(hist);
    }
    return result;
}

}  // namespace cei

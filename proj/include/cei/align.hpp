// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cei/lens.hpp"
#include "cei/model.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace cei {

/// Unembedding-space representation of a word: the mean of its sub-token rows.
struct WordVector {
    std::string word;
    Vector vector;
    int sub_token_count = 0;
};

struct AlignmentSample {
    std::string word;
    TokenLabel label = TokenLabel::truthful;
    double dot = 0.0;
    double raw_cosine = 0.0;
    double centered_cosine = 0.0;
};

enum class AlignmentMeasure { Dot, RawCosine, CenteredCosine };
inline constexpr std::array<AlignmentMeasure, 3> kAlignmentMeasures = {
    AlignmentMeasure::Dot, AlignmentMeasure::RawCosine, AlignmentMeasure::CenteredCosine};
std::string to_string(AlignmentMeasure measure);
double measure_value(const AlignmentSample& sample, AlignmentMeasure measure);

/// Box-plot summary; quartiles use linear interpolation between order
/// statistics (position p * (n - 1)).
struct BoxSummary {
    int count = 0;
    double mean = 0.0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

struct MeasureComparison {
    AlignmentMeasure measure = AlignmentMeasure::CenteredCosine;
    BoxSummary truthful;
    BoxSummary hallucinatory;
    double mean_difference = 0.0;  // truthful - hallucinatory
    double ci95_low = 0.0;
    double ci95_high = 0.0;
};

struct AlignmentReport {
    int truthful_count = 0;
    int hallucinatory_count = 0;
    std::vector<MeasureComparison> measures;  // dot, raw cosine, centered cosine
    int bootstrap_n = 0;
    std::uint64_t seed = 0;
};

using TokenizerFn = std::function<std::vector<TokenId>(const std::string&)>;

Vector mean_token_embedding(const DecoderWeights& weights);

double dot(const Vector& c, const Vector& w);
double raw_cosine(const Vector& c, const Vector& w);
double centered_cosine(const Vector& c, const Vector& w, const Vector& mu);

WordVector word_vector(const DecoderWeights& weights, const TokenizerFn& tokenizer, const std::string& word);

/// Builds the three measures for one word. Throws DegenerateInputError when a
/// cosine is undefined.
AlignmentSample make_alignment_sample(const Vector& context, const WordVector& word, const Vector& mu,
                                      TokenLabel label);

/// Quantile with linear interpolation on sorted data.
double quantile_sorted(std::span<const double> sorted, double p);
BoxSummary box_summary(std::vector<double> values);

/// Group statistics plus a seeded percentile bootstrap CI on the difference
/// of group means, resampling each group independently.
AlignmentReport alignment_report(std::span<const AlignmentSample> samples, int bootstrap_n = 10000,
                                 std::uint64_t seed = 0);

nlohmann::json to_json(const AlignmentReport& report);

}  // namespace cei

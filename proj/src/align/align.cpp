// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/align.hpp"

#include "cei/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cei {

std::string to_string(AlignmentMeasure measure) {
    switch (measure) {
        case AlignmentMeasure::Dot: return "dot";
        case AlignmentMeasure::RawCosine: return "raw_cosine";
        case AlignmentMeasure::CenteredCosine: break;
    }
    return "centered_cosine";
}

double measure_value(const AlignmentSample& sample, AlignmentMeasure measure) {
    switch (measure) {
        case AlignmentMeasure::Dot: return sample.dot;
        case AlignmentMeasure::RawCosine: return sample.raw_cosine;
        case AlignmentMeasure::CenteredCosine: break;
    }
    return sample.centered_cosine;
}

Vector mean_token_embedding(const DecoderWeights& weights) {
    return weights.embedding.colwise().mean().transpose();
}

double dot(const Vector& c, const Vector& w) {
    if (c.size() != w.size()) throw InputError("dot product dimension mismatch");
    return c.dot(w);
}

double raw_cosine(const Vector& c, const Vector& w) {
    if (c.size() != w.size()) throw InputError("cosine dimension mismatch");
    const double nc = c.norm();
    const double nw = w.norm();
    if (nc == 0.0 || nw == 0.0) throw DegenerateInputError("cosine of a zero vector");
    return std::clamp(c.dot(w) / (nc * nw), -1.0, 1.0);
}

double centered_cosine(const Vector& c, const Vector& w, const Vector& mu) {
    if (mu.size() != c.size()) throw InputError("centering vector dimension mismatch");
    const Vector cc = c - mu;
    const Vector wc = w - mu;
    if (cc.norm() == 0.0 || wc.norm() == 0.0) throw DegenerateInputError("centered vector has zero norm");
    return raw_cosine(cc, wc);
}

WordVector word_vector(const DecoderWeights& weights, const TokenizerFn& tokenizer, const std::string& word) {
    const auto ids = tokenizer(word);
    if (ids.empty()) throw InputError("word '" + word + "' has no sub-tokens");
    Vector sum = Vector::Zero(weights.config.dim);
    for (TokenId id : ids) sum += embed_token(weights, id).transpose();
    const auto n = static_cast<int>(ids.size());
    return WordVector{word, sum / static_cast<double>(n), n};
}

AlignmentSample make_alignment_sample(const Vector& context, const WordVector& word, const Vector& mu,
                                      TokenLabel label) {
    AlignmentSample s;
    s.word = word.word;
    s.label = label;
    s.dot = dot(context, word.vector);
    s.raw_cosine = raw_cosine(context, word.vector);
    s.centered_cosine = centered_cosine(context, word.vector, mu);
    return s;
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw InputError("quantile of an empty sample");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BoxSummary box_summary(std::vector<double> values) {
    if (values.empty()) throw InputError("box summary of an empty sample");
    std::sort(values.begin(), values.end());
    BoxSummary b;
    b.count = static_cast<int>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    b.mean = sum / static_cast<double>(values.size());
    b.min = values.front();
    b.max = values.back();
    b.q1 = quantile_sorted(values, 0.25);
    b.median = quantile_sorted(values, 0.5);
    b.q3 = quantile_sorted(values, 0.75);
    return b;
}

AlignmentReport alignment_report(std::span<const AlignmentSample> samples, int bootstrap_n, std::uint64_t seed) {
    if (bootstrap_n < 1) throw InputError("bootstrap_n must be positive");
    std::vector<const AlignmentSample*> truthful;
    std::vector<const AlignmentSample*> halluc;
    for (const auto& s : samples) {
        if (s.label == TokenLabel::truthful) truthful.push_back(&s);
        else if (s.label == TokenLabel::hallucinatory) halluc.push_back(&s);
    }
    if (truthful.empty() || halluc.empty()) {
        throw InputError("alignment report needs both labels present (got " +
                         std::to_string(truthful.size()) + " truthful, " + std::to_string(halluc.size()) +
                         " hallucinatory)");
    }

    AlignmentReport report;
    report.truthful_count = static_cast<int>(truthful.size());
    report.hallucinatory_count = static_cast<int>(halluc.size());
    report.bootstrap_n = bootstrap_n;
    report.seed = seed;

    std::mt19937_64 rng(seed);
    for (AlignmentMeasure m : kAlignmentMeasures) {
        std::vector<double> a;
        std::vector<double> b;
        for (const auto* s : truthful) a.push_back(measure_value(*s, m));
        for (const auto* s : halluc) b.push_back(measure_value(*s, m));

        MeasureComparison cmp;
        cmp.measure = m;
        cmp.truthful = box_summary(a);
        cmp.hallucinatory = box_summary(b);
        cmp.mean_difference = cmp.truthful.mean - cmp.hallucinatory.mean;

        std::uniform_int_distribution<std::size_t> pick_a(0, a.size() - 1);
        std::uniform_int_distribution<std::size_t> pick_b(0, b.size() - 1);
        std::vector<double> diffs(static_cast<std::size_t>(bootstrap_n));
        for (auto& d : diffs) {
            double sa = 0.0;
            double sb = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) sa += a[pick_a(rng)];
            for (std::size_t i = 0; i < b.size(); ++i) sb += b[pick_b(rng)];
            d = sa / static_cast<double>(a.size()) - sb / static_cast<double>(b.size());
        }
        std::sort(diffs.begin(), diffs.end());
        cmp.ci95_low = quantile_sorted(diffs, 0.025);
        cmp.ci95_high = quantile_sorted(diffs, 0.975);
        report.measures.push_back(cmp);
    }
    return report;
}

namespace {

nlohmann::json to_json(const BoxSummary& b) {
    return nlohmann::json{{"count", b.count}, {"mean", b.mean},     {"min", b.min}, {"q1", b.q1},
                          {"median", b.median}, {"q3", b.q3}, {"max", b.max}};
}

}  // namespace

nlohmann::json to_json(const AlignmentReport& report) {
    nlohmann::json measures = nlohmann::json::array();
    for (const auto& m : report.measures) {
        measures.push_back({{"measure", to_string(m.measure)},
                            {"truthful", to_json(m.truthful)},
                            {"hallucinatory", to_json(m.hallucinatory)},
                            {"mean_difference", m.mean_difference},
                            {"ci95_low", m.ci95_low},
                            {"ci95_high", m.ci95_high}});
    }
    return nlohmann::json{{"schema_version", 1},
                          {"counts", {{"truthful", report.truthful_count}, {"hallucinatory", report.hallucinatory_count}}},
                          {"bootstrap_n", report.bootstrap_n},
                          {"seed", report.seed},
                          {"measures", measures}};
}

}  // namespace cei

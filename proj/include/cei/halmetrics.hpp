// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace cei::halmetrics {

/// Object vocabulary with table-driven normalisation. All keys are stored
/// lowercase; lookups lowercase their argument.
class Ontology {
public:
    Ontology() = default;
    Ontology(std::set<std::string> objects, std::map<std::string, std::string> synonyms,
             std::map<std::string, std::string> lemmas);

    const std::set<std::string>& objects() const { return objects_; }
    const std::map<std::string, std::string>& synonyms() const { return synonyms_; }
    const std::map<std::string, std::string>& lemmas() const { return lemmas_; }

    bool is_object(std::string_view name) const;
    /// Lemma of a single word, or the word itself.
    std::string lemmatize(std::string_view word) const;
    /// Canonical object for a (lemmatised) phrase, if any.
    std::optional<std::string> canonical(std::string_view phrase) const;
    /// Longest phrase length, in words, among objects and synonyms.
    std::size_t max_phrase_words() const { return max_words_; }

    static Ontology from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

private:
    std::set<std::string> objects_;
    std::map<std::string, std::string> synonyms_;
    std::map<std::string, std::string> lemmas_;
    std::size_t max_words_ = 1;
};

struct GroundTruth {
    std::string image_id;
    std::set<std::string> present_objects;
    std::set<std::string> hallucination_targets;
    std::set<std::string> salient_objects;

    static GroundTruth from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct CaptionRecord {
    std::string image_id;
    std::string text;

    static CaptionRecord from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct Mention {
    std::string object;  // canonical name
    std::size_t begin = 0;  // byte offsets into the caption, [begin, end)
    std::size_t end = 0;
};

struct MentionSet {
    std::string image_id;
    std::vector<Mention> mentions;
    std::set<std::string> objects;  // deduplicated canonical names
};

/// Lowercased word tokens with their byte spans. Words are maximal runs of
/// ASCII letters, digits, apostrophes and hyphens.
std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> split_words(std::string_view text);

MentionSet extract_mentions(std::string_view caption, const Ontology& ontology, std::string image_id = {});

using GroundTruthIndex = std::map<std::string, GroundTruth>;

GroundTruthIndex index_ground_truth(std::span<const GroundTruth> entries);

struct ChairScores {
    double chair_i = 0.0;
    double chair_s = 0.0;
    int captions = 0;
    int mentions = 0;
    int hallucinated_mentions = 0;
};

struct AmberScores {
    double chair = 0.0;
    double hal = 0.0;
    double cover = 0.0;
};

struct MmhalScores {
    double score = 0.0;
    double halrate = 0.0;
};

struct MetricReport {
    double chair_i = 0.0;
    double chair_s = 0.0;
    double amber_chair = 0.0;
    double amber_hal = 0.0;
    double amber_cover = 0.0;
    std::optional<double> mmhal_score;
    std::optional<double> mmhal_halrate;
    int captions = 0;
    int mentions = 0;
    int hallucinated_mentions = 0;

    nlohmann::json to_json() const;
};

/// Per-caption coverage of the annotated objects; 1.0 when nothing is annotated.
double response_cover(const MentionSet& mentions, const GroundTruth& truth);

ChairScores chair_scores(std::span<const CaptionRecord> records, const GroundTruthIndex& truth, const Ontology& ontology);
AmberScores amber_scores(std::span<const CaptionRecord> records, const GroundTruthIndex& truth, const Ontology& ontology);
MmhalScores mmhal_aggregate(std::span<const double> scores);

MetricReport evaluate(std::span<const CaptionRecord> records, const GroundTruthIndex& truth, const Ontology& ontology,
                      std::span<const double> mmhal_scores = {});

/// Warnings raised by the last scoring calls on this thread (e.g. zero
/// mentions). Cleared by take_warnings().
std::vector<std::string> take_warnings();

}  // namespace cei::halmetrics

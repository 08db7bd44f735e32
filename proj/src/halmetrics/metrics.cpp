// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/error.hpp"
#include "cei/halmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

namespace cei::halmetrics {
namespace {

thread_local std::vector<std::string> g_warnings;

const GroundTruth& lookup(const GroundTruthIndex& truth, const std::string& image_id) {
    auto it = truth.find(image_id);
    if (it == truth.end()) throw InputError("no ground truth for image '" + image_id + "'");
    return it->second;
}

std::set<std::string> hallucinated(const MentionSet& m, const GroundTruth& g) {
    std::set<std::string> out;
    std::set_difference(m.objects.begin(), m.objects.end(), g.present_objects.begin(), g.present_objects.end(),
                        std::inserter(out, out.begin()));
    return out;
}

}  // namespace

GroundTruthIndex index_ground_truth(std::span<const GroundTruth> entries) {
    GroundTruthIndex index;
    for (const auto& g : entries) {
        if (!index.emplace(g.image_id, g).second) throw InputError("duplicate ground truth for image '" + g.image_id + "'");
    }
    return index;
}

double response_cover(const MentionSet& mentions, const GroundTruth& truth) {
    if (truth.present_objects.empty()) return 1.0;
    std::size_t hit = 0;
    for (const auto& o : truth.present_objects) hit += mentions.objects.contains(o) ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(truth.present_objects.size());
}

ChairScores chair_scores(std::span<const CaptionRecord> records, const GroundTruthIndex& truth, const Ontology& ontology) {
    ChairScores s;
    int hallucinated_captions = 0;
    for (const auto& r : records) {
        const auto& g = lookup(truth, r.image_id);
        const auto m = extract_mentions(r.text, ontology, r.image_id);
        const auto h = hallucinated(m, g);
        s.mentions += static_cast<int>(m.objects.size());
        s.hallucinated_mentions += static_cast<int>(h.size());
        if (!h.empty()) ++hallucinated_captions;
        ++s.captions;
    }
    if (s.mentions == 0) {
        if (s.captions > 0) g_warnings.push_back("no object mentions in " + std::to_string(s.captions) + " captions; CHAIR_i set to 0");
    } else {
        s.chair_i = static_cast<double>(s.hallucinated_mentions) / static_cast<double>(s.mentions);
    }
    if (s.captions > 0) s.chair_s = static_cast<double>(hallucinated_captions) / static_cast<double>(s.captions);
    return s;
}

AmberScores amber_scores(std::span<const CaptionRecord> records, const GroundTruthIndex& truth, const Ontology& ontology) {
    AmberScores s;
    if (records.empty()) return s;
    for (const auto& r : records) {
        const auto& g = lookup(truth, r.image_id);
        const auto m = extract_mentions(r.text, ontology, r.image_id);
        const auto h = hallucinated(m, g);
        if (!m.objects.empty()) {
            s.chair += static_cast<double>(h.size()) / static_cast<double>(m.objects.size());
            s.hal += h.empty() ? 0.0 : 1.0;
        }
        s.cover += response_cover(m, g);
    }
    const auto n = static_cast<double>(records.size());
    s.chair /= n;
    s.hal /= n;
    s.cover /= n;
    return s;
}

MmhalScores mmhal_aggregate(std::span<const double> scores) {
    if (scores.empty()) throw InputError("MMHal aggregate of an empty score list");
    MmhalScores out;
    int low = 0;
    for (double v : scores) {
        if (!std::isfinite(v) || v < 0.0 || v > 5.0) throw InputError("MMHal score outside [0, 5]: " + std::to_string(v));
        out.score += v;
        if (v < 3.0) ++low;
    }
    out.score /= static_cast<double>(scores.size());
    out.halrate = static_cast<double>(low) / static_cast<double>(scores.size());
    return out;
}

MetricReport evaluate(std::span<const CaptionRecord> records, const GroundTruthIndex& truth, const Ontology& ontology,
                      std::span<const double> mmhal_scores) {
    const auto chair = chair_scores(records, truth, ontology);
    const auto amber = amber_scores(records, truth, ontology);
    MetricReport r;
    r.chair_i = chair.chair_i;
    r.chair_s = chair.chair_s;
    r.amber_chair = amber.chair;
    r.amber_hal = amber.hal;
    r.amber_cover = amber.cover;
    r.captions = chair.captions;
    r.mentions = chair.mentions;
    r.hallucinated_mentions = chair.hallucinated_mentions;
    if (!mmhal_scores.empty()) {
        const auto mm = mmhal_aggregate(mmhal_scores);
        r.mmhal_score = mm.score;
        r.mmhal_halrate = mm.halrate;
    }
    return r;
}

nlohmann::json MetricReport::to_json() const {
    nlohmann::json j{{"schema_version", 1},
                     {"chair_i", chair_i},
                     {"chair_s", chair_s},
                     {"amber_chair", amber_chair},
                     {"amber_hal", amber_hal},
                     {"amber_cover", amber_cover},
                     {"mmhal_score", nullptr},
                     {"mmhal_halrate", nullptr},
                     {"counts", {{"captions", captions}, {"mentions", mentions}, {"hallucinated_mentions", hallucinated_mentions}}}};
    if (mmhal_score) j["mmhal_score"] = *mmhal_score;
    if (mmhal_halrate) j["mmhal_halrate"] = *mmhal_halrate;
    return j;
}

std::vector<std::string> take_warnings() {
    std::vector<std::string> out;
    out.swap(g_warnings);
    return out;
}

}  // namespace cei::halmetrics

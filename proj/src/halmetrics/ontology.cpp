// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/error.hpp"
#include "cei/halmetrics.hpp"

#include <algorithm>
#include <cctype>

namespace cei::halmetrics {
namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::size_t word_count(std::string_view phrase) {
    return split_words(phrase).size();
}

/// Collapses whitespace/punctuation so phrase keys compare like extracted text.
std::string normalize_phrase(std::string_view phrase) {
    std::string out;
    for (const auto& [word, span] : split_words(phrase)) {
        if (!out.empty()) out.push_back(' ');
        out += word;
    }
    return out;
}

std::set<std::string> string_set(const nlohmann::json& j, const char* key) {
    std::set<std::string> out;
    if (!j.contains(key) || j.at(key).is_null()) return out;
    for (const auto& v : j.at(key)) out.insert(normalize_phrase(v.get<std::string>()));
    return out;
}

}  // namespace

Ontology::Ontology(std::set<std::string> objects, std::map<std::string, std::string> synonyms,
                   std::map<std::string, std::string> lemmas) {
    for (const auto& o : objects) {
        const auto key = normalize_phrase(o);
        if (key.empty()) throw InputError("ontology object name is empty");
        objects_.insert(key);
        max_words_ = std::max(max_words_, word_count(key));
    }
    for (const auto& [inflected, base] : lemmas) lemmas_[lower(inflected)] = lower(base);
    for (const auto& [surface, target] : synonyms) {
        const auto canon = normalize_phrase(target);
        if (!objects_.contains(canon)) {
            throw InputError("synonym '" + surface + "' maps to '" + target + "', which is not an ontology object");
        }
        const auto key = normalize_phrase(surface);
        synonyms_[key] = canon;
        max_words_ = std::max(max_words_, word_count(key));
    }
}

bool Ontology::is_object(std::string_view name) const { return objects_.contains(normalize_phrase(name)); }

std::string Ontology::lemmatize(std::string_view word) const {
    auto key = lower(word);
    if (auto it = lemmas_.find(key); it != lemmas_.end()) return it->second;
    return key;
}

std::optional<std::string> Ontology::canonical(std::string_view phrase) const {
    const auto key = lower(phrase);
    if (objects_.contains(key)) return key;
    if (auto it = synonyms_.find(key); it != synonyms_.end()) return it->second;
    return std::nullopt;
}

Ontology Ontology::from_json(const nlohmann::json& j) {
    try {
        std::set<std::string> objects;
        for (const auto& o : j.at("objects")) objects.insert(o.get<std::string>());
        auto synonyms = j.value("synonyms", std::map<std::string, std::string>{});
        auto lemmas = j.value("lemmas", std::map<std::string, std::string>{});
        return Ontology(std::move(objects), std::move(synonyms), std::move(lemmas));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed ontology: ") + e.what());
    } catch (const InputError& e) {
        throw FormatError(std::string("invalid ontology: ") + e.what());
    }
}

nlohmann::json Ontology::to_json() const {
    return nlohmann::json{{"objects", objects_}, {"synonyms", synonyms_}, {"lemmas", lemmas_}};
}

GroundTruth GroundTruth::from_json(const nlohmann::json& j) {
    try {
        GroundTruth g;
        g.image_id = j.at("image_id").is_string() ? j.at("image_id").get<std::string>() : j.at("image_id").dump();
        g.present_objects = string_set(j, "present_objects");
        g.hallucination_targets = string_set(j, "hallucination_targets");
        g.salient_objects = string_set(j, "salient_objects");
        for (const auto& h : g.hallucination_targets) {
            if (g.present_objects.contains(h)) {
                throw FormatError("image " + g.image_id + ": hallucination target '" + h + "' is also present");
            }
        }
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed ground truth: ") + e.what());
    }
}

nlohmann::json GroundTruth::to_json() const {
    return nlohmann::json{{"image_id", image_id},
                          {"present_objects", present_objects},
                          {"hallucination_targets", hallucination_targets},
                          {"salient_objects", salient_objects}};
}

CaptionRecord CaptionRecord::from_json(const nlohmann::json& j) {
    try {
        CaptionRecord r;
        r.image_id = j.at("image_id").is_string() ? j.at("image_id").get<std::string>() : j.at("image_id").dump();
        r.text = j.at("text").get<std::string>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed caption record: ") + e.what());
    }
}

nlohmann::json CaptionRecord::to_json() const { return nlohmann::json{{"image_id", image_id}, {"text", text}}; }

}  // namespace cei::halmetrics

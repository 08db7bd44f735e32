// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/halmetrics.hpp"

#include <algorithm>
#include <cctype>

namespace cei::halmetrics {
namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '\'' || c == '-'; }

std::string join(const std::vector<std::string>& words, std::size_t begin, std::size_t count) {
    std::string out;
    for (std::size_t i = begin; i < begin + count; ++i) {
        if (i > begin) out.push_back(' ');
        out += words[i];
    }
    return out;
}

}  // namespace

std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> split_words(std::string_view text) {
    std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_word_char(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        const std::size_t begin = i;
        std::string word;
        while (i < text.size() && is_word_char(static_cast<unsigned char>(text[i]))) {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
            ++i;
        }
        out.emplace_back(std::move(word), std::make_pair(begin, i));
    }
    return out;
}

MentionSet extract_mentions(std::string_view caption, const Ontology& ontology, std::string image_id) {
    MentionSet result;
    result.image_id = std::move(image_id);
    const auto words = split_words(caption);
    std::vector<std::string> raw;
    std::vector<std::string> lemma;
    raw.reserve(words.size());
    lemma.reserve(words.size());
    for (const auto& [w, span] : words) {
        raw.push_back(w);
        lemma.push_back(ontology.lemmatize(w));
    }

    std::size_t i = 0;
    while (i < words.size()) {
        bool matched = false;
        const std::size_t longest = std::min(ontology.max_phrase_words(), words.size() - i);
        for (std::size_t len = longest; len >= 1 && !matched; --len) {
            auto canon = ontology.canonical(join(lemma, i, len));
            if (!canon) canon = ontology.canonical(join(raw, i, len));
            if (!canon) continue;
            result.mentions.push_back(Mention{*canon, words[i].second.first, words[i + len - 1].second.second});
            result.objects.insert(*canon);
            i += len;
            matched = true;
        }
        if (!matched) ++i;
    }
    return result;
}

}  // namespace cei::halmetrics

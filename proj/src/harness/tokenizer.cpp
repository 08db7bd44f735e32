// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#include "cei/harness/tokenizer.hpp"

#include "cei/error.hpp"

#include <cctype>

namespace cei::harness {
namespace {

bool is_punct_word(char c) { return c == ',' || c == '.' || c == ':' || c == ';'; }

std::vector<std::string> split_text(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) words.push_back(std::move(current));
        current.clear();
    };
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else if (is_punct_word(c)) {
            flush();
            words.emplace_back(1, c);
        } else {
            current.push_back(c);
        }
    }
    flush();
    return words;
}

bool is_continuation(std::string_view t) { return t.starts_with(kContinuation); }

}  // namespace

bool is_special_token(std::string_view token) {
    return token.size() >= 2 && token.front() == '<' && token.back() == '>';
}

Tokenizer::Tokenizer(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i].empty()) throw InputError("empty vocabulary entry at " + std::to_string(i));
        if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
            throw InputError("duplicate vocabulary entry '" + tokens_[i] + "'");
        }
    }
    for (auto special : {kPadToken, kEosToken, kUnkToken}) {
        if (!find(special)) throw InputError("vocabulary lacks " + std::string(special));
    }
}

const std::string& Tokenizer::token(TokenId id) const {
    if (id < 0 || id >= size()) throw InputError("token id " + std::to_string(id) + " outside vocabulary");
    return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Tokenizer::find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

TokenId Tokenizer::id(std::string_view token) const {
    auto found = find(token);
    if (!found) throw InputError("token '" + std::string(token) + "' not in vocabulary");
    return *found;
}

std::vector<TokenId> Tokenizer::encode_word(std::string_view word) const {
    std::vector<TokenId> out;
    std::size_t pos = 0;
    while (pos < word.size()) {
        std::optional<TokenId> best;
        std::size_t best_len = 0;
        for (std::size_t len = word.size() - pos; len > 0; --len) {
            std::string piece = pos == 0 ? std::string(word.substr(0, len))
                                         : std::string(kContinuation) + std::string(word.substr(pos, len));
            if (auto hit = find(piece); hit && !is_special_token(piece)) {
                best = hit;
                best_len = len;
                break;
            }
        }
        if (!best) return {unk()};
        out.push_back(*best);
        pos += best_len;
    }
    return out;
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
    std::vector<TokenId> out;
    for (const auto& w : split_text(text)) {
        if (auto special = find(w); special && is_special_token(w)) {
            out.push_back(*special);
            continue;
        }
        auto ids = encode_word(w);
        out.insert(out.end(), ids.begin(), ids.end());
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> Tokenizer::decode_offsets(std::span<const TokenId> ids) const {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    spans.reserve(ids.size());
    std::size_t length = 0;
    bool empty = true;
    for (TokenId id : ids) {
        const std::string& t = token(id);
        if (is_special_token(t)) {
            spans.emplace_back(length, length);
            continue;
        }
        if (is_continuation(t)) {
            const std::size_t n = t.size() - kContinuation.size();
            spans.emplace_back(length, length + n);
            length += n;
        } else {
            if (!empty) ++length;
            spans.emplace_back(length, length + t.size());
            length += t.size();
        }
        empty = false;
    }
    return spans;
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) {
        const std::string& t = token(id);
        if (is_special_token(t)) continue;
        if (is_continuation(t)) {
            out += t.substr(kContinuation.size());
        } else {
            if (!out.empty()) out.push_back(' ');
            out += t;
        }
    }
    return out;
}

nlohmann::json Tokenizer::to_json() const { return nlohmann::json{{"schema_version", 1}, {"tokens", tokens_}}; }

Tokenizer Tokenizer::from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema_version").get<int>() != 1) throw FormatError("unsupported vocabulary schema version");
        return Tokenizer(j.at("tokens").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed vocabulary: ") + e.what());
    } catch (const InputError& e) {
        throw FormatError(std::string("invalid vocabulary: ") + e.what());
    }
}

}  // namespace cei::harness

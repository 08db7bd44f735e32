// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cei/ops.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace cei::harness {

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kContinuation = "##";

/// Word-piece tokenizer over a fixed vocabulary. Words are split greedily
/// into the longest known prefix followed by "##"-prefixed continuation
/// pieces; a word that cannot be covered becomes a single <unk>.
class Tokenizer {
public:
    Tokenizer() = default;
    explicit Tokenizer(std::vector<std::string> tokens);

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::string& token(TokenId id) const;
    std::optional<TokenId> find(std::string_view token) const;
    TokenId id(std::string_view token) const;  // throws InputError when absent

    TokenId eos() const { return id(kEosToken); }
    TokenId unk() const { return id(kUnkToken); }

    std::vector<TokenId> encode_word(std::string_view word) const;
    /// Splits on whitespace; ',', '.', ':' and ';' are standalone words.
    std::vector<TokenId> encode(std::string_view text) const;
    /// Joins pieces; continuation pieces attach to the previous piece.
    /// Special tokens are dropped.
    std::string decode(std::span<const TokenId> ids) const;

    /// Character span [begin, end) of each token in decode(ids); special
    /// tokens get an empty span at the current offset.
    std::vector<std::pair<std::size_t, std::size_t>> decode_offsets(std::span<const TokenId> ids) const;

    nlohmann::json to_json() const;
    static Tokenizer from_json(const nlohmann::json& j);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

bool is_special_token(std::string_view token);

}  // namespace cei::harness

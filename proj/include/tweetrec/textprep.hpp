#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tweetrec/common.hpp"
#include "tweetrec/corpus.hpp"

namespace tweetrec {

/// Lowercase unigram counts used for compound-word segmentation.
class UnigramDictionary {
public:
    UnigramDictionary() = default;
    explicit UnigramDictionary(std::unordered_map<std::string, std::uint64_t> counts);

    /// "token<TAB>count" lines; tokens are lowercased, repeated tokens summed.
    static UnigramDictionary from_tsv(std::string_view text);

    std::uint64_t count(std::string_view word) const;
    std::uint64_t total() const { return total_; }
    std::size_t size() const { return counts_.size(); }
    std::size_t max_word_length() const { return max_word_length_; }
    const std::unordered_map<std::string, std::uint64_t>& counts() const { return counts_; }

private:
    std::unordered_map<std::string, std::uint64_t> counts_;
    std::uint64_t total_ = 0;
    std::size_t max_word_length_ = 0;
};

/// Subword vocabulary; line number in the source file is the token id.
/// Continuation pieces carry a leading "##".
class Vocabulary {
public:
    static constexpr std::string_view kUnknown = "[UNK]";
    static constexpr std::string_view kPadding = "[PAD]";
    static constexpr std::string_view kContinuation = "##";

    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> entries);

    static Vocabulary from_lines(std::string_view text);
    std::string to_lines() const;

    std::optional<TokenId> find(std::string_view piece) const;
    TokenId unknown_id() const { return unknown_id_; }
    /// [PAD] when present, else [UNK]; used for empty sequences.
    TokenId blank_id() const { return padding_id_.value_or(unknown_id_); }
    std::optional<TokenId> padding_id() const { return padding_id_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::string& piece(TokenId id) const { return entries_.at(static_cast<std::size_t>(id)); }
    /// Longest entry in bytes, continuation sigil excluded.
    std::size_t max_piece_length() const { return max_piece_length_; }

private:
    std::vector<std::string> entries_;
    std::unordered_map<std::string, TokenId> index_;
    TokenId unknown_id_ = -1;
    std::optional<TokenId> padding_id_;
    std::size_t max_piece_length_ = 0;
};

enum class Role : std::uint8_t { News, Tweet, Creator, EarlyFusion };

std::string_view role_name(Role r);
Role parse_role(std::string_view name);

/// Token cap per role: news 512, tweet 128, creator 128, early fusion 256.
std::size_t role_cap(Role r);

struct TokenSequence {
    std::vector<TokenId> ids;
    Role role = Role::Tweet;
};

inline constexpr std::size_t kMaxSegmentableLength = 40;

/// Splits at underscores, lower->upper and letter<->digit transitions.
/// nullopt when the token has no boundary (or yields no pieces).
std::optional<std::vector<std::string>> split_camel_underscore(std::string_view token);

/// Maximum-probability segmentation into dictionary words under a unigram
/// model. Ties go to fewer segments, then the lexicographically smallest
/// segment list. Returns {token} when no full segmentation exists or the
/// token is longer than 40 characters.
std::vector<std::string> segment_max_prob(std::string_view token, const UnigramDictionary& dict);

/// Replaces each #tag / @mention by its space-joined split.
std::string expand_compound_tokens(std::string_view text, const UnigramDictionary& dict);

using AttributeSet = std::set<Attribute>;

inline AttributeSet all_attributes() { return {kAllAttributes.begin(), kAllAttributes.end()}; }

/// "screen: <v> display: <v> bio: <v> website: <v> location: <v>" in that
/// order; absent, empty or excluded attributes are omitted.
std::string serialize_creator_context(const CreatorProfile& profile,
                                      const AttributeSet& included = all_attributes());

/// Greedy longest-match subword tokenization truncated to the role cap.
TokenSequence tokenize_for_role(std::string_view text, const Vocabulary& vocab, Role role);

} // namespace tweetrec

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tweetrec/corpus.hpp"
#include "tweetrec/retrieval.hpp"
#include "tweetrec/textprep.hpp"

namespace tweetrec {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    void validate() const {
        if (!(k1 >= 0.0)) throw InvalidInput("bm25 k1 must be >= 0");
        if (!(b >= 0.0 && b <= 1.0)) throw InvalidInput("bm25 b must lie in [0, 1]");
    }
};

/// Lowercase whitespace terms of the compound-expanded text, with leading
/// and trailing ASCII punctuation trimmed.
std::vector<std::string> analyze_terms(std::string_view text, const UnigramDictionary& dict);

struct Posting {
    std::uint32_t doc = 0;  // position in doc_ids(), which is sorted
    std::uint32_t tf = 0;
};

/// Inverted index over tweets. Immutable once built; extended() returns a
/// new index with extra documents.
class LexicalIndex {
public:
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    const std::vector<std::uint32_t>& doc_lengths() const { return doc_lengths_; }
    std::size_t num_docs() const { return doc_ids_.size(); }
    double avgdl() const { return avgdl_; }
    const std::vector<Posting>* postings(std::string_view term) const;
    std::size_t doc_frequency(std::string_view term) const;
    std::optional<std::size_t> doc_position(std::string_view tweet_id) const;
    const UnigramDictionary& dictionary() const { return *dict_; }

    /// Index over the current documents plus tweets; throws on duplicate ids.
    LexicalIndex extended(std::span<const Tweet> tweets) const;

private:
    friend LexicalIndex build_lexical_index(std::span<const Tweet>, std::shared_ptr<const UnigramDictionary>);

    void add_documents(std::span<const Tweet> tweets);

    std::shared_ptr<const UnigramDictionary> dict_;
    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_lengths_;
    std::map<std::string, std::vector<Posting>, std::less<>> postings_;
    std::unordered_map<std::string, std::size_t> positions_;
    double avgdl_ = 0.0;
};

LexicalIndex build_lexical_index(std::span<const Tweet> tweets,
                                 std::shared_ptr<const UnigramDictionary> dict);

/// idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1); sum over query terms of
/// idf * tf (k1 + 1) / (tf + k1 (1 - b + b dl / avgdl)).
double bm25_score(const LexicalIndex& index, const Bm25Params& params,
                  std::span<const std::string> query_terms, std::string_view tweet_id);

/// Title-only query, top-k by score (zero scores dropped), ties by ascending id.
RankedList lexical_search(const LexicalIndex& index, const Bm25Params& params, const Article& article,
                          std::size_t k = 1000,
                          std::optional<std::span<const std::size_t>> subset = std::nullopt);

} // namespace tweetrec

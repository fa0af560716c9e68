#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tweetrec/corpus.hpp"
#include "tweetrec/io.hpp"
#include "tweetrec/model.hpp"
#include "tweetrec/retrieval.hpp"
#include "tweetrec/textprep.hpp"
#include "tweetrec/training.hpp"

namespace tweetrec {

struct IngestStats {
    std::size_t articles_in = 0;
    std::size_t filtered_out = 0;    // 0 or more than 20 embeds
    std::size_t degenerate = 0;      // nothing left after stripping embeds
    std::size_t articles_kept = 0;
};

/// Article preparation: embedded ids are re-extracted from raw_html when it
/// is present, articles outside 1..20 embeds are dropped, embedded tweet text
/// is stripped from bodies (articles left blank are dropped) and raw_html is
/// cleared.
Corpus ingest_corpus(std::vector<Article> articles, std::vector<Tweet> tweets,
                     std::vector<CreatorProfile> creators, IngestStats* stats = nullptr);

struct TextResources {
    Vocabulary vocab;
    std::shared_ptr<const UnigramDictionary> dict;
};

/// News side: compound-expanded title and body.
TokenSequence news_tokens(const Article& article, const TextResources& res);
/// Compound-expanded tweet text.
TokenSequence tweet_tokens(const Tweet& tweet, const TextResources& res);
/// Serialized creator context, tokenized exactly as CreatorEmbeddingCache does.
TokenSequence creator_tokens(const CreatorProfile& profile, const AttributeSet& included,
                             const TextResources& res);
/// Expanded tweet text followed by the serialized creator context.
TokenSequence early_tokens(const Tweet& tweet, const CreatorProfile& profile, const AttributeSet& included,
                           const TextResources& res);

/// Token sequences of every article, tweet and creator in a corpus under one
/// attribute selection. Tweets whose creator has no profile get an empty one.
struct PreparedCorpus {
    AttributeSet included;
    std::unordered_map<std::string, TokenSequence> news;
    std::unordered_map<std::string, TokenSequence> tweet;
    std::unordered_map<std::string, TokenSequence> early;
    std::unordered_map<std::string, TokenSequence> creator;  // by creator id
    std::unordered_map<std::string, std::string> tweet_to_creator;
    std::vector<CreatorProfile> profiles;                     // one per creator id, in first-use order
};

PreparedCorpus prepare_corpus(const Corpus& corpus, const TextResources& res, const AttributeSet& included);

/// {"kind": "news"|"tweet"|"early"|"creator", "id": string, "ids": [ints]}
/// per line: articles, then tweet and early sequences per tweet in corpus
/// order, then creators in first-use order.
std::string prepared_corpus_to_jsonl(const Corpus& corpus, const PreparedCorpus& prepared);

/// Inverse of prepared_corpus_to_jsonl; every article, tweet and creator of
/// corpus must be covered.
PreparedCorpus parse_prepared_corpus(std::string_view text, const Corpus& corpus, const AttributeSet& included);

/// One example per pair; throws when an id is unknown.
std::vector<TrainingExample> make_examples(const PreparedCorpus& prepared, std::span<const TrainingPair> pairs);

/// Tweet-side vectors ready for indexing: one per tweet (tweet, early or
/// fused embedding by model kind) and, for Late Fusion, one per creator.
struct CandidateEmbeddings {
    std::vector<EmbeddingRecord> tweets;
    std::vector<EmbeddingRecord> creators;
};

/// Tweets in corpus order. Creator vectors go through cache.
CandidateEmbeddings embed_candidates(const RetrievalModel& model, const Corpus& corpus,
                                     const PreparedCorpus& prepared, const TextResources& res,
                                     CreatorEmbeddingCache& cache);

std::vector<EmbeddingRecord> embed_articles(const RetrievalModel& model, const PreparedCorpus& prepared,
                                            std::span<const std::string> article_ids);

struct RetrievalIndexes {
    DenseIndex tweets;
    std::optional<DenseIndex> creators;
    std::unordered_map<std::string, std::string> tweet_to_creator;
};

RetrievalIndexes build_indexes(const CandidateEmbeddings& embeddings,
                               const std::unordered_map<std::string, std::string>& tweet_to_creator);

/// Per-article candidate restriction: positions in the tweet index of tweets
/// created within window_days before publication.
std::vector<std::size_t> windowed_positions(const DenseIndex& tweet_index, const Corpus& corpus,
                                            const Article& article, int window_days);

/// Top-k tweets for one news embedding; Late Fusion uses the model's
/// late-fusion configuration with final_k = k.
RankedList retrieve(const RetrievalModel& model, const RetrievalIndexes& indexes, const EmbeddingRecord& news,
                    std::size_t k, std::optional<std::span<const std::size_t>> subset = std::nullopt);

/// Articles referenced by pairs, in first-appearance order.
std::vector<std::string> query_ids(std::span<const TrainingPair> pairs);

} // namespace tweetrec

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tweetrec/corpus.hpp"
#include "tweetrec/textprep.hpp"

namespace tweetrec {

/// Topic-structured synthetic corpus. Even-numbered creators are topical and
/// carry their topic's words in the bio; odd-numbered creators are generic
/// with filler-only bios. The other attributes are noise. Each article embeds
/// embeds_per_article tweets: alternately one whose text carries the
/// article's topic words (written by a generic creator) and one of
/// filler-only text written by a topical creator of the article's topic.
inline constexpr std::size_t kNoTopic = static_cast<std::size_t>(-1);

struct SyntheticConfig {
    std::size_t num_topics = 50;
    std::size_t words_per_topic = 8;
    std::size_t filler_words = 300;
    std::size_t num_articles = 500;
    std::size_t num_tweets = 2000;
    std::size_t num_creators = 200;
    std::size_t embeds_per_article = 2;
    /// When false, every embedded tweet gets a random creator, so creator
    /// context carries no relevance signal.
    bool plant_bio = true;
    std::uint64_t seed = 7;

    void validate() const;
};

struct SyntheticCorpus {
    std::vector<Article> articles;
    std::vector<Tweet> tweets;
    std::vector<CreatorProfile> creators;
    std::vector<std::string> vocabulary;  // one piece per line, [PAD] and [UNK] included
    std::unordered_map<std::string, std::uint64_t> unigram_counts;
    std::vector<std::vector<std::string>> topic_words;
    std::vector<std::size_t> article_topics;
    std::vector<std::size_t> creator_topics;  // kNoTopic for generic creators
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& cfg);

/// Writes articles.jsonl, tweets.jsonl, creators.jsonl, vocab.txt and
/// dictionary.tsv under dir.
void write_synthetic_fixture(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

} // namespace tweetrec

#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tweetrec/corpus.hpp"

namespace tweetrec {

using Qrels = std::map<std::string, std::set<std::string>>;

struct EmbeddingRecord {
    std::string id;
    Eigen::VectorXd vector;
};

/// Reads a whole file; throws std::runtime_error naming the path.
std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, so readers never see a
/// partial artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Calls fn for every non-blank line; line numbers in error messages.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") != std::string_view::npos) fn(line, line_no);
        start = end + 1;
    }
}

// Corpus records. Articles may carry raw_html; tweets and profiles as in the
// domain types. Parsing validates each record.
std::vector<Article> parse_articles_jsonl(std::string_view text);
std::vector<Tweet> parse_tweets_jsonl(std::string_view text);
std::vector<CreatorProfile> parse_creators_jsonl(std::string_view text);

std::string articles_to_jsonl(std::span<const Article> articles);
std::string tweets_to_jsonl(std::span<const Tweet> tweets);
std::string creators_to_jsonl(std::span<const CreatorProfile> creators);

std::string pairs_to_jsonl(std::span<const TrainingPair> pairs);
std::vector<TrainingPair> parse_pairs_jsonl(std::string_view text);

/// {"split":"train","article_id":...,"tweet_id":...} per line.
std::string split_manifest_to_jsonl(const DatasetSplit& split);
DatasetSplit parse_split_manifest(std::string_view text);

/// "article_id<TAB>tweet_id" lines.
std::string qrels_to_tsv(const Qrels& qrels);
Qrels parse_qrels_tsv(std::string_view text);
Qrels qrels_from_pairs(std::span<const TrainingPair> pairs);

/// {"id": string, "vector": [d reals]} per line.
std::string embeddings_to_jsonl(std::span<const EmbeddingRecord> records);
std::vector<EmbeddingRecord> parse_embeddings_jsonl(std::string_view text);

} // namespace tweetrec

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tweetrec/encoder.hpp"
#include "tweetrec/fusion.hpp"
#include "tweetrec/io.hpp"
#include "tweetrec/textprep.hpp"

namespace tweetrec {

struct ScoredItem {
    std::string id;
    double score = 0.0;
};

/// Scores nonincreasing, ties by ascending id, at most k items.
struct RankedList {
    std::string query_id;
    std::vector<ScoredItem> items;
    std::size_t k = 0;
};

/// Immutable exact-scan cosine index. Column i of vectors belongs to ids[i].
class DenseIndex {
public:
    const std::vector<std::string>& ids() const { return ids_; }
    const Eigen::MatrixXd& vectors() const { return vectors_; }
    std::size_t size() const { return ids_.size(); }
    Eigen::Index dim() const { return vectors_.rows(); }
    std::optional<std::size_t> position(std::string_view id) const;

    /// Cosine of query against the stored vector at position i.
    double score(std::size_t i, const Embedding& query, double query_norm) const {
        return vectors_.col(static_cast<Eigen::Index>(i)).dot(query) / (norms_[i] * query_norm);
    }

private:
    friend DenseIndex build_dense_index(std::span<const EmbeddingRecord> records);

    std::vector<std::string> ids_;
    Eigen::MatrixXd vectors_;
    std::vector<double> norms_;
    std::unordered_map<std::string, std::size_t> positions_;
};

/// Throws on empty input, duplicate ids, mixed dimensions or zero vectors.
DenseIndex build_dense_index(std::span<const EmbeddingRecord> records);

/// Top-k by cosine similarity over the whole index, or over the positions in
/// subset when given.
RankedList search_top_k(const DenseIndex& index, const Embedding& query, std::size_t k,
                        std::string query_id = {},
                        std::optional<std::span<const std::size_t>> subset = std::nullopt);

/// Serialized-context fingerprint -> embedding. Insert-only between flushes;
/// concurrent readers are safe and writers are serialized.
class CreatorEmbeddingCache {
public:
    using Encoder = std::function<Embedding(const TokenSequence&)>;

    CreatorEmbeddingCache() = default;
    CreatorEmbeddingCache(const CreatorEmbeddingCache&) = delete;
    CreatorEmbeddingCache& operator=(const CreatorEmbeddingCache&) = delete;

    Embedding get_or_compute(const CreatorProfile& profile, const Encoder& encoder,
                             const Vocabulary& vocab, const AttributeSet& included = all_attributes());

    /// Drops every entry; call whenever encoder parameters change.
    void flush();

    std::uint64_t hits() const { return hits_.load(); }
    std::uint64_t misses() const { return misses_.load(); }
    std::size_t size() const;

    /// Visits (serialized context, embedding) of every cached entry.
    void for_each(const std::function<void(const std::string&, const Embedding&)>& fn) const;

    static std::uint64_t fingerprint(std::string_view serialized_context) { return fnv1a64(serialized_context); }

private:
    struct Entry {
        std::string context;
        Embedding embedding;
    };

    mutable std::shared_mutex mutex_;
    std::unordered_map<std::uint64_t, std::vector<Entry>> entries_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
};

inline Embedding cache_get_or_compute(CreatorEmbeddingCache& cache, const CreatorProfile& profile,
                                      const CreatorEmbeddingCache::Encoder& encoder,
                                      const Vocabulary& vocab,
                                      const AttributeSet& included = all_attributes()) {
    return cache.get_or_compute(profile, encoder, vocab, included);
}

/// Two-stage Late Fusion: top stage_depth tweets per channel (tweet
/// embedding, creator embedding), union re-scored exactly on both channels,
/// combined with late_combine_scores, top final_k returned.
RankedList late_fusion_retrieve(const Embedding& news_emb, const DenseIndex& tweet_index,
                                const DenseIndex& creator_index,
                                const std::unordered_map<std::string, std::string>& tweet_to_creator,
                                const LateFusionConfig& cfg, std::string query_id = {},
                                std::optional<std::span<const std::size_t>> subset = std::nullopt);

} // namespace tweetrec

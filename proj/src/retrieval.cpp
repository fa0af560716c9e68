#include "tweetrec/retrieval.hpp"

#include <algorithm>
#include <mutex>
#include <queue>

namespace tweetrec {

namespace {

// Orders best-first: higher score, then smaller id.
struct Candidate {
    double score;
    std::size_t pos;
};

struct BestFirst {
    const std::vector<std::string>* ids;
    bool operator()(const Candidate& a, const Candidate& b) const {
        if (a.score != b.score) return a.score > b.score;
        return (*ids)[a.pos] < (*ids)[b.pos];
    }
};

template <typename ScoreFn>
std::vector<Candidate> select_top(const std::vector<std::string>& ids, std::size_t k, std::size_t n,
                                  const std::optional<std::span<const std::size_t>>& subset,
                                  ScoreFn&& score) {
    const BestFirst better{&ids};
    // Max-heap under "better" keeps the worst retained candidate on top.
    std::priority_queue<Candidate, std::vector<Candidate>, BestFirst> heap(better);
    auto offer = [&](std::size_t pos) {
        Candidate c{score(pos), pos};
        if (heap.size() < k) {
            heap.push(c);
        } else if (better(c, heap.top())) {
            heap.pop();
            heap.push(c);
        }
    };
    if (k > 0) {
        if (subset) {
            for (std::size_t pos : *subset) {
                if (pos >= n) throw InvalidInput("candidate position outside index");
                offer(pos);
            }
        } else {
            for (std::size_t pos = 0; pos < n; ++pos) offer(pos);
        }
    }
    std::vector<Candidate> out;
    out.reserve(heap.size());
    while (!heap.empty()) {
        out.push_back(heap.top());
        heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

double checked_norm(const Embedding& v, Eigen::Index dim) {
    if (v.size() != dim) throw InvalidInput("query dimension does not match index");
    const double n = v.norm();
    if (!(n > 0.0)) throw InvalidInput("query has zero norm");
    return n;
}

} // namespace

std::optional<std::size_t> DenseIndex::position(std::string_view id) const {
    auto it = positions_.find(std::string(id));
    if (it == positions_.end()) return std::nullopt;
    return it->second;
}

DenseIndex build_dense_index(std::span<const EmbeddingRecord> records) {
    if (records.empty()) throw InvalidInput("build_dense_index: no records");
    const Eigen::Index d = records.front().vector.size();
    if (d == 0) throw InvalidInput("build_dense_index: zero-dimensional vectors");
    DenseIndex index;
    index.vectors_.resize(d, static_cast<Eigen::Index>(records.size()));
    index.ids_.reserve(records.size());
    index.norms_.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.vector.size() != d)
            throw InvalidInput("build_dense_index: dimension mismatch for id " + r.id);
        if (!index.positions_.emplace(r.id, i).second)
            throw InvalidInput("build_dense_index: duplicate id " + r.id);
        if (!r.vector.allFinite()) throw InvalidInput("build_dense_index: non-finite vector for id " + r.id);
        const double n = r.vector.norm();
        if (!(n > 0.0)) throw InvalidInput("build_dense_index: zero vector for id " + r.id);
        index.ids_.push_back(r.id);
        index.vectors_.col(static_cast<Eigen::Index>(i)) = r.vector;
        index.norms_.push_back(n);
    }
    return index;
}

RankedList search_top_k(const DenseIndex& index, const Embedding& query, std::size_t k,
                        std::string query_id, std::optional<std::span<const std::size_t>> subset) {
    if (k < 1) throw InvalidInput("search_top_k: k must be >= 1");
    const double qn = checked_norm(query, index.dim());
    const auto top = select_top(index.ids(), k, index.size(), subset,
                                [&](std::size_t pos) { return index.score(pos, query, qn); });
    RankedList list{std::move(query_id), {}, k};
    list.items.reserve(top.size());
    for (const auto& c : top) list.items.push_back({index.ids()[c.pos], c.score});
    return list;
}

Embedding CreatorEmbeddingCache::get_or_compute(const CreatorProfile& profile, const Encoder& encoder,
                                                const Vocabulary& vocab, const AttributeSet& included) {
    const std::string context = serialize_creator_context(profile, included);
    const std::uint64_t fp = fingerprint(context);
    {
        std::shared_lock lock(mutex_);
        if (auto it = entries_.find(fp); it != entries_.end()) {
            for (const auto& e : it->second) {
                if (e.context == context) {
                    ++hits_;
                    return e.embedding;
                }
            }
        }
    }
    Embedding fresh = encoder(tokenize_for_role(context, vocab, Role::Creator));
    ++misses_;
    std::unique_lock lock(mutex_);
    auto& bucket = entries_[fp];
    for (const auto& e : bucket)
        if (e.context == context) return e.embedding;  // another writer got here first
    bucket.push_back({context, fresh});
    return fresh;
}

void CreatorEmbeddingCache::flush() {
    std::unique_lock lock(mutex_);
    entries_.clear();
}

std::size_t CreatorEmbeddingCache::size() const {
    std::shared_lock lock(mutex_);
    std::size_t n = 0;
    for (const auto& [_, bucket] : entries_) n += bucket.size();
    return n;
}

void CreatorEmbeddingCache::for_each(
    const std::function<void(const std::string&, const Embedding&)>& fn) const {
    std::shared_lock lock(mutex_);
    for (const auto& [_, bucket] : entries_)
        for (const auto& e : bucket) fn(e.context, e.embedding);
}

RankedList late_fusion_retrieve(const Embedding& news_emb, const DenseIndex& tweet_index,
                                const DenseIndex& creator_index,
                                const std::unordered_map<std::string, std::string>& tweet_to_creator,
                                const LateFusionConfig& cfg, std::string query_id,
                                std::optional<std::span<const std::size_t>> subset) {
    cfg.validate();
    const double qn_tweet = checked_norm(news_emb, tweet_index.dim());
    const double qn_creator = checked_norm(news_emb, creator_index.dim());
    const std::size_t n = tweet_index.size();

    std::vector<double> creator_scores(creator_index.size());
    for (std::size_t c = 0; c < creator_index.size(); ++c)
        creator_scores[c] = creator_index.score(c, news_emb, qn_creator);

    // tweet position -> creator position, checked for every eligible tweet
    std::vector<std::size_t> creator_of(n, 0);
    auto map_tweet = [&](std::size_t pos) {
        const auto& tid = tweet_index.ids()[pos];
        auto it = tweet_to_creator.find(tid);
        if (it == tweet_to_creator.end()) throw InvalidInput("late_fusion_retrieve: unmapped tweet id " + tid);
        auto cpos = creator_index.position(it->second);
        if (!cpos)
            throw InvalidInput("late_fusion_retrieve: creator " + it->second + " of tweet " + tid +
                               " missing from creator index");
        creator_of[pos] = *cpos;
    };
    if (subset) {
        for (std::size_t pos : *subset) {
            if (pos >= n) throw InvalidInput("candidate position outside index");
            map_tweet(pos);
        }
    } else {
        for (std::size_t pos = 0; pos < n; ++pos) map_tweet(pos);
    }

    auto tweet_score = [&](std::size_t pos) { return tweet_index.score(pos, news_emb, qn_tweet); };
    auto creator_score = [&](std::size_t pos) { return creator_scores[creator_of[pos]]; };

    const auto by_tweet = select_top(tweet_index.ids(), cfg.stage_depth, n, subset, tweet_score);
    const auto by_creator = select_top(tweet_index.ids(), cfg.stage_depth, n, subset, creator_score);

    std::vector<std::size_t> pool;
    pool.reserve(by_tweet.size() + by_creator.size());
    for (const auto& c : by_tweet) pool.push_back(c.pos);
    for (const auto& c : by_creator) pool.push_back(c.pos);
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

    const auto top = select_top(tweet_index.ids(), cfg.final_k, n, std::span<const std::size_t>(pool),
                                [&](std::size_t pos) {
                                    return late_combine_scores(tweet_score(pos), creator_score(pos), cfg.alpha);
                                });
    RankedList list{std::move(query_id), {}, cfg.final_k};
    list.items.reserve(top.size());
    for (const auto& c : top) list.items.push_back({tweet_index.ids()[c.pos], c.score});
    return list;
}

} // namespace tweetrec

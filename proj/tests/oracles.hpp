#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "tweetrec/bm25.hpp"
#include "tweetrec/evaluation.hpp"
#include "tweetrec/retrieval.hpp"
#include "tweetrec/textprep.hpp"
#include "tweetrec/training.hpp"

/// Independent reference implementations used by the unit and acceptance
/// tests. They favour exhaustive enumeration and plain loops over speed.
namespace oracle {

using namespace tweetrec;
using boost::multiprecision::cpp_int;

inline cpp_int power(cpp_int base, std::size_t exp) {
    cpp_int r = 1;
    for (std::size_t i = 0; i < exp; ++i) r *= base;
    return r;
}

/// Enumerates all 2^(L-1) splits of token and keeps the one with the highest
/// product of unigram probabilities, compared exactly as rationals. Ties go
/// to fewer segments, then the lexicographically smallest segment list.
inline std::vector<std::string> segment_exhaustive(std::string_view token, const UnigramDictionary& dict) {
    const std::size_t n = token.size();
    if (n == 0 || n > kMaxSegmentableLength) return {std::string(token)};
    const cpp_int total = dict.total();
    std::optional<std::vector<std::string>> best;
    cpp_int best_prod;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (n - 1)); ++mask) {
        std::vector<std::string> pieces;
        std::size_t start = 0;
        for (std::size_t i = 1; i <= n; ++i) {
            if (i == n || (mask >> (i - 1)) & 1U) {
                pieces.emplace_back(token.substr(start, i - start));
                start = i;
            }
        }
        cpp_int prod = 1;
        bool valid = true;
        for (const auto& p : pieces) {
            const auto c = dict.count(p);
            if (c == 0) {
                valid = false;
                break;
            }
            prod *= c;
        }
        if (!valid) continue;
        bool better = !best;
        if (best) {
            const cpp_int lhs = prod * power(total, best->size());
            const cpp_int rhs = best_prod * power(total, pieces.size());
            if (lhs != rhs) {
                better = lhs > rhs;
            } else if (pieces.size() != best->size()) {
                better = pieces.size() < best->size();
            } else {
                better = pieces < *best;
            }
        }
        if (better) {
            best = std::move(pieces);
            best_prod = prod;
        }
    }
    return best ? *best : std::vector<std::string>{std::string(token)};
}

inline double cosine_loop(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline bool ranks_before(const ScoredItem& x, const ScoredItem& y) {
    return x.score != y.score ? x.score > y.score : x.id < y.id;
}

/// Scores every record with the index's cosine expression and fully sorts.
inline std::vector<ScoredItem> full_sort_top_k(std::span<const EmbeddingRecord> records, const Eigen::VectorXd& q,
                                               std::size_t k) {
    std::vector<ScoredItem> all;
    const double qn = q.norm();
    for (const auto& r : records) all.push_back({r.id, r.vector.dot(q) / (r.vector.norm() * qn)});
    std::sort(all.begin(), all.end(), ranks_before);
    if (all.size() > k) all.resize(k);
    return all;
}

/// Combined score of every tweet in the pool, fully sorted.
inline std::vector<ScoredItem> late_fusion_exhaustive(const Eigen::VectorXd& news,
                                                      std::span<const EmbeddingRecord> tweets,
                                                      const std::map<std::string, Eigen::VectorXd>& creator_vecs,
                                                      const std::map<std::string, std::string>& tweet_to_creator,
                                                      double alpha, std::size_t k) {
    std::vector<ScoredItem> all;
    const double qn = news.norm();
    for (const auto& t : tweets) {
        const auto& c = creator_vecs.at(tweet_to_creator.at(t.id));
        const double st = t.vector.dot(news) / (t.vector.norm() * qn);
        const double sc = c.dot(news) / (c.norm() * qn);
        all.push_back({t.id, alpha * sc + (1.0 - alpha) * st});
    }
    std::sort(all.begin(), all.end(), ranks_before);
    if (all.size() > k) all.resize(k);
    return all;
}

/// Per-query metrics by direct counting: P@1, P@5, R@100, R@1000, MRR.
inline std::array<double, 5> query_metrics(const RankedList& run, const std::set<std::string>& relevant) {
    std::array<double, 5> v{};
    std::size_t hits1 = 0, hits5 = 0, hits100 = 0, hits1000 = 0;
    double rr = 0.0;
    std::set<std::string> found;
    for (std::size_t i = 0; i < run.items.size(); ++i) {
        const auto& id = run.items[i].id;
        if (!relevant.count(id) || found.count(id)) continue;
        found.insert(id);
        const std::size_t rank = i + 1;
        if (rank <= 1) ++hits1;
        if (rank <= 5) ++hits5;
        if (rank <= 100) ++hits100;
        if (rank <= 1000) ++hits1000;
        if (rr == 0.0) rr = 1.0 / static_cast<double>(rank);
    }
    v[0] = static_cast<double>(hits1) / 1.0;
    v[1] = static_cast<double>(hits5) / 5.0;
    v[2] = static_cast<double>(hits100) / static_cast<double>(relevant.size());
    v[3] = static_cast<double>(hits1000) / static_cast<double>(relevant.size());
    v[4] = rr;
    return v;
}

/// BM25 from raw term lists, no inverted index.
inline double bm25_direct(const std::vector<std::vector<std::string>>& docs, std::size_t doc,
                          std::span<const std::string> query, const Bm25Params& p) {
    const double n = static_cast<double>(docs.size());
    double total_len = 0.0;
    for (const auto& d : docs) total_len += static_cast<double>(d.size());
    const double avgdl = total_len / n;
    const double dl = static_cast<double>(docs[doc].size());
    double score = 0.0;
    for (const auto& term : query) {
        double df = 0.0;
        for (const auto& d : docs)
            if (std::find(d.begin(), d.end(), term) != d.end()) df += 1.0;
        const double tf = static_cast<double>(std::count(docs[doc].begin(), docs[doc].end(), term));
        if (tf == 0.0) continue;
        const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
        score += idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * dl / avgdl));
    }
    return score;
}

/// Scores every tweet against the title terms and sorts; zero scores dropped.
inline std::vector<ScoredItem> bm25_score_all(std::span<const Tweet> tweets, const UnigramDictionary& dict,
                                              const Bm25Params& p, std::string_view title, std::size_t k) {
    std::vector<std::vector<std::string>> docs;
    for (const auto& t : tweets) docs.push_back(analyze_terms(t.text, dict));
    const auto query = analyze_terms(title, dict);
    std::vector<ScoredItem> all;
    for (std::size_t i = 0; i < tweets.size(); ++i) {
        const double s = bm25_direct(docs, i, query, p);
        if (s > 0.0) all.push_back({tweets[i].tweet_id, s});
    }
    std::sort(all.begin(), all.end(), ranks_before);
    if (all.size() > k) all.resize(k);
    return all;
}

/// Largest relative error between analytic gradients and central finite
/// differences over every trainable parameter (news encoder included) of a
/// random d=4, B=3 instance.
inline double gradient_check(FusionKind kind, std::uint64_t seed) {
    const TokenId vocab = 10;
    const Eigen::Index dim = 4;
    RetrievalModel m = RetrievalModel::initialize(kind, EncoderConfig{vocab, dim, seed}, 0);
    Rng rng(mix_seed(seed, 99));
    auto jitter = [&](Eigen::Ref<Eigen::MatrixXd> x) {
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += rng.uniform(-0.3, 0.3);
    };
    auto jitter_encoder = [&](EncoderParams<double>& p) {
        jitter(p.token_table);
        jitter(p.proj_weight);
        jitter(p.proj_bias);
    };
    jitter_encoder(m.news);
    jitter_encoder(m.tweet);
    if (m.creator) jitter_encoder(*m.creator);
    if (m.fusion) {
        jitter(m.fusion->fc_weight);
        jitter(m.fusion->fc_bias);
    }
    auto random_seq = [&](std::size_t len, Role role) {
        TokenSequence s{{}, role};
        for (std::size_t i = 0; i < len; ++i) s.ids.push_back(static_cast<TokenId>(rng.index(vocab)));
        return s;
    };
    TrainingBatch batch;
    if (m.uses_creator_encoder()) batch.creator_seqs.emplace();
    for (int i = 0; i < 3; ++i) {
        batch.news_seqs.push_back(random_seq(1 + rng.index(4), Role::News));
        batch.side_seqs.push_back(
            random_seq(1 + rng.index(4), kind == FusionKind::EarlyFusion ? Role::EarlyFusion : Role::Tweet));
        if (batch.creator_seqs) batch.creator_seqs->push_back(random_seq(1 + rng.index(3), Role::Creator));
    }
    const double scale = 10.0;
    const LossAndGradient lg = loss_and_gradient(m, batch, scale, true);

    double worst = 0.0;
    const double h = 1e-4;
    auto check = [&](double& x, double analytic) {
        const double saved = x;
        auto at = [&](double offset) {
            x = saved + offset;
            return batch_loss(m, batch, scale);
        };
        const double numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
        x = saved;
        worst = std::max(worst, std::abs(analytic - numeric) / std::max(std::abs(numeric), 1e-8));
    };
    auto check_encoder = [&](EncoderParams<double>& p, const EncoderGradient& g) {
        const Eigen::MatrixXd table = g.dense_table(vocab);
        for (Eigen::Index i = 0; i < p.token_table.size(); ++i) check(p.token_table.data()[i], table.data()[i]);
        for (Eigen::Index i = 0; i < p.proj_weight.size(); ++i) check(p.proj_weight.data()[i], g.weight.data()[i]);
        for (Eigen::Index i = 0; i < p.proj_bias.size(); ++i) check(p.proj_bias[i], g.bias[i]);
    };
    check_encoder(m.news, *lg.gradient.news);
    check_encoder(m.tweet, lg.gradient.tweet);
    if (m.creator) check_encoder(*m.creator, *lg.gradient.creator);
    if (m.fusion) {
        for (Eigen::Index i = 0; i < m.fusion->fc_weight.size(); ++i)
            check(m.fusion->fc_weight.data()[i], lg.gradient.fusion->fc_weight.data()[i]);
        for (Eigen::Index i = 0; i < m.fusion->fc_bias.size(); ++i)
            check(m.fusion->fc_bias[i], lg.gradient.fusion->fc_bias[i]);
    }
    return worst;
}

/// Files under dir, relative path to contents.
inline std::map<std::string, std::string> directory_contents(const std::filesystem::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).string()] = read_file(e.path());
    return out;
}

} // namespace oracle

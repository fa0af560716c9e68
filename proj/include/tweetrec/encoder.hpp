#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "tweetrec/common.hpp"

namespace tweetrec {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Pooled sequence embedding (stand-in for a top-layer [CLS] vector).
using Embedding = Vector<double>;

struct EncoderConfig {
    Eigen::Index vocab_size = 0;
    Eigen::Index dim = 64;
    std::uint64_t seed = 0;

    void validate() const {
        if (vocab_size < 2) throw InvalidInput("encoder vocab_size must be >= 2");
        if (dim < 2) throw InvalidInput("encoder dim must be >= 2");
    }
};

/// Token rows are drawn from U(-1, 1).
inline constexpr double kTableInitRange = 1.0;

/// Variance-preserving bound sqrt(3 / fan_in) for a dense layer.
inline double dense_init_range(Eigen::Index fan_in) { return std::sqrt(3.0 / static_cast<double>(fan_in)); }

/// Mean-pooled token table followed by one affine projection.
template <typename Scalar>
struct EncoderParams {
    Matrix<Scalar> token_table;  // vocab_size x d, one row per token
    Matrix<Scalar> proj_weight;  // d x d
    Vector<Scalar> proj_bias;    // d

    Eigen::Index dim() const { return proj_bias.size(); }
    Eigen::Index vocab_size() const { return token_table.rows(); }

    bool all_finite() const {
        return token_table.allFinite() && proj_weight.allFinite() && proj_bias.allFinite();
    }

    /// Table uniform in [-1, 1], weight uniform in +-sqrt(3 / d), bias zero.
    static EncoderParams initialize(const EncoderConfig& cfg) {
        cfg.validate();
        Rng rng(cfg.seed);
        EncoderParams p;
        p.token_table.resize(cfg.vocab_size, cfg.dim);
        p.proj_weight.resize(cfg.dim, cfg.dim);
        p.proj_bias = Vector<Scalar>::Zero(cfg.dim);
        // Column-major fill order is part of the reproducibility contract.
        for (Eigen::Index i = 0; i < p.token_table.size(); ++i)
            p.token_table.data()[i] = static_cast<Scalar>(rng.uniform(-kTableInitRange, kTableInitRange));
        const double bound = dense_init_range(cfg.dim);
        for (Eigen::Index i = 0; i < p.proj_weight.size(); ++i)
            p.proj_weight.data()[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
        return p;
    }
};

/// Mean of the token-table rows of ids. Throws on empty input or ids out of range.
template <typename Scalar>
Vector<Scalar> mean_pool(const EncoderParams<Scalar>& params, std::span<const TokenId> ids) {
    if (ids.empty()) throw InvalidInput("encode_sequence: empty token sequence");
    Vector<Scalar> acc = Vector<Scalar>::Zero(params.dim());
    for (TokenId id : ids) {
        if (id < 0 || id >= params.vocab_size())
            throw InvalidInput("encode_sequence: token id " + std::to_string(id) + " out of range");
        acc += params.token_table.row(id).transpose();
    }
    return acc / static_cast<Scalar>(ids.size());
}

/// proj_weight * mean(token rows) + proj_bias.
template <typename Scalar>
Vector<Scalar> encode_sequence(const EncoderParams<Scalar>& params, std::span<const TokenId> ids) {
    return params.proj_weight * mean_pool(params, ids) + params.proj_bias;
}

/// dot(a, b) / (|a| |b|). Throws on a zero-norm argument.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    if (a.size() != b.size()) throw InvalidInput("cosine_similarity: dimension mismatch");
    const Scalar na = a.norm();
    const Scalar nb = b.norm();
    if (na == Scalar(0) || nb == Scalar(0)) throw InvalidInput("cosine_similarity: zero-norm vector");
    return a.dot(b) / (na * nb);
}

enum class FusionKind : std::uint8_t { Base, EarlyFusion, IntermediateFusion, LateFusion };

std::string_view fusion_kind_name(FusionKind k);
FusionKind parse_fusion_kind(std::string_view name);

/// Attention-cost query: tweet length n, creator-context length m.
struct CostQuery {
    FusionKind kind = FusionKind::Base;
    std::uint64_t n = 0;
    std::uint64_t m = 0;
    bool cache_hit = false;
};

/// Base n^2; Early (n+m)^2; Intermediate/Late n^2 + m^2, or n^2 on a
/// creator-cache hit.
constexpr std::uint64_t estimate_encode_cost(const CostQuery& q) {
    switch (q.kind) {
    case FusionKind::Base: return q.n * q.n;
    case FusionKind::EarlyFusion: return (q.n + q.m) * (q.n + q.m);
    case FusionKind::IntermediateFusion:
    case FusionKind::LateFusion: return q.n * q.n + (q.cache_hit ? 0 : q.m * q.m);
    }
    return 0;
}

} // namespace tweetrec

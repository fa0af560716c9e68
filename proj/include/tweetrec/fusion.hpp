#pragma once

#include <cstdint>

#include "tweetrec/encoder.hpp"

namespace tweetrec {

/// Fully connected layer over concat(tweet, creator): d x 2d weight plus bias,
/// no activation.
template <typename Scalar>
struct IntermediateParams {
    Matrix<Scalar> fc_weight;  // d x 2d
    Vector<Scalar> fc_bias;    // d

    Eigen::Index dim() const { return fc_bias.size(); }

    bool all_finite() const { return fc_weight.allFinite() && fc_bias.allFinite(); }

    static IntermediateParams initialize(Eigen::Index dim, std::uint64_t seed) {
        if (dim < 2) throw InvalidInput("intermediate fusion dim must be >= 2");
        Rng rng(seed);
        IntermediateParams p;
        p.fc_weight.resize(dim, 2 * dim);
        p.fc_bias = Vector<Scalar>::Zero(dim);
        const double bound = dense_init_range(2 * dim);
        for (Eigen::Index i = 0; i < p.fc_weight.size(); ++i)
            p.fc_weight.data()[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
        return p;
    }

    /// fc_weight = [I/2 | I/2], zero bias: the fused vector starts as the
    /// average of the tweet and creator embeddings.
    static IntermediateParams averaging(Eigen::Index dim) {
        if (dim < 2) throw InvalidInput("intermediate fusion dim must be >= 2");
        IntermediateParams p;
        p.fc_weight = Matrix<Scalar>::Zero(dim, 2 * dim);
        p.fc_weight.leftCols(dim).diagonal().setConstant(Scalar(0.5));
        p.fc_weight.rightCols(dim).diagonal().setConstant(Scalar(0.5));
        p.fc_bias = Vector<Scalar>::Zero(dim);
        return p;
    }
};

/// fc_weight * [tweet; creator] + fc_bias.
template <typename Scalar, typename DerivedT, typename DerivedC>
Vector<Scalar> fuse_intermediate(const Eigen::MatrixBase<DerivedT>& tweet_emb,
                                 const Eigen::MatrixBase<DerivedC>& creator_emb,
                                 const IntermediateParams<Scalar>& params) {
    const Eigen::Index d = params.dim();
    if (tweet_emb.size() != d || creator_emb.size() != d || params.fc_weight.rows() != d ||
        params.fc_weight.cols() != 2 * d)
        throw InvalidInput("fuse_intermediate: dimension mismatch");
    return params.fc_weight.leftCols(d) * tweet_emb + params.fc_weight.rightCols(d) * creator_emb +
           params.fc_bias;
}

struct LateFusionConfig {
    double alpha = 0.5;
    std::size_t stage_depth = 20000;
    std::size_t final_k = 1000;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("late fusion alpha must lie in [0, 1]");
        if (final_k > stage_depth) throw InvalidInput("late fusion final_k must not exceed stage_depth");
    }
};

/// alpha * s_creator + (1 - alpha) * s_tweet.
inline double late_combine_scores(double s_tweet, double s_creator, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("late_combine_scores: alpha outside [0, 1]");
    return alpha * s_creator + (1.0 - alpha) * s_tweet;
}

} // namespace tweetrec

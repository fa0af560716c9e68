#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "tweetrec/model.hpp"

namespace tweetrec {

/// Cosine similarities S(i, j) = cos(news_i, side_j); the diagonal holds
/// the positive pairs.
using ScoreMatrix = Eigen::MatrixXd;

struct TrainConfig {
    std::size_t batch_size = 32;
    /// Step size for the dense projection and fusion layers.
    double learning_rate = 0.03;
    /// Step size for token-table rows; learning_rate when unset.
    std::optional<double> embedding_learning_rate = 100.0;
    std::size_t steps = 2000;
    /// Logit multiplier applied to cosine scores.
    double scale = 10.0;
    bool freeze_news = true;
    std::uint64_t seed = 0;

    void validate() const;
    double table_rate() const { return embedding_learning_rate.value_or(learning_rate); }
};

/// Index i across all lists is one positive pair. side_seqs holds tweet
/// sequences (or combined early-fusion sequences for Early).
struct TrainingBatch {
    std::vector<TokenSequence> news_seqs;
    std::vector<TokenSequence> side_seqs;
    std::optional<std::vector<TokenSequence>> creator_seqs;

    std::size_t size() const { return news_seqs.size(); }
    void validate(FusionKind kind) const;
};

/// Every sequence a positive pair can contribute, whichever kind consumes it.
struct TrainingExample {
    TokenSequence news;
    TokenSequence tweet;
    TokenSequence creator;
    TokenSequence early;
};

TrainingBatch make_batch(FusionKind kind, std::span<const TrainingExample> examples,
                         std::span<const std::size_t> indices);

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

ScoreMatrix in_batch_scores(std::span<const Embedding> news_embs, std::span<const Embedding> side_embs);

/// Mean over all B*B entries of sigmoid cross-entropy between
/// sigmoid(scale * S(i, j)) and the identity label.
double in_batch_loss(const ScoreMatrix& scores, double scale);

/// Sparse token-table rows plus dense projection gradients.
struct EncoderGradient {
    std::map<TokenId, Eigen::VectorXd> table_rows;
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;

    explicit EncoderGradient(Eigen::Index dim = 0)
        : weight(Eigen::MatrixXd::Zero(dim, dim)), bias(Eigen::VectorXd::Zero(dim)) {}

    Eigen::MatrixXd dense_table(Eigen::Index vocab_size) const;
    bool all_finite() const;
};

struct ModelGradient {
    std::optional<EncoderGradient> news;  // absent when the news encoder is frozen
    EncoderGradient tweet;
    std::optional<EncoderGradient> creator;
    std::optional<IntermediateParams<double>> fusion;

    bool all_finite() const;
};

struct LossAndGradient {
    double loss = 0.0;
    ModelGradient gradient;
};

/// Forward-only training objective for batch. Late Fusion sums the
/// news-tweet and news-creator in-batch losses.
double batch_loss(const RetrievalModel& model, const TrainingBatch& batch, double scale);

LossAndGradient loss_and_gradient(const RetrievalModel& model, const TrainingBatch& batch,
                                  double scale, bool include_news);

/// One SGD update of every unfrozen parameter; returns the pre-update loss.
/// Throws TrainingError (parameters untouched) on a non-finite loss or gradient.
double train_step(RetrievalModel& model, const TrainingBatch& batch, const TrainConfig& cfg);

struct TrainLogEntry {
    std::size_t step = 0;
    double loss = 0.0;
};

/// cfg.steps updates over reshuffled epochs of examples (incomplete tail
/// batches dropped). on_step, when set, sees every log entry.
std::vector<TrainLogEntry> train(RetrievalModel& model, std::span<const TrainingExample> examples,
                                 const TrainConfig& cfg,
                                 const std::function<void(const TrainLogEntry&)>& on_step = {});

/// Mean batch_loss over consecutive batches of batch_size (tail dropped
/// unless it is the only batch).
double evaluation_loss(const RetrievalModel& model, std::span<const TrainingExample> examples,
                       std::size_t batch_size, double scale);

std::string train_log_to_jsonl(std::span<const TrainLogEntry> log);

} // namespace tweetrec

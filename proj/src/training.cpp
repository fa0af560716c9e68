#include "tweetrec/training.hpp"

#include <cmath>
#include <numeric>

#include <json.hpp>

namespace tweetrec {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

struct EncoderPass {
    MatrixXd pooled;  // d x B mean token rows
    MatrixXd out;     // d x B encoder outputs
    std::vector<std::span<const TokenId>> ids;
};

EncoderPass forward(const EncoderParams<double>& p, const std::vector<TokenSequence>& seqs,
                    const TokenId& blank) {
    const auto b = static_cast<Eigen::Index>(seqs.size());
    EncoderPass pass;
    pass.pooled.resize(p.dim(), b);
    pass.ids.reserve(seqs.size());
    for (Eigen::Index i = 0; i < b; ++i) {
        pass.ids.push_back(ids_or_blank(seqs[static_cast<std::size_t>(i)], blank));
        pass.pooled.col(i) = mean_pool(p, pass.ids.back());
    }
    pass.out = (p.proj_weight * pass.pooled).colwise() + p.proj_bias;
    return pass;
}

void backward(const EncoderParams<double>& p, const EncoderPass& pass, const MatrixXd& grad_out,
              EncoderGradient& g) {
    g.weight += grad_out * pass.pooled.transpose();
    g.bias += grad_out.rowwise().sum();
    const MatrixXd grad_pooled = p.proj_weight.transpose() * grad_out;
    for (Eigen::Index i = 0; i < grad_pooled.cols(); ++i) {
        const auto& ids = pass.ids[static_cast<std::size_t>(i)];
        const VectorXd share = grad_pooled.col(i) / static_cast<double>(ids.size());
        for (TokenId id : ids) {
            auto [it, inserted] = g.table_rows.try_emplace(id, VectorXd::Zero(p.dim()));
            it->second += share;
        }
    }
}

VectorXd column_norms(const MatrixXd& m) {
    VectorXd n = m.colwise().norm().transpose();
    for (Eigen::Index i = 0; i < n.size(); ++i)
        if (!(n[i] > 0.0)) throw TrainingError("zero-norm or non-finite embedding in batch");
    return n;
}

// Scores of the column sets plus the pieces the backward pass needs.
struct CosineLayer {
    MatrixXd news_unit;
    MatrixXd side_unit;
    VectorXd news_norm;
    VectorXd side_norm;
    ScoreMatrix scores;

    CosineLayer(const MatrixXd& news, const MatrixXd& side)
        : news_norm(column_norms(news)), side_norm(column_norms(side)) {
        news_unit = news.array().rowwise() / news_norm.transpose().array();
        side_unit = side.array().rowwise() / side_norm.transpose().array();
        scores = news_unit.transpose() * side_unit;
    }

    // Chain rule through the column normalization.
    static MatrixXd through_norm(const MatrixXd& unit, const VectorXd& norm, const MatrixXd& d_unit) {
        MatrixXd d = d_unit;
        for (Eigen::Index i = 0; i < d.cols(); ++i)
            d.col(i) = (d_unit.col(i) - unit.col(i) * unit.col(i).dot(d_unit.col(i))) / norm[i];
        return d;
    }

    MatrixXd d_news(const MatrixXd& d_scores) const {
        return through_norm(news_unit, news_norm, side_unit * d_scores.transpose());
    }
    MatrixXd d_side(const MatrixXd& d_scores) const {
        return through_norm(side_unit, side_norm, news_unit * d_scores);
    }
};

MatrixXd loss_gradient(const ScoreMatrix& s, double scale) {
    const auto b = s.rows();
    const double norm = static_cast<double>(b * b);
    MatrixXd g(b, b);
    for (Eigen::Index i = 0; i < b; ++i)
        for (Eigen::Index j = 0; j < b; ++j)
            g(i, j) = scale * (sigmoid(scale * s(i, j)) - (i == j ? 1.0 : 0.0)) / norm;
    return g;
}

void add_to(EncoderParams<double>& p, const EncoderGradient& g, double lr, double table_lr) {
    for (const auto& [row, grad] : g.table_rows) p.token_table.row(row) -= table_lr * grad.transpose();
    p.proj_weight -= lr * g.weight;
    p.proj_bias -= lr * g.bias;
}

} // namespace

void TrainConfig::validate() const {
    if (batch_size < 2) throw InvalidInput("batch_size must be >= 2");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw InvalidInput("learning_rate must be finite and >= 0");
    if (embedding_learning_rate && (!(*embedding_learning_rate >= 0.0) || !std::isfinite(*embedding_learning_rate)))
        throw InvalidInput("embedding_learning_rate must be finite and >= 0");
    if (steps == 0) throw InvalidInput("steps must be > 0");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidInput("scale must be > 0");
}

void TrainingBatch::validate(FusionKind kind) const {
    if (news_seqs.size() < 2) throw InvalidInput("training batch needs at least 2 pairs");
    if (side_seqs.size() != news_seqs.size()) throw InvalidInput("training batch lists differ in length");
    const bool needs_creator =
        kind == FusionKind::IntermediateFusion || kind == FusionKind::LateFusion;
    if (needs_creator && (!creator_seqs || creator_seqs->size() != news_seqs.size()))
        throw InvalidInput("training batch for this model kind needs creator sequences");
}

TrainingBatch make_batch(FusionKind kind, std::span<const TrainingExample> examples,
                         std::span<const std::size_t> indices) {
    TrainingBatch batch;
    const bool needs_creator =
        kind == FusionKind::IntermediateFusion || kind == FusionKind::LateFusion;
    if (needs_creator) batch.creator_seqs.emplace();
    for (std::size_t i : indices) {
        const auto& ex = examples[i];
        batch.news_seqs.push_back(ex.news);
        batch.side_seqs.push_back(kind == FusionKind::EarlyFusion ? ex.early : ex.tweet);
        if (needs_creator) batch.creator_seqs->push_back(ex.creator);
    }
    return batch;
}

ScoreMatrix in_batch_scores(std::span<const Embedding> news_embs, std::span<const Embedding> side_embs) {
    if (news_embs.size() != side_embs.size() || news_embs.empty())
        throw InvalidInput("in_batch_scores: lists must be non-empty and of equal length");
    const Eigen::Index d = news_embs.front().size();
    const auto b = static_cast<Eigen::Index>(news_embs.size());
    MatrixXd news(d, b), side(d, b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const auto& n = news_embs[static_cast<std::size_t>(i)];
        const auto& s = side_embs[static_cast<std::size_t>(i)];
        if (n.size() != d || s.size() != d) throw InvalidInput("in_batch_scores: dimension mismatch");
        news.col(i) = n;
        side.col(i) = s;
    }
    try {
        return CosineLayer(news, side).scores;
    } catch (const TrainingError&) {
        throw InvalidInput("in_batch_scores: zero-norm embedding");
    }
}

double in_batch_loss(const ScoreMatrix& scores, double scale) {
    if (!(scale > 0.0)) throw InvalidInput("in_batch_loss: scale must be > 0");
    const auto b = scores.rows();
    if (b == 0 || scores.cols() != b) throw InvalidInput("in_batch_loss: score matrix must be square");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < b; ++i)
        for (Eigen::Index j = 0; j < b; ++j) {
            const double z = scale * scores(i, j);
            sum += softplus(z) - (i == j ? z : 0.0);
        }
    return sum / static_cast<double>(b * b);
}

Eigen::MatrixXd EncoderGradient::dense_table(Eigen::Index vocab_size) const {
    MatrixXd t = MatrixXd::Zero(vocab_size, bias.size());
    for (const auto& [row, g] : table_rows) t.row(row) = g.transpose();
    return t;
}

bool EncoderGradient::all_finite() const {
    for (const auto& [_, g] : table_rows)
        if (!g.allFinite()) return false;
    return weight.allFinite() && bias.allFinite();
}

bool ModelGradient::all_finite() const {
    return (!news || news->all_finite()) && tweet.all_finite() &&
           (!creator || creator->all_finite()) && (!fusion || fusion->all_finite());
}

LossAndGradient loss_and_gradient(const RetrievalModel& model, const TrainingBatch& batch,
                                  double scale, bool include_news) {
    batch.validate(model.kind);
    const Eigen::Index d = model.config.dim;
    LossAndGradient result;
    ModelGradient& g = result.gradient;
    g.tweet = EncoderGradient(d);

    const EncoderPass news = forward(model.news, batch.news_seqs, model.blank_id);
    const EncoderPass tweet = forward(model.tweet, batch.side_seqs, model.blank_id);
    MatrixXd d_news = MatrixXd::Zero(d, news.out.cols());

    switch (model.kind) {
    case FusionKind::Base:
    case FusionKind::EarlyFusion: {
        const CosineLayer cos(news.out, tweet.out);
        result.loss = in_batch_loss(cos.scores, scale);
        const MatrixXd ds = loss_gradient(cos.scores, scale);
        d_news = cos.d_news(ds);
        backward(model.tweet, tweet, cos.d_side(ds), g.tweet);
        break;
    }
    case FusionKind::IntermediateFusion: {
        const auto& fc = *model.fusion;
        const EncoderPass creator = forward(*model.creator, *batch.creator_seqs, model.blank_id);
        const MatrixXd fused =
            (fc.fc_weight.leftCols(d) * tweet.out + fc.fc_weight.rightCols(d) * creator.out).colwise() +
            fc.fc_bias;
        const CosineLayer cos(news.out, fused);
        result.loss = in_batch_loss(cos.scores, scale);
        const MatrixXd ds = loss_gradient(cos.scores, scale);
        d_news = cos.d_news(ds);
        const MatrixXd d_fused = cos.d_side(ds);
        MatrixXd stacked(2 * d, fused.cols());
        stacked << tweet.out, creator.out;
        IntermediateParams<double> fg;
        fg.fc_weight = d_fused * stacked.transpose();
        fg.fc_bias = d_fused.rowwise().sum();
        g.fusion = std::move(fg);
        g.creator = EncoderGradient(d);
        backward(model.tweet, tweet, fc.fc_weight.leftCols(d).transpose() * d_fused, g.tweet);
        backward(*model.creator, creator, fc.fc_weight.rightCols(d).transpose() * d_fused, *g.creator);
        break;
    }
    case FusionKind::LateFusion: {
        const EncoderPass creator = forward(*model.creator, *batch.creator_seqs, model.blank_id);
        const CosineLayer cos_t(news.out, tweet.out);
        const CosineLayer cos_c(news.out, creator.out);
        result.loss = in_batch_loss(cos_t.scores, scale) + in_batch_loss(cos_c.scores, scale);
        const MatrixXd ds_t = loss_gradient(cos_t.scores, scale);
        const MatrixXd ds_c = loss_gradient(cos_c.scores, scale);
        d_news = cos_t.d_news(ds_t) + cos_c.d_news(ds_c);
        g.creator = EncoderGradient(d);
        backward(model.tweet, tweet, cos_t.d_side(ds_t), g.tweet);
        backward(*model.creator, creator, cos_c.d_side(ds_c), *g.creator);
        break;
    }
    }
    if (include_news) {
        g.news = EncoderGradient(d);
        backward(model.news, news, d_news, *g.news);
    }
    return result;
}

double batch_loss(const RetrievalModel& model, const TrainingBatch& batch, double scale) {
    batch.validate(model.kind);
    std::vector<Embedding> news, side, creator;
    for (const auto& s : batch.news_seqs) news.push_back(model.encode_news(s));
    if (model.kind == FusionKind::LateFusion) {
        for (const auto& s : batch.side_seqs) side.push_back(model.encode_tweet(s));
        for (const auto& s : *batch.creator_seqs) creator.push_back(model.encode_creator(s));
        return in_batch_loss(in_batch_scores(news, side), scale) +
               in_batch_loss(in_batch_scores(news, creator), scale);
    }
    for (std::size_t i = 0; i < batch.size(); ++i)
        side.push_back(model.encode_side(batch.side_seqs[i],
                                         batch.creator_seqs ? &(*batch.creator_seqs)[i] : nullptr));
    return in_batch_loss(in_batch_scores(news, side), scale);
}

double train_step(RetrievalModel& model, const TrainingBatch& batch, const TrainConfig& cfg) {
    cfg.validate();
    LossAndGradient lg = loss_and_gradient(model, batch, cfg.scale, !cfg.freeze_news);
    if (!std::isfinite(lg.loss)) throw TrainingError("non-finite loss " + std::to_string(lg.loss));
    if (!lg.gradient.all_finite()) throw TrainingError("non-finite gradient");
    const double lr = cfg.learning_rate;
    const double table_lr = cfg.table_rate();
    const ModelGradient& g = lg.gradient;
    if (g.news) add_to(model.news, *g.news, lr, table_lr);
    add_to(model.tweet, g.tweet, lr, table_lr);
    if (g.creator) add_to(*model.creator, *g.creator, lr, table_lr);
    if (g.fusion) {
        model.fusion->fc_weight -= lr * g.fusion->fc_weight;
        model.fusion->fc_bias -= lr * g.fusion->fc_bias;
    }
    return lg.loss;
}

std::vector<TrainLogEntry> train(RetrievalModel& model, std::span<const TrainingExample> examples,
                                 const TrainConfig& cfg,
                                 const std::function<void(const TrainLogEntry&)>& on_step) {
    cfg.validate();
    if (examples.size() < 2) throw InvalidInput("training needs at least 2 examples");
    const std::size_t batch = std::min(cfg.batch_size, examples.size());
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed);
    std::size_t pos = order.size();

    std::vector<TrainLogEntry> log;
    log.reserve(cfg.steps);
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        if (pos + batch > order.size()) {
            rng.shuffle(order);
            pos = 0;
        }
        const std::span<const std::size_t> idx(order.data() + pos, batch);
        pos += batch;
        double loss = 0.0;
        try {
            loss = train_step(model, make_batch(model.kind, examples, idx), cfg);
        } catch (const TrainingError& e) {
            throw TrainingError("step " + std::to_string(step) + ": " + e.what());
        }
        log.push_back({step, loss});
        if (on_step) on_step(log.back());
    }
    return log;
}

double evaluation_loss(const RetrievalModel& model, std::span<const TrainingExample> examples,
                       std::size_t batch_size, double scale) {
    if (examples.size() < 2) throw InvalidInput("evaluation_loss needs at least 2 examples");
    const std::size_t b = std::min(batch_size, examples.size());
    double sum = 0.0;
    std::size_t batches = 0;
    std::vector<std::size_t> idx(b);
    for (std::size_t start = 0; start + b <= examples.size(); start += b) {
        std::iota(idx.begin(), idx.end(), start);
        sum += batch_loss(model, make_batch(model.kind, examples, idx), scale);
        ++batches;
    }
    return sum / static_cast<double>(batches);
}

std::string train_log_to_jsonl(std::span<const TrainLogEntry> log) {
    std::string out;
    for (const auto& e : log) out += nlohmann::json{{"step", e.step}, {"loss", e.loss}}.dump() + "\n";
    return out;
}

} // namespace tweetrec

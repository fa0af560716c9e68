#include "tweetrec/model.hpp"

#include <json.hpp>

namespace tweetrec {

using nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

constexpr std::uint64_t kEncoderSalt = 1;

EncoderConfig salted(const EncoderConfig& cfg, std::uint64_t salt) {
    EncoderConfig c = cfg;
    c.seed = mix_seed(cfg.seed, salt);
    return c;
}

json tensor_to_json(const Matrix<double>& m) {
    std::vector<double> data(m.data(), m.data() + m.size());
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix<double> tensor_from_json(const json& j, const char* name) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size())
        throw InvalidInput(std::string("checkpoint tensor '") + name + "' has inconsistent shape");
    Matrix<double> m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

Vector<double> vector_from_json(const json& j, const char* name) {
    Matrix<double> m = tensor_from_json(j, name);
    if (m.cols() != 1) throw InvalidInput(std::string("checkpoint tensor '") + name + "' must be a column vector");
    return m.col(0);
}

json encoder_to_json(const EncoderParams<double>& p) {
    return {{"token_table", tensor_to_json(p.token_table)},
            {"proj_weight", tensor_to_json(p.proj_weight)},
            {"proj_bias", tensor_to_json(p.proj_bias)}};
}

EncoderParams<double> encoder_from_json(const json& j, const EncoderConfig& cfg) {
    EncoderParams<double> p;
    p.token_table = tensor_from_json(j.at("token_table"), "token_table");
    p.proj_weight = tensor_from_json(j.at("proj_weight"), "proj_weight");
    p.proj_bias = vector_from_json(j.at("proj_bias"), "proj_bias");
    if (p.token_table.rows() != cfg.vocab_size || p.token_table.cols() != cfg.dim ||
        p.proj_weight.rows() != cfg.dim || p.proj_weight.cols() != cfg.dim ||
        p.proj_bias.size() != cfg.dim)
        throw InvalidInput("checkpoint encoder shape does not match its config");
    if (!p.all_finite()) throw InvalidInput("checkpoint encoder contains non-finite values");
    return p;
}

} // namespace

RetrievalModel RetrievalModel::initialize(FusionKind kind, const EncoderConfig& cfg, TokenId blank_id) {
    cfg.validate();
    if (blank_id < 0 || blank_id >= cfg.vocab_size) throw InvalidInput("blank id outside vocabulary");
    RetrievalModel m;
    m.kind = kind;
    m.config = cfg;
    m.blank_id = blank_id;
    // Every encoder starts from the same parameters, standing in for one
    // shared pretrained checkpoint.
    m.news = EncoderParams<double>::initialize(salted(cfg, kEncoderSalt));
    m.tweet = m.news;
    if (m.uses_creator_encoder()) m.creator = m.news;
    if (kind == FusionKind::IntermediateFusion) m.fusion = IntermediateParams<double>::averaging(cfg.dim);
    return m;
}

std::span<const TokenId> ids_or_blank(const TokenSequence& seq, const TokenId& blank) {
    if (seq.ids.empty()) return {&blank, 1};
    return seq.ids;
}

Embedding RetrievalModel::encode_news(const TokenSequence& seq) const {
    return encode_sequence(news, ids_or_blank(seq, blank_id));
}

Embedding RetrievalModel::encode_tweet(const TokenSequence& seq) const {
    return encode_sequence(tweet, ids_or_blank(seq, blank_id));
}

Embedding RetrievalModel::encode_creator(const TokenSequence& seq) const {
    if (!creator) throw InvalidInput("model kind has no creator encoder");
    return encode_sequence(*creator, ids_or_blank(seq, blank_id));
}

Embedding RetrievalModel::encode_side(const TokenSequence& side_seq, const TokenSequence* creator_seq) const {
    switch (kind) {
    case FusionKind::Base:
    case FusionKind::EarlyFusion: return encode_tweet(side_seq);
    case FusionKind::IntermediateFusion:
        if (creator_seq == nullptr) throw InvalidInput("intermediate fusion needs a creator sequence");
        return fuse_intermediate(encode_tweet(side_seq), encode_creator(*creator_seq), *fusion);
    case FusionKind::LateFusion: break;
    }
    throw InvalidInput("late fusion has no single tweet-side embedding");
}

std::string checkpoint_to_json(const RetrievalModel& model) {
    json j;
    j["format"] = "tweetrec-checkpoint";
    j["version"] = kCheckpointVersion;
    j["kind"] = std::string(fusion_kind_name(model.kind));
    j["encoder"] = {{"vocab_size", model.config.vocab_size},
                    {"dim", model.config.dim},
                    {"seed", model.config.seed}};
    j["late_fusion"] = {{"alpha", model.late.alpha},
                        {"stage_depth", model.late.stage_depth},
                        {"final_k", model.late.final_k}};
    j["blank_id"] = model.blank_id;
    j["news"] = encoder_to_json(model.news);
    j["tweet"] = encoder_to_json(model.tweet);
    if (model.creator) j["creator"] = encoder_to_json(*model.creator);
    if (model.fusion)
        j["intermediate"] = {{"fc_weight", tensor_to_json(model.fusion->fc_weight)},
                             {"fc_bias", tensor_to_json(model.fusion->fc_bias)}};
    return j.dump() + "\n";
}

RetrievalModel checkpoint_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidInput(std::string("checkpoint: ") + e.what());
    }
    try {
        if (j.at("format") != "tweetrec-checkpoint") throw InvalidInput("not a tweetrec checkpoint");
        if (j.at("version") != kCheckpointVersion)
            throw InvalidInput("unsupported checkpoint version " + j.at("version").dump());
        RetrievalModel m;
        m.kind = parse_fusion_kind(j.at("kind").get<std::string>());
        m.config.vocab_size = j.at("encoder").at("vocab_size").get<Eigen::Index>();
        m.config.dim = j.at("encoder").at("dim").get<Eigen::Index>();
        m.config.seed = j.at("encoder").at("seed").get<std::uint64_t>();
        m.config.validate();
        m.late.alpha = j.at("late_fusion").at("alpha").get<double>();
        m.late.stage_depth = j.at("late_fusion").at("stage_depth").get<std::size_t>();
        m.late.final_k = j.at("late_fusion").at("final_k").get<std::size_t>();
        m.late.validate();
        m.blank_id = j.at("blank_id").get<TokenId>();
        m.news = encoder_from_json(j.at("news"), m.config);
        m.tweet = encoder_from_json(j.at("tweet"), m.config);
        if (m.uses_creator_encoder()) m.creator = encoder_from_json(j.at("creator"), m.config);
        if (m.kind == FusionKind::IntermediateFusion) {
            IntermediateParams<double> fc;
            fc.fc_weight = tensor_from_json(j.at("intermediate").at("fc_weight"), "fc_weight");
            fc.fc_bias = vector_from_json(j.at("intermediate").at("fc_bias"), "fc_bias");
            if (fc.fc_weight.rows() != m.config.dim || fc.fc_weight.cols() != 2 * m.config.dim ||
                fc.fc_bias.size() != m.config.dim)
                throw InvalidInput("checkpoint intermediate layer has wrong shape");
            m.fusion = std::move(fc);
        }
        return m;
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("checkpoint: ") + e.what());
    }
}

} // namespace tweetrec

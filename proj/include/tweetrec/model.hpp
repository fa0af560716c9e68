#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "tweetrec/encoder.hpp"
#include "tweetrec/fusion.hpp"
#include "tweetrec/textprep.hpp"

namespace tweetrec {

/// A news encoder plus the tweet-side structure selected by kind:
///   Base          tweet encoder over tweet text
///   Early         tweet encoder over tweet text + serialized creator context
///   Intermediate  fc(tweet encoder, creator encoder)
///   Late          tweet and creator encoders scored separately
struct RetrievalModel {
    FusionKind kind = FusionKind::Base;
    EncoderConfig config;
    EncoderParams<double> news;
    EncoderParams<double> tweet;
    std::optional<EncoderParams<double>> creator;
    std::optional<IntermediateParams<double>> fusion;
    LateFusionConfig late;
    /// Substituted for empty sequences (no [CLS] token exists here).
    TokenId blank_id = 0;

    static RetrievalModel initialize(FusionKind kind, const EncoderConfig& cfg, TokenId blank_id);

    bool uses_creator_encoder() const {
        return kind == FusionKind::IntermediateFusion || kind == FusionKind::LateFusion;
    }

    Embedding encode_news(const TokenSequence& seq) const;
    Embedding encode_tweet(const TokenSequence& seq) const;
    Embedding encode_creator(const TokenSequence& seq) const;

    /// Single tweet-side vector for Base / Early / Intermediate. For Base and
    /// Early, side_seq is the tweet or combined sequence; creator_seq is only
    /// read by Intermediate.
    Embedding encode_side(const TokenSequence& side_seq, const TokenSequence* creator_seq) const;
};

/// Ids of seq, or {blank} when seq is empty.
std::span<const TokenId> ids_or_blank(const TokenSequence& seq, const TokenId& blank);

/// Versioned JSON checkpoint holding kind, encoder config, late-fusion config
/// and every parameter tensor.
std::string checkpoint_to_json(const RetrievalModel& model);
RetrievalModel checkpoint_from_json(std::string_view text);

} // namespace tweetrec

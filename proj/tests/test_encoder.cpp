#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstring>

#include "oracles.hpp"
#include "tweetrec/encoder.hpp"
#include "tweetrec/io.hpp"
#include "tweetrec/model.hpp"

using namespace tweetrec;

namespace {

Eigen::VectorXd random_vector(Rng& rng, Eigen::Index d) {
    Eigen::VectorXd v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.uniform(-1.0, 1.0);
    return v;
}

bool bit_identical(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

} // namespace

TEST_CASE("encode_sequence hand-evaluated affine example") {
    EncoderParams<double> p;
    p.token_table = Eigen::MatrixXd(1, 2);
    p.token_table << 1.0, 0.0;
    p.proj_weight = Eigen::MatrixXd::Identity(2, 2);
    p.proj_bias = Eigen::Vector2d(0.0, 1.0);
    const std::vector<TokenId> ids = {0};
    const Eigen::VectorXd out = encode_sequence(p, std::span<const TokenId>(ids));
    CHECK(out[0] == 1.0);
    CHECK(out[1] == 1.0);
}

TEST_CASE("encode_sequence is deterministic and has dimension d") {
    const auto p = EncoderParams<double>::initialize(EncoderConfig{50, 16, 3});
    const std::vector<TokenId> ids = {4, 9, 9, 31, 0};
    const Eigen::VectorXd a = encode_sequence(p, std::span<const TokenId>(ids));
    const Eigen::VectorXd b = encode_sequence(p, std::span<const TokenId>(ids));
    CHECK(a.size() == 16);
    CHECK(bit_identical(a, b));
    const auto q = EncoderParams<double>::initialize(EncoderConfig{50, 16, 3});
    CHECK(q.token_table == p.token_table);
    CHECK(q.proj_weight == p.proj_weight);
}

TEST_CASE("encode_sequence matches a scalar-loop evaluation") {
    const auto p = EncoderParams<double>::initialize(EncoderConfig{20, 5, 11});
    const std::vector<TokenId> ids = {3, 7, 19, 3};
    const Eigen::VectorXd out = encode_sequence(p, std::span<const TokenId>(ids));
    for (Eigen::Index r = 0; r < 5; ++r) {
        double expected = p.proj_bias[r];
        for (Eigen::Index c = 0; c < 5; ++c) {
            double mean = 0.0;
            for (TokenId id : ids) mean += p.token_table(id, c);
            expected += p.proj_weight(r, c) * (mean / static_cast<double>(ids.size()));
        }
        CHECK(out[r] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("encode_sequence rejects empty and out-of-range input") {
    const auto p = EncoderParams<double>::initialize(EncoderConfig{10, 4, 1});
    const std::vector<TokenId> none;
    const std::vector<TokenId> bad = {10};
    const std::vector<TokenId> negative = {-1};
    CHECK_THROWS_AS(encode_sequence(p, std::span<const TokenId>(none)), InvalidInput);
    CHECK_THROWS_AS(encode_sequence(p, std::span<const TokenId>(bad)), InvalidInput);
    CHECK_THROWS_AS(encode_sequence(p, std::span<const TokenId>(negative)), InvalidInput);
    CHECK_THROWS_AS(EncoderParams<double>::initialize(EncoderConfig{1, 4, 1}), InvalidInput);
    CHECK_THROWS_AS(EncoderParams<double>::initialize(EncoderConfig{10, 1, 1}), InvalidInput);
}

TEST_CASE("encode_sequence is permutation invariant") {
    const auto p = EncoderParams<double>::initialize(EncoderConfig{30, 8, 5});
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<TokenId> ids;
        for (std::size_t i = 0, n = 1 + rng.index(12); i < n; ++i) ids.push_back(static_cast<TokenId>(rng.index(30)));
        std::vector<TokenId> shuffled = ids;
        std::reverse(shuffled.begin(), shuffled.end());
        std::rotate(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(rng.index(shuffled.size())),
                    shuffled.end());
        const Eigen::VectorXd a = encode_sequence(p, std::span<const TokenId>(ids));
        const Eigen::VectorXd b = encode_sequence(p, std::span<const TokenId>(shuffled));
        CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("encoder initialization bounds") {
    const auto p = EncoderParams<double>::initialize(EncoderConfig{100, 16, 42});
    CHECK(p.token_table.cwiseAbs().maxCoeff() <= kTableInitRange);
    CHECK(p.proj_weight.cwiseAbs().maxCoeff() <= dense_init_range(16));
    CHECK(p.proj_bias.isZero());
    CHECK(p.all_finite());
}

TEST_CASE("cosine_similarity examples") {
    const Eigen::Vector2d v(0.3, -2.0);
    CHECK(cosine_similarity(v, v) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_similarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)) == 0.0);
    CHECK(cosine_similarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(-1, 0)) == -1.0);
    CHECK_THROWS_AS(cosine_similarity(Eigen::Vector2d(0, 0), v), InvalidInput);
    CHECK_THROWS_AS(cosine_similarity(Eigen::VectorXd(Eigen::Vector3d(1, 0, 0)), Eigen::VectorXd(v)), InvalidInput);
}

TEST_CASE("cosine_similarity is symmetric and scale invariant") {
    Rng rng(1000);
    for (int i = 0; i < 1000; ++i) {
        const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.index(30));
        const Eigen::VectorXd a = random_vector(rng, d);
        const Eigen::VectorXd b = random_vector(rng, d);
        const double c = cosine_similarity(a, b);
        CHECK(std::abs(c - cosine_similarity(b, a)) <= 1e-9);
        const double s = rng.uniform(0.01, 100.0);
        const Eigen::VectorXd scaled = a * s;
        CHECK(std::abs(c - cosine_similarity(scaled, b)) <= 1e-9);
        CHECK(std::abs(c - oracle::cosine_loop(a, b)) <= 1e-12);
        CHECK(c >= -1.0 - 1e-12);
        CHECK(c <= 1.0 + 1e-12);
    }
}

TEST_CASE("estimate_encode_cost examples") {
    CHECK(estimate_encode_cost({FusionKind::Base, 128, 0, false}) == 16384);
    CHECK(estimate_encode_cost({FusionKind::EarlyFusion, 128, 128, false}) == 65536);
    CHECK(estimate_encode_cost({FusionKind::IntermediateFusion, 128, 128, false}) == 32768);
    CHECK(estimate_encode_cost({FusionKind::IntermediateFusion, 128, 128, true}) == 16384);
    CHECK(estimate_encode_cost({FusionKind::LateFusion, 128, 128, false}) == 32768);
    CHECK(estimate_encode_cost({FusionKind::LateFusion, 128, 128, true}) == 16384);
}

TEST_CASE("Early cost dominates Base cost") {
    for (std::uint64_t n = 0; n <= 300; n += 7)
        for (std::uint64_t m = 0; m <= 300; m += 11)
            CHECK(estimate_encode_cost({FusionKind::EarlyFusion, n, m, false}) >=
                  estimate_encode_cost({FusionKind::Base, n, m, false}));
}

TEST_CASE("fusion kind names round-trip") {
    for (FusionKind k : {FusionKind::Base, FusionKind::EarlyFusion, FusionKind::IntermediateFusion,
                         FusionKind::LateFusion})
        CHECK(parse_fusion_kind(fusion_kind_name(k)) == k);
    CHECK_THROWS(parse_fusion_kind("hybrid"));
}

TEST_CASE("embedding records round-trip through JSONL") {
    Rng rng(4);
    std::vector<EmbeddingRecord> recs = {{"a", random_vector(rng, 6)}, {"b", random_vector(rng, 6)}};
    const auto back = parse_embeddings_jsonl(embeddings_to_jsonl(recs));
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back[i].id == recs[i].id);
        CHECK(bit_identical(back[i].vector, recs[i].vector));
    }
}

TEST_CASE("checkpoints round-trip every parameter exactly") {
    for (FusionKind k : {FusionKind::Base, FusionKind::EarlyFusion, FusionKind::IntermediateFusion,
                         FusionKind::LateFusion}) {
        RetrievalModel m = RetrievalModel::initialize(k, EncoderConfig{12, 4, 9}, 0);
        m.late.alpha = 0.35;
        const RetrievalModel back = checkpoint_from_json(checkpoint_to_json(m));
        CHECK(back.kind == k);
        CHECK(back.news.token_table == m.news.token_table);
        CHECK(back.tweet.proj_weight == m.tweet.proj_weight);
        CHECK(back.creator.has_value() == m.creator.has_value());
        CHECK(back.fusion.has_value() == m.fusion.has_value());
        if (m.fusion) CHECK(back.fusion->fc_weight == m.fusion->fc_weight);
        CHECK(back.late.alpha == 0.35);
        CHECK(checkpoint_to_json(back) == checkpoint_to_json(m));
    }
}

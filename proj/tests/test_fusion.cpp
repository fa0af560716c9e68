#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "tweetrec/fusion.hpp"

using namespace tweetrec;

namespace {

Eigen::VectorXd random_vector(Rng& rng, Eigen::Index d) {
    Eigen::VectorXd v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.uniform(-1.0, 1.0);
    return v;
}

IntermediateParams<double> random_params(Rng& rng, Eigen::Index d, bool with_bias) {
    IntermediateParams<double> p;
    p.fc_weight.resize(d, 2 * d);
    for (Eigen::Index i = 0; i < p.fc_weight.size(); ++i) p.fc_weight.data()[i] = rng.uniform(-1.0, 1.0);
    p.fc_bias = with_bias ? random_vector(rng, d) : Eigen::VectorXd::Zero(d);
    return p;
}

/// Scalar-loop fc_weight * [t; c] + fc_bias.
Eigen::VectorXd fuse_loop(const Eigen::VectorXd& t, const Eigen::VectorXd& c, const IntermediateParams<double>& p) {
    const Eigen::Index d = t.size();
    Eigen::VectorXd out(d);
    for (Eigen::Index r = 0; r < d; ++r) {
        double acc = p.fc_bias[r];
        for (Eigen::Index k = 0; k < d; ++k) acc += p.fc_weight(r, k) * t[k];
        for (Eigen::Index k = 0; k < d; ++k) acc += p.fc_weight(r, d + k) * c[k];
        out[r] = acc;
    }
    return out;
}

std::vector<std::size_t> order_by(const std::vector<double>& scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

} // namespace

TEST_CASE("fuse_intermediate with [I | 0] returns the tweet embedding") {
    const Eigen::Index d = 3;
    IntermediateParams<double> p;
    p.fc_weight = Eigen::MatrixXd::Zero(d, 2 * d);
    p.fc_weight.leftCols(d).setIdentity();
    p.fc_bias = Eigen::VectorXd::Zero(d);
    const Eigen::Vector3d t(0.5, -1.0, 2.0), c(9.0, 8.0, 7.0);
    CHECK(fuse_intermediate(t, c, p) == Eigen::VectorXd(t));
}

TEST_CASE("fuse_intermediate with zero parameters annihilates") {
    IntermediateParams<double> p;
    p.fc_weight = Eigen::MatrixXd::Zero(2, 4);
    p.fc_bias = Eigen::VectorXd::Zero(2);
    CHECK(fuse_intermediate(Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4), p).isZero(0.0));
}

TEST_CASE("fuse_intermediate matches a scalar-loop oracle for d=2") {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = random_params(rng, 2, true);
        const Eigen::VectorXd t = random_vector(rng, 2), c = random_vector(rng, 2);
        const Eigen::VectorXd got = fuse_intermediate(t, c, p);
        const Eigen::VectorXd want = fuse_loop(t, c, p);
        CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("fuse_intermediate rejects dimension mismatches") {
    const auto p = IntermediateParams<double>::averaging(3);
    CHECK_THROWS_AS(fuse_intermediate(Eigen::Vector2d(1, 2), Eigen::Vector3d(1, 2, 3), p), InvalidInput);
    CHECK_THROWS_AS(fuse_intermediate(Eigen::Vector3d(1, 2, 3), Eigen::Vector2d(1, 2), p), InvalidInput);
    CHECK_THROWS_AS(IntermediateParams<double>::averaging(1), InvalidInput);
}

TEST_CASE("averaging initialization yields the mean of both embeddings") {
    const auto p = IntermediateParams<double>::averaging(3);
    const Eigen::Vector3d t(1, 2, 3), c(3, 2, 1);
    CHECK(fuse_intermediate(t, c, p) == Eigen::VectorXd(Eigen::Vector3d(2, 2, 2)));
}

TEST_CASE("fuse_intermediate is linear for zero-bias parameters") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.index(6));
        const auto p = random_params(rng, d, false);
        const Eigen::VectorXd at = random_vector(rng, d), ac = random_vector(rng, d);
        const Eigen::VectorXd bt = random_vector(rng, d), bc = random_vector(rng, d);
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
        const Eigen::VectorXd lhs = fuse_intermediate(Eigen::VectorXd(at + bt), Eigen::VectorXd(ac + bc), p) +
                                    fuse_intermediate(zero, zero, p);
        const Eigen::VectorXd rhs = fuse_intermediate(at, ac, p) + fuse_intermediate(bt, bc, p);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("late_combine_scores examples") {
    CHECK(late_combine_scores(0.5, 0.9, 0.0) == 0.5);
    CHECK(late_combine_scores(0.5, 0.9, 1.0) == 0.9);
    CHECK(late_combine_scores(0.5, 0.9, 0.3) == doctest::Approx(0.62).epsilon(1e-15));
    CHECK_THROWS_AS(late_combine_scores(0.5, 0.9, -0.01), InvalidInput);
    CHECK_THROWS_AS(late_combine_scores(0.5, 0.9, 1.01), InvalidInput);
    CHECK_THROWS_AS(late_combine_scores(0.5, 0.9, std::nan("")), InvalidInput);
}

TEST_CASE("late_combine_scores is monotone in each score") {
    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
        const double alpha = rng.uniform01();
        const double t = rng.uniform(-1, 1), c = rng.uniform(-1, 1), dt = rng.uniform(0, 1), dc = rng.uniform(0, 1);
        CHECK(late_combine_scores(t + dt, c, alpha) >= late_combine_scores(t, c, alpha));
        CHECK(late_combine_scores(t, c + dc, alpha) >= late_combine_scores(t, c, alpha));
    }
}

TEST_CASE("late_combine_scores endpoints reproduce single-channel rankings") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> st, sc, at0, at1;
        for (int i = 0; i < 25; ++i) {
            st.push_back(rng.uniform(-1, 1));
            sc.push_back(rng.uniform(-1, 1));
            at0.push_back(late_combine_scores(st.back(), sc.back(), 0.0));
            at1.push_back(late_combine_scores(st.back(), sc.back(), 1.0));
        }
        CHECK(order_by(at0) == order_by(st));
        CHECK(order_by(at1) == order_by(sc));
    }
}

TEST_CASE("LateFusionConfig defaults and validation") {
    LateFusionConfig cfg;
    CHECK(cfg.stage_depth == 20000);
    CHECK(cfg.final_k == 1000);
    CHECK_NOTHROW(cfg.validate());
    cfg.final_k = 20001;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
    cfg = LateFusionConfig{};
    cfg.alpha = 1.5;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

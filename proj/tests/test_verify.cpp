#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "bivcal/verify.hpp"
#include "oracles.hpp"

using namespace bivcal;

namespace {

std::vector<Vec2> standard_normal_sample(std::size_t n, RandomStream& rng) {
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(rng.normal(), rng.normal());
    return out;
}

}  // namespace

TEST(EnergyScore, EnsembleExamples) {
    const std::vector<Vec2> one{Vec2(0.0, 0.0)};
    EXPECT_DOUBLE_EQ(energy_score_ensemble(one, Vec2(3.0, 4.0)), 5.0);
    const std::vector<Vec2> at_obs(5, Vec2(1.0, 2.0));
    EXPECT_DOUBLE_EQ(energy_score_ensemble(at_obs, Vec2(1.0, 2.0)), 0.0);
    const std::vector<Vec2> pair{Vec2(1.0, 0.0), Vec2(-1.0, 0.0)};
    EXPECT_DOUBLE_EQ(energy_score_ensemble(pair, Vec2(0.0, 0.0)), 0.5);
    EXPECT_THROW(energy_score_ensemble(std::vector<Vec2>{}, Vec2::Zero()), InvalidArgument);
}

TEST(EnergyScore, MonteCarloExamples) {
    const std::vector<Vec2> at_obs(10, Vec2(1.0, 2.0));
    EXPECT_DOUBLE_EQ(energy_score_mc(at_obs, Vec2(1.0, 2.0)), 0.0);
    const std::vector<Vec2> shifted(10, Vec2(3.0, 4.0));
    EXPECT_DOUBLE_EQ(energy_score_mc(shifted, Vec2(0.0, 0.0)), 5.0);
    EXPECT_THROW(energy_score_mc(std::vector<Vec2>{Vec2::Zero()}, Vec2::Zero()), InvalidArgument);
}

// For X ~ N(0, I_2) at x = 0: E||X|| = sqrt(pi/2), E||X - X'|| = sqrt(pi).
TEST(EnergyScore, BothFormsMatchStandardNormal) {
    const double exact = std::sqrt(std::numbers::pi / 2.0) - 0.5 * std::sqrt(std::numbers::pi);
    RandomStream rng(3);
    EXPECT_NEAR(energy_score_mc(standard_normal_sample(100000, rng), Vec2::Zero()), exact, 0.02);
    EXPECT_NEAR(energy_score_ensemble(standard_normal_sample(3000, rng), Vec2::Zero()), exact, 0.02);
}

TEST(EnergyScore, IsProperOnAverage) {
    RandomStream rng(4);
    double right = 0.0, wrong = 0.0;
    for (int i = 0; i < 400; ++i) {
        const Vec2 x(rng.normal(), rng.normal());
        const auto good = standard_normal_sample(200, rng);
        auto bad = good;
        for (auto& b : bad) b *= 0.3;
        right += energy_score_ensemble(good, x);
        wrong += energy_score_ensemble(bad, x);
    }
    EXPECT_LT(right, wrong);
}

TEST(Rank, Extremes) {
    RandomStream rng(5);
    const std::vector<Vec2> members{Vec2(1.0, 1.0), Vec2(2.0, 3.0), Vec2(3.0, 2.0)};
    EXPECT_EQ(multivariate_rank(members, Vec2(0.0, 0.0), rng), 1u);
    EXPECT_EQ(multivariate_rank(members, Vec2(5.0, 5.0), rng), 4u);
    const std::vector<double> values{1.0, 2.0, 3.0};
    EXPECT_EQ(univariate_rank(values, 0.5, rng), 1u);
    EXPECT_EQ(univariate_rank(values, 3.5, rng), 4u);
    EXPECT_EQ(univariate_rank(values, 2.5, rng), 3u);
}

TEST(Rank, TiesAreSpreadUniformly) {
    RandomStream rng(6);
    const std::vector<Vec2> members(8, Vec2(1.0, 1.0));
    RankHistogram multi(8), uni(8);
    const std::vector<double> values(8, 1.0);
    const std::size_t n = 18000;
    for (std::size_t i = 0; i < n; ++i) {
        multi.add(multivariate_rank(members, Vec2(1.0, 1.0), rng));
        uni.add(univariate_rank(values, 1.0, rng));
    }
    for (const auto* h : {&multi, &uni}) {
        double chi2 = 0.0;
        const double expected = static_cast<double>(n) / 9.0;
        for (auto c : h->counts()) chi2 += std::pow(static_cast<double>(c) - expected, 2) / expected;
        EXPECT_GT(oracle::chi_square_sf(chi2, 8.0), 1e-3);
    }
}

TEST(Rank, ExchangeableDrawsGiveFlatHistogram) {
    RandomStream rng(7);
    RankHistogram h(8);
    for (int i = 0; i < 9000; ++i) {
        const auto members = standard_normal_sample(8, rng);
        h.add(multivariate_rank(members, Vec2(rng.normal(), rng.normal()), rng));
    }
    double chi2 = 0.0;
    for (auto c : h.counts()) chi2 += std::pow(static_cast<double>(c) - 1000.0, 2) / 1000.0;
    EXPECT_GT(oracle::chi_square_sf(chi2, 8.0), 1e-3);
}

TEST(Reliability, UniformAndDegenerate) {
    EXPECT_DOUBLE_EQ(reliability_index(RankHistogram::from_counts(std::vector<std::size_t>(9, 10))), 0.0);
    std::vector<std::size_t> degenerate(9, 0);
    degenerate[0] = 50;
    EXPECT_EQ(reliability_index(RankHistogram::from_counts(degenerate)), 16.0 / 9.0);
    EXPECT_THROW(reliability_index(RankHistogram(8)), InvalidArgument);
    RankHistogram h(3);
    EXPECT_THROW(h.add(0), InvalidArgument);
    EXPECT_THROW(h.add(5), InvalidArgument);
}

TEST(Sharpness, Examples) {
    EXPECT_DOUBLE_EQ(determinant_sharpness(Eigen::MatrixXd::Identity(2, 2)), 1.0);
    Eigen::MatrixXd d(2, 2);
    d << 4.0, 0.0, 0.0, 9.0;
    EXPECT_NEAR(determinant_sharpness(d), std::pow(36.0, 0.25), 1e-15);
    Eigen::MatrixXd singular(2, 2);
    singular << 1.0, 2.0, 2.0, 4.0;
    EXPECT_DOUBLE_EQ(determinant_sharpness(singular), 0.0);
    Eigen::MatrixXd bad(2, 2);
    bad << 1.0, 3.0, 3.0, 1.0;
    EXPECT_THROW(determinant_sharpness(bad), InvalidArgument);
}

TEST(ScoreCase, PointMassAtObservation) {
    RandomStream rng(8);
    const Vec2 obs(3.0, 280.0);
    PredictiveForecast pred;
    pred.rank_members = 8;
    pred.sampler = [&](std::size_t n, RandomStream&) { return std::vector<Vec2>(n, obs); };
    const auto s = score_case(pred, obs, 100, rng);
    EXPECT_DOUBLE_EQ(s.es, 0.0);
    EXPECT_DOUBLE_EQ((s.median - obs).norm(), 0.0);
    EXPECT_DOUBLE_EQ((s.mean - obs).norm(), 0.0);
    EXPECT_DOUBLE_EQ(s.ds, 0.0);
    EXPECT_TRUE(s.covered_wind);
    EXPECT_TRUE(s.covered_temp);
}

TEST(ScoreCase, EnsembleCoverageAndMeans) {
    RandomStream rng(9);
    EnsembleForecast ens{{Vec2(1.0, 270.0), Vec2(3.0, 272.0), Vec2(2.0, 271.0)}};
    const auto inside = score_case(ens, Vec2(2.5, 271.5), 0, rng);
    EXPECT_TRUE(inside.covered_wind);
    EXPECT_TRUE(inside.covered_temp);
    EXPECT_LT((inside.mean - Vec2(2.0, 271.0)).norm(), 1e-12);
    const auto outside = score_case(ens, Vec2(0.5, 273.0), 0, rng);
    EXPECT_FALSE(outside.covered_wind);
    EXPECT_FALSE(outside.covered_temp);
}

TEST(Aggregate, AveragesAndCorrelations) {
    std::vector<CaseScores> cases(4);
    for (int i = 0; i < 4; ++i) {
        cases[i].obs = Vec2(i, 2.0 * i);
        cases[i].median = Vec2(i + 1.0, 2.0 * i);
        cases[i].mean = Vec2(i, 2.0 * i + 2.0);
        cases[i].es = i;
        cases[i].ds = 1.0;
        cases[i].rank = 1 + i % 3;
        cases[i].covered_wind = i < 2;
    }
    const auto r = aggregate("raw", cases, 2);
    EXPECT_DOUBLE_EQ(r.mean_es, 1.5);
    EXPECT_DOUBLE_EQ(r.ee_median, 1.0);
    EXPECT_DOUBLE_EQ(r.ee_mean, 2.0);
    EXPECT_DOUBLE_EQ(r.coverage_wind, 0.5);
    EXPECT_NEAR(r.corr_median, 1.0, 1e-15);
    EXPECT_EQ(r.histogram.counts(), (std::vector<std::size_t>{2, 1, 1}));
    EXPECT_THROW(aggregate("raw", std::vector<CaseScores>{}, 2), InvalidArgument);
}

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <vblasso/selection.hpp>

using namespace vblasso;

namespace {

SelectionEntry bf_one(double m, double s) { return bf_select({{m, s}}).entries.at(0); }

}  // namespace

TEST(BayesFactor, ModerateEvidenceAtQuarterQuantile) {
    const double bf = std::exp(log_bayes_factor(0.67));
    EXPECT_GE(bf, 2.9);
    EXPECT_LE(bf, 3.1);
    const SelectionEntry e = bf_one(0.67, 1.0);
    EXPECT_NEAR(e.statistic, bf / (1.0 + bf), 1e-14);
    EXPECT_FALSE(e.kept());
}

TEST(BayesFactor, NullCoefficient) {
    EXPECT_NEAR(std::exp(log_bayes_factor(0.0)), std::exp(2.645), 1e-12);
    EXPECT_NEAR(std::exp(log_bayes_factor(0.0)), 14.08, 0.01);
    const SelectionEntry e = bf_one(0.0, 2.0);
    EXPECT_NEAR(e.statistic, 0.934, 1e-3);
    EXPECT_FALSE(e.kept());
}

TEST(BayesFactor, ClosedFormBoundary) {
    // 1/2 delta^2 - beta* delta = log(1/3)
    const double root = (0.5 * 2.3 * 2.3 + std::log(3.0)) / 2.3;
    EXPECT_NEAR(bf_boundary(), root, 1e-14);
    EXPECT_NEAR(bf_boundary(), 1.6276, 1e-3);
    EXPECT_FALSE(bf_one(root - 1e-9, 1.0).kept());
    EXPECT_TRUE(bf_one(root + 1e-9, 1.0).kept());
    EXPECT_NEAR(bf_one(root, 1.0).statistic, 0.25, 1e-12);
}

TEST(BayesFactor, ScaleInvariance) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    std::vector<CoefficientPosterior> post, scaled;
    for (int i = 0; i < 200; ++i) {
        const double m = 3.0 * z(rng), s = std::exp(z(rng));
        post.push_back({m, s});
        scaled.push_back({7.5 * m, 7.5 * s});
    }
    const auto a = bf_select(post), b = bf_select(scaled);
    for (std::size_t i = 0; i < post.size(); ++i) EXPECT_EQ(a.entries[i].kept(), b.entries[i].kept());
}

TEST(BayesFactor, SignSymmetricAndMonotone) {
    EXPECT_EQ(bf_one(2.0, 1.0).statistic, bf_one(-2.0, 1.0).statistic);
    bool kept = false;
    for (double m = 0.0; m < 5.0; m += 0.01) {
        const bool now = bf_one(m, 1.0).kept();
        EXPECT_FALSE(kept && !now) << m;
        kept = now;
    }
    EXPECT_TRUE(kept);
}

TEST(BayesFactor, CostRatioMovesThreshold) {
    // equal costs: exclude iff BF >= 1, i.e. beta* <= delta/2
    const BfSettings even{1.0, 1.0, 2.3};
    EXPECT_FALSE(bf_select({{1.14, 1.0}}, even).entries[0].kept());
    EXPECT_TRUE(bf_select({{1.16, 1.0}}, even).entries[0].kept());
}

TEST(BayesFactor, RejectsNonpositiveSd) {
    EXPECT_THROW(bf_select({{1.0, 0.0}}), std::invalid_argument);
    EXPECT_THROW(ci_select(std::vector<CoefficientPosterior>{{1.0, -1.0}}), std::invalid_argument);
}

TEST(CredibleInterval, GaussianExamples) {
    const auto r = ci_select(std::vector<CoefficientPosterior>{{0.0, 3.0}, {10.0, 1.0}, {0.5, 1.0}});
    EXPECT_FALSE(r.entries[0].kept());
    EXPECT_TRUE(r.entries[1].kept());
    EXPECT_NEAR(r.entries[1].lower, 10.0 - 0.6744897501960817, 1e-12);
    EXPECT_FALSE(r.entries[2].kept());
    EXPECT_NEAR(r.entries[2].upper, 0.5 + 0.6744897501960817, 1e-12);
}

TEST(CredibleInterval, InvalidLevel) {
    EXPECT_THROW(ci_select(std::vector<CoefficientPosterior>{{0.0, 1.0}}, 1.0), std::invalid_argument);
    EXPECT_THROW(ci_select(std::vector<CoefficientPosterior>{{0.0, 1.0}}, 0.0), std::invalid_argument);
}

TEST(CredibleInterval, DrawsUseEmpiricalQuantiles) {
    Eigen::MatrixXd d(5, 2);
    d << 1, -2, 2, -1, 3, 0, 4, 1, 5, 2;
    const auto r = ci_select(d);
    EXPECT_DOUBLE_EQ(r.entries[0].lower, 2.0);
    EXPECT_DOUBLE_EQ(r.entries[0].upper, 4.0);
    EXPECT_TRUE(r.entries[0].kept());
    EXPECT_FALSE(r.entries[1].kept());
    EXPECT_EQ(r.source, "gibbs");
}

TEST(ScaledNeighborhood, GaussianExamples) {
    const auto r = sn_select(std::vector<CoefficientPosterior>{{0.0, 1.0}, {5.0, 1.0}, {1.0, 1.0}});
    EXPECT_NEAR(r.entries[0].statistic, 0.6826894921370859, 1e-12);
    EXPECT_FALSE(r.entries[0].kept());
    EXPECT_LT(r.entries[1].statistic, 1e-3);
    EXPECT_TRUE(r.entries[1].kept());
    EXPECT_NEAR(r.entries[2].statistic, 0.4772498680518208, 1e-12);
    EXPECT_TRUE(r.entries[2].kept());
}

TEST(ScaledNeighborhood, StrictInequality) {
    const std::vector<CoefficientPosterior> post{{1.0, 1.0}};
    const double at = sn_select(post).entries[0].statistic;
    EXPECT_TRUE(sn_select(post, at).entries[0].kept());
    EXPECT_FALSE(sn_select(post, std::nextafter(at, 0.0)).entries[0].kept());
}

TEST(ScaledNeighborhood, SymmetricZeroMeanAlwaysExcluded) {
    for (double s : {0.01, 1.0, 50.0}) {
        EXPECT_FALSE(sn_select(std::vector<CoefficientPosterior>{{0.0, s}}).entries[0].kept());
        EXPECT_FALSE(ci_select(std::vector<CoefficientPosterior>{{0.0, s}}).entries[0].kept());
    }
}

TEST(ScaledNeighborhood, Draws) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    Eigen::MatrixXd d(20000, 2);
    for (int i = 0; i < d.rows(); ++i) {
        d(i, 0) = z(rng);
        d(i, 1) = 6.0 + z(rng);
    }
    const auto r = sn_select(d);
    EXPECT_NEAR(r.entries[0].statistic, 0.6827, 0.01);
    EXPECT_FALSE(r.entries[0].kept());
    EXPECT_TRUE(r.entries[1].kept());
}

TEST(SelectionReport, MaskAndCount) {
    const auto r = bf_select({{0.0, 1.0}, {5.0, 1.0}, {-4.0, 1.0}});
    EXPECT_EQ(r.keep_mask(), (std::vector<bool>{false, true, true}));
    EXPECT_EQ(r.kept_count(), 2u);
    EXPECT_EQ(r.entries.size(), 3u);
}

TEST(Criterion, ParseRoundTrip) {
    for (Criterion c : {Criterion::bf, Criterion::ci, Criterion::sn}) EXPECT_EQ(parse_criterion(to_string(c)), c);
    EXPECT_THROW(parse_criterion("aic"), std::invalid_argument);
}

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include <vblasso/specfun.hpp>

#include "oracles.hpp"

using namespace vblasso::specfun;

namespace {

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace

TEST(BesselK, HalfOrderClosedForm) {
    EXPECT_LT(rel(bessel_k(0.5, 1.0), std::sqrt(std::numbers::pi / 2.0) * std::exp(-1.0)), 1e-14);
    EXPECT_NEAR(bessel_k(0.5, 1.0), 0.461068504, 1e-9);
}

TEST(BesselK, ThreeHalvesRecurrence) {
    const double k12 = std::sqrt(std::numbers::pi / 4.0) * std::exp(-2.0);
    EXPECT_LT(rel(bessel_k(1.5, 2.0), k12 * 1.5), 1e-14);
    EXPECT_NEAR(bessel_k(1.5, 2.0), 0.179906, 1e-6);
}

TEST(BesselK, HalfIntegerOrdersMatchUpwardRecurrence) {
    for (double x : {0.01, 0.3, 1.0, 7.5, 40.0, 300.0}) {
        double km = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x);  // K_{1/2}
        double k = km * (1.0 + 1.0 / x);                                      // K_{3/2}
        EXPECT_LT(rel(bessel_k(0.5, x), km), 1e-12) << x;
        EXPECT_LT(rel(bessel_k(1.5, x), k), 1e-12) << x;
        for (int n = 1; n < 6; ++n) {
            const double nu = n + 0.5;
            const double next = km + 2.0 * nu / x * k;
            km = k;
            k = next;
            EXPECT_LT(rel(bessel_k(nu + 1.0, x), k), 1e-12) << nu + 1.0 << " " << x;
        }
    }
}

TEST(BesselK, GeneralOrderAgainstIntegralRepresentation) {
    EXPECT_LT(rel(bessel_k(0.7, 3.5), oracle::bessel_k_trapezoid(0.7, 3.5)), 1e-10);
    // frozen from the trapezoid oracle
    EXPECT_NEAR(bessel_k(0.7, 3.5), 0.020853672703113, 1e-13);
}

TEST(BesselK, GeneralOrderAgainstBoost) {
    for (double nu : {0.0, 0.2, 0.7, 1.0, 2.0, 3.3, 6.0})
        for (double x : {0.05, 0.5, 1.0, 3.5, 20.0, 90.0})
            EXPECT_LT(rel(bessel_k(nu, x), boost::math::cyl_bessel_k(nu, x)), 1e-10) << nu << " " << x;
}

TEST(BesselK, SymmetricInOrder) {
    for (double nu : {0.5, 0.7, 2.5, 3.0}) EXPECT_DOUBLE_EQ(bessel_k(-nu, 2.0), bessel_k(nu, 2.0));
}

TEST(BesselK, RejectsNonpositiveArgument) {
    EXPECT_THROW(bessel_k(0.5, 0.0), std::domain_error);
    EXPECT_THROW(log_bessel_k(0.5, -1.0), std::domain_error);
}

TEST(LogBesselK, ClosedFormsInLogSpace) {
    EXPECT_NEAR(log_bessel_k(0.5, 1.0), std::log(0.461068504), 1e-9);
    EXPECT_NEAR(log_bessel_k(0.5, 1000.0), 0.5 * std::log(std::numbers::pi / 2000.0) - 1000.0, 1e-10);
    EXPECT_TRUE(std::isfinite(log_bessel_k(2.5, 5000.0)));
}

TEST(LogBesselK, GeneralOrderAgainstQuadrature) {
    const double want = std::log(oracle::bessel_k_trapezoid(2.0, 50.0));
    EXPECT_NEAR(log_bessel_k(2.0, 50.0), want, 1e-10);
    EXPECT_NEAR(log_bessel_k(2.0, 50.0), -51.693092285745, 1e-9);  // frozen
}

TEST(LogBesselK, ExpMatchesDirect) {
    for (double nu : {0.5, 1.5, 0.3, 4.0})
        for (double x : {0.1, 1.0, 10.0, 100.0})
            EXPECT_LT(rel(std::exp(log_bessel_k(nu, x)), bessel_k(nu, x)), 1e-10);
}

TEST(LogBesselK, TinyArgumentStaysFinite) {
    EXPECT_TRUE(std::isfinite(log_bessel_k(1.5, 1e-10)));
    EXPECT_TRUE(std::isfinite(log_bessel_k(0.7, 1e-10)));
    EXPECT_NEAR(log_bessel_k(0.7, 1e-10), std::log(boost::math::cyl_bessel_k(0.7, 1e-10)), 1e-8);
}

TEST(GigMoments, ClosedFormExamples) {
    EXPECT_NEAR(gig_mean({0.5, 1.0, 1.0}), 2.0, 1e-14);
    EXPECT_NEAR(gig_mean_inverse({0.5, 4.0, 1.0}), 2.0, 1e-14);
}

TEST(GigMoments, HalfOrderMeanInverseIdentity) {
    for (double a : {0.1, 1.0, 10.0, 100.0})
        for (double b : {0.1, 1.0, 10.0, 100.0}) EXPECT_LT(rel(gig_mean_inverse({0.5, a, b}), std::sqrt(a / b)), 1e-10);
}

TEST(GigMoments, VarianceAgainstQuadrature) {
    const auto q = oracle::gig_moments(0.5, 3.0, 2.0);
    EXPECT_LT(rel(gig_var({0.5, 3.0, 2.0}), q.var), 1e-8);
    EXPECT_NEAR(gig_var({0.5, 3.0, 2.0}), 0.49438774919813, 1e-10);  // frozen
}

TEST(GigMoments, GridAgainstQuadrature) {
    for (double order : {0.5, -0.3, 1.7})
        for (double a : {0.1, 1.0, 10.0, 100.0})
            for (double b : {0.1, 1.0, 10.0, 100.0}) {
                const GigParams g{order, a, b};
                const auto q = oracle::gig_moments(order, a, b);
                EXPECT_LT(rel(gig_mean(g), q.mean), 1e-8) << order << " " << a << " " << b;
                EXPECT_LT(rel(gig_var(g), q.var), 1e-8) << order << " " << a << " " << b;
                EXPECT_LT(rel(gig_mean_inverse(g), q.mean_inverse), 1e-8) << order << " " << a << " " << b;
            }
}

TEST(GigMoments, RejectsNonpositiveParameters) {
    EXPECT_THROW(gig_mean({0.5, 0.0, 1.0}), std::domain_error);
    EXPECT_THROW(gig_var({0.5, 1.0, -2.0}), std::domain_error);
    EXPECT_THROW(gig_mean_inverse({0.5, -1.0, 1.0}), std::domain_error);
}

TEST(GigExpectedLog, TaylorComposition) {
    const GigParams g{0.5, 1.0, 1.0};
    EXPECT_NEAR(gig_expected_log(g), std::log(2.0) - gig_var(g) / 8.0, 1e-14);
}

TEST(GigExpectedLog, NarrowLimit) {
    const GigParams g{0.5, 1e6, 1e6};
    EXPECT_NEAR(gig_expected_log(g), std::log(gig_mean(g)), 1e-6);
}

TEST(GigExpectedLog, ApproximationGapIsSmallAndRecorded) {
    const auto q = oracle::gig_moments(0.5, 2.0, 5.0);
    const double approx = gig_expected_log({0.5, 2.0, 5.0});
    // the expansion understates E[log X] here; the gap is frozen from the oracle
    EXPECT_NEAR(approx - q.mean_log, -0.01286018519, 1e-6);
}

TEST(GammaFunctions, KnownValues) {
    EXPECT_NEAR(digamma(1.0), -0.5772156649015329, 1e-14);
    EXPECT_NEAR(log_gamma(5.0), std::log(24.0), 1e-14);
}

TEST(GammaFunctions, DigammaIsDerivativeOfLogGamma) {
    const double h = 1e-6;
    const double fd = (log_gamma(0.3 + h) - log_gamma(0.3 - h)) / (2.0 * h);
    EXPECT_NEAR(digamma(0.3), fd, 1e-7);
}

TEST(GammaFunctions, RejectNonpositive) {
    EXPECT_THROW(digamma(0.0), std::domain_error);
    EXPECT_THROW(log_gamma(-1.0), std::domain_error);
}

TEST(Integrate, PolynomialAndGaussian) {
    EXPECT_NEAR(detail::integrate([](double x) { return x * x; }, 0.0, 3.0), 9.0, 1e-12);
    EXPECT_NEAR(detail::integrate([](double x) { return std::exp(-x * x); }, -10.0, 10.0), std::sqrt(std::numbers::pi), 1e-12);
}

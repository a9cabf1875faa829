#pragma once

// Special functions used by the variational updates: modified Bessel
// functions of the second kind (in log space), moments of the generalized
// inverse Gaussian distribution, digamma and log-gamma.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace vblasso::specfun {

namespace detail {

inline void require_positive(double x, const char* what) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw std::domain_error(std::string(what) + " must be positive and finite, got " +
                                std::to_string(x));
    }
}

// 15-point Kronrod rule with embedded 7-point Gauss rule (QUADPACK tables).
constexpr std::array<double, 8> kronrod_nodes{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kronrod_weights{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> gauss_weights{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double lo, hi, value, error;
};

template <class F>
Segment gauss_kronrod_15(F& f, double lo, double hi) {
    const double center = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    const double fc = f(center);
    double kronrod = fc * kronrod_weights[7];
    double gauss = fc * gauss_weights[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kronrod_nodes[j];
        const double pair = f(center - dx) + f(center + dx);
        kronrod += kronrod_weights[j] * pair;
        if (j % 2 == 1) gauss += gauss_weights[j / 2] * pair;
    }
    return {lo, hi, kronrod * half, std::abs((kronrod - gauss) * half)};
}

/// Globally adaptive Gauss-Kronrod quadrature: bisects the segment with the
/// largest error estimate until the summed estimate meets rel_tol.
template <class F>
double integrate(F&& f, double lo, double hi, double rel_tol = 1e-14, int max_segments = 400) {
    std::vector<Segment> segs{gauss_kronrod_15(f, lo, hi)};
    for (;;) {
        double total = 0.0, err = 0.0;
        for (const auto& s : segs) {
            total += s.value;
            err += s.error;
        }
        if (err <= rel_tol * std::abs(total) || static_cast<int>(segs.size()) >= max_segments)
            return total;
        auto worst = std::max_element(segs.begin(), segs.end(),
                                      [](const Segment& a, const Segment& b) { return a.error < b.error; });
        const double mid = 0.5 * (worst->lo + worst->hi);
        const Segment left = gauss_kronrod_15(f, worst->lo, mid);
        const Segment right = gauss_kronrod_15(f, mid, worst->hi);
        *worst = left;
        segs.push_back(right);
    }
}

// True when 2*order is an odd integer of moderate size.
inline bool is_half_integer(double order, int& n) {
    const double twice = 2.0 * order;
    const double r = std::round(twice);
    if (std::abs(twice - r) > 0.0 || std::abs(r) > 201.0) return false;
    const long ri = static_cast<long>(r);
    if (ri % 2 == 0) return false;
    n = static_cast<int>((ri - 1) / 2);
    return true;
}

// log K_{n+1/2}(x) = log sqrt(pi/(2x)) - x + log sum_k c_k (2x)^{-k},
// with c_k = (n+k)! / (k! (n-k)!).
inline double log_bessel_k_half_integer(int n, double x) {
    std::vector<double> logs;
    logs.reserve(static_cast<std::size_t>(n) + 1);
    double coef = 1.0;
    const double log2x = std::log(2.0 * x);
    for (int k = 0; k <= n; ++k) {
        logs.push_back(std::log(coef) - k * log2x);
        coef *= static_cast<double>(n + k + 1) * static_cast<double>(n - k) / static_cast<double>(k + 1);
    }
    const double top = *std::max_element(logs.begin(), logs.end());
    double sum = 0.0;
    for (double l : logs) sum += std::exp(l - top);
    return 0.5 * std::log(std::numbers::pi / (2.0 * x)) - x + top + std::log(sum);
}

// K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt, evaluated around the
// peak of the log-integrand so that neither tail over- nor underflows.
inline double log_bessel_k_integral(double nu, double x) {
    // cosh(t) - 1 = 2 sinh^2(t/2)
    auto h = [nu, x](double t) {
        const double s = std::sinh(0.5 * t);
        return -2.0 * x * s * s + nu * t;
    };
    const double peak_t = std::asinh(nu / x);
    const double peak = h(peak_t);
    double upper = peak_t + 1.0;
    while (h(upper) - peak > -60.0) upper = peak_t + 2.0 * (upper - peak_t);
    auto integrand = [&](double t) {
        return std::exp(h(t) - peak) * 0.5 * (1.0 + std::exp(-2.0 * nu * t));
    };
    double value = 0.0;
    if (peak_t > 0.0) value += integrate(integrand, 0.0, peak_t);
    value += integrate(integrand, peak_t, upper);
    return -x + peak + std::log(value);
}

}  // namespace detail

/// log K_order(x). Exact closed form for half-integer orders, the
/// small-argument expansion below x = 1e-8, quadrature otherwise.
inline double log_bessel_k(double order, double x) {
    detail::require_positive(x, "bessel argument");
    if (!std::isfinite(order)) throw std::domain_error("bessel order must be finite");
    const double nu = std::abs(order);
    int n = 0;
    if (detail::is_half_integer(nu, n)) return detail::log_bessel_k_half_integer(n, x);
    if (x < 1e-8) {
        if (nu == 0.0) return std::log(-std::log(0.5 * x) - std::numbers::egamma);
        return boost::math::lgamma(nu) - std::numbers::ln2 + nu * std::log(2.0 / x);
    }
    return detail::log_bessel_k_integral(nu, x);
}

/// K_order(x); underflows to 0 for large x, use log_bessel_k there.
inline double bessel_k(double order, double x) { return std::exp(log_bessel_k(order, x)); }

/// Parameters of GIG(order, a, b) with density proportional to
/// x^(order-1) exp(-(a x + b / x) / 2) on x > 0.
struct GigParams {
    double order = 0.5;
    double a = 1.0;
    double b = 1.0;

    void validate() const {
        if (!std::isfinite(order)) throw std::domain_error("GIG order must be finite");
        detail::require_positive(a, "GIG parameter a");
        detail::require_positive(b, "GIG parameter b");
    }
};

namespace detail {
// K_{p+1}(z) / K_p(z)
inline double bessel_ratio(double order, double z) {
    return std::exp(log_bessel_k(order + 1.0, z) - log_bessel_k(order, z));
}
}  // namespace detail

/// E[X]. Order 1/2 uses the exact reduction sqrt(b/a) + 1/a.
inline double gig_mean(const GigParams& g) {
    g.validate();
    if (g.order == 0.5) return std::sqrt(g.b / g.a) + 1.0 / g.a;
    const double z = std::sqrt(g.a * g.b);
    return std::sqrt(g.b / g.a) * detail::bessel_ratio(g.order, z);
}

/// E[1/X]. Order 1/2 reduces exactly to sqrt(a/b).
inline double gig_mean_inverse(const GigParams& g) {
    g.validate();
    if (g.order == 0.5) return std::sqrt(g.a / g.b);
    const double z = std::sqrt(g.a * g.b);
    return std::sqrt(g.a / g.b) * detail::bessel_ratio(g.order, z) - 2.0 * g.order / g.b;
}

/// Var[X] = (b/a) [K_{p+2}/K_p - (K_{p+1}/K_p)^2].
inline double gig_var(const GigParams& g) {
    g.validate();
    if (g.order == 0.5) return std::sqrt(g.b) / (g.a * std::sqrt(g.a)) + 2.0 / (g.a * g.a);
    const double z = std::sqrt(g.a * g.b);
    const double r1 = detail::bessel_ratio(g.order, z);
    // K_{p+2} = K_p + 2(p+1)/z K_{p+1}
    const double r2 = 1.0 + 2.0 * (g.order + 1.0) / z * r1;
    return g.b / g.a * (r2 - r1 * r1);
}

/// Second-order Taylor approximation of E[log X] around E[X].
inline double gig_expected_log(const GigParams& g) {
    const double mean = gig_mean(g);
    return std::log(mean) - gig_var(g) / (2.0 * mean * mean);
}

inline double digamma(double x) {
    detail::require_positive(x, "digamma argument");
    return boost::math::digamma(x);
}

inline double log_gamma(double x) {
    detail::require_positive(x, "log_gamma argument");
    return boost::math::lgamma(x);
}

}  // namespace vblasso::specfun

#pragma once

// Simulation exercises: data generators, the replicate loop, and the
// aggregate tables (exclusion proportions, MAE, ELBO by K).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "gibbs.hpp"
#include "knot_search.hpp"
#include "model.hpp"
#include "selection.hpp"
#include "spline.hpp"
#include "vb_lasso.hpp"

namespace vblasso {

enum class Correlation { identity, ar, equicorrelated };
enum class Engine { vb, mcmc };

inline const char* to_string(Engine e) { return e == Engine::vb ? "vb" : "mcmc"; }

struct ExerciseSpec {
    int id = 1;
    std::string scenario;
    int n_train = 100;
    int n_valid = 50;
    int p = 10;
    Eigen::VectorXd beta;  // regression truth; empty for exercise 1 (drawn) and splines
    Correlation correlation = Correlation::identity;
    double rho = 0.0;
    double phi = 0.4;
    double lambda = 5.0;  // exercise 1 only
    bool standardize = false;
    int replicates = 1;
    std::uint64_t seed = 1;
    std::vector<int> knot_grid;  // spline exercises
    int degree = 3;

    bool is_spline() const { return id == 4 || id == 5; }

    void validate() const {
        if (id < 1 || id > 5) throw std::invalid_argument("exercise id must be 1..5");
        if (replicates < 1) throw std::invalid_argument("replicate count must be at least 1");
        if (n_train < 1 || n_valid < 1 || p < 1) throw std::invalid_argument("sizes must be positive");
        if (!(phi > 0.0)) throw std::invalid_argument("phi must be positive");
        if (!is_spline() && id != 1 && beta.size() != p) throw std::invalid_argument("beta truth has wrong length");
    }
};

inline double bump_function(double x) {
    const double u = 16.0 * (x - 0.5);
    return x + 2.0 * std::exp(-u * u);
}

inline double normal_density(double x, double mean, double var) {
    return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

inline double two_bump_function(double x) {
    return 0.3 * normal_density(x, 0.4, 0.01) + 0.7 * normal_density(x, 0.8, 0.01);
}

inline Eigen::MatrixXd correlation_matrix(int p, Correlation c, double rho) {
    Eigen::MatrixXd R = Eigen::MatrixXd::Identity(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) {
            if (i == j) continue;
            if (c == Correlation::ar) R(i, j) = std::pow(rho, std::abs(i - j));
            if (c == Correlation::equicorrelated) R(i, j) = rho;
        }
    return R;
}

/// n = 100, p = 10, X ~ N(0, I), tau_j ~ Exp(5), beta | tau ~ N(0, tau/phi), phi = 0.4.
inline ExerciseSpec exercise1(int replicates = 1, std::uint64_t seed = 1) {
    ExerciseSpec s;
    s.id = 1;
    s.scenario = "E1";
    s.n_train = 100;
    s.n_valid = 50;
    s.p = 10;
    s.phi = 0.4;
    s.lambda = 5.0;
    s.replicates = replicates;
    s.seed = seed;
    return s;
}

/// Scenarios 1..6: (n_T, n_V) in {(20,10), (100,50), (200,100)}, identity
/// correlation for 1..3 and 0.7^|i-j| for 4..6.
inline ExerciseSpec exercise2(int scenario, int replicates = 100, std::uint64_t seed = 1) {
    if (scenario < 1 || scenario > 6) throw std::invalid_argument("exercise 2 scenario must be 1..6");
    static constexpr int sizes[3][2] = {{20, 10}, {100, 50}, {200, 100}};
    ExerciseSpec s;
    s.id = 2;
    s.scenario = "S2." + std::to_string(scenario);
    s.n_train = sizes[(scenario - 1) % 3][0];
    s.n_valid = sizes[(scenario - 1) % 3][1];
    s.p = 8;
    s.beta.resize(8);
    s.beta << 3, 1.5, 0, 0, 2, 0, 0, 0;
    s.correlation = scenario <= 3 ? Correlation::identity : Correlation::ar;
    s.rho = 0.7;
    s.phi = 1.0 / 9.0;
    s.standardize = true;
    s.replicates = replicates;
    s.seed = seed;
    return s;
}

/// Scenarios 1..4: (n_T, n_V) in {(20,10), (200,100)} x phi in {1/9, 1/225},
/// p = 40, equicorrelation 0.5.
inline ExerciseSpec exercise3(int scenario, int replicates = 100, std::uint64_t seed = 1) {
    if (scenario < 1 || scenario > 4) throw std::invalid_argument("exercise 3 scenario must be 1..4");
    ExerciseSpec s;
    s.id = 3;
    s.scenario = "S3." + std::to_string(scenario);
    const bool small = scenario % 2 == 1;
    s.n_train = small ? 20 : 200;
    s.n_valid = small ? 10 : 100;
    s.p = 40;
    s.beta = Eigen::VectorXd::Zero(40);
    s.beta.segment(10, 10).setConstant(3.0);
    s.beta.segment(30, 10).setConstant(3.0);
    s.correlation = Correlation::equicorrelated;
    s.rho = 0.5;
    s.phi = scenario <= 2 ? 1.0 / 9.0 : 1.0 / 225.0;
    s.standardize = true;
    s.replicates = replicates;
    s.seed = seed;
    return s;
}

/// Spline exercises: x equispaced on [0, 1], noise variance 0.3, cubic basis.
inline ExerciseSpec spline_exercise(int id, int replicates = 100, std::uint64_t seed = 1) {
    if (id != 4 && id != 5) throw std::invalid_argument("spline exercises are 4 and 5");
    ExerciseSpec s;
    s.id = id;
    s.scenario = id == 4 ? "E4" : "E5";
    s.n_train = id == 4 ? 100 : 300;
    s.n_valid = s.n_train;
    s.p = 1;
    s.phi = 1.0 / 0.3;
    s.replicates = replicates;
    s.seed = seed;
    s.knot_grid = {10, 20, 30, 40, 50};
    s.degree = 3;
    return s;
}

inline ExerciseSpec exercise_by_id(int id, int scenario, int replicates, std::uint64_t seed) {
    switch (id) {
        case 1: return exercise1(replicates, seed);
        case 2: return exercise2(scenario, replicates, seed);
        case 3: return exercise3(scenario, replicates, seed);
        case 4:
        case 5: return spline_exercise(id, replicates, seed);
    }
    throw std::invalid_argument("exercise id must be 1..5");
}

struct GeneratedData {
    Dataset train;
    Dataset validation;
    Eigen::VectorXd beta;   // truth (regression exercises)
    Eigen::VectorXd x;      // spline exercises: shared design points
    Eigen::VectorXd f;      // true curve at x
};

/// Independent stream per (seed, replicate), so results do not depend on
/// how replicates are scheduled.
inline Rng replicate_rng(std::uint64_t seed, int replicate) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replicate)};
    return Rng(seq);
}

inline GeneratedData generate_exercise(const ExerciseSpec& spec, int replicate) {
    spec.validate();
    Rng rng = replicate_rng(spec.seed, replicate);
    std::normal_distribution<double> normal;
    GeneratedData out;

    if (spec.is_spline()) {
        const int n = spec.n_train;
        out.x = Eigen::VectorXd::LinSpaced(n, 0.0, 1.0);
        out.f.resize(n);
        for (int i = 0; i < n; ++i) out.f(i) = spec.id == 4 ? bump_function(out.x(i)) : two_bump_function(out.x(i));
        const double sd = 1.0 / std::sqrt(spec.phi);
        out.train.y.resize(n);
        out.validation.y.resize(n);
        for (int i = 0; i < n; ++i) out.train.y(i) = out.f(i) + sd * normal(rng);
        for (int i = 0; i < n; ++i) out.validation.y(i) = out.f(i) + sd * normal(rng);
        out.train.X = out.x;
        out.validation.X = out.x;
        return out;
    }

    const int p = spec.p;
    const int n = spec.n_train + spec.n_valid;
    const Eigen::MatrixXd R = correlation_matrix(p, spec.correlation, spec.rho);
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(R).matrixL();
    Eigen::MatrixXd Z(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) Z(i, j) = normal(rng);
    const Eigen::MatrixXd X = Z * L.transpose();

    if (spec.id == 1) {
        std::exponential_distribution<double> expo(spec.lambda);
        out.beta.resize(p);
        for (int j = 0; j < p; ++j) {
            const double tau = expo(rng);
            out.beta(j) = normal(rng) * std::sqrt(tau / spec.phi);
        }
    } else {
        out.beta = spec.beta;
    }
    const double sd = 1.0 / std::sqrt(spec.phi);
    Eigen::VectorXd y = X * out.beta;
    for (int i = 0; i < n; ++i) y(i) += sd * normal(rng);

    out.train.X = X.topRows(spec.n_train);
    out.train.y = y.head(spec.n_train);
    out.validation.X = X.bottomRows(spec.n_valid);
    out.validation.y = y.tail(spec.n_valid);
    if (spec.standardize) {
        const Standardized st = standardize(out.train);
        out.train = st.data;
        out.validation.X = st.transform(out.validation.X);
    }
    return out;
}

inline double mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual) {
    if (pred.size() != actual.size()) throw std::invalid_argument("mae: length mismatch");
    if (pred.size() == 0) throw std::invalid_argument("mae: empty input");
    return (pred - actual).cwiseAbs().mean();
}

/// Exact normal-gamma refit on the kept columns with the near-flat prior
/// C0 = kRefitPriorScale diag(X'X). Returns coefficients in the full column space
/// (excluded entries zero).
inline Eigen::VectorXd refit_kept(const Dataset& data, const std::vector<bool>& keep, const LassoPriors& priors) {
    std::vector<Eigen::Index> cols;
    for (std::size_t j = 0; j < keep.size(); ++j)
        if (keep[j]) cols.push_back(static_cast<Eigen::Index>(j));
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(data.p());
    if (cols.empty()) return beta;
    Dataset reduced;
    reduced.y = data.y;
    reduced.X.resize(data.n(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) reduced.X.col(static_cast<Eigen::Index>(k)) = data.X.col(cols[k]);
    Eigen::VectorXd diag = reduced.X.colwise().squaredNorm().transpose();
    for (Eigen::Index j = 0; j < diag.size(); ++j) diag(j) = std::max(diag(j), 1e-300) * kRefitPriorScale;
    const double a0 = priors.jeffreys ? 1e-3 : priors.a0;
    const double b0 = priors.jeffreys ? 1e-3 : priors.b0;
    const NormalGammaPosterior post = conjugate_fit(reduced, Eigen::VectorXd::Zero(reduced.p()),
                                                    diag.asDiagonal().toDenseMatrix(), a0, b0);
    for (std::size_t k = 0; k < cols.size(); ++k) beta(cols[k]) = post.m1(static_cast<Eigen::Index>(k));
    return beta;
}

struct SplineKRecord {
    int K = 0;
    double elbo = 0.0;
    std::size_t selected = 0;
    std::vector<double> selected_knots;
    bool failed = false;
};

struct ReplicateResult {
    int replicate = 0;
    bool failed = false;
    std::string error;
    Eigen::VectorXd beta_true;
    Eigen::VectorXd mean;  // posterior means of beta
    Eigen::VectorXd sd;
    std::vector<bool> keep;  // regression exercises
    double mae = 0.0;
    double seconds = 0.0;
    bool converged = true;
    std::vector<SplineKRecord> by_k;  // spline exercises
    int chosen_K = 0;
};

struct ExerciseReport {
    ExerciseSpec spec;
    Engine engine = Engine::vb;
    Criterion criterion = Criterion::bf;
    std::vector<ReplicateResult> replicates;
    double total_seconds = 0.0;

    std::size_t failures() const {
        return static_cast<std::size_t>(std::count_if(replicates.begin(), replicates.end(),
                                                      [](const ReplicateResult& r) { return r.failed; }));
    }

    /// Fraction of successful replicates excluding each coefficient.
    Eigen::VectorXd exclusion_proportions() const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(spec.p);
        int count = 0;
        for (const auto& r : replicates) {
            if (r.failed || r.keep.empty()) continue;
            ++count;
            for (int j = 0; j < spec.p; ++j)
                if (!r.keep[static_cast<std::size_t>(j)]) out(j) += 1.0;
        }
        return count > 0 ? Eigen::VectorXd(out / count) : out;
    }

    /// Mean ELBO per grid K over successful fits.
    std::map<int, double> mean_elbo_by_k() const {
        std::map<int, double> sum;
        std::map<int, int> count;
        for (const auto& r : replicates)
            for (const auto& k : r.by_k)
                if (!k.failed) {
                    sum[k.K] += k.elbo;
                    ++count[k.K];
                }
        for (auto& [K, v] : sum) v /= count[K];
        return sum;
    }
};

struct RunSettings {
    Engine engine = Engine::vb;
    Criterion criterion = Criterion::bf;
    LassoPriors priors;
    FitOptions fit;
    GibbsOptions gibbs;
    KnotSearchConfig knots;  // spline exercises; the grid comes from ExerciseSpec::knot_grid
    int threads = 1;
};

namespace detail {

inline ReplicateResult run_regression_replicate(const ExerciseSpec& spec, const RunSettings& cfg, int r) {
    ReplicateResult out;
    out.replicate = r;
    const GeneratedData gen = generate_exercise(spec, r);
    out.beta_true = gen.beta;
    const auto t0 = std::chrono::steady_clock::now();
    SelectionReport report;
    if (cfg.engine == Engine::vb) {
        const VariationalState s = fit(gen.train, cfg.priors, cfg.fit);
        out.converged = s.converged;
        out.mean = s.m_beta;
        out.sd = s.beta_sd();
        report = select(s, cfg.criterion);
    } else {
        GibbsOptions g = cfg.gibbs;
        g.seed = replicate_rng(spec.seed ^ 0x9e3779b97f4a7c15ULL, r)();
        const GibbsChain chain = gibbs_fit(gen.train, cfg.priors, g);
        const ChainSummary sum = summarize_draws(chain.beta_draws, {});
        out.mean = sum.mean;
        out.sd = sum.sd;
        report = select(chain.beta_draws, cfg.criterion);
    }
    out.keep = report.keep_mask();
    const Eigen::VectorXd beta = refit_kept(gen.train, out.keep, cfg.priors);
    out.mae = mae(gen.validation.X * beta, gen.validation.y);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

inline ReplicateResult run_spline_replicate(const ExerciseSpec& spec, const RunSettings& cfg, int r) {
    ReplicateResult out;
    out.replicate = r;
    const GeneratedData gen = generate_exercise(spec, r);
    const auto t0 = std::chrono::steady_clock::now();
    KnotSearchConfig kc = cfg.knots;
    kc.degree = spec.degree;
    kc.criterion = cfg.criterion;
    kc.grid_start = spec.knot_grid.front();
    kc.grid_max = spec.knot_grid.back();
    kc.grid_step = spec.knot_grid.size() > 1 ? spec.knot_grid[1] - spec.knot_grid[0] : 1;
    kc.full_grid = true;
    const KnotSearchResult res = search(gen.x, gen.train.y, kc, cfg.priors, Beta1Prior::standard(spec.degree), cfg.fit);
    for (const KnotRecord& rec : res.records) {
        out.by_k.push_back({rec.K, rec.elbo, rec.selected_knots.size(), rec.selected_knots, rec.failed});
        if (!rec.failed) out.converged = out.converged && rec.converged;
    }
    out.chosen_K = res.chosen_K;
    const KnotRecord& best = res.chosen();
    const SplineRefit refit = refit_spline(gen.x, gen.train.y, best.spec, best.report.keep_mask(), cfg.priors);
    out.mae = mae(refit.curve(gen.x), gen.validation.y);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace detail

inline ReplicateResult run_replicate(const ExerciseSpec& spec, const RunSettings& cfg, int r) {
    try {
        return spec.is_spline() ? detail::run_spline_replicate(spec, cfg, r)
                                : detail::run_regression_replicate(spec, cfg, r);
    } catch (const std::exception& e) {
        ReplicateResult out;
        out.replicate = r;
        out.failed = true;
        out.error = e.what();
        return out;
    }
}

/// Runs every replicate (fanned over cfg.threads workers); results are
/// stored by replicate index, so output is independent of scheduling.
inline ExerciseReport run_exercise(const ExerciseSpec& spec, const RunSettings& cfg) {
    spec.validate();
    ExerciseReport report;
    report.spec = spec;
    report.engine = cfg.engine;
    report.criterion = cfg.criterion;
    report.replicates.resize(static_cast<std::size_t>(spec.replicates));
    const auto t0 = std::chrono::steady_clock::now();
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int r = next++; r < spec.replicates; r = next++)
            report.replicates[static_cast<std::size_t>(r)] = run_replicate(spec, cfg, r);
    };
    const int threads = std::max(1, std::min(cfg.threads, spec.replicates));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    report.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace vblasso

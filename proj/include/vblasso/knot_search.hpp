#pragma once

// Choice of the maximum number of knots: fit on an increasing grid of K and
// keep going while the ELBO does not decrease.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "selection.hpp"
#include "spline.hpp"

namespace vblasso {

/// Which ELBO is compared across K: the fit with all K knots, or a second
/// variational fit that uses only the knots the criterion kept.
enum class ElboSource { full_fit, selected_refit };

inline const char* to_string(ElboSource s) { return s == ElboSource::full_fit ? "full_fit" : "selected_refit"; }

inline ElboSource parse_elbo_source(const std::string& s) {
    if (s == "full_fit" || s == "full") return ElboSource::full_fit;
    if (s == "selected_refit" || s == "selected") return ElboSource::selected_refit;
    throw std::invalid_argument("unknown ELBO source '" + s + "'");
}

struct KnotSearchConfig {
    int grid_start = 10;
    int grid_step = 10;
    int grid_max = 50;
    int degree = 3;
    Placement placement = Placement::quantile;
    Criterion criterion = Criterion::bf;
    ElboSource elbo_source = ElboSource::full_fit;
    bool full_grid = false;  // evaluate every K; chosen_K still follows the ascent rule
    double tie_tol = 1e-8;

    void validate() const {
        if (grid_start < 1) throw std::invalid_argument("grid_start must be at least 1");
        if (grid_step < 1) throw std::invalid_argument("grid_step must be at least 1");
        if (grid_max < grid_start) throw std::invalid_argument("grid_max must be at least grid_start");
        if (degree < 0) throw std::invalid_argument("degree must be nonnegative");
        if (placement == Placement::explicit_knots) throw std::invalid_argument("knot search needs a placement rule");
    }
    std::vector<int> grid() const {
        std::vector<int> g;
        for (int k = grid_start; k <= grid_max; k += grid_step) g.push_back(k);
        return g;
    }
};

enum class StopReason { elbo_decreased, grid_exhausted, fit_failed };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::elbo_decreased: return "elbo_decreased";
        case StopReason::grid_exhausted: return "grid_exhausted";
        case StopReason::fit_failed: return "fit_failed";
    }
    return "?";
}

struct KnotRecord {
    int K = 0;
    double elbo = 0.0;       // value compared across K
    double full_elbo = 0.0;  // ELBO of the fit with all K knots
    bool converged = false;
    bool failed = false;
    std::string error;
    SplineSpec spec;
    std::vector<double> selected_knots;
    SelectionReport report;
    SplineVariationalState state;
};

struct KnotSearchResult {
    std::vector<KnotRecord> records;
    int chosen_K = 0;
    std::size_t chosen_index = 0;
    std::size_t sequential_count = 0;  // records the ascent rule visits
    StopReason stopped_reason = StopReason::grid_exhausted;

    const KnotRecord& chosen() const { return records.at(chosen_index); }
};

/// Fits one K: full variational fit, selection on the knot coefficients,
/// and the ELBO under the configured source.
inline KnotRecord evaluate_knots(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int K,
                                 const KnotSearchConfig& cfg, const LassoPriors& priors,
                                 const Beta1Prior& beta1_prior, const FitOptions& opts) {
    KnotRecord rec;
    rec.K = K;
    try {
        rec.spec = place_knots(x, K, cfg.placement, cfg.degree);
        const PartitionedDesign design = build_design(x, rec.spec);
        rec.state = fit_spline_vb(y, design, priors, beta1_prior, opts);
        rec.converged = rec.state.converged;
        rec.full_elbo = rec.state.elbo_trace.back();
        rec.report = select(rec.state, cfg.criterion);
        std::vector<double> kept;
        for (std::size_t k = 0; k < rec.report.entries.size(); ++k)
            if (rec.report.entries[k].kept()) rec.selected_knots.push_back(rec.spec.knots[k]);
        if (cfg.elbo_source == ElboSource::full_fit) {
            rec.elbo = rec.full_elbo;
        } else {
            const SplineSpec reduced{cfg.degree, rec.selected_knots, Placement::explicit_knots};
            const SplineVariationalState refit =
                fit_spline_vb(y, build_design(x, reduced), priors, beta1_prior, opts);
            rec.elbo = refit.elbo_trace.back();
        }
    } catch (const std::exception& e) {
        rec.failed = true;
        rec.error = e.what();
    }
    return rec;
}

/// Ascent over K = grid_start, grid_start + grid_step, ... <= grid_max.
/// Stops at the first ELBO decrease (ties continue) or failed fit. chosen_K
/// maximizes the ELBO among visited records, the later K winning ties.
inline KnotSearchResult search(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const KnotSearchConfig& cfg,
                               const LassoPriors& priors, const Beta1Prior& beta1_prior, const FitOptions& opts = {}) {
    cfg.validate();
    if (x.size() != y.size()) throw std::invalid_argument("x and y have different lengths");
    KnotSearchResult out;
    const std::vector<int> grid = cfg.grid();
    bool stopped = false;
    for (int K : grid) {
        if (stopped && !cfg.full_grid) break;
        out.records.push_back(evaluate_knots(x, y, K, cfg, priors, beta1_prior, opts));
        if (stopped) continue;
        const KnotRecord& rec = out.records.back();
        out.sequential_count = out.records.size();
        if (rec.failed) {
            out.stopped_reason = StopReason::fit_failed;
            stopped = true;
        } else if (out.records.size() >= 2) {
            const KnotRecord& prev = out.records[out.records.size() - 2];
            if (rec.elbo < prev.elbo - cfg.tie_tol * std::max(1.0, std::abs(prev.elbo))) {
                out.stopped_reason = StopReason::elbo_decreased;
                stopped = true;
            }
        }
    }
    if (!stopped) out.stopped_reason = StopReason::grid_exhausted;

    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < out.sequential_count; ++i) {
        const KnotRecord& r = out.records[i];
        if (r.failed) continue;
        if (!best) {
            best = i;
            continue;
        }
        const double b = out.records[*best].elbo;
        if (r.elbo >= b - cfg.tie_tol * std::max(1.0, std::abs(b))) best = i;
    }
    if (!best) throw std::runtime_error("knot search: every fit failed (" + out.records.front().error + ")");
    out.chosen_index = *best;
    out.chosen_K = out.records[*best].K;
    return out;
}

}  // namespace vblasso

// vblasso: command-line front end for the variational Bayesian Lasso.
//
// Exit status: 0 success, 1 input or configuration error, 2 a fit stopped
// at max_iterations without meeting the convergence rule.

#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <vblasso/vblasso.hpp>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace vblasso;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUnconverged = 2;

struct Options {
    std::string input;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::string response = "y";
    std::string x_column = "x";
    bool log_y = false;
    int degree = 3;
    int knots = 10;
    std::string placement = "quantile";
    std::string criterion = "bf";
    double a0 = 0.1, b0 = 0.1, g0 = 0.1, h0 = 0.1;
    bool jeffreys = false;
    int max_iter = 1000;
    double tol = 1e-4;
    std::string monitor = "hyperparameters";
    int replicates = 100;
    int threads = 1;
    std::string format = "csv";
    bool no_refit = false;
    // knot search
    int grid_start = 10, grid_step = 10, grid_max = 50;
    bool full_grid = false;
    std::string elbo_source = "full_fit";
    // exercise
    int exercise = 1;
    int scenario = 3;
    std::string engine = "vb";
    // gibbs
    int iterations = 15000, burn_in = 5000, thin = 10;
    bool draws = false;

    std::uint64_t resolved_seed = 0;
};

using Cell = std::variant<std::string, double, long long>;

/// Tabular output, emitted as CSV or as a JSON array of records.
struct Tabular {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> r) { rows.push_back(std::move(r)); }

    std::string csv() const {
        io::CsvWriter w(header);
        for (const auto& r : rows) {
            std::vector<std::string> f;
            for (const auto& c : r) {
                if (auto s = std::get_if<std::string>(&c)) f.push_back(*s);
                else if (auto d = std::get_if<double>(&c)) f.push_back(io::format_double(*d));
                else f.push_back(std::to_string(std::get<long long>(c)));
            }
            w.row(f);
        }
        return w.str();
    }

    json records() const {
        json a = json::array();
        for (const auto& r : rows) {
            json o;
            for (std::size_t i = 0; i < r.size(); ++i)
                std::visit([&](const auto& v) { o[header[i]] = v; }, r[i]);
            a.push_back(o);
        }
        return a;
    }
};

class Output {
public:
    Output(const Options& o, std::string command) : opts_(o), command_(std::move(command)) {
        fs::create_directories(o.out_dir);
    }

    void table(const std::string& stem, const Tabular& t) {
        const std::string name = stem + (opts_.format == "json" ? ".json" : ".csv");
        io::write_file(path(name), opts_.format == "json" ? t.records().dump(2) + "\n" : t.csv());
        files_.push_back(name);
    }
    void json_file(const std::string& name, const json& j) {
        io::write_file(path(name), j.dump(2) + "\n");
        files_.push_back(name);
    }
    void timing(const std::string& key, double seconds) { timings_[key] = seconds; }

    /// manifest.json is deterministic; wall-clock timings go to timings.json.
    void finish(const json& config) {
        json m;
        m["command"] = command_;
        m["version"] = vblasso::version;
        m["seed"] = opts_.resolved_seed;
        const std::string canon = config.dump();
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(io::fnv1a(canon)));
        m["config_hash"] = hex;
        m["config"] = config;
        m["files"] = files_;
        io::write_file(path("manifest.json"), m.dump(2) + "\n");
        json t;
        for (const auto& [k, v] : timings_) t[k] = v;
        io::write_file(path("timings.json"), t.dump(2) + "\n");
    }

private:
    std::string path(const std::string& name) const { return (fs::path(opts_.out_dir) / name).string(); }

    const Options& opts_;
    std::string command_;
    std::vector<std::string> files_;
    std::map<std::string, double> timings_;
};

LassoPriors priors_from(const Options& o) {
    if (o.jeffreys) return LassoPriors::jeffreys_prior();
    return LassoPriors::gamma(o.a0, o.b0, o.g0, o.h0);
}

Monitor parse_monitor(const std::string& s) {
    if (s == "elbo") return Monitor::elbo;
    if (s == "hyperparameters") return Monitor::hyperparameters;
    if (s == "both") return Monitor::both;
    throw std::invalid_argument("unknown monitor '" + s + "'");
}

FitOptions fit_options_from(const Options& o) {
    FitOptions f;
    f.max_iterations = o.max_iter;
    f.rel_change_tol = o.tol;
    f.init_seed = o.resolved_seed;
    f.monitor = parse_monitor(o.monitor);
    f.validate();
    return f;
}

Placement parse_placement(const std::string& s) {
    if (s == "quantile") return Placement::quantile;
    if (s == "equispaced") return Placement::equispaced;
    throw std::invalid_argument("unknown placement '" + s + "'");
}

json base_config(const Options& o) {
    json c;
    c["input"] = o.input;
    c["seed"] = o.resolved_seed;
    c["criterion"] = o.criterion;
    c["jeffreys"] = o.jeffreys;
    c["prior"] = {{"a0", o.a0}, {"b0", o.b0}, {"g0", o.g0}, {"h0", o.h0}};
    c["max_iter"] = o.max_iter;
    c["tol"] = o.tol;
    c["monitor"] = o.monitor;
    c["format"] = o.format;
    return c;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tabular elbo_table(const std::vector<double>& trace) {
    Tabular t{{"iteration", "elbo"}, {}};
    for (std::size_t i = 0; i < trace.size(); ++i) t.add({static_cast<long long>(i + 1), trace[i]});
    return t;
}

Eigen::VectorXd maybe_log(Eigen::VectorXd y, bool log_y) {
    if (!log_y) return y;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (!(y(i) > 0.0))
            throw std::invalid_argument("--log-y needs positive responses (data row " + std::to_string(i + 1) + ")");
        y(i) = std::log(y(i));
    }
    return y;
}

// ---------------------------------------------------------------- fit-lasso

int cmd_fit_lasso(const Options& o) {
    Dataset data = io::to_dataset(io::read_csv(o.input), o.response);
    data.y = maybe_log(data.y, o.log_y);
    const Criterion crit = parse_criterion(o.criterion);
    const LassoPriors priors = priors_from(o);
    Output out(o, "fit-lasso");

    const auto t0 = std::chrono::steady_clock::now();
    const VariationalState s = fit(data, priors, fit_options_from(o));
    out.timing("fit_seconds", seconds_since(t0));
    const SelectionReport rep = select(s, crit);
    const Eigen::VectorXd sd = s.beta_sd();

    Tabular summary{{"coefficient", "mean", "sd", "criterion", "statistic", "lower", "upper", "verdict"}, {}};
    for (Eigen::Index j = 0; j < s.p(); ++j) {
        const auto& e = rep.entries[static_cast<std::size_t>(j)];
        summary.add({data.feature_names[static_cast<std::size_t>(j)], s.m_beta(j), sd(j), std::string(to_string(crit)),
                     e.statistic, e.lower, e.upper, std::string(e.kept() ? "keep" : "exclude")});
    }
    json state = io::state_to_json(s);
    state["feature_names"] = data.feature_names;
    state["selection_source"] = rep.source;
    out.json_file("state.json", state);
    out.table("summary", summary);
    out.table("elbo_trace", elbo_table(s.elbo_trace));

    json cfg = base_config(o);
    cfg["response"] = o.response;
    cfg["log_y"] = o.log_y;
    out.finish(cfg);
    if (!s.converged) {
        std::cerr << "warning: fit did not converge in " << s.iteration << " iterations\n";
        return kExitUnconverged;
    }
    return kExitOk;
}

// ------------------------------------------------------- fit-spline / knots

struct SplineInput {
    Eigen::VectorXd x;  // original scale
    Eigen::VectorXd u;  // rescaled to [0, 1]
    Eigen::VectorXd y;
    double lo = 0.0, hi = 1.0;

    double to_unit(double v) const { return (v - lo) / (hi - lo); }
    double from_unit(double v) const { return lo + v * (hi - lo); }
};

SplineInput read_spline_input(const Options& o) {
    const io::Table t = io::read_csv(o.input);
    SplineInput in;
    in.x = t.values.col(t.column(o.x_column));
    in.y = maybe_log(t.values.col(t.column(o.response)), o.log_y);
    in.lo = in.x.minCoeff();
    in.hi = in.x.maxCoeff();
    if (!(in.hi > in.lo)) throw std::invalid_argument("x column has zero range");
    in.u = (in.x.array() - in.lo) / (in.hi - in.lo);
    return in;
}

/// Writes curve, knot report and state for one fitted spline.
void emit_spline(Output& out, const Options& o, const SplineInput& in, const SplineSpec& spec,
                 const SplineVariationalState& s) {
    const SelectionReport rep = select(s, parse_criterion(o.criterion));
    const std::vector<bool> keep = rep.keep_mask();
    const Eigen::VectorXd grid_u = Eigen::VectorXd::LinSpaced(512, 0.0, 1.0);

    StudentTPredictive pred;
    if (o.no_refit) {
        const PartitionedDesign at = build_design(grid_u, spec);
        pred = spline_predictive(s, at);
        pred.location = fitted_curve(s, at, keep);
    } else {
        pred = refit_spline(in.u, in.y, spec, keep, priors_from(o)).predictive(grid_u);
    }
    const auto [lower, upper] = pred.interval(0.95);
    Tabular curve{{"x", "fit", "lower95", "upper95"}, {}};
    for (Eigen::Index i = 0; i < grid_u.size(); ++i) {
        const double xv = i == 0 ? in.lo : (i == grid_u.size() - 1 ? in.hi : in.from_unit(grid_u(i)));
        curve.add({xv, pred.location(i), lower(i), upper(i)});
    }
    out.table("curve", curve);

    Tabular knots{{"knot", "position", "mean", "sd", "criterion", "statistic", "lower", "upper", "verdict"}, {}};
    const Eigen::VectorXd sd = spec.K() > 0 ? s.beta_sd() : Eigen::VectorXd();
    for (Eigen::Index k = 0; k < spec.K(); ++k) {
        const auto& e = rep.entries[static_cast<std::size_t>(k)];
        knots.add({static_cast<long long>(k + 1), in.from_unit(spec.knots[static_cast<std::size_t>(k)]), s.m_beta(k),
                   sd(k), std::string(to_string(rep.criterion)), e.statistic, e.lower, e.upper,
                   std::string(e.kept() ? "keep" : "exclude")});
    }
    out.table("knots", knots);

    json state = io::state_to_json(s);
    state["degree"] = spec.degree;
    std::vector<double> positions;
    for (double k : spec.knots) positions.push_back(in.from_unit(k));
    state["knots"] = positions;
    state["x_range"] = {in.lo, in.hi};
    out.json_file("state.json", state);
    out.table("elbo_trace", elbo_table(s.elbo_trace));
}

int cmd_fit_spline(const Options& o) {
    const SplineInput in = read_spline_input(o);
    if (o.knots < 0) throw std::invalid_argument("--knots must be nonnegative");
    const LassoPriors priors = priors_from(o);
    const Beta1Prior prior = Beta1Prior::standard(o.degree);
    Output out(o, "fit-spline");
    const SplineSpec spec = place_knots(in.u, o.knots, parse_placement(o.placement), o.degree);
    const auto t0 = std::chrono::steady_clock::now();
    const SplineVariationalState s = fit_spline_vb(in.y, build_design(in.u, spec), priors, prior, fit_options_from(o));
    out.timing("fit_seconds", seconds_since(t0));
    emit_spline(out, o, in, spec, s);

    json cfg = base_config(o);
    cfg["degree"] = o.degree;
    cfg["knots"] = o.knots;
    cfg["placement"] = o.placement;
    cfg["refit"] = !o.no_refit;
    cfg["log_y"] = o.log_y;
    out.finish(cfg);
    if (!s.converged) {
        std::cerr << "warning: spline fit did not converge in " << s.iteration << " iterations\n";
        return kExitUnconverged;
    }
    return kExitOk;
}

int cmd_knot_search(const Options& o) {
    const SplineInput in = read_spline_input(o);
    const LassoPriors priors = priors_from(o);
    const Beta1Prior prior = Beta1Prior::standard(o.degree);
    KnotSearchConfig kc;
    kc.grid_start = o.grid_start;
    kc.grid_step = o.grid_step;
    kc.grid_max = o.grid_max;
    kc.degree = o.degree;
    kc.placement = parse_placement(o.placement);
    kc.criterion = parse_criterion(o.criterion);
    kc.elbo_source = parse_elbo_source(o.elbo_source);
    kc.full_grid = o.full_grid;
    Output out(o, "knot-search");

    const auto t0 = std::chrono::steady_clock::now();
    const KnotSearchResult res = search(in.u, in.y, kc, priors, prior, fit_options_from(o));
    out.timing("search_seconds", seconds_since(t0));

    Tabular table{{"K", "elbo", "full_elbo", "selected", "converged", "status"}, {}};
    for (std::size_t i = 0; i < res.records.size(); ++i) {
        const KnotRecord& r = res.records[i];
        const std::string status = r.failed ? "failed: " + r.error : (i < res.sequential_count ? "visited" : "extra");
        table.add({static_cast<long long>(r.K), r.failed ? NAN : r.elbo, r.failed ? NAN : r.full_elbo,
                   static_cast<long long>(r.selected_knots.size()), std::string(r.converged ? "yes" : "no"), status});
    }
    out.table("knot_search", table);
    const KnotRecord& best = res.chosen();
    emit_spline(out, o, in, best.spec, best.state);

    json cfg = base_config(o);
    cfg["degree"] = o.degree;
    cfg["placement"] = o.placement;
    cfg["grid"] = {o.grid_start, o.grid_step, o.grid_max};
    cfg["full_grid"] = o.full_grid;
    cfg["elbo_source"] = o.elbo_source;
    cfg["chosen_K"] = res.chosen_K;
    cfg["stopped_reason"] = to_string(res.stopped_reason);
    cfg["refit"] = !o.no_refit;
    out.finish(cfg);
    if (!best.converged) return kExitUnconverged;
    return kExitOk;
}

// ------------------------------------------------------------------ gibbs

GibbsOptions gibbs_options_from(const Options& o) {
    GibbsOptions g;
    g.iterations = o.iterations;
    g.burn_in = o.burn_in;
    g.thin = o.thin;
    g.seed = o.resolved_seed;
    g.validate();
    return g;
}

int cmd_gibbs(const Options& o) {
    const GibbsOptions g = gibbs_options_from(o);
    Dataset data = io::to_dataset(io::read_csv(o.input), o.response);
    data.y = maybe_log(data.y, o.log_y);
    Output out(o, "gibbs");
    const auto t0 = std::chrono::steady_clock::now();
    const GibbsChain chain = gibbs_fit(data, priors_from(o), g);
    out.timing("sampler_seconds", seconds_since(t0));
    const ChainSummary sum = chain_summary(chain);

    std::vector<std::string> names = data.feature_names;
    names.push_back("phi");
    names.push_back("lambda");
    for (const auto& f : data.feature_names) names.push_back("tau_" + f);
    Tabular t{{"parameter", "mean", "sd", "q2.5", "q50", "q97.5"}, {}};
    for (std::size_t j = 0; j < names.size(); ++j) {
        const auto i = static_cast<Eigen::Index>(j);
        t.add({names[j], sum.mean(i), sum.sd(i), sum.quantiles(i, 0), sum.quantiles(i, 1), sum.quantiles(i, 2)});
    }
    out.table("summary", t);
    if (o.draws) {
        std::vector<std::string> header{"draw"};
        header.insert(header.end(), names.begin(), names.end());
        Tabular d{header, {}};
        for (Eigen::Index r = 0; r < chain.size(); ++r) {
            std::vector<Cell> row{static_cast<long long>(r + 1)};
            for (Eigen::Index j = 0; j < chain.beta_draws.cols(); ++j) row.push_back(chain.beta_draws(r, j));
            row.push_back(chain.phi_draws(r));
            row.push_back(chain.lambda_draws(r));
            for (Eigen::Index j = 0; j < chain.tau_draws.cols(); ++j) row.push_back(chain.tau_draws(r, j));
            d.add(std::move(row));
        }
        out.table("draws", d);
    }
    json cfg = base_config(o);
    cfg["iterations"] = o.iterations;
    cfg["burn_in"] = o.burn_in;
    cfg["thin"] = o.thin;
    cfg["response"] = o.response;
    out.finish(cfg);
    return kExitOk;
}

// --------------------------------------------------------------- exercise

Engine parse_engine(const std::string& s) {
    if (s == "vb") return Engine::vb;
    if (s == "mcmc") return Engine::mcmc;
    throw std::invalid_argument("unknown engine '" + s + "'");
}

void emit_regression(Output& out, const ExerciseReport& rep) {
    const Eigen::VectorXd excl = rep.exclusion_proportions();
    Tabular t{{"coefficient", "truth", "exclusion_proportion"}, {}};
    const GeneratedData first = generate_exercise(rep.spec, 0);
    for (int j = 0; j < rep.spec.p; ++j) {
        const double truth = rep.spec.id == 1 ? NAN : first.beta(j);
        t.add({"beta_" + std::to_string(j + 1), truth, excl(j)});
    }
    out.table(std::string("exclusion_") + to_string(rep.engine), t);
}

void emit_mae(Tabular& t, const ExerciseReport& rep) {
    for (const auto& r : rep.replicates)
        t.add({static_cast<long long>(r.replicate), std::string(to_string(rep.engine)), r.failed ? NAN : r.mae,
               std::string(r.converged ? "yes" : "no"), r.error});
}

int cmd_exercise(const Options& o) {
    ExerciseSpec spec = exercise_by_id(o.exercise, o.scenario, o.replicates, o.resolved_seed);
    RunSettings cfg;
    cfg.criterion = parse_criterion(o.criterion);
    cfg.priors = priors_from(o);
    cfg.fit = fit_options_from(o);
    cfg.gibbs = gibbs_options_from(o);
    cfg.threads = o.threads;
    cfg.knots.placement = parse_placement(o.placement);
    cfg.knots.elbo_source = parse_elbo_source(o.elbo_source);
    Output out(o, "exercise");

    std::vector<Engine> engines;
    if (o.exercise == 1 || o.engine == "both") engines = {Engine::vb, Engine::mcmc};
    else engines = {parse_engine(o.engine)};
    if (spec.is_spline()) engines = {Engine::vb};

    Tabular mae{{"replicate", "engine", "mae", "converged", "error"}, {}};
    std::map<Engine, ExerciseReport> reports;
    for (Engine e : engines) {
        cfg.engine = e;
        reports[e] = run_exercise(spec, cfg);
        out.timing(std::string("total_seconds_") + to_string(e), reports[e].total_seconds);
        emit_mae(mae, reports[e]);
        if (!spec.is_spline()) emit_regression(out, reports[e]);
    }
    out.table("mae", mae);

    if (o.exercise == 1) {
        // Posterior summary on the first replicate against the truth.
        const GeneratedData gen = generate_exercise(spec, 0);
        const VariationalState s = fit(gen.train, cfg.priors, cfg.fit);
        GibbsOptions g = cfg.gibbs;
        const GibbsChain chain = gibbs_fit(gen.train, cfg.priors, g);
        const ChainSummary cs = chain_summary(chain);
        const Eigen::VectorXd sd = s.beta_sd();
        Tabular t{{"parameter", "Real", "MeanVB", "SdVB", "MeanMCMC", "SdMCMC"}, {}};
        const Eigen::Index p = s.p();
        for (Eigen::Index j = 0; j < p; ++j)
            t.add({"beta_" + std::to_string(j + 1), gen.beta(j), s.m_beta(j), sd(j), cs.mean(j), cs.sd(j)});
        t.add({"phi", spec.phi, s.phi_mean(), s.phi_sd(), cs.mean(p), cs.sd(p)});
        t.add({"lambda", spec.lambda, s.lambda_mean(), s.lambda_sd(), cs.mean(p + 1), cs.sd(p + 1)});
        out.table("table1_analog", t);
    }

    if (spec.is_spline()) {
        const ExerciseReport& rep = reports.at(Engine::vb);
        std::map<int, double> sel_sum;
        std::map<int, int> sel_n;
        Tabular per{{"replicate", "K", "elbo", "selected", "chosen"}, {}};
        Tabular pos{{"replicate", "K", "position"}, {}};
        for (const auto& r : rep.replicates)
            for (const auto& k : r.by_k) {
                per.add({static_cast<long long>(r.replicate), static_cast<long long>(k.K), k.failed ? NAN : k.elbo,
                         static_cast<long long>(k.selected), std::string(k.K == r.chosen_K ? "yes" : "no")});
                for (double x : k.selected_knots)
                    pos.add({static_cast<long long>(r.replicate), static_cast<long long>(k.K), x});
                if (!k.failed) {
                    sel_sum[k.K] += static_cast<double>(k.selected);
                    ++sel_n[k.K];
                }
            }
        Tabular avg{{"K", "mean_elbo", "mean_selected"}, {}};
        for (const auto& [K, e] : rep.mean_elbo_by_k())
            avg.add({static_cast<long long>(K), e, sel_sum[K] / sel_n[K]});
        out.table("elbo_by_k", avg);
        out.table("knots_by_replicate", per);
        out.table("selected_knots", pos);
    }

    json c = base_config(o);
    c["exercise"] = o.exercise;
    c["scenario"] = spec.scenario;
    c["replicates"] = o.replicates;
    c["engine"] = o.engine;
    c["gibbs"] = {o.iterations, o.burn_in, o.thin};
    c["elbo_source"] = o.elbo_source;
    c["placement"] = o.placement;
    out.finish(c);
    std::size_t failures = 0;
    for (const auto& [e, r] : reports) failures += r.failures();
    if (failures > 0) std::cerr << "warning: " << failures << " replicate(s) failed; see mae output\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Variational Bayesian Lasso and penalized regression splines"};
    app.set_version_flag("--version", std::string(vblasso::version));
    app.require_subcommand(1);
    Options o;

    auto shared = [&](CLI::App* sub, bool needs_input) {
        auto* in = sub->add_option("--input", o.input, "input CSV with a header row");
        if (needs_input) in->required()->check(CLI::ExistingFile);
        sub->add_option("--out-dir", o.out_dir, "output directory (created if missing)");
        sub->add_option("--seed", o.seed, "master RNG seed; drawn from entropy and recorded when absent");
        sub->add_option("--degree", o.degree, "spline degree")->check(CLI::Range(0, 10));
        sub->add_option("--knots", o.knots, "number of knots");
        sub->add_option("--placement", o.placement, "knot placement")->check(CLI::IsMember({"quantile", "equispaced"}));
        sub->add_option("--criterion", o.criterion, "selection criterion")->check(CLI::IsMember({"bf", "ci", "sn"}));
        sub->add_option("--prior-a0", o.a0, "phi ~ Ga(a0, b0)");
        sub->add_option("--prior-b0", o.b0);
        sub->add_option("--prior-g0", o.g0, "lambda ~ Ga(g0, h0)");
        sub->add_option("--prior-h0", o.h0);
        sub->add_flag("--jeffreys", o.jeffreys, "use p(phi) ~ 1/phi and p(lambda) ~ 1/lambda");
        sub->add_option("--max-iter", o.max_iter, "maximum CAVI iterations");
        sub->add_option("--tol", o.tol, "relative change tolerance on the variational hyperparameters");
        sub->add_option("--monitor", o.monitor, "convergence monitor")
            ->check(CLI::IsMember({"hyperparameters", "elbo", "both"}));
        sub->add_option("--replicates", o.replicates, "replicates (exercise)");
        sub->add_option("--threads", o.threads, "worker threads (exercise)")->check(CLI::PositiveNumber);
        sub->add_option("--format", o.format, "tabular output format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--response", o.response, "response column name");
        sub->add_option("--x-column", o.x_column, "covariate column for splines");
        sub->add_flag("--log-y", o.log_y, "take the natural log of the response");
        sub->add_flag("--no-refit", o.no_refit, "zero excluded knots instead of refitting the kept ones");
    };

    auto* lasso = app.add_subcommand("fit-lasso", "variational fit of the Bayesian Lasso");
    shared(lasso, true);
    auto* spline = app.add_subcommand("fit-spline", "variational fit of a penalized spline");
    shared(spline, true);
    auto* knots = app.add_subcommand("knot-search", "choose the number of knots by ELBO");
    shared(knots, true);
    for (auto* sub : {knots}) {
        sub->add_option("--grid-start", o.grid_start);
        sub->add_option("--grid-step", o.grid_step);
        sub->add_option("--grid-max", o.grid_max);
        sub->add_flag("--full-grid", o.full_grid, "fit every grid value (chosen K still follows the ascent rule)");
    }
    auto* exercise = app.add_subcommand("exercise", "run a simulation exercise");
    shared(exercise, false);
    exercise->add_option("--id", o.exercise, "exercise 1..5")->required()->check(CLI::Range(1, 5));
    exercise->add_option("--scenario", o.scenario, "scenario within exercises 2 (1..6) and 3 (1..4)");
    exercise->add_option("--engine", o.engine, "engine")->check(CLI::IsMember({"vb", "mcmc", "both"}));
    auto* gibbs = app.add_subcommand("gibbs", "Gibbs sampler for the Bayesian Lasso");
    shared(gibbs, true);
    for (auto* sub : {exercise, gibbs}) {
        sub->add_option("--iterations", o.iterations);
        sub->add_option("--burn-in", o.burn_in);
        sub->add_option("--thin", o.thin);
    }
    gibbs->add_flag("--draws", o.draws, "also write the kept draws");
    for (auto* sub : {knots, exercise})
        sub->add_option("--elbo-source", o.elbo_source, "ELBO compared across K")
            ->check(CLI::IsMember({"selected_refit", "full_fit"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitError;
    }

    if (o.seed) {
        o.resolved_seed = *o.seed;
    } else {
        std::random_device rd;
        o.resolved_seed = (static_cast<std::uint64_t>(rd()) << 32) | rd();
        std::cerr << "note: no --seed given, using " << o.resolved_seed << "\n";
    }

    try {
        if (*lasso) return cmd_fit_lasso(o);
        if (*spline) return cmd_fit_spline(o);
        if (*knots) return cmd_knot_search(o);
        if (*exercise) return cmd_exercise(o);
        if (*gibbs) return cmd_gibbs(o);
    } catch (const io::ParseError& e) {
        std::cerr << "error: " << o.input << ": " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}

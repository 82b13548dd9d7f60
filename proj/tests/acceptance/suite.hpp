#pragma once

// End-to-end acceptance checks. Each check prints one PASS/FAIL line with
// the measured values; run_acceptance returns true iff all passed.

#include "ctrcbo/ctrcbo.hpp"
#include "oracles.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace acceptance {

struct Options {
    std::string config_path;  // benchmark experiment file
    std::filesystem::path scratch_dir;
};

struct Outcome {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

using ctrcbo::RandomStream;
using ctrcbo::uniform01;

inline double urand(RandomStream& r, double lo, double hi) { return lo + (hi - lo) * uniform01(r); }

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

struct GpInstance {
    oracle::Mat X;
    oracle::Vec y;
    oracle::Mat Q;
    oracle::Kernel kernel;
    ctrcbo::KernelSpec spec;
    double noise = 0.0;
    double prior_mean = 0.0;
};

inline GpInstance random_gp_instance(RandomStream& r, bool noiseless) {
    GpInstance g;
    const std::size_t d = noiseless ? 2 + static_cast<std::size_t>(r() % 3) : 1 + static_cast<std::size_t>(r() % 4);
    const std::size_t n = 1 + static_cast<std::size_t>(r() % 10);
    for (std::size_t i = 0; i < n; ++i) {
        oracle::Vec x(d);
        for (auto& v : x) v = urand(r, -2.0, 2.0);
        g.X.push_back(x);
        g.y.push_back(urand(r, -3.0, 3.0));
    }
    for (int q = 0; q < 5; ++q) {
        oracle::Vec x(d);
        for (auto& v : x) v = urand(r, -2.5, 2.5);
        g.Q.push_back(x);
    }
    const bool sig = !noiseless && (r() % 2 == 0);
    const double s2 = urand(r, 0.5, 2.0);
    if (sig) {
        const double a = urand(r, 0.2, 2.0);
        const double b = urand(r, -1.0, 1.0);
        g.kernel = {true, a, b, {}, s2};
        g.spec = ctrcbo::KernelSpec::sigmoid(a, b, s2);
    } else {
        Eigen::VectorXd ls(static_cast<Eigen::Index>(d));
        oracle::Vec lv(d);
        for (std::size_t j = 0; j < d; ++j) {
            lv[j] = noiseless ? urand(r, 0.2, 0.5) : urand(r, 0.3, 2.0);
            ls[static_cast<Eigen::Index>(j)] = lv[j];
        }
        g.kernel = {false, 0, 0, lv, s2};
        g.spec = ctrcbo::KernelSpec::rbf(ls, s2);
    }
    g.noise = noiseless ? 0.0 : urand(r, 1e-3, 0.5);
    g.prior_mean = urand(r, -1.0, 1.0);
    return g;
}

inline Eigen::MatrixXd to_matrix(const oracle::Mat& X) {
    Eigen::MatrixXd M(static_cast<Eigen::Index>(X.size()), static_cast<Eigen::Index>(X.front().size()));
    for (std::size_t i = 0; i < X.size(); ++i) {
        for (std::size_t j = 0; j < X[i].size(); ++j) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = X[i][j];
    }
    return M;
}

inline Eigen::VectorXd to_vector(const oracle::Vec& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

/// Smallest eigenvalue of K + noise I on standardized inputs, computed on the
/// test side.
inline double covariance_min_eigenvalue(const detail::GpInstance& g) {
    oracle::Mat X = g.X, none;
    oracle::standardize(X, none);
    oracle::Mat K(X.size(), oracle::Vec(X.size()));
    for (std::size_t i = 0; i < X.size(); ++i) {
        for (std::size_t j = 0; j < X.size(); ++j) K[i][j] = g.kernel(X[i], X[j]) + (i == j ? g.noise : 0.0);
    }
    return oracle::min_eigenvalue(K);
}

inline Outcome check_gp_oracle() {
    using namespace detail;
    const auto start = std::chrono::steady_clock::now();
    RandomStream r(ctrcbo::derive_seed(2024, 1));
    double worst = 0.0;
    int fitted = 0, indefinite = 0, bad_refusals = 0;
    while (fitted < 200) {
        const GpInstance g = random_gp_instance(r, false);
        // The sigmoid kernel is not PSD in general. Draws whose covariance is
        // indefinite are not valid GP problems; the library may refuse those
        // only if the matrix stays indefinite up to the jitter cap.
        const double lam = covariance_min_eigenvalue(g);
        const bool valid = lam > 1e-8;
        ctrcbo::GPModel m;
        try {
            m = ctrcbo::fit(to_matrix(g.X), to_vector(g.y), g.spec, g.noise, g.prior_mean);
        } catch (const ctrcbo::NotPositiveDefinite&) {
            if (valid) {
                ++fitted;
                ++bad_refusals;
                worst = std::numeric_limits<double>::infinity();
            } else {
                ++indefinite;
                if (lam + 1e-2 > 1e-6) ++bad_refusals;
            }
            continue;
        }
        if (!valid) {
            ++indefinite;
            continue;
        }
        ++fitted;
        const auto o = oracle::gp_posterior(g.X, g.y, g.Q, g.kernel, g.noise + m.jitter_used, g.prior_mean);
        worst = std::max(worst, std::abs(ctrcbo::log_marginal_likelihood(m) - o.lml));
        for (std::size_t q = 0; q < g.Q.size(); ++q) {
            const auto p = ctrcbo::predict(m, to_vector(g.Q[q]));
            worst = std::max({worst, std::abs(p.mean - o.mean[q]), std::abs(p.variance - o.variance[q])});
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {1, "GP oracle equivalence", worst <= 1e-8 && secs < 10.0 && bad_refusals == 0,
            "instances=" + std::to_string(fitted) + " max_abs_err=" + fmt(worst) + " tol=1e-8 runtime_s=" + fmt(secs) +
                " limit=10 indefinite_draws_skipped=" + std::to_string(indefinite) +
                " unjustified_refusals=" + std::to_string(bad_refusals)};
}

inline Outcome check_interpolation() {
    using namespace detail;
    RandomStream r(ctrcbo::derive_seed(2024, 2));
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const GpInstance g = random_gp_instance(r, true);
        const auto m = ctrcbo::fit(to_matrix(g.X), to_vector(g.y), g.spec, 0.0, g.prior_mean);
        for (std::size_t k = 0; k < g.X.size(); ++k) {
            worst = std::max(worst, std::abs(ctrcbo::predict(m, to_vector(g.X[k])).mean - g.y[k]));
        }
    }
    return {2, "Noiseless interpolation", worst <= 1e-6, "instances=100 max_abs_err=" + fmt(worst) + " tol=1e-6"};
}

inline Outcome check_hypervolume() {
    using namespace detail;
    RandomStream r(ctrcbo::derive_seed(2024, 3));
    double worst_rel = 0.0;
    double min_hvi = 0.0;
    double worst_dominated = 0.0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t n = 1 + static_cast<std::size_t>(r() % 10);
        std::vector<ctrcbo::TradeoffPoint> pts;
        std::vector<oracle::Pt> opts;
        for (std::size_t k = 0; k < n; ++k) {
            const double s = urand(r, -1.0, 3.0);
            const double h = urand(r, -1.0, 2.0);
            pts.push_back({s, h});
            opts.push_back({s, h});
        }
        const auto front = ctrcbo::make_front(pts);
        const double hv = ctrcbo::hypervolume_2d(front);
        const double ref_hv = oracle::dominated_area(opts, {front.ref.score, front.ref.headroom});
        worst_rel = std::max(worst_rel, std::abs(hv - ref_hv) / std::max(ref_hv, 1e-300));
        for (int c = 0; c < 20; ++c) {
            const ctrcbo::TradeoffPoint cand{urand(r, -2.0, 4.0), urand(r, -2.0, 3.0)};
            const double v = ctrcbo::hvi(cand, front);
            min_hvi = std::min(min_hvi, v);
            if (oracle::dominated({cand.score, cand.headroom}, opts)) worst_dominated = std::max(worst_dominated, std::abs(v));
        }
        // Each observed point is dominated by the front it built.
        for (const auto& p : pts) worst_dominated = std::max(worst_dominated, std::abs(ctrcbo::hvi(p, front)));
    }
    const bool ok = worst_rel <= 1e-3 && min_hvi >= 0.0 && worst_dominated <= 1e-12;
    return {3, "Hypervolume oracle equivalence", ok,
            "fronts=100 max_rel_err=" + fmt(worst_rel) + " tol=1e-3 min_hvi=" + fmt(min_hvi) +
                " max_hvi_dominated=" + fmt(worst_dominated) + " tol=1e-12"};
}

struct BenchmarkRuns {
    ctrcbo::Experiment ex;
    std::vector<ctrcbo::RunResult> ctrcbo;
    std::vector<ctrcbo::RunResult> cbo;
};

inline BenchmarkRuns run_benchmark(const std::string& config_path) {
    BenchmarkRuns b;
    b.ex = ctrcbo::load_experiment(config_path);
    ctrcbo::ExperimentConfig full = b.ex.config;
    full.early_stop = false;
    ctrcbo::ExperimentConfig stop = b.ex.config;
    // Steps-to-convergence does not depend on what happens after it.
    stop.early_stop = true;
    for (auto seed : b.ex.config.seeds) {
        b.ctrcbo.push_back(ctrcbo::run_ctrcbo(full, b.ex.env, seed));
        b.cbo.push_back(ctrcbo::run_naive_cbo(stop, b.ex.env, seed));
    }
    return b;
}

using detail::fmt;

inline Outcome check_dual_safety(const BenchmarkRuns& b) {
    std::size_t checked = 0;
    bool nonneg = true;
    for (const auto* set : {&b.ctrcbo, &b.cbo}) {
        for (const auto& r : *set) {
            for (const auto& l : r.log.duals) {
                ++checked;
                nonneg = nonneg && (l.array() >= 0.0).all();
            }
        }
    }
    // Budget far above anything reachable: every step is feasible.
    ctrcbo::Experiment loose = b.ex;
    loose.env.budgets = Eigen::VectorXd::Constant(loose.env.budgets.size(), 100.0);
    loose.config.horizon = 40;
    bool pinned = true;
    for (auto algo : {ctrcbo::Algorithm::Ctrcbo, ctrcbo::Algorithm::NaiveCbo}) {
        const auto r = ctrcbo::run_algorithm(algo, loose.config, loose.env, 1);
        for (std::size_t t = 0; t < r.log.steps(); ++t) {
            pinned = pinned && (r.log.weighted_violation[t].array() <= 0.0).all() &&
                     (r.log.duals[t].array() == 0.0).all();
        }
    }
    return {4, "Dual safety", nonneg && pinned,
            "lambda_nonneg_steps=" + std::to_string(checked) + (nonneg ? " all>=0" : " NEGATIVE_FOUND") +
                " feasible_drift_pinned_at_0=" + (pinned ? "yes" : "no")};
}

/// Mean over runs of (1/t) * sum_{s<=t} max(0, g_s), summed over constraints.
inline double mean_positive_violation(const std::vector<ctrcbo::RunResult>& runs, std::size_t t) {
    double total = 0.0;
    for (const auto& r : runs) {
        double s = 0.0;
        for (std::size_t i = 0; i < t; ++i) s += r.log.weighted_violation[i].cwiseMax(0.0).sum();
        total += s / static_cast<double>(t);
    }
    return total / static_cast<double>(runs.size());
}

inline Outcome check_time_average(const BenchmarkRuns& b) {
    const double eps = b.ex.config.epsilon;
    std::vector<double> tav;
    for (const auto& r : b.ctrcbo) tav.push_back(r.time_average_violation.maxCoeff());
    const double med = ctrcbo::median_of(tav);
    const double v50 = mean_positive_violation(b.ctrcbo, 50);
    const double v100 = mean_positive_violation(b.ctrcbo, 100);
    const double v200 = mean_positive_violation(b.ctrcbo, 200);
    const bool ok = med <= eps + 0.25 && v50 >= v100 && v100 >= v200;
    return {5, "Time-average constraint", ok,
            "seeds=" + std::to_string(b.ctrcbo.size()) + " T=" + std::to_string(b.ex.config.horizon) +
                " median_time_avg_violation=" + fmt(med) + " limit=" + fmt(eps + 0.25) +
                " mean_violation@50/100/200=" + fmt(v50) + "/" + fmt(v100) + "/" + fmt(v200)};
}

inline Outcome check_convergence_ordering(const BenchmarkRuns& b) {
    std::vector<ctrcbo::SeedOutcome> a, c;
    for (const auto& r : b.ctrcbo) a.push_back({r.seed, r.steps_to_convergence, {}, 0.0});
    for (const auto& r : b.cbo) c.push_back({r.seed, r.steps_to_convergence, {}, 0.0});
    const auto sa = ctrcbo::summarize("ctrcbo", a);
    const auto sc = ctrcbo::summarize("cbo", c);
    const bool ordered = sa.median_steps && (!sc.median_steps || *sa.median_steps < *sc.median_steps);
    const bool rate = sa.convergence_rate() >= sc.convergence_rate();
    auto s = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("none"); };
    return {6, "Convergence ordering", ordered && rate && b.ctrcbo.size() >= 20,
            "seeds=" + std::to_string(b.ctrcbo.size()) + " median_steps ctrcbo=" + s(sa.median_steps) +
                " cbo=" + s(sc.median_steps) + " rate ctrcbo=" + fmt(sa.convergence_rate()) +
                " cbo=" + fmt(sc.convergence_rate())};
}

inline Outcome check_proxy(const BenchmarkRuns& b) {
    std::vector<double> se, ie, mse, mie;
    for (const auto& r : b.ctrcbo) {
        const auto p = ctrcbo::proxy_prediction_check(ctrcbo::Algorithm::Ctrcbo, b.ex.config, b.ex.env, r.log,
                                                      b.ex.config.proxy_holdout);
        se.push_back(p.score_abs_error);
        ie.push_back(p.impressions_abs_error);
        mse.push_back(std::abs(p.predicted.score_delta - p.actual.score_delta));
        mie.push_back(std::abs(p.predicted.impressions_delta - p.actual.impressions_delta));
    }
    const double s = ctrcbo::median_of(se);
    const double i = ctrcbo::median_of(ie);
    return {7, "Proxy prediction", s <= 0.15 && i <= 0.15,
            "holdout_steps=" + std::to_string(b.ex.config.proxy_holdout) + " median_per_step_abs_err score=" + fmt(s) +
                " impressions=" + fmt(i) + " tol=0.15 (window-mean abs err score=" + fmt(ctrcbo::median_of(mse)) +
                " impressions=" + fmt(ctrcbo::median_of(mie)) + ")"};
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Outcome check_determinism(const Options& opt) {
    namespace fs = std::filesystem;
    std::size_t files = 0;
    bool same = true;
    std::string why;
    const fs::path root = opt.scratch_dir / "determinism";
    fs::remove_all(root);
    struct Case {
        ctrcbo::Algorithm algo;
        ctrcbo::OutputFormat format;
        std::vector<std::uint64_t> seeds;
    };
    const std::vector<Case> cases{{ctrcbo::Algorithm::Ctrcbo, ctrcbo::OutputFormat::Csv, {3}},
                                  {ctrcbo::Algorithm::NaiveCbo, ctrcbo::OutputFormat::Json, {4}},
                                  {ctrcbo::Algorithm::Random, ctrcbo::OutputFormat::Csv, {5}}};
    std::ostringstream diag;
    for (std::size_t c = 0; c < cases.size(); ++c) {
        std::vector<fs::path> dirs;
        for (int rep = 0; rep < 2; ++rep) {
            ctrcbo::RunManifest m;
            m.config_path = opt.config_path;
            m.algorithm = cases[c].algo;
            m.seeds = cases[c].seeds;
            m.format = cases[c].format;
            m.out_dir = root / ("case" + std::to_string(c)) / ("rep" + std::to_string(rep));
            if (ctrcbo::cmd_run(m, diag) != 0) {
                same = false;
                why = diag.str();
            }
            dirs.push_back(m.out_dir);
        }
        if (!fs::exists(dirs[0])) continue;
        for (const auto& e : fs::directory_iterator(dirs[0])) {
            ++files;
            const fs::path other = dirs[1] / e.path().filename();
            if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
                same = false;
                why += " differs:" + e.path().filename().string();
            }
        }
    }
    fs::remove_all(root);
    return {8, "Determinism", same && files > 0,
            "files_compared=" + std::to_string(files) + (same ? " byte_identical" : " MISMATCH" + why)};
}

inline Outcome check_trust_region() {
    using namespace detail;
    RandomStream r(ctrcbo::derive_seed(2024, 9));
    std::size_t steps = 0, doublings = 0, halvings = 0, restarts = 0;
    bool ok = true;
    for (int seq = 0; seq < 1000 && ok; ++seq) {
        const int d = 1 + static_cast<int>(r() % 4);
        ctrcbo::GlobalBounds g{Eigen::VectorXd(d), Eigen::VectorXd(d)};
        for (int j = 0; j < d; ++j) {
            g.lower[j] = urand(r, -2.0, 0.0);
            g.upper[j] = g.lower[j] + urand(r, 0.1, 3.0);
        }
        ctrcbo::TrustRegionParams p;
        p.length_min = urand(r, 0.01, 0.1);
        p.length_init = urand(r, p.length_min, 0.6);
        p.length_max = urand(r, p.length_init, 1.5);
        p.tau_succ = 1 + static_cast<int>(r() % 4);
        p.tau_fail = 1 + static_cast<int>(r() % 6);
        auto random_point = [&] {
            Eigen::VectorXd x(d);
            for (int j = 0; j < d; ++j) x[j] = urand(r, g.lower[j], g.upper[j]);
            return ctrcbo::PolicyVector(x);
        };
        auto tr = ctrcbo::TrustRegion::make(0, random_point(), p);
        oracle::TrModel model{p.length_init, p.length_min, p.length_max, p.length_init, 0, 0, p.tau_succ, p.tau_fail, 0};
        const double p_success = urand(r, 0.1, 0.9);
        const int len = 20 + static_cast<int>(r() % 181);
        for (int s = 0; s < len && ok; ++s) {
            const bool success = uniform01(r) < p_success;
            const double before = tr.length;
            const int restarts_before = tr.restart_count;
            tr = ctrcbo::update_on_outcome(tr, success);
            model.step(success);
            ++steps;
            if (tr.restart_count == restarts_before) {
                if (tr.length > before) ++doublings;
                if (tr.length < before) ++halvings;
            }
            ok = ok && tr.length == model.length && tr.restart_count == model.restarts &&
                 tr.success_streak == model.succ && tr.failure_streak == model.fail;
            ok = ok && tr.length >= p.length_min && tr.length <= p.length_max;
            if (uniform01(r) < 0.3) tr = ctrcbo::recenter(tr, random_point(), g);
            const ctrcbo::Box box = ctrcbo::region_bounds(tr, g);
            for (int j = 0; j < d; ++j) {
                ok = ok && box.lower[j] >= g.lower[j] && box.upper[j] <= g.upper[j] && box.lower[j] <= box.upper[j];
                ok = ok && box.upper[j] - box.lower[j] <= tr.length * (g.upper[j] - g.lower[j]) * (1 + 1e-12);
                ok = ok && box.lower[j] <= tr.center[j] && tr.center[j] <= box.upper[j];
            }
        }
        restarts += static_cast<std::size_t>(model.restarts);
    }
    return {9, "Trust-region automaton", ok && doublings > 0 && halvings > 0 && restarts > 0,
            "sequences=1000 steps=" + std::to_string(steps) + " doublings=" + std::to_string(doublings) +
                " halvings=" + std::to_string(halvings) + " restarts=" + std::to_string(restarts) +
                (ok ? " matches_reference" : " MISMATCH")};
}

inline bool run_acceptance(const Options& opt, std::ostream& os) {
    std::vector<Outcome> out;
    auto emit = [&](Outcome o) {
        os << (o.passed ? "PASS" : "FAIL") << "  [" << o.id << "] " << o.name << ": " << o.detail << std::endl;
        out.push_back(std::move(o));
    };
    emit(check_gp_oracle());
    emit(check_interpolation());
    emit(check_hypervolume());
    const BenchmarkRuns b = run_benchmark(opt.config_path);
    emit(check_dual_safety(b));
    emit(check_time_average(b));
    emit(check_convergence_ordering(b));
    emit(check_proxy(b));
    emit(check_determinism(opt));
    emit(check_trust_region());
    std::sort(out.begin(), out.end(), [](const Outcome& a, const Outcome& c) { return a.id < c.id; });
    std::size_t passed = 0;
    for (const auto& o : out) passed += o.passed ? 1 : 0;
    os << passed << "/" << out.size() << " acceptance criteria passed" << std::endl;
    return passed == out.size();
}

}  // namespace acceptance

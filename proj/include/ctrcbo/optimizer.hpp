#pragma once

// The cohort trust-region loop, the global naive-CBO baseline and a
// uniform-random baseline, all driven through one engine so the only
// differences between algorithms are the surrogate's data scope and the
// candidate box.
//
// One step:
//   1. every cohort fits score/impressions GPs on its local data (or the
//      baseline fits one pooled pair), or uses its space-filling design
//      while the cohort is still cold;
//   2. every cohort picks the best candidate by hypervolume improvement
//      minus the dual penalty;
//   3. the environment is observed once for all cohorts;
//   4. trust regions update on success/failure and recenter on the
//      cohort incumbent;
//   5. one projected dual step on the volume-weighted violation.

#include "ctrcbo/acquisition.hpp"
#include "ctrcbo/gp_core.hpp"
#include "ctrcbo/primal_dual.hpp"
#include "ctrcbo/random.hpp"
#include "ctrcbo/simulator.hpp"
#include "ctrcbo/trust_region.hpp"
#include "ctrcbo/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ctrcbo {

enum class Algorithm { Ctrcbo, NaiveCbo, Random };

inline std::string_view to_string(Algorithm a) {
    switch (a) {
        case Algorithm::Ctrcbo: return "ctrcbo";
        case Algorithm::NaiveCbo: return "cbo";
        case Algorithm::Random: return "random";
    }
    return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
    if (s == "ctrcbo") return Algorithm::Ctrcbo;
    if (s == "cbo") return Algorithm::NaiveCbo;
    if (s == "random") return Algorithm::Random;
    throw std::invalid_argument("unknown algorithm '" + std::string(s) + "'");
}

/// Hyperparameter grids. Signal variance is a multiple of the training
/// targets' variance; noise variance is absolute (percent^2).
struct SurrogateSettings {
    std::vector<double> sigmoid_slopes{0.5, 1.0, 2.0};
    std::vector<double> sigmoid_biases{0.0};
    std::vector<double> rbf_lengthscales{0.5, 1.0, 2.0};
    std::vector<double> signal_scales{1.0};
    std::vector<double> noise_grid{1e-3, 1e-2, 5e-2};
    std::size_t hyper_period = 10;
    std::size_t hyper_max_points = 150;  // most recent points used for selection
};

struct ExperimentConfig {
    std::size_t horizon = 200;            // T
    std::size_t convergence_window = 2;   // W, one step per day
    double score_target = 1.0;            // platform score delta, percent
    std::vector<std::uint64_t> seeds{1};
    std::size_t n_candidates = 256;
    double beta = 1.0;
    double epsilon = 0.05;
    double eta = 1.0;
    TrustRegionParams trust_region;
    SurrogateSettings surrogate;
    bool early_stop = false;
    std::size_t proxy_holdout = 20;

    void validate() const {
        if (horizon < 1) throw std::invalid_argument("config: horizon must be >= 1");
        if (convergence_window < 1) throw std::invalid_argument("config: convergence_window must be >= 1");
        if (seeds.empty()) throw std::invalid_argument("config: at least one seed required");
        if (n_candidates < 1) throw std::invalid_argument("config: n_candidates must be >= 1");
        if (!(epsilon >= 0.0)) throw std::invalid_argument("config: epsilon must be >= 0");
        if (!(beta >= 0.0)) throw std::invalid_argument("config: beta must be >= 0");
        if (surrogate.hyper_period < 1) throw std::invalid_argument("config: hyper_period must be >= 1");
        if (surrogate.noise_grid.empty() || surrogate.signal_scales.empty()) {
            throw std::invalid_argument("config: empty hyperparameter grid");
        }
        if (surrogate.rbf_lengthscales.empty() &&
            (surrogate.sigmoid_slopes.empty() || surrogate.sigmoid_biases.empty())) {
            throw std::invalid_argument("config: no kernel candidates");
        }
    }
};

struct ObservationEntry {
    std::size_t step = 0;
    PolicyVector theta;
    ContextVector z;
    ObjectivePair outcome;
    Eigen::VectorXd constraint;  // g_i = impressions - budget_i
};

struct ObservationLog {
    std::vector<std::vector<ObservationEntry>> cohorts;
    std::vector<ContextVector> contexts;
    std::vector<ObjectivePair> platform;
    std::vector<Eigen::VectorXd> weighted_violation;
    std::vector<Eigen::VectorXd> duals;                // lambda after each step's update
    std::vector<std::vector<double>> tr_lengths;       // per step, per cohort, after update
    std::vector<std::vector<std::uint8_t>> successes;  // per step, per cohort
    std::vector<std::uint8_t> fit_failures;            // per step: any cohort fell back

    [[nodiscard]] std::size_t steps() const noexcept { return platform.size(); }
};

struct RunResult {
    Algorithm algorithm = Algorithm::Ctrcbo;
    std::uint64_t seed = 0;
    bool converged = false;
    std::optional<std::size_t> steps_to_convergence;
    Eigen::VectorXd time_average_violation;
    double regret = 0.0;              // R_T proxy
    std::vector<double> regret_series; // R_t, t = 1..T
    std::vector<double> best_feasible_series;  // NaN until the first feasible step
    ObservationLog log;
};

/// Earliest step t (1-based) ending a run of W consecutive steps where the
/// platform score meets the target and every weighted constraint is <= 0.
inline std::optional<std::size_t> check_convergence(const ObservationLog& log, const ExperimentConfig& config) {
    if (log.steps() == 0) throw std::invalid_argument("check_convergence: empty log");
    std::size_t run = 0;
    for (std::size_t t = 0; t < log.steps(); ++t) {
        const bool ok = log.platform[t].score_delta >= config.score_target &&
                        (log.weighted_violation[t].array() <= 0.0).all();
        run = ok ? run + 1 : 0;
        if (run >= config.convergence_window) return t + 1;
    }
    return std::nullopt;
}

namespace detail {

inline std::vector<KernelSpec> kernel_grid(const SurrogateSettings& s, double target_var) {
    const double base = std::max(target_var, 1e-6);
    std::vector<KernelSpec> grid;
    for (double scale : s.signal_scales) {
        for (double a : s.sigmoid_slopes) {
            for (double b : s.sigmoid_biases) grid.push_back(KernelSpec::sigmoid(a, b, scale * base));
        }
        for (double l : s.rbf_lengthscales) grid.push_back(KernelSpec::rbf(l, scale * base));
    }
    return grid;
}

inline double mean_of(const Eigen::VectorXd& y) { return y.mean(); }

inline double variance_of(const Eigen::VectorXd& y) {
    return y.size() < 2 ? 0.0 : (y.array() - y.mean()).square().sum() / static_cast<double>(y.size());
}

struct TrainingSet {
    Eigen::MatrixXd X;
    Eigen::VectorXd score;
    std::vector<Eigen::VectorXd> constrained;  // impressions per constraint, as g_i + budget_i
};

/// GP pair refit each call; hyperparameters re-selected every
/// hyper_period calls on the most recent hyper_max_points rows.
class SurrogateFitter {
public:
    Surrogates fit_all(const TrainingSet& data, const SurrogateSettings& s) {
        const bool reselect = !objective_ || calls_ % s.hyper_period == 0;
        ++calls_;
        if (reselect) {
            objective_ = select(data.X, data.score, s);
            constraints_.clear();
            for (const auto& y : data.constrained) constraints_.push_back(select(data.X, y, s));
        }
        try {
            return fit_selected(data);
        } catch (const NotPositiveDefinite&) {
            if (reselect) throw;
        }
        // The cached kernel no longer factors on the grown data set.
        objective_ = select(data.X, data.score, s);
        constraints_.clear();
        for (const auto& y : data.constrained) constraints_.push_back(select(data.X, y, s));
        return fit_selected(data);
    }

    void reset() { objective_.reset(); constraints_.clear(); calls_ = 0; }

private:
    Surrogates fit_selected(const TrainingSet& data) const {
        Surrogates out;
        out.objective = fit(data.X, data.score, objective_->kernel, objective_->noise_var, mean_of(data.score));
        for (std::size_t i = 0; i < data.constrained.size(); ++i) {
            const auto& y = data.constrained[i];
            out.constraints.push_back(fit(data.X, y, constraints_[i].kernel, constraints_[i].noise_var, mean_of(y)));
        }
        return out;
    }

    static HyperparameterChoice select(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SurrogateSettings& s) {
        const Eigen::Index n = X.rows();
        const Eigen::Index m = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(s.hyper_max_points));
        const Eigen::MatrixXd Xs = X.bottomRows(m);
        const Eigen::VectorXd ys = y.tail(m);
        const auto grid = kernel_grid(s, variance_of(ys));
        return select_hyperparameters(Xs, ys, grid, s.noise_grid, mean_of(ys));
    }

    std::optional<HyperparameterChoice> objective_;
    std::vector<HyperparameterChoice> constraints_;
    std::size_t calls_ = 0;
};

inline Eigen::VectorXd one_hot(std::size_t k, std::size_t K) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
    v[static_cast<Eigen::Index>(k)] = 1.0;
    return v;
}

inline ContextVector augment(const ContextVector& z, std::size_t k, std::size_t K) {
    Eigen::VectorXd v(z.size() + static_cast<Eigen::Index>(K));
    v << z.values(), one_hot(k, K);
    return ContextVector(std::move(v));
}

inline double positive_violation(const Eigen::VectorXd& g) { return g.cwiseMax(0.0).sum(); }

}  // namespace detail

/// Cohort incumbent: the best observed score among points within every
/// budget, or the least-violating point when none are.
inline const ObservationEntry& incumbent(std::span<const ObservationEntry> entries) {
    if (entries.empty()) throw std::invalid_argument("incumbent: no observations");
    const ObservationEntry* best = nullptr;
    for (const auto& e : entries) {
        const double v = detail::positive_violation(e.constraint);
        if (!best) { best = &e; continue; }
        const double bv = detail::positive_violation(best->constraint);
        if (v == 0.0 && bv == 0.0) {
            if (e.outcome.score_delta > best->outcome.score_delta) best = &e;
        } else if (v < bv) {
            best = &e;
        }
    }
    return *best;
}

/// Dominated hypervolume of a cohort's observed trade-off points under a
/// fixed reference.
inline double cohort_hypervolume(std::span<const ObservationEntry> entries, double budget, const TradeoffPoint& ref) {
    std::vector<TradeoffPoint> pts;
    pts.reserve(entries.size());
    for (const auto& e : entries) pts.push_back(to_tradeoff(e.outcome, budget));
    return hypervolume_2d(ParetoFront{pareto_filter(pts), ref});
}

/// Surrogate input context for cohort k: the global baseline appends a
/// cohort one-hot so one model serves every cohort.
inline ContextVector model_context(Algorithm algorithm, const ContextVector& z, std::size_t k, std::size_t K) {
    return algorithm == Algorithm::NaiveCbo ? detail::augment(z, k, K) : z;
}

namespace detail {

/// Training rows for cohort k from steps <= max_step. The global baseline
/// pools every cohort (interleaved by step); the local algorithm uses the
/// cohort's own rows, restricted to `region` when at least 2 * policy_dim
/// rows fall inside it.
inline TrainingSet training_set(Algorithm algorithm, const ObservationLog& log, const SyntheticEnvironment& env,
                                std::size_t k, std::size_t max_step, const Box* region) {
    const std::size_t K = env.cohort_count();
    const Eigen::Index N = env.constraint_count();
    std::vector<const ObservationEntry*> rows;
    std::vector<std::size_t> owner;
    if (algorithm == Algorithm::NaiveCbo) {
        for (std::size_t t = 1; t <= std::min(max_step, log.steps()); ++t) {
            for (std::size_t c = 0; c < K; ++c) {
                rows.push_back(&log.cohorts[c][t - 1]);
                owner.push_back(c);
            }
        }
    } else {
        for (const auto& e : log.cohorts[k]) {
            if (e.step <= max_step) rows.push_back(&e);
        }
        if (region) {
            std::vector<const ObservationEntry*> inside;
            for (const auto* e : rows) {
                if (region->contains(e->theta.values())) inside.push_back(e);
            }
            if (inside.size() >= 2 * static_cast<std::size_t>(env.policy_dim)) rows = std::move(inside);
        }
        owner.assign(rows.size(), k);
    }
    TrainingSet ts;
    const auto n = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index d =
        env.policy_dim + env.context_dim() + (algorithm == Algorithm::NaiveCbo ? static_cast<Eigen::Index>(K) : 0);
    ts.X.resize(n, d);
    ts.score.resize(n);
    ts.constrained.assign(static_cast<std::size_t>(N), Eigen::VectorXd(n));
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& e = *rows[static_cast<std::size_t>(r)];
        ts.X.row(r) = join(e.theta, model_context(algorithm, e.z, owner[static_cast<std::size_t>(r)], K)).transpose();
        ts.score[r] = e.outcome.score_delta;
        for (Eigen::Index i = 0; i < N; ++i) {
            ts.constrained[static_cast<std::size_t>(i)][r] = e.constraint[i] + env.budgets[i];
        }
    }
    return ts;
}

}  // namespace detail

using ObserveFn = std::function<Observation(std::span<const PolicyVector>, const ContextVector&)>;

/// Per-step decision record returned by Engine::step.
struct StepDecision {
    std::vector<PolicyVector> policies;
    std::vector<std::uint8_t> fell_back;  // GP fit failed, region center used
};

class Engine {
public:
    Engine(Algorithm algorithm, const ExperimentConfig& config, const SyntheticEnvironment& env, std::uint64_t seed)
        : algorithm_(algorithm), config_(config), env_(env), seed_(seed),
          duals_(DualState::zeros(env.constraint_count(), config.epsilon, config.eta)) {
        config_.validate();
        env_.validate();
        const std::size_t K = env_.cohort_count();
        log_.cohorts.resize(K);
        cold_start_ = static_cast<std::size_t>(std::max<Eigen::Index>(2, env_.policy_dim));
        for (std::size_t k = 0; k < K; ++k) {
            CohortState c;
            c.rng.seed(derive_seed(seed_, 0x5eedu, k));
            c.tr = TrustRegion::make(k, PolicyVector(env_.bounds.midpoint()), config_.trust_region);
            c.design = generate_candidates(initial_box(c.tr), cold_start_, c.rng);
            cohorts_.push_back(std::move(c));
        }
    }

    [[nodiscard]] const ObservationLog& log() const noexcept { return log_; }
    [[nodiscard]] const DualState& duals() const noexcept { return duals_; }
    [[nodiscard]] const TrustRegion& region(std::size_t k) const { return cohorts_.at(k).tr; }
    [[nodiscard]] Algorithm algorithm() const noexcept { return algorithm_; }

    /// Box the cohort's next candidate is drawn from.
    [[nodiscard]] Box candidate_box(std::size_t k) const {
        return algorithm_ == Algorithm::Ctrcbo ? region_bounds(cohorts_.at(k).tr, env_.bounds) : as_box(env_.bounds);
    }

    /// One full step: decide, observe through the callback, update.
    StepDecision step(const ContextVector& z, const ObserveFn& env_observe) {
        StepDecision d = decide(z);
        const Observation obs = env_observe(d.policies, z);
        record(z, d, obs);
        return d;
    }

    [[nodiscard]] ContextVector model_context(const ContextVector& z, std::size_t k) const {
        return ctrcbo::model_context(algorithm_, z, k, env_.cohort_count());
    }

private:
    struct CohortState {
        TrustRegion tr;
        std::vector<PolicyVector> design;
        RandomStream rng;
        detail::SurrogateFitter fitter;
    };

    [[nodiscard]] Box initial_box(const TrustRegion& tr) const {
        return algorithm_ == Algorithm::Ctrcbo ? region_bounds(tr, env_.bounds) : as_box(env_.bounds);
    }

    [[nodiscard]] std::size_t current_step() const noexcept { return log_.steps() + 1; }

    StepDecision decide(const ContextVector& z) {
        const std::size_t K = env_.cohort_count();
        StepDecision d;
        d.policies.reserve(K);
        d.fell_back.assign(K, 0);
        std::optional<Surrogates> pooled;
        bool pooled_failed = false;
        for (std::size_t k = 0; k < K; ++k) {
            auto& c = cohorts_[k];
            const auto& data = log_.cohorts[k];
            if (algorithm_ == Algorithm::Random) {
                Eigen::VectorXd th(env_.policy_dim);
                for (Eigen::Index j = 0; j < env_.policy_dim; ++j) {
                    th[j] = env_.bounds.lower[j] + uniform01(c.rng) * (env_.bounds.upper[j] - env_.bounds.lower[j]);
                }
                d.policies.emplace_back(std::move(th));
                continue;
            }
            if (data.size() < cold_start_) {
                d.policies.push_back(c.design[data.size()]);
                continue;
            }
            const Box box = candidate_box(k);
            try {
                Surrogates models;
                if (algorithm_ == Algorithm::NaiveCbo) {
                    if (!pooled && !pooled_failed) {
                        try {
                            pooled = cohorts_[0].fitter.fit_all(
                                detail::training_set(algorithm_, log_, env_, 0, log_.steps(), nullptr),
                                config_.surrogate);
                        } catch (const NotPositiveDefinite&) {
                            pooled_failed = true;
                        }
                    }
                    if (!pooled) throw NotPositiveDefinite("pooled surrogate unavailable");
                    models = *pooled;
                } else {
                    models = c.fitter.fit_all(detail::training_set(algorithm_, log_, env_, k, log_.steps(), &box),
                                              config_.surrogate);
                }
                std::vector<TradeoffPoint> observed;
                observed.reserve(data.size());
                for (const auto& e : data) observed.push_back(to_tradeoff(e.outcome, env_.budgets[0]));
                const ParetoFront front = make_front(observed);
                const AcquisitionSettings s{env_.budgets, config_.beta};
                d.policies.push_back(select_in_box(box, model_context(z, k), models, duals_, front,
                                                   config_.n_candidates, s, c.rng));
            } catch (const NotPositiveDefinite&) {
                d.policies.emplace_back(box.center());
                d.fell_back[k] = 1;
            }
        }
        return d;
    }

    void record(const ContextVector& z, const StepDecision& d, const Observation& obs) {
        const std::size_t K = env_.cohort_count();
        if (obs.per_cohort.size() != K) throw std::invalid_argument("observation: wrong cohort count");
        const std::size_t t = current_step();
        std::vector<std::uint8_t> success(K, 0);
        std::vector<double> lengths(K, 1.0);
        for (std::size_t k = 0; k < K; ++k) {
            auto& entries = log_.cohorts[k];
            ObservationEntry e{t, d.policies[k], z, obs.per_cohort[k],
                               obs.report.per_cohort.row(static_cast<Eigen::Index>(k)).transpose()};
            const double budget = env_.budgets[0];
            std::vector<TradeoffPoint> all;
            for (const auto& o : entries) all.push_back(to_tradeoff(o.outcome, budget));
            all.push_back(to_tradeoff(e.outcome, budget));
            const TradeoffPoint ref = reference_point(all);
            const double hv_before = cohort_hypervolume(entries, budget, ref);
            const double viol_before = entries.empty() ? std::numeric_limits<double>::infinity()
                                                       : detail::positive_violation(entries.back().constraint);
            entries.push_back(std::move(e));
            const double hv_after = cohort_hypervolume(entries, budget, ref);
            const double viol_after = detail::positive_violation(entries.back().constraint);
            success[k] = !d.fell_back[k] && (hv_after > hv_before || (viol_after < viol_before && hv_after >= hv_before));

            // The region stays put while the initial design is executed.
            if (algorithm_ == Algorithm::Ctrcbo && entries.size() >= cold_start_) {
                auto& c = cohorts_[k];
                c.tr = update_on_outcome(c.tr, success[k] != 0);
                c.tr = recenter(c.tr, incumbent(entries).theta, env_.bounds);
            }
            if (algorithm_ == Algorithm::Ctrcbo) lengths[k] = cohorts_[k].tr.length;
        }
        const Eigen::VectorXd weighted = weighted_violation(obs.report);
        duals_ = dual_update(duals_, weighted);

        log_.contexts.push_back(z);
        log_.platform.push_back(aggregate(obs.per_cohort, obs.report.weights));
        log_.weighted_violation.push_back(weighted);
        log_.duals.push_back(duals_.lambda);
        log_.tr_lengths.push_back(std::move(lengths));
        log_.successes.push_back(std::move(success));
        log_.fit_failures.push_back(std::any_of(d.fell_back.begin(), d.fell_back.end(), [](auto f) { return f; }));
    }

    Algorithm algorithm_;
    ExperimentConfig config_;
    SyntheticEnvironment env_;
    std::uint64_t seed_;
    DualState duals_;
    std::size_t cold_start_ = 2;
    std::vector<CohortState> cohorts_;
    ObservationLog log_;
};

/// Per-step noise seed for the environment.
inline std::uint64_t observation_seed(std::uint64_t seed, std::size_t step) { return derive_seed(seed, 0x0b5u, step); }

namespace detail {

inline void finalize(RunResult& r, const ExperimentConfig& config) {
    const auto& log = r.log;
    r.steps_to_convergence = check_convergence(log, config);
    r.converged = r.steps_to_convergence.has_value();
    r.time_average_violation = time_average_violation(log.weighted_violation);
    double best = -std::numeric_limits<double>::infinity();
    double regret = 0.0;
    for (std::size_t t = 0; t < log.steps(); ++t) {
        const double score = log.platform[t].score_delta;
        if ((log.weighted_violation[t].array() <= 0.0).all()) best = std::max(best, score);
        if (std::isfinite(best)) regret += std::max(0.0, best - score);
        r.regret_series.push_back(regret);
        r.best_feasible_series.push_back(std::isfinite(best) ? best : std::numeric_limits<double>::quiet_NaN());
    }
    r.regret = regret;
}

}  // namespace detail

/// Runs one algorithm on the synthetic environment for one seed.
inline RunResult run_algorithm(Algorithm algorithm, const ExperimentConfig& config, const SyntheticEnvironment& env,
                               std::uint64_t seed) {
    Engine engine(algorithm, config, env, seed);
    ContextProcess context = env.context_process(seed);
    for (std::size_t t = 1; t <= config.horizon; ++t) {
        const ContextVector z = sample_context(context, t);
        engine.step(z, [&](std::span<const PolicyVector> decisions, const ContextVector& zz) {
            return observe(env, decisions, zz, observation_seed(seed, t));
        });
        if (config.early_stop && check_convergence(engine.log(), config)) break;
    }
    RunResult r;
    r.algorithm = algorithm;
    r.seed = seed;
    r.log = engine.log();
    detail::finalize(r, config);
    return r;
}

inline RunResult run_ctrcbo(const ExperimentConfig& config, const SyntheticEnvironment& env, std::uint64_t seed) {
    return run_algorithm(Algorithm::Ctrcbo, config, env, seed);
}

inline RunResult run_naive_cbo(const ExperimentConfig& config, const SyntheticEnvironment& env, std::uint64_t seed) {
    return run_algorithm(Algorithm::NaiveCbo, config, env, seed);
}

inline RunResult run_random_baseline(const ExperimentConfig& config, const SyntheticEnvironment& env,
                                     std::uint64_t seed) {
    return run_algorithm(Algorithm::Random, config, env, seed);
}

/// R_t / t at t = 1, 2, 4, ... up to the run length.
inline std::vector<std::pair<std::size_t, double>> regret_rate_at_doubling(const RunResult& r) {
    std::vector<std::pair<std::size_t, double>> out;
    for (std::size_t t = 1; t <= r.regret_series.size(); t *= 2) {
        out.emplace_back(t, r.regret_series[t - 1] / static_cast<double>(t));
    }
    return out;
}

struct ProxyCheck {
    ObjectivePair predicted;  // mean over held-out steps
    ObjectivePair actual;     // mean over held-out steps
    double score_abs_error = 0.0;        // mean |predicted - realized| per step
    double impressions_abs_error = 0.0;
    std::size_t holdout_steps = 0;
};

/// Fits each cohort's surrogates on every step before the held-out window,
/// predicts the platform outcome of the policies actually executed in the
/// window at their contexts, and compares with what was observed.
inline ProxyCheck proxy_prediction_check(Algorithm algorithm, const ExperimentConfig& config,
                                         const SyntheticEnvironment& env, const ObservationLog& log,
                                         std::size_t holdout) {
    if (holdout < 1 || holdout >= log.steps()) throw std::invalid_argument("proxy check: bad holdout window");
    const std::size_t K = env.cohort_count();
    const std::size_t train_end = log.steps() - holdout;
    const Algorithm model_algo = algorithm == Algorithm::NaiveCbo ? Algorithm::NaiveCbo : Algorithm::Ctrcbo;

    std::vector<Surrogates> models;
    for (std::size_t k = 0; k < K; ++k) {
        if (model_algo == Algorithm::NaiveCbo && k > 0) {
            models.push_back(models.front());
            continue;
        }
        detail::SurrogateFitter fitter;
        models.push_back(fitter.fit_all(detail::training_set(model_algo, log, env, k, train_end, nullptr),
                                        config.surrogate));
    }

    const Eigen::VectorXd w = env.weights();
    ProxyCheck out;
    out.holdout_steps = holdout;
    for (std::size_t t = train_end + 1; t <= log.steps(); ++t) {
        std::vector<ObjectivePair> predicted;
        for (std::size_t k = 0; k < K; ++k) {
            const auto& e = log.cohorts[k][t - 1];
            const Eigen::VectorXd x = join(e.theta, model_context(model_algo, e.z, k, K));
            predicted.push_back({predict(models[k].objective, x).mean, predict(models[k].constraints[0], x).mean});
        }
        const ObjectivePair p = aggregate(predicted, w);
        const ObjectivePair a = log.platform[t - 1];
        out.predicted.score_delta += p.score_delta;
        out.predicted.impressions_delta += p.impressions_delta;
        out.actual.score_delta += a.score_delta;
        out.actual.impressions_delta += a.impressions_delta;
        out.score_abs_error += std::abs(p.score_delta - a.score_delta);
        out.impressions_abs_error += std::abs(p.impressions_delta - a.impressions_delta);
    }
    const double h = static_cast<double>(holdout);
    out.predicted.score_delta /= h;
    out.predicted.impressions_delta /= h;
    out.actual.score_delta /= h;
    out.actual.impressions_delta /= h;
    out.score_abs_error /= h;
    out.impressions_abs_error /= h;
    return out;
}

}  // namespace ctrcbo

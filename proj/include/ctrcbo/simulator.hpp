#pragma once

// Synthetic ad-load environment.
//
// Each cohort k responds to a policy theta with
//
//   score       = s_k (1 - exp(-r_k <u_k, theta>)) (1 + <c_k, z - z_nominal>)
//   impressions = m_k <v_k, theta> z[1]
//
// plus independent Gaussian observation noise. Context is
// z[0] = sin(2 pi t / period) and z[1] = 1 + scale * a_t with an AR(1)
// shock a_t = rho a_{t-1} + sd * eps_t, a_0 = 0.

#include "ctrcbo/primal_dual.hpp"
#include "ctrcbo/random.hpp"
#include "ctrcbo/trust_region.hpp"
#include "ctrcbo/types.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctrcbo {

struct CohortSpec {
    std::size_t id = 0;
    std::string name;
    double volume_weight = 1.0;
    double saturation = 1.0;       // s_k, percent
    double rate = 1.0;             // r_k > 0
    double impression_gain = 1.0;  // m_k, percent per unit of <v_k, theta>
    double score_noise_sd = 0.0;
    double impressions_noise_sd = 0.0;
    Eigen::VectorXd context_sensitivity;  // couples z - z_nominal into the score
    Eigen::VectorXd score_direction;      // u_k, unit norm
    Eigen::VectorXd impression_direction; // v_k, unit norm

    void validate(Eigen::Index policy_dim, Eigen::Index context_dim) const {
        if (!(volume_weight >= 0.0 && volume_weight <= 1.0)) throw std::invalid_argument("cohort: weight outside [0,1]");
        if (!(rate > 0.0)) throw std::invalid_argument("cohort: rate must be > 0");
        if (!(score_noise_sd >= 0.0 && impressions_noise_sd >= 0.0)) {
            throw std::invalid_argument("cohort: noise sd must be >= 0");
        }
        if (score_direction.size() != policy_dim || impression_direction.size() != policy_dim) {
            throw std::invalid_argument("cohort: direction size must equal policy dimension");
        }
        if (context_sensitivity.size() != context_dim) {
            throw std::invalid_argument("cohort: context sensitivity size must equal context dimension");
        }
    }
};

struct ContextSpec {
    double period = 7.0;
    double ar_coef = 0.8;
    double shock_sd = 0.5;
    double shock_scale = 0.1;

    static constexpr Eigen::Index kDim = 2;

    static ContextVector nominal() { return ContextVector{0.0, 1.0}; }
};

/// Seeded context trajectory with random access by step (t >= 1). Extends
/// itself lazily, so any access order yields the same values.
class ContextProcess {
public:
    ContextProcess(ContextSpec spec, std::uint64_t seed) : spec_(spec), rng_(derive_seed(seed, 0xc0u)) {}

    ContextVector at(std::size_t t) {
        if (t < 1) throw std::invalid_argument("context: steps start at 1");
        while (shocks_.size() < t) {
            const double prev = shocks_.empty() ? 0.0 : shocks_.back();
            shocks_.push_back(spec_.ar_coef * prev + spec_.shock_sd * standard_normal(rng_));
        }
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(t) / spec_.period;
        return ContextVector{std::sin(phase), 1.0 + spec_.shock_scale * shocks_[t - 1]};
    }

    [[nodiscard]] const ContextSpec& spec() const noexcept { return spec_; }

private:
    ContextSpec spec_;
    RandomStream rng_;
    std::vector<double> shocks_;
};

inline ContextVector sample_context(ContextProcess& process, std::size_t t) { return process.at(t); }

inline ObjectivePair true_response(const CohortSpec& cohort, const PolicyVector& theta, const ContextVector& z) {
    const double exposure = cohort.score_direction.dot(theta.values());
    const Eigen::VectorXd dz = z.values() - ContextSpec::nominal().values();
    const double context_factor = 1.0 + cohort.context_sensitivity.dot(dz);
    const double score = cohort.saturation * -std::expm1(-cohort.rate * exposure) * context_factor;
    const double impressions = cohort.impression_gain * cohort.impression_direction.dot(theta.values()) * z[1];
    return {score, impressions};
}

/// Volume-weighted platform metrics.
inline ObjectivePair aggregate(std::span<const ObjectivePair> per_cohort, const Eigen::VectorXd& weights) {
    validate_weights(weights);
    if (static_cast<Eigen::Index>(per_cohort.size()) != weights.size()) {
        throw std::invalid_argument("aggregate: one weight per cohort required");
    }
    ObjectivePair out;
    for (std::size_t k = 0; k < per_cohort.size(); ++k) {
        const double w = weights[static_cast<Eigen::Index>(k)];
        out.score_delta += w * per_cohort[k].score_delta;
        out.impressions_delta += w * per_cohort[k].impressions_delta;
    }
    return out;
}

struct Observation {
    std::vector<ObjectivePair> per_cohort;
    ConstraintReport report;  // g = impressions delta - budget_i
};

struct SyntheticEnvironment {
    std::string name = "custom";
    std::string version = "1";
    Eigen::Index policy_dim = 3;
    GlobalBounds bounds = GlobalBounds::unit(3);
    std::vector<CohortSpec> cohorts;
    ContextSpec context;
    Eigen::VectorXd budgets = Eigen::VectorXd::Constant(1, 1.5);  // impressions budget per constraint

    [[nodiscard]] std::size_t cohort_count() const noexcept { return cohorts.size(); }
    [[nodiscard]] Eigen::Index constraint_count() const noexcept { return budgets.size(); }
    [[nodiscard]] Eigen::Index context_dim() const noexcept { return ContextSpec::kDim; }

    [[nodiscard]] Eigen::VectorXd weights() const {
        Eigen::VectorXd w(static_cast<Eigen::Index>(cohorts.size()));
        for (std::size_t k = 0; k < cohorts.size(); ++k) w[static_cast<Eigen::Index>(k)] = cohorts[k].volume_weight;
        return w;
    }

    void validate() const {
        if (cohorts.empty()) throw std::invalid_argument("environment: no cohorts");
        if (budgets.size() < 1) throw std::invalid_argument("environment: need at least one budget");
        bounds.validate();
        if (bounds.dim() != policy_dim) throw std::invalid_argument("environment: bounds do not match policy_dim");
        for (const auto& c : cohorts) c.validate(policy_dim, context_dim());
        validate_weights(weights());
    }

    [[nodiscard]] ContextProcess context_process(std::uint64_t seed) const { return {context, seed}; }

    /// Constraint values of a (noise-free or observed) response.
    [[nodiscard]] Eigen::RowVectorXd constraint_values(const ObjectivePair& p) const {
        return (p.impressions_delta - budgets.array()).matrix().transpose();
    }
};

/// Noisy outcomes of one policy per cohort. Cohort k draws its noise from a
/// stream derived from (stream_seed, k), so results do not depend on the
/// order in which cohorts are evaluated.
inline Observation observe(const SyntheticEnvironment& env, std::span<const PolicyVector> decisions,
                           const ContextVector& z, std::uint64_t stream_seed) {
    if (decisions.size() != env.cohort_count()) throw std::invalid_argument("observe: one decision per cohort");
    Observation obs;
    obs.report.per_cohort.resize(static_cast<Eigen::Index>(env.cohort_count()), env.constraint_count());
    obs.report.weights = env.weights();
    for (std::size_t k = 0; k < env.cohort_count(); ++k) {
        const auto& c = env.cohorts[k];
        ObjectivePair p = true_response(c, decisions[k], z);
        RandomStream rng(derive_seed(stream_seed, k + 1));
        const double e_score = standard_normal(rng);
        const double e_impr = standard_normal(rng);
        p.score_delta += c.score_noise_sd * e_score;
        p.impressions_delta += c.impressions_noise_sd * e_impr;
        obs.report.per_cohort.row(static_cast<Eigen::Index>(k)) = env.constraint_values(p);
        obs.per_cohort.push_back(p);
    }
    return obs;
}

namespace detail {

inline Eigen::VectorXd unit(std::initializer_list<double> xs) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v.normalized();
}

}  // namespace detail

/// The canonical three-cohort benchmark: a high-sensitivity, a moderate and
/// an insensitive cohort. Target: platform score >= +1% with impressions
/// <= +1.5% (the score target lives in ExperimentConfig). Mirrors
/// configs/benchmark_3cohort.ini (version 1).
inline SyntheticEnvironment benchmark_env_3cohort() {
    SyntheticEnvironment env;
    env.name = "benchmark_3cohort";
    env.version = "1";
    env.policy_dim = 3;
    env.bounds = GlobalBounds::unit(3);
    env.budgets = Eigen::VectorXd::Constant(1, 1.5);
    env.context = ContextSpec{};

    auto cohort = [](std::size_t id, std::string name, double w, double s, double r, double m,
                     Eigen::VectorXd u, Eigen::VectorXd v) {
        CohortSpec c;
        c.id = id;
        c.name = std::move(name);
        c.volume_weight = w;
        c.saturation = s;
        c.rate = r;
        c.impression_gain = m;
        c.score_noise_sd = 0.1;
        c.impressions_noise_sd = 0.1;
        c.context_sensitivity = Eigen::Vector2d(0.05, 0.0);
        c.score_direction = std::move(u);
        c.impression_direction = std::move(v);
        return c;
    };
    env.cohorts.push_back(cohort(0, "high", 0.30, 3.1, 1.2, 2.2, detail::unit({1.0, 0.6, 0.2}),
                                 detail::unit({0.3, 0.6, 1.0})));
    env.cohorts.push_back(cohort(1, "moderate", 0.45, 1.85, 1.0, 2.0, detail::unit({0.4, 1.0, 0.3}),
                                 detail::unit({0.6, 0.4, 1.0})));
    env.cohorts.push_back(cohort(2, "insensitive", 0.25, 0.5, 0.8, 2.5, detail::unit({0.3, 0.3, 1.0}),
                                 detail::unit({1.0, 0.5, 0.5})));
    return env;
}

struct GridScanResult {
    std::size_t points_per_dim = 0;
    std::size_t feasible_count = 0;
    PolicyVector best_policy;
    ObjectivePair best_platform;
    double score_margin = 0.0;  // best feasible platform score - target
};

/// Exhaustive lattice scan over a single policy shared by every cohort at
/// the nominal context, noise-free. A feasible shared policy certifies that
/// a feasible per-cohort profile exists.
inline GridScanResult grid_scan_shared_policy(const SyntheticEnvironment& env, double score_target,
                                              std::size_t points_per_dim = 50) {
    if (points_per_dim < 2) throw std::invalid_argument("grid scan: need >= 2 points per dimension");
    const auto d = static_cast<std::size_t>(env.policy_dim);
    const ContextVector z = ContextSpec::nominal();
    const Eigen::VectorXd w = env.weights();
    GridScanResult res;
    res.points_per_dim = points_per_dim;
    res.score_margin = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> idx(d, 0);
    std::vector<ObjectivePair> per(env.cohort_count());
    PolicyVector theta(Eigen::VectorXd(env.policy_dim));
    for (;;) {
        for (std::size_t j = 0; j < d; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const double u = static_cast<double>(idx[j]) / static_cast<double>(points_per_dim - 1);
            theta[jj] = env.bounds.lower[jj] + u * (env.bounds.upper[jj] - env.bounds.lower[jj]);
        }
        for (std::size_t k = 0; k < env.cohort_count(); ++k) per[k] = true_response(env.cohorts[k], theta, z);
        const ObjectivePair p = aggregate(per, w);
        if ((env.constraint_values(p).array() <= 0.0).all()) {
            ++res.feasible_count;
            if (p.score_delta - score_target > res.score_margin) {
                res.score_margin = p.score_delta - score_target;
                res.best_policy = theta;
                res.best_platform = p;
            }
        }
        std::size_t j = 0;
        while (j < d && ++idx[j] == points_per_dim) idx[j++] = 0;
        if (j == d) break;
    }
    return res;
}

/// Uniform random policy per cohort, the unstructured baseline.
inline std::vector<PolicyVector> random_policies(const SyntheticEnvironment& env, RandomStream& rng) {
    std::vector<PolicyVector> out;
    for (std::size_t k = 0; k < env.cohort_count(); ++k) {
        Eigen::VectorXd th(env.policy_dim);
        for (Eigen::Index j = 0; j < env.policy_dim; ++j) {
            th[j] = env.bounds.lower[j] + uniform01(rng) * (env.bounds.upper[j] - env.bounds.lower[j]);
        }
        out.emplace_back(std::move(th));
    }
    return out;
}

}  // namespace ctrcbo

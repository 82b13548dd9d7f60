#pragma once

// Dual multipliers for time-average constraint satisfaction.
//
// Constraints are oriented g <= 0 feasible, g > 0 violated, with
// g = observed impressions delta - budget. After every step the cohort
// reports are volume-weighted and the multipliers take one projected step
//
//   lambda_i <- max(0, lambda_i + sum_k w_k g_{i,k} + epsilon)
//
// epsilon tightens every constraint by a fixed margin.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>

namespace ctrcbo {

struct DualState {
    Eigen::VectorXd lambda;  // one multiplier per constraint, all >= 0
    double epsilon = 0.05;   // slackness, percent units
    double eta = 1.0;        // weight of the dual penalty in the acquisition

    static DualState zeros(Eigen::Index n_constraints, double epsilon, double eta) {
        if (n_constraints < 1) throw std::invalid_argument("dual state: need at least one constraint");
        if (!(epsilon >= 0.0)) throw std::invalid_argument("dual state: epsilon must be >= 0");
        return {Eigen::VectorXd::Zero(n_constraints), epsilon, eta};
    }
};

struct ConstraintReport {
    Eigen::MatrixXd per_cohort;  // K x N observed constraint values
    Eigen::VectorXd weights;     // K impression-volume fractions
};

inline void validate_weights(const Eigen::VectorXd& w) {
    if (w.size() == 0) throw std::invalid_argument("weights: empty");
    for (Eigen::Index k = 0; k < w.size(); ++k) {
        if (!(w[k] >= 0.0)) throw std::invalid_argument("weights: negative or non-finite weight");
    }
    if (std::abs(w.sum() - 1.0) > 1e-9) throw std::invalid_argument("weights: must sum to 1");
}

/// sum_k w_k g_{i,k} for each constraint i.
inline Eigen::VectorXd weighted_violation(const ConstraintReport& report) {
    validate_weights(report.weights);
    if (report.per_cohort.rows() != report.weights.size()) {
        throw std::invalid_argument("weighted_violation: one weight per cohort row required");
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(report.per_cohort.cols());
    for (Eigen::Index k = 0; k < report.per_cohort.rows(); ++k) {
        out += report.weights[k] * report.per_cohort.row(k).transpose();
    }
    return out;
}

inline DualState dual_update(DualState state, const Eigen::VectorXd& weighted) {
    if (weighted.size() != state.lambda.size()) throw std::invalid_argument("dual_update: size mismatch");
    state.lambda = (state.lambda.array() + weighted.array() + state.epsilon).cwiseMax(0.0);
    return state;
}

/// Componentwise mean of the per-step weighted violations.
inline Eigen::VectorXd time_average_violation(std::span<const Eigen::VectorXd> history) {
    if (history.empty()) throw std::invalid_argument("time_average_violation: empty history");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(history.front().size());
    for (const auto& v : history) {
        if (v.size() != sum.size()) throw std::invalid_argument("time_average_violation: ragged history");
        sum += v;
    }
    return sum / static_cast<double>(history.size());
}

}  // namespace ctrcbo

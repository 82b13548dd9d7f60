#pragma once

// Candidate generation and multi-objective scoring inside a trust region.
//
// Each cohort trades ads score against impression headroom
// (budget - impressions delta); both are maximized. A candidate's score is
// the 2-D hypervolume improvement of its optimistic objective pair over the
// cohort's observed Pareto front, minus a dual-weighted hinge on predicted
// constraint violation:
//
//   hvi((mu_f + beta s_f, budget_1 - (mu_c1 - beta s_c1)), front)
//     - eta * sum_i lambda_i * max(0, mu_ci - budget_i)

#include "ctrcbo/gp_core.hpp"
#include "ctrcbo/primal_dual.hpp"
#include "ctrcbo/random.hpp"
#include "ctrcbo/trust_region.hpp"
#include "ctrcbo/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace ctrcbo {

/// An objective pair in maximize/maximize coordinates.
struct TradeoffPoint {
    double score = 0.0;
    double headroom = 0.0;

    friend bool operator==(const TradeoffPoint&, const TradeoffPoint&) = default;
};

inline TradeoffPoint to_tradeoff(const ObjectivePair& p, double budget) {
    return {p.score_delta, budget - p.impressions_delta};
}

struct ParetoFront {
    std::vector<TradeoffPoint> points;
    TradeoffPoint ref;
};

namespace detail {

inline bool weakly_dominates(const TradeoffPoint& a, const TradeoffPoint& b) {
    return a.score >= b.score && a.headroom >= b.headroom;
}

}  // namespace detail

/// Non-dominated subset (maximize both), deduplicated, sorted by score
/// descending.
inline std::vector<TradeoffPoint> pareto_filter(std::span<const TradeoffPoint> points) {
    std::vector<TradeoffPoint> sorted(points.begin(), points.end());
    std::sort(sorted.begin(), sorted.end(), [](const TradeoffPoint& a, const TradeoffPoint& b) {
        return a.score != b.score ? a.score > b.score : a.headroom > b.headroom;
    });
    std::vector<TradeoffPoint> front;
    // After the sort, a point survives iff its headroom beats every point
    // seen so far (all of which have score >= its score).
    for (const auto& p : sorted) {
        if (front.empty() || p.headroom > front.back().headroom) front.push_back(p);
    }
    return front;
}

/// Dynamic reference point: the nadir of the observed points pushed out by
/// 10% of the observed span in each coordinate (0.1 when the span is zero).
inline TradeoffPoint reference_point(std::span<const TradeoffPoint> observed) {
    if (observed.empty()) throw std::invalid_argument("reference_point: no observations");
    TradeoffPoint lo = observed.front();
    TradeoffPoint hi = observed.front();
    for (const auto& p : observed) {
        lo.score = std::min(lo.score, p.score);
        lo.headroom = std::min(lo.headroom, p.headroom);
        hi.score = std::max(hi.score, p.score);
        hi.headroom = std::max(hi.headroom, p.headroom);
    }
    auto margin = [](double span) { return span > 1e-9 ? 0.1 * span : 0.1; };
    return {lo.score - margin(hi.score - lo.score), lo.headroom - margin(hi.headroom - lo.headroom)};
}

inline ParetoFront make_front(std::span<const TradeoffPoint> observed) {
    return {pareto_filter(observed), reference_point(observed)};
}

/// Area of the union of [ref, p] rectangles; sort and sweep.
inline double hypervolume_2d(const ParetoFront& front) {
    std::vector<TradeoffPoint> pts;
    pts.reserve(front.points.size());
    for (const auto& p : front.points) {
        if (p.score > front.ref.score && p.headroom > front.ref.headroom) pts.push_back(p);
    }
    std::sort(pts.begin(), pts.end(), [](const TradeoffPoint& a, const TradeoffPoint& b) {
        return a.score != b.score ? a.score > b.score : a.headroom > b.headroom;
    });
    double area = 0.0;
    double covered = front.ref.headroom;
    for (const auto& p : pts) {
        if (p.headroom > covered) {
            area += (p.score - front.ref.score) * (p.headroom - covered);
            covered = p.headroom;
        }
    }
    return area;
}

/// Hypervolume gained by adding candidate to the front. Exactly zero when
/// the candidate is weakly dominated or does not dominate the reference.
inline double hvi(const TradeoffPoint& candidate, const ParetoFront& front) {
    if (!(candidate.score > front.ref.score && candidate.headroom > front.ref.headroom)) return 0.0;
    for (const auto& p : front.points) {
        if (detail::weakly_dominates(p, candidate)) return 0.0;
    }
    ParetoFront grown = front;
    grown.points.push_back(candidate);
    return std::max(0.0, hypervolume_2d(grown) - hypervolume_2d(front));
}

/// n points in the box: the box center first, then a Latin-hypercube
/// design over the remaining n - 1 slots.
inline std::vector<PolicyVector> generate_candidates(const Box& box, std::size_t n, RandomStream& stream) {
    if (n == 0) throw std::invalid_argument("generate_candidates: n must be >= 1");
    const Eigen::Index d = box.dim();
    std::vector<PolicyVector> out;
    out.reserve(n);
    out.emplace_back(box.center());
    const std::size_t m = n - 1;
    if (m == 0) return out;

    std::vector<Eigen::VectorXd> pts(m, Eigen::VectorXd(d));
    std::vector<std::size_t> perm(m);
    for (Eigen::Index j = 0; j < d; ++j) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = m; i > 1; --i) {
            const std::size_t r = static_cast<std::size_t>(uniform01(stream) * static_cast<double>(i));
            std::swap(perm[i - 1], perm[std::min(r, i - 1)]);
        }
        const double width = box.upper[j] - box.lower[j];
        for (std::size_t i = 0; i < m; ++i) {
            const double u = (static_cast<double>(perm[i]) + uniform01(stream)) / static_cast<double>(m);
            pts[i][j] = std::clamp(box.lower[j] + u * width, box.lower[j], box.upper[j]);
        }
    }
    for (auto& p : pts) out.emplace_back(std::move(p));
    return out;
}

/// The fitted surrogates for one cohort: ads score and one model of the
/// constrained metric per constraint.
struct Surrogates {
    GPModel objective;
    std::vector<GPModel> constraints;
};

struct AcquisitionSettings {
    Eigen::VectorXd budgets;  // one per constraint
    double beta = 1.0;
};

namespace detail {

inline double score_from_predictions(const PosteriorPrediction& f, std::span<const PosteriorPrediction> c,
                                     const DualState& duals, const ParetoFront& front,
                                     const AcquisitionSettings& s) {
    const double f_opt = f.mean + s.beta * std::sqrt(f.variance);
    const double c_opt = c[0].mean - s.beta * std::sqrt(c[0].variance);
    const double gain = hvi({f_opt, s.budgets[0] - c_opt}, front);
    double penalty = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        penalty += duals.lambda[ii] * std::max(0.0, c[i].mean - s.budgets[ii]);
    }
    const double score = gain - duals.eta * penalty;
    return std::isfinite(score) ? score : -std::numeric_limits<double>::max();
}

inline void check_acquisition_inputs(const Surrogates& m, const DualState& duals, const AcquisitionSettings& s) {
    if (m.constraints.empty()) throw std::invalid_argument("acquisition: at least one constraint model required");
    const auto n = static_cast<Eigen::Index>(m.constraints.size());
    if (s.budgets.size() != n || duals.lambda.size() != n) {
        throw std::invalid_argument("acquisition: constraint models, budgets and duals disagree in count");
    }
}

}  // namespace detail

inline double acquisition_score(const PolicyVector& theta, const ContextVector& z, const Surrogates& models,
                                const DualState& duals, const ParetoFront& front, const AcquisitionSettings& s) {
    detail::check_acquisition_inputs(models, duals, s);
    const Eigen::VectorXd x = join(theta, z);
    const auto f = predict(models.objective, x);
    std::vector<PosteriorPrediction> c;
    c.reserve(models.constraints.size());
    for (const auto& gp : models.constraints) c.push_back(predict(gp, x));
    return detail::score_from_predictions(f, c, duals, front, s);
}

/// acquisition_score for every candidate, in candidate order.
inline std::vector<double> score_candidates(std::span<const PolicyVector> candidates, const ContextVector& z,
                                            const Surrogates& models, const DualState& duals,
                                            const ParetoFront& front, const AcquisitionSettings& s) {
    detail::check_acquisition_inputs(models, duals, s);
    if (candidates.empty()) return {};
    const Eigen::Index d = candidates.front().size() + z.size();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(candidates.size()), d);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        X.row(static_cast<Eigen::Index>(i)) = join(candidates[i], z).transpose();
    }
    const auto f = predict_batch(models.objective, X);
    std::vector<std::vector<PosteriorPrediction>> c;
    for (const auto& gp : models.constraints) c.push_back(predict_batch(gp, X));

    std::vector<double> out(candidates.size());
    std::vector<PosteriorPrediction> ci(models.constraints.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        for (std::size_t j = 0; j < c.size(); ++j) ci[j] = c[j][i];
        out[i] = detail::score_from_predictions(f[i], ci, duals, front, s);
    }
    return out;
}

/// Index of the largest score; the lowest index wins ties.
inline std::size_t argmax_first(std::span<const double> scores) {
    if (scores.empty()) throw std::invalid_argument("argmax_first: empty");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = i;
    }
    return best;
}

/// Best candidate in an arbitrary box (the trust region, or the whole
/// policy space for the global baseline).
inline PolicyVector select_in_box(const Box& box, const ContextVector& z, const Surrogates& models,
                                  const DualState& duals, const ParetoFront& front, std::size_t n_candidates,
                                  const AcquisitionSettings& s, RandomStream& stream) {
    const auto candidates = generate_candidates(box, n_candidates, stream);
    const auto scores = score_candidates(candidates, z, models, duals, front, s);
    return candidates[argmax_first(scores)];
}

inline PolicyVector select_policy(const TrustRegion& tr, const GlobalBounds& g, const ContextVector& z,
                                  const Surrogates& models, const DualState& duals, const ParetoFront& front,
                                  std::size_t n_candidates, const AcquisitionSettings& s, RandomStream& stream) {
    return select_in_box(region_bounds(tr, g), z, models, duals, front, n_candidates, s, stream);
}

}  // namespace ctrcbo

#pragma once

// Per-cohort trust regions: isotropic axis-aligned boxes inside the global
// policy box that double after a streak of successes, halve after a streak
// of failures, and restart at their initial length when they would shrink
// below the minimum.

#include "ctrcbo/types.hpp"

#include <algorithm>
#include <cstddef>
#include <stdexcept>

namespace ctrcbo {

struct GlobalBounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    static GlobalBounds unit(Eigen::Index dim) {
        return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return lower.size(); }
    [[nodiscard]] Eigen::VectorXd span() const { return upper - lower; }
    [[nodiscard]] Eigen::VectorXd midpoint() const { return 0.5 * (lower + upper); }

    [[nodiscard]] bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        if (x.size() != dim()) return false;
        for (Eigen::Index i = 0; i < dim(); ++i) {
            if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
        }
        return true;
    }

    void validate() const {
        if (lower.size() == 0 || lower.size() != upper.size()) {
            throw std::invalid_argument("bounds: lower/upper size mismatch");
        }
        for (Eigen::Index i = 0; i < dim(); ++i) {
            if (!(lower[i] < upper[i])) throw std::invalid_argument("bounds: need lower < upper");
        }
    }
};

struct Box {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    [[nodiscard]] Eigen::Index dim() const noexcept { return lower.size(); }
    [[nodiscard]] Eigen::VectorXd center() const { return 0.5 * (lower + upper); }

    [[nodiscard]] bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        if (x.size() != dim()) return false;
        for (Eigen::Index i = 0; i < dim(); ++i) {
            if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
        }
        return true;
    }
};

inline Box as_box(const GlobalBounds& g) { return {g.lower, g.upper}; }

struct TrustRegionParams {
    double length_init = 0.4;
    double length_min = 0.05;
    double length_max = 1.0;
    int tau_succ = 3;
    int tau_fail = 5;
};

struct TrustRegion {
    std::size_t cohort_id = 0;
    PolicyVector center;
    double length = 0.4;  // edge length as a fraction of each dimension's span
    double length_min = 0.05;
    double length_max = 1.0;
    double length_init = 0.4;
    int success_streak = 0;
    int failure_streak = 0;
    int tau_succ = 3;
    int tau_fail = 5;
    int restart_count = 0;

    static TrustRegion make(std::size_t cohort_id, PolicyVector center, const TrustRegionParams& p) {
        if (!(p.length_min > 0.0 && p.length_min <= p.length_init && p.length_init <= p.length_max)) {
            throw std::invalid_argument("trust region: need 0 < length_min <= length_init <= length_max");
        }
        if (p.tau_succ < 1 || p.tau_fail < 1) throw std::invalid_argument("trust region: thresholds must be >= 1");
        TrustRegion tr;
        tr.cohort_id = cohort_id;
        tr.center = std::move(center);
        tr.length = p.length_init;
        tr.length_min = p.length_min;
        tr.length_max = p.length_max;
        tr.length_init = p.length_init;
        tr.tau_succ = p.tau_succ;
        tr.tau_fail = p.tau_fail;
        return tr;
    }
};

/// [center - length/2, center + length/2] per dimension, in units of the
/// global span, clipped into the global box.
inline Box region_bounds(const TrustRegion& tr, const GlobalBounds& g) {
    const Eigen::VectorXd half = 0.5 * tr.length * g.span();
    Box box{(tr.center.values() - half).cwiseMax(g.lower), (tr.center.values() + half).cwiseMin(g.upper)};
    // A center on the boundary with tiny length can round past the clip.
    box.lower = box.lower.cwiseMin(box.upper);
    return box;
}

inline TrustRegion update_on_outcome(TrustRegion tr, bool success) {
    if (success) {
        tr.failure_streak = 0;
        if (++tr.success_streak >= tr.tau_succ) {
            tr.length = std::min(2.0 * tr.length, tr.length_max);
            tr.success_streak = 0;
        }
        return tr;
    }
    tr.success_streak = 0;
    if (++tr.failure_streak >= tr.tau_fail) {
        tr.failure_streak = 0;
        const double halved = 0.5 * tr.length;
        if (halved < tr.length_min) {
            tr.length = tr.length_init;
            ++tr.restart_count;
        } else {
            tr.length = halved;
        }
    }
    return tr;
}

inline TrustRegion recenter(TrustRegion tr, const PolicyVector& best, const GlobalBounds& g) {
    if (!g.contains(best.values())) throw std::invalid_argument("recenter: point outside global bounds");
    tr.center = best;
    return tr;
}

}  // namespace ctrcbo

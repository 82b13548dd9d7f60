#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <utility>

namespace ctrcbo {

namespace detail {

template <class Tag>
class TaggedVector {
public:
    TaggedVector() = default;
    explicit TaggedVector(Eigen::VectorXd v) : v_(std::move(v)) {}
    TaggedVector(std::initializer_list<double> xs) : v_(static_cast<Eigen::Index>(xs.size())) {
        Eigen::Index i = 0;
        for (double x : xs) v_[i++] = x;
    }

    [[nodiscard]] const Eigen::VectorXd& values() const noexcept { return v_; }
    [[nodiscard]] Eigen::VectorXd& values() noexcept { return v_; }
    [[nodiscard]] Eigen::Index size() const noexcept { return v_.size(); }
    double operator[](Eigen::Index i) const { return v_[i]; }
    double& operator[](Eigen::Index i) { return v_[i]; }

    friend bool operator==(const TaggedVector& a, const TaggedVector& b) {
        return a.v_.size() == b.v_.size() && a.v_ == b.v_;
    }

private:
    Eigen::VectorXd v_;
};

}  // namespace detail

/// A point in the global policy box: per-dimension ad-placement intensities.
using PolicyVector = detail::TaggedVector<struct PolicyTag>;

/// Exogenous system context for one step (seasonality, traffic shift, ...).
using ContextVector = detail::TaggedVector<struct ContextTag>;

/// Surrogate input: policy followed by context.
inline Eigen::VectorXd join(const PolicyVector& theta, const ContextVector& z) {
    Eigen::VectorXd x(theta.size() + z.size());
    x << theta.values(), z.values();
    return x;
}

/// (ads-score delta, ad-impressions delta), both in percent.
struct ObjectivePair {
    double score_delta = 0.0;
    double impressions_delta = 0.0;

    friend bool operator==(const ObjectivePair&, const ObjectivePair&) = default;
};

}  // namespace ctrcbo

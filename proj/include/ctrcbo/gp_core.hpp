#pragma once

// Gaussian-process regression surrogates for the per-cohort ads-score and
// impressions models. Two kernels are supported:
//
//   sigmoid:  k(x, x') = sigma_f2 / (1 + exp(-(a <x, x'> + b)))
//   rbf:      k(x, x') = sigma_f2 * exp(-1/2 sum_d ((x_d - x'_d) / l_d)^2)
//
// The sigmoid kernel is not positive semidefinite for every (a, b), so the
// Gram matrix is factored with an escalating diagonal jitter and fitting
// fails with NotPositiveDefinite once the jitter cap is reached.
//
// Inputs are standardized per dimension with training-set statistics before
// any kernel evaluation; the shift and scale live in the model and are
// reapplied at prediction time.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ctrcbo {

class NotPositiveDefinite : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class KernelKind { Sigmoid, RBF };

struct KernelSpec {
    KernelKind kind = KernelKind::RBF;
    double a = 1.0;  // sigmoid slope
    double b = 0.0;  // sigmoid bias
    // RBF lengthscales; a single entry is broadcast to every dimension.
    Eigen::VectorXd lengthscale = Eigen::VectorXd::Ones(1);
    double sigma_f2 = 1.0;

    static KernelSpec sigmoid(double a, double b, double sigma_f2) {
        KernelSpec k;
        k.kind = KernelKind::Sigmoid;
        k.a = a;
        k.b = b;
        k.sigma_f2 = sigma_f2;
        return k;
    }

    static KernelSpec rbf(double lengthscale, double sigma_f2) {
        KernelSpec k;
        k.kind = KernelKind::RBF;
        k.lengthscale = Eigen::VectorXd::Constant(1, lengthscale);
        k.sigma_f2 = sigma_f2;
        return k;
    }

    static KernelSpec rbf(Eigen::VectorXd lengthscales, double sigma_f2) {
        KernelSpec k;
        k.kind = KernelKind::RBF;
        k.lengthscale = std::move(lengthscales);
        k.sigma_f2 = sigma_f2;
        return k;
    }

    void validate() const {
        if (!(sigma_f2 >= 0.0) || !std::isfinite(sigma_f2)) {
            throw std::invalid_argument("kernel: sigma_f2 must be finite and >= 0");
        }
        if (kind == KernelKind::Sigmoid) {
            if (!std::isfinite(a) || !std::isfinite(b)) {
                throw std::invalid_argument("kernel: sigmoid slope and bias must be finite");
            }
        } else {
            if (lengthscale.size() == 0) {
                throw std::invalid_argument("kernel: rbf needs at least one lengthscale");
            }
            for (Eigen::Index i = 0; i < lengthscale.size(); ++i) {
                if (!(lengthscale[i] > 0.0) || !std::isfinite(lengthscale[i])) {
                    throw std::invalid_argument("kernel: rbf lengthscales must be finite and > 0");
                }
            }
        }
    }
};

struct PosteriorPrediction {
    double mean = 0.0;
    double variance = 0.0;
};

namespace detail {

inline void require_finite(const Eigen::Ref<const Eigen::VectorXd>& x, const char* what) {
    if (!x.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

inline double rbf_lengthscale(const KernelSpec& k, Eigen::Index d) {
    return k.lengthscale.size() == 1 ? k.lengthscale[0] : k.lengthscale[d];
}

// Unchecked evaluation; callers validate dimensions once per batch.
inline double kernel_unchecked(const KernelSpec& k,
                               const Eigen::Ref<const Eigen::VectorXd>& xi,
                               const Eigen::Ref<const Eigen::VectorXd>& xj) {
    if (k.kind == KernelKind::Sigmoid) {
        const double arg = k.a * xi.dot(xj) + k.b;
        // exp(-arg) overflows to inf for very negative arg, giving 0: still finite.
        return k.sigma_f2 / (1.0 + std::exp(-arg));
    }
    double s = 0.0;
    for (Eigen::Index d = 0; d < xi.size(); ++d) {
        const double r = (xi[d] - xj[d]) / rbf_lengthscale(k, d);
        s += r * r;
    }
    return k.sigma_f2 * std::exp(-0.5 * s);
}

inline void check_kernel_dims(const KernelSpec& k, Eigen::Index dim) {
    if (k.kind == KernelKind::RBF && k.lengthscale.size() != 1 && k.lengthscale.size() != dim) {
        throw std::invalid_argument("kernel: lengthscale count does not match input dimension");
    }
}

}  // namespace detail

/// Kernel value between two inputs. Symmetric and finite for finite inputs.
inline double kernel_eval(const KernelSpec& kernel,
                          const Eigen::Ref<const Eigen::VectorXd>& x_i,
                          const Eigen::Ref<const Eigen::VectorXd>& x_j) {
    if (x_i.size() != x_j.size()) throw std::invalid_argument("kernel_eval: dimension mismatch");
    detail::require_finite(x_i, "kernel_eval");
    detail::require_finite(x_j, "kernel_eval");
    kernel.validate();
    detail::check_kernel_dims(kernel, x_i.size());
    return detail::kernel_unchecked(kernel, x_i, x_j);
}

inline constexpr double kJitterStart = 1e-10;
inline constexpr double kJitterCap = 1e-2;

struct GramFactor {
    Eigen::MatrixXd gram;  // jittered, as factored
    Eigen::MatrixXd chol;  // lower triangular, chol * chol^T = gram
    double jitter_used = 0.0;
};

namespace detail {

/// Rows of X are inputs.
inline Eigen::MatrixXd raw_gram(const KernelSpec& kernel, const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = kernel_unchecked(kernel, X.row(i).transpose(), X.row(j).transpose());
            K(i, j) = v;
            K(j, i) = v;
        }
    }
    return K;
}

inline GramFactor factor_with_jitter(const Eigen::MatrixXd& raw, double noise_var) {
    const Eigen::Index n = raw.rows();
    for (double jitter = kJitterStart; jitter <= kJitterCap * (1.0 + 1e-9); jitter *= 10.0) {
        Eigen::MatrixXd K = raw;
        K.diagonal().array() += noise_var + jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(K);
        if (llt.info() == Eigen::Success) {
            Eigen::MatrixXd L = llt.matrixL();
            bool ok = L.allFinite();
            for (Eigen::Index i = 0; ok && i < n; ++i) ok = L(i, i) > 0.0;
            if (ok) return GramFactor{std::move(K), std::move(L), jitter};
        }
    }
    throw NotPositiveDefinite("gram matrix is not positive definite at jitter cap 1e-2");
}

inline void validate_inputs(const Eigen::MatrixXd& X, const char* what) {
    if (X.rows() == 0) throw std::invalid_argument(std::string(what) + ": no input points");
    if (X.cols() == 0) throw std::invalid_argument(std::string(what) + ": zero-dimensional inputs");
    if (!X.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

}  // namespace detail

/// Jittered Gram matrix K + (noise_var + jitter) I over the rows of X, with
/// jitter escalated from 1e-10 by x10 until a Cholesky factorization
/// succeeds. Throws NotPositiveDefinite past 1e-2.
inline std::pair<Eigen::MatrixXd, double> gram_matrix(const KernelSpec& kernel,
                                                      const Eigen::MatrixXd& X,
                                                      double noise_var) {
    detail::validate_inputs(X, "gram_matrix");
    kernel.validate();
    detail::check_kernel_dims(kernel, X.cols());
    if (!(noise_var >= 0.0)) throw std::invalid_argument("gram_matrix: noise_var must be >= 0");
    auto f = detail::factor_with_jitter(detail::raw_gram(kernel, X), noise_var);
    return {std::move(f.gram), f.jitter_used};
}

struct GPModel {
    Eigen::MatrixXd X;            // standardized training inputs, one per row
    Eigen::VectorXd y;            // targets minus prior_mean
    Eigen::VectorXd input_shift;  // per-dimension training mean
    Eigen::VectorXd input_scale;  // per-dimension training std (1 where degenerate)
    double prior_mean = 0.0;
    double noise_var = 0.0;
    KernelSpec kernel;
    Eigen::MatrixXd chol;
    Eigen::VectorXd alpha;
    double jitter_used = 0.0;

    [[nodiscard]] Eigen::Index size() const noexcept { return X.rows(); }
    [[nodiscard]] Eigen::Index dim() const noexcept { return X.cols(); }

    [[nodiscard]] Eigen::VectorXd standardize(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        return ((x - input_shift).array() / input_scale.array()).matrix();
    }
};

struct FitOptions {
    bool standardize_inputs = true;
};

/// Fits a GP to rows of X and targets y. Deterministic in its inputs.
inline GPModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KernelSpec& kernel,
                   double noise_var, double prior_mean = 0.0, FitOptions options = {}) {
    detail::validate_inputs(X, "fit");
    if (X.rows() != y.size()) throw std::invalid_argument("fit: |X| != |y|");
    if (!y.allFinite()) throw std::invalid_argument("fit: non-finite target");
    if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) {
        throw std::invalid_argument("fit: noise_var must be finite and >= 0");
    }
    if (!std::isfinite(prior_mean)) throw std::invalid_argument("fit: non-finite prior mean");
    kernel.validate();
    detail::check_kernel_dims(kernel, X.cols());

    GPModel m;
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    m.input_shift = Eigen::VectorXd::Zero(d);
    m.input_scale = Eigen::VectorXd::Ones(d);
    if (options.standardize_inputs) {
        m.input_shift = X.colwise().mean().transpose();
        for (Eigen::Index j = 0; j < d; ++j) {
            const double var = (X.col(j).array() - m.input_shift[j]).square().sum() / static_cast<double>(n);
            const double sd = std::sqrt(var);
            m.input_scale[j] = sd > 1e-12 ? sd : 1.0;
        }
    }
    m.X = (X.rowwise() - m.input_shift.transpose()).array().rowwise() / m.input_scale.transpose().array();
    m.y = y.array() - prior_mean;
    m.prior_mean = prior_mean;
    m.noise_var = noise_var;
    m.kernel = kernel;

    auto f = detail::factor_with_jitter(detail::raw_gram(kernel, m.X), noise_var);
    m.chol = std::move(f.chol);
    m.jitter_used = f.jitter_used;
    m.alpha = m.chol.triangularView<Eigen::Lower>().solve(m.y);
    m.chol.transpose().triangularView<Eigen::Upper>().solveInPlace(m.alpha);
    return m;
}

namespace detail {

inline Eigen::VectorXd cross_kernel(const GPModel& model, const Eigen::VectorXd& xs) {
    Eigen::VectorXd k(model.size());
    for (Eigen::Index i = 0; i < model.size(); ++i) {
        k[i] = kernel_unchecked(model.kernel, model.X.row(i).transpose(), xs);
    }
    return k;
}

}  // namespace detail

/// Posterior mean and latent-function variance at x_star.
inline PosteriorPrediction predict(const GPModel& model, const Eigen::Ref<const Eigen::VectorXd>& x_star) {
    if (x_star.size() != model.dim()) throw std::invalid_argument("predict: dimension mismatch");
    detail::require_finite(x_star, "predict");
    const Eigen::VectorXd xs = model.standardize(x_star);
    const Eigen::VectorXd ks = detail::cross_kernel(model, xs);
    const Eigen::VectorXd v = model.chol.triangularView<Eigen::Lower>().solve(ks);
    const double prior_var = detail::kernel_unchecked(model.kernel, xs, xs);
    return {model.prior_mean + ks.dot(model.alpha), std::max(0.0, prior_var - v.squaredNorm())};
}

/// Batched predict over the rows of X_star. Same values as predict(), one
/// triangular solve for the whole batch.
inline std::vector<PosteriorPrediction> predict_batch(const GPModel& model, const Eigen::MatrixXd& X_star) {
    if (X_star.cols() != model.dim()) throw std::invalid_argument("predict_batch: dimension mismatch");
    if (!X_star.allFinite()) throw std::invalid_argument("predict_batch: non-finite input");
    const Eigen::Index m = X_star.rows();
    const Eigen::MatrixXd S =
        (X_star.rowwise() - model.input_shift.transpose()).array().rowwise() / model.input_scale.transpose().array();
    Eigen::MatrixXd Ks(model.size(), m);
    for (Eigen::Index c = 0; c < m; ++c) {
        for (Eigen::Index i = 0; i < model.size(); ++i) {
            Ks(i, c) = detail::kernel_unchecked(model.kernel, model.X.row(i).transpose(), S.row(c).transpose());
        }
    }
    const Eigen::MatrixXd V = model.chol.triangularView<Eigen::Lower>().solve(Ks);
    std::vector<PosteriorPrediction> out(static_cast<std::size_t>(m));
    for (Eigen::Index c = 0; c < m; ++c) {
        const Eigen::VectorXd s = S.row(c).transpose();
        const double prior_var = detail::kernel_unchecked(model.kernel, s, s);
        out[static_cast<std::size_t>(c)] = {model.prior_mean + Ks.col(c).dot(model.alpha),
                                            std::max(0.0, prior_var - V.col(c).squaredNorm())};
    }
    return out;
}

inline double log_marginal_likelihood(const GPModel& model) {
    const double n = static_cast<double>(model.size());
    return -0.5 * model.y.dot(model.alpha) - model.chol.diagonal().array().log().sum() -
           0.5 * n * std::log(2.0 * std::numbers::pi);
}

struct HyperparameterChoice {
    KernelSpec kernel;
    double noise_var = 0.0;
    double log_marginal_likelihood = -std::numeric_limits<double>::infinity();
};

/// Grid search over (kernel, noise) pairs by log marginal likelihood, kernel
/// index outer, noise index inner. Ties go to the earliest pair.
inline HyperparameterChoice select_hyperparameters(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                                   std::span<const KernelSpec> candidate_grid,
                                                   std::span<const double> noise_grid,
                                                   double prior_mean = 0.0, FitOptions options = {}) {
    if (candidate_grid.empty() || noise_grid.empty()) {
        throw std::invalid_argument("select_hyperparameters: empty grid");
    }
    std::optional<HyperparameterChoice> best;
    for (const auto& kernel : candidate_grid) {
        for (double noise : noise_grid) {
            double lml;
            try {
                lml = log_marginal_likelihood(fit(X, y, kernel, noise, prior_mean, options));
            } catch (const NotPositiveDefinite&) {
                continue;
            }
            if (!std::isfinite(lml)) continue;
            if (!best || lml > best->log_marginal_likelihood) best = HyperparameterChoice{kernel, noise, lml};
        }
    }
    if (!best) throw NotPositiveDefinite("select_hyperparameters: no candidate could be fitted");
    return *best;
}

}  // namespace ctrcbo

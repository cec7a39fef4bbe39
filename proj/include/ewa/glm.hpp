#pragma once

#include <Eigen/Dense>

#include "ewa/expfam.hpp"

namespace ewa {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Fixed design X (n x p, row i is x_i^T), response Y and its family.
///
/// Construction validates shapes, finiteness of X and the response support
/// (Bernoulli responses in {0, 1}, Poisson responses nonnegative integers).
/// Error messages use 1-based row numbers.
class Dataset {
public:
    Dataset(Matrix X, Vector Y, Family family);

    const Matrix& X() const { return X_; }
    const Vector& Y() const { return Y_; }
    const Family& family() const { return family_; }
    Eigen::Index n() const { return X_.rows(); }
    Eigen::Index p() const { return X_.cols(); }

private:
    Matrix X_;
    Vector Y_;
    Family family_;
};

/// Natural-parameter vector whose components all lie in the family's
/// interval. The check happens once, at construction.
class NaturalParams {
public:
    NaturalParams(Vector theta, const Family& family);

    const Vector& theta() const { return theta_; }
    Eigen::Index size() const { return theta_.size(); }

private:
    Vector theta_;
};

/// True when every component of theta lies in the family interval.
bool in_domain(const Family& family, const Vector& theta);

/// theta = X beta. Throws DomainError naming the first offending row.
NaturalParams natural_params(const Matrix& X, const Vector& beta, const Family& family);

/// (1 / (n a)) sum_i [Y_i theta_i - b(theta_i)] with theta = X beta; the
/// average log-likelihood up to terms free of beta.
double avg_loglik(const Dataset& data, const Vector& beta);

/// (1 / (n a)) X^T (Y - b'(X beta)).
Vector loglik_gradient(const Dataset& data, const Vector& beta);

/// Kullback-Leibler divergence between the product laws f_theta0 and f_theta1:
///   (1/a) sum_i [b'(theta0_i)(theta0_i - theta1_i) - b(theta0_i) + b(theta1_i)].
double kl_divergence(const NaturalParams& theta0, const NaturalParams& theta1,
                     const Family& family);

/// kl_divergence(theta0, X beta).
double kl_risk(const NaturalParams& theta0, const Matrix& X, const Vector& beta,
               const Family& family);

/// Largest singular value of X by power iteration on X^T X.
/// Throws ConvergenceError after max_iterations.
double spectral_norm(const Matrix& X, double rel_tol = 1e-10, int max_iterations = 10000);

}  // namespace ewa

namespace ewa {

/// Repeated evaluation of kl_risk(theta0, X, .) for one fixed theta0 and X.
/// Gaussian data on an unbounded interval use the expansion
///   (||theta0||^2 - 2 beta^T X^T theta0 + beta^T X^T X beta) / (2a).
class KlRiskEvaluator {
public:
    KlRiskEvaluator(const NaturalParams& theta0, const Matrix& X, const Family& family);

    /// Throws DomainError if X beta leaves the family interval.
    double operator()(const Vector& beta) const;

private:
    NaturalParams theta0_;
    Matrix X_;
    Family family_;
    bool quadratic_ = false;
    Matrix gram_;
    Vector xt_theta0_;
    double theta0_sq_ = 0.0;
};

}  // namespace ewa

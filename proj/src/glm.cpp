#include "ewa/glm.hpp"

#include <cmath>
#include <sstream>

#include "ewa/error.hpp"

namespace ewa {

Dataset::Dataset(Matrix X, Vector Y, Family family)
    : X_(std::move(X)), Y_(std::move(Y)), family_(family) {
    if (X_.rows() < 1 || X_.cols() < 1) throw DimensionError("design must have n >= 1 rows and p >= 1 columns");
    if (Y_.size() != X_.rows()) {
        std::ostringstream os;
        os << "response has length " << Y_.size() << " but design has n = " << X_.rows() << " rows";
        throw DimensionError(os.str());
    }
    for (Eigen::Index i = 0; i < X_.rows(); ++i)
        for (Eigen::Index j = 0; j < X_.cols(); ++j)
            if (!std::isfinite(X_(i, j))) {
                std::ostringstream os;
                os << "design entry at row " << i + 1 << ", column " << j + 1 << " is not finite";
                throw DataError(os.str());
            }
    for (Eigen::Index i = 0; i < Y_.size(); ++i) {
        const double y = Y_[i];
        bool ok = std::isfinite(y);
        const char* expect = "a finite value";
        if (family_.kind() == FamilyKind::Bernoulli) {
            ok = ok && (y == 0.0 || y == 1.0);
            expect = "0 or 1";
        } else if (family_.kind() == FamilyKind::Poisson) {
            ok = ok && y >= 0.0 && y == std::floor(y);
            expect = "a nonnegative integer";
        }
        if (!ok) {
            std::ostringstream os;
            os << "response at row " << i + 1 << " is " << y << "; " << to_string(family_.kind())
               << " responses must be " << expect;
            throw DataError(os.str());
        }
    }
}

NaturalParams::NaturalParams(Vector theta, const Family& family) : theta_(std::move(theta)) {
    for (Eigen::Index i = 0; i < theta_.size(); ++i) {
        if (!family.theta_interval().contains(theta_[i])) {
            std::ostringstream os;
            os << "natural parameter at row " << i + 1 << " is " << theta_[i] << ", outside "
               << to_string(family.kind()) << " interval " << family.theta_interval().describe();
            throw DomainError(os.str());
        }
    }
}

bool in_domain(const Family& family, const Vector& theta) {
    const Interval& iv = family.theta_interval();
    if (std::isinf(iv.lo) && std::isinf(iv.hi)) return theta.allFinite();
    for (Eigen::Index i = 0; i < theta.size(); ++i)
        if (!iv.contains(theta[i])) return false;
    return true;
}

NaturalParams natural_params(const Matrix& X, const Vector& beta, const Family& family) {
    if (beta.size() != X.cols()) {
        std::ostringstream os;
        os << "coefficient vector has length " << beta.size() << " but design has p = " << X.cols();
        throw DimensionError(os.str());
    }
    return NaturalParams(X * beta, family);
}

double avg_loglik(const Dataset& data, const Vector& beta) {
    const NaturalParams theta = natural_params(data.X(), beta, data.family());
    const FamilyKind kind = data.family().kind();
    double s = 0.0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double t = theta.theta()[i];
        s += data.Y()[i] * t - detail::cumulant(kind, t);
    }
    return s / (static_cast<double>(data.n()) * data.family().scale());
}

Vector loglik_gradient(const Dataset& data, const Vector& beta) {
    const NaturalParams theta = natural_params(data.X(), beta, data.family());
    const FamilyKind kind = data.family().kind();
    Vector resid(data.n());
    for (Eigen::Index i = 0; i < resid.size(); ++i)
        resid[i] = data.Y()[i] - detail::mean(kind, theta.theta()[i]);
    return data.X().transpose() * resid / (static_cast<double>(data.n()) * data.family().scale());
}

double kl_divergence(const NaturalParams& theta0, const NaturalParams& theta1, const Family& family) {
    if (theta0.size() != theta1.size()) {
        std::ostringstream os;
        os << "kl_divergence: lengths " << theta0.size() << " and " << theta1.size() << " differ";
        throw DimensionError(os.str());
    }
    const FamilyKind kind = family.kind();
    double s = 0.0;
    if (kind == FamilyKind::Gaussian) {
        s = 0.5 * (theta0.theta() - theta1.theta()).squaredNorm();
    } else {
        for (Eigen::Index i = 0; i < theta0.size(); ++i) {
            const double t0 = theta0.theta()[i];
            const double t1 = theta1.theta()[i];
            if (t0 == t1) continue;
            s += detail::mean(kind, t0) * (t0 - t1) - detail::cumulant(kind, t0) + detail::cumulant(kind, t1);
        }
    }
    return s / family.scale();
}

double kl_risk(const NaturalParams& theta0, const Matrix& X, const Vector& beta, const Family& family) {
    return kl_divergence(theta0, natural_params(X, beta, family), family);
}

double spectral_norm(const Matrix& X, double rel_tol, int max_iterations) {
    if (!X.allFinite()) throw DomainError("spectral_norm: matrix has non-finite entries");
    const Matrix gram = X.transpose() * X;
    if (gram.norm() == 0.0) return 0.0;
    // deterministic start with no zero component
    Vector v(gram.cols());
    for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = 1.0 + 0.1 * static_cast<double>(j % 7);
    v.normalize();
    double eig = 0.0;
    for (int it = 1; it <= max_iterations; ++it) {
        Vector w = gram * v;
        const double next = v.dot(w);
        const double wn = w.norm();
        if (wn == 0.0) return 0.0;
        v = w / wn;
        if (it > 1 && std::abs(next - eig) <= rel_tol * std::abs(next)) return std::sqrt(next);
        eig = next;
    }
    throw ConvergenceError("spectral_norm: power iteration did not converge in " +
                               std::to_string(max_iterations) + " iterations",
                           max_iterations);
}

}  // namespace ewa

namespace ewa {

KlRiskEvaluator::KlRiskEvaluator(const NaturalParams& theta0, const Matrix& X, const Family& family)
    : theta0_(theta0), X_(X), family_(family) {
    if (theta0.size() != X.rows()) throw DimensionError("KlRiskEvaluator: theta0 length differs from design rows");
    const Interval& iv = family.theta_interval();
    quadratic_ = family.kind() == FamilyKind::Gaussian && std::isinf(iv.lo) && std::isinf(iv.hi);
    if (quadratic_) {
        gram_ = X.transpose() * X;
        xt_theta0_ = X.transpose() * theta0.theta();
        theta0_sq_ = theta0.theta().squaredNorm();
    }
}

double KlRiskEvaluator::operator()(const Vector& beta) const {
    if (!quadratic_) return kl_risk(theta0_, X_, beta, family_);
    if (beta.size() != X_.cols()) throw DimensionError("KlRiskEvaluator: coefficient length mismatch");
    const double q = theta0_sq_ - 2.0 * beta.dot(xt_theta0_) + beta.dot(gram_ * beta);
    return 0.5 * q / family_.scale();
}

}  // namespace ewa

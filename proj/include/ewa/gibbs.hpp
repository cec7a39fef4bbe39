#pragma once

#include <memory>
#include <optional>

#include "ewa/glm.hpp"
#include "ewa/prior.hpp"

namespace ewa {

/// Exponentially weighted aggregate (Gibbs posterior)
///   rho(beta) ~ exp(lambda * avg_loglik(beta)) * pi(beta).
/// The likelihood enters with a positive sign so that better-fitting
/// coefficients receive more weight.
struct GibbsConfig {
    double lambda = 1.0;
    PriorConfig prior;
    std::shared_ptr<const Dataset> data;

    /// lambda = n, zeta = 1 / (n p ||X||), B1 = 100 unless overridden.
    static GibbsConfig with_defaults(std::shared_ptr<const Dataset> data,
                                     std::optional<double> lambda = std::nullopt,
                                     std::optional<double> zeta = std::nullopt,
                                     std::optional<double> B1 = std::nullopt);

    /// lambda >= 0 (zero gives the prior), prior valid, prior.p == data->p().
    void validate() const;
};

double log_posterior_unnormalized(const Vector& beta, const GibbsConfig& cfg);

/// Throws DomainError on or outside the support.
Vector log_posterior_gradient(const Vector& beta, const GibbsConfig& cfg);

/// Cached evaluator used by the samplers. For Gaussian data with an unbounded
/// natural-parameter interval it works from X^T X and X^T Y, which costs
/// O(p^2) per evaluation instead of O(n p).
class GibbsPosterior {
public:
    explicit GibbsPosterior(GibbsConfig cfg);

    const GibbsConfig& config() const { return cfg_; }
    Eigen::Index dim() const { return cfg_.prior.p; }

    /// -infinity outside the ball or the natural-parameter domain.
    double log_density(const Vector& beta) const;

    /// Writes log-density and, when grad is non-null, its gradient. Returns
    /// false (log_density = -inf) when beta is not strictly inside the support.
    bool evaluate(const Vector& beta, double& log_density, Vector* grad) const;

    double log_likelihood_term(const Vector& beta) const;

private:
    GibbsConfig cfg_;
    bool quadratic_ = false;
    Matrix gram_;
    Vector xty_;
    double inv_na_ = 1.0;
};

struct ModeResult {
    Vector beta;
    double log_density = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Local posterior mode by majorize-minimize: the log penalty is bounded by
/// a quadratic at the current iterate and the resulting weighted-ridge GLM
/// is solved by damped Newton. Starts from a lightly ridged MLE so that
/// every coordinate begins outside the prior spike.
ModeResult find_posterior_mode(const GibbsPosterior& posterior, int max_iterations = 200,
                               double tol = 1e-10);

}  // namespace ewa

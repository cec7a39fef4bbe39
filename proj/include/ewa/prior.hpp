#pragma once

#include <string>

#include "ewa/glm.hpp"
#include "ewa/rng.hpp"

namespace ewa {

/// Scaled Student prior pi(beta) ~ prod_j (zeta^2 + beta_j^2)^-2 restricted
/// to the Euclidean ball ||beta||_2 <= B1. Each untruncated component is
/// (zeta / sqrt 3) * T with T ~ t_3.
struct PriorConfig {
    double zeta = 1.0;
    double B1 = 100.0;
    Eigen::Index p = 1;

    /// Throws ConfigError unless zeta > 0, B1 > 0 and p >= 1.
    void validate() const;

    /// Non-empty when B1 - 2 p zeta <= 0.
    std::string feasibility_warning() const;
};

/// zeta = 1 / (n p ||X||) with the spectral norm.
double default_zeta(const Matrix& X);

/// -2 sum_j log(zeta^2 + beta_j^2), or -infinity outside the ball.
double log_prior_unnormalized(const Vector& beta, const PriorConfig& cfg);

/// Component j is -4 beta_j / (zeta^2 + beta_j^2). Throws DomainError on or
/// outside the ball boundary.
Vector log_prior_gradient(const Vector& beta, const PriorConfig& cfg);

/// Componentwise scaled t_3 draws, whole vector rejected until inside the ball.
Vector sample_prior(const PriorConfig& cfg, Rng& rng, long max_attempts = 1'000'000);

/// Scale s such that a component is s * T with T ~ t_3.
inline double prior_t3_scale(double zeta) { return zeta / 1.7320508075688772; }

}  // namespace ewa

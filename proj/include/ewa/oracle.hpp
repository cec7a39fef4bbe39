#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ewa/gibbs.hpp"
#include "ewa/sampler.hpp"

namespace ewa {

struct SubsetRecord {
    std::vector<int> subset;  // 0-based, increasing
    bool converged = false;
    double kl = 0.0;
    int newton_iters = 0;
};

/// Best p0-sparse approximation of theta0 in KL, with one record per subset.
struct OracleResult {
    Vector beta_star;
    double kl_star = 0.0;
    std::vector<int> subset_chosen;
    std::vector<SubsetRecord> per_subset_records;
    /// Set when ||beta_star|| > B1 - 2 p zeta for the supplied prior.
    std::string warning;
};

struct OracleOptions {
    double grad_tol = 1e-9;
    int max_newton = 200;
    std::uint64_t budget = 1'000'000;
    /// When set, beta_star is checked against the radius condition.
    std::optional<PriorConfig> prior;
};

/// Number of p0-subsets of {0..p-1}; saturates at UINT64_MAX.
std::uint64_t binomial(int p, int p0);

/// Exhaustive search over all |S| = p0 supports; each restricted KL problem
/// is solved by damped Newton (step halving until KL decreases). Ties go to
/// the lexicographically smallest subset. Subsets are solved in parallel;
/// the result does not depend on thread scheduling.
OracleResult best_subset_kl(const NaturalParams& theta0, const Matrix& X, int p0, const Family& family,
                            const OracleOptions& opts = {});
OracleResult best_subset_kl_serial(const NaturalParams& theta0, const Matrix& X, int p0, const Family& family,
                                   const OracleOptions& opts = {});

/// Oracle for a realizable truth theta0 = X beta0: evaluates the planted
/// coefficients directly, without enumeration.
OracleResult realizable_oracle(const NaturalParams& theta0, const Matrix& X, const Vector& beta0,
                               const Family& family, const std::optional<PriorConfig>& prior = std::nullopt);

struct GridAxis {
    double lo = -1.0;
    double hi = 1.0;
    int count = 101;

    double node(int i) const { return count == 1 ? lo : lo + (hi - lo) * i / (count - 1); }
    double spacing() const { return count == 1 ? 0.0 : (hi - lo) / (count - 1); }
};

/// Normalized posterior masses on a tensor grid, last axis varying fastest.
struct GridPosterior {
    std::vector<GridAxis> axes;
    std::vector<double> masses;
    Vector mean;
    /// Grid-weighted KL risk, when theta0 was supplied.
    std::optional<double> kl_risk;

    std::size_t size() const { return masses.size(); }
    Vector node(std::size_t flat_index) const;
    /// Flat index of the nearest node, or nullopt outside the grid cells.
    std::optional<std::size_t> nearest(const Vector& beta) const;
};

/// Requires p <= 3 and at most 2e6 nodes. Throws SamplingError when every
/// node has zero density.
GridPosterior grid_posterior(const GibbsPosterior& post, std::span<const GridAxis> axes,
                             const NaturalParams* theta0 = nullptr);
GridPosterior grid_posterior_serial(const GibbsPosterior& post, std::span<const GridAxis> axes,
                                    const NaturalParams* theta0 = nullptr);

/// Total variation between the nearest-node histogram of all chain draws and
/// the grid masses; draws outside the grid count fully toward the distance.
double grid_tv_distance(const GridPosterior& grid, std::span<const Chain> chains);

struct DvCheckResult {
    /// log sum_i pi_i exp(lambda h_i)
    double log_moment = 0.0;
    /// log_moment minus the objective at the Gibbs measure
    double analytic_residual = 0.0;
    /// max over perturbations of objective(rho) - log_moment
    double worst_violation = 0.0;

    double worst() const;
};

/// Donsker-Varadhan check on a finite space: the objective
///   lambda <rho, h> - KL(rho || pi)
/// attains log E_pi exp(lambda h) at the Gibbs measure and nowhere exceeds it.
DvCheckResult dv_gibbs_check(std::span<const double> log_weights, std::span<const double> h, double lambda,
                             std::uint64_t seed = 7, int n_perturbations = 10000);

}  // namespace ewa

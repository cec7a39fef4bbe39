#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ewa/gibbs.hpp"
#include "ewa/rng.hpp"

namespace ewa {

enum class Algorithm { MALA, RWM };

/// Coordinates the chain moves in.
///   Direct: beta itself.
///   Asinh:  u with beta_j = zeta * sinh(u_j). The prior spike of width zeta
///           and the slab of width ~1/sqrt(n) both become O(1) scales, and
///           the t_3 tails become exponential. The Jacobian is included, so
///           the stationary law of beta is unchanged.
enum class Parametrization { Direct, Asinh };

enum class InitKind { PriorDraw, Zero, User, Mode };

std::string_view to_string(Algorithm a);
std::string_view to_string(Parametrization p);
std::string_view to_string(InitKind k);
Algorithm parse_algorithm(std::string_view s);
Parametrization parse_parametrization(std::string_view s);
InitKind parse_init_kind(std::string_view s);

struct SamplerConfig {
    Algorithm algorithm = Algorithm::MALA;
    Parametrization parametrization = Parametrization::Asinh;
    /// Unset: curvature-scaled default.
    std::optional<double> step_size;
    long n_iters = 10000;
    /// Unset: n_iters / 5.
    std::optional<long> burn_in;
    long thin = 1;
    int n_chains = 4;
    std::uint64_t seed = 1;
    InitKind init = InitKind::Mode;
    Vector init_vector;
    /// Robbins-Monro step adaptation during burn-in only; frozen afterwards.
    bool adapt = true;
    int max_halvings = 10;

    long burn_in_iters() const { return burn_in.value_or(n_iters / 5); }
    double target_accept() const { return algorithm == Algorithm::MALA ? 0.574 : 0.234; }
    void validate() const;
};

struct Chain {
    std::vector<Vector> draws;
    std::vector<double> log_post_trace;
    double accept_rate = 0.0;
    std::uint64_t seed_used = 0;
    SamplerConfig config_echo;
    double step_size_used = 0.0;
    int halvings = 0;
    std::vector<std::string> warnings;
};

/// Metropolis-Hastings acceptance for a log acceptance ratio.
bool metropolis_accept(double log_ratio, Rng& rng);

/// Curvature-scaled default step for the given start point.
double default_step_size(const GibbsPosterior& post, const SamplerConfig& cfg, const Vector& start);

/// Resolves the configured init kind to a start vector (Mode runs the
/// posterior-mode search; PriorDraw uses its own labelled stream).
Vector initial_point(const GibbsPosterior& post, const SamplerConfig& cfg, std::uint64_t chain_seed);

/// One chain with seed cfg.seed + chain_index. Proposals that leave the
/// support are rejected. If the post-burn-in acceptance rate is below 0.1
/// the post-burn-in step is halved and the chain rerun, up to max_halvings
/// times. Throws SamplingError when every post-burn-in proposal is rejected
/// or the start point has zero density.
Chain run_chain(const GibbsPosterior& post, const SamplerConfig& cfg, int chain_index = 0);
Chain run_chain(const GibbsConfig& gibbs, const SamplerConfig& cfg);

/// cfg.n_chains chains in parallel (OpenMP). Bitwise identical to the
/// serial reference.
std::vector<Chain> run_chains(const GibbsPosterior& post, const SamplerConfig& cfg);
std::vector<Chain> run_chains_serial(const GibbsPosterior& post, const SamplerConfig& cfg);

Vector posterior_mean(const Chain& chain);
Vector posterior_mean(std::span<const Chain> chains);

struct KlRiskEstimate {
    double value = 0.0;
    /// Monte Carlo standard error: draw-level sd / sqrt(ess).
    double standard_error = 0.0;
    double ess = 0.0;
};

KlRiskEstimate integrated_kl_risk(const Chain& chain, const NaturalParams& theta0, const Dataset& data);
KlRiskEstimate integrated_kl_risk(std::span<const Chain> chains, const NaturalParams& theta0,
                                  const Dataset& data);

/// Per-coordinate empirical quantiles over all draws of all chains.
std::vector<Vector> posterior_quantiles(std::span<const Chain> chains, std::span<const double> levels);

/// Columns: chain, draw, beta_1..beta_p, log_post.
void write_chain_csv(std::span<const Chain> chains, const std::filesystem::path& path);

}  // namespace ewa

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ewa/expfam.hpp"
#include "ewa/glm.hpp"
#include "ewa/oracle.hpp"
#include "ewa/sampler.hpp"
#include "ewa/stats.hpp"

namespace ewa {

struct FamilySpec {
    FamilyKind kind = FamilyKind::Gaussian;
    double scale = 1.0;
    /// Unset bounds take the per-family default: unbounded, except the
    /// Poisson upper bound which defaults to 3.
    std::optional<double> theta_lo;
    std::optional<double> theta_hi;

    Interval interval() const;
    Family make() const;
};

enum class DesignKind { GaussianIid, Correlated, Orthogonal };
enum class TruthKind { ExactSparse, Misspecified };

struct DesignSpec {
    DesignKind kind = DesignKind::GaussianIid;
    double rho = 0.0;
};

struct TruthSpec {
    TruthKind kind = TruthKind::ExactSparse;
    double amplitude = 1.0;
    /// Misspecified: dense coefficients amplitude * j^-decay (j = 1..p).
    double decay = 3.0;
    /// Misspecified: height of the quadratic bump in the first design column.
    double bump = 0.5;
};

std::string_view to_string(DesignKind k);
std::string_view to_string(TruthKind k);
DesignKind parse_design_kind(std::string_view s);
TruthKind parse_truth_kind(std::string_view s);

struct ExperimentConfig {
    std::uint64_t seed = 20240601;
    FamilySpec family;
    std::vector<long> n_list{100, 200, 400};
    std::vector<long> p_list{20, 50};
    std::vector<int> p0_list{1, 2, 4, 8};
    DesignSpec design;
    TruthSpec truth;
    int n_replications = 50;
    std::vector<double> epsilon_list{0.5, 0.2, 0.1, 0.05};
    SamplerConfig sampler;
    std::optional<double> lambda;
    std::optional<double> zeta;
    double B1 = 100.0;
    bool record_wall_time = false;

    void validate() const;
};

struct Cell {
    int id = 0;
    long n = 0;
    long p = 0;
    int p0 = 0;
};

/// Every (n, p, p0) combination exactly once, n outermost.
std::vector<Cell> enumerate_cells(const ExperimentConfig& cfg);

/// gaussian-iid: standard normal entries, columns rescaled to norm sqrt(n).
/// correlated: rows drawn from the AR(1) covariance rho^|j-k|.
/// orthogonal: orthonormal columns (thin QR of a Gaussian matrix) times sqrt(n).
Matrix generate_design(long n, long p, const DesignSpec& spec, Rng& rng);

struct Truth {
    /// Planted coefficients for the exact-sparse case.
    std::optional<Vector> beta0;
    Vector theta0;
};

/// exact-sparse: p0 uniformly chosen coordinates set to +-amplitude.
/// misspecified: theta0 = X beta_dense + bump * (x_i1^2 - 1) / sqrt 2, so no
/// sparse coefficient vector reproduces theta0.
Truth generate_truth(const Matrix& X, int p0, const TruthSpec& spec, Rng& rng);

/// Fixed per-cell quantities: the frozen design, the truth and its oracle.
struct CellContext {
    Cell cell;
    Family family;
    Matrix X;
    Truth truth;
    NaturalParams theta0;
    double x_norm = 0.0;
    /// p0 log(n p ||X|| / p0)
    double rate_x = 0.0;
    /// zeta defaults to 1 / (n p ||X||)
    PriorConfig prior;
    OracleResult oracle;
};

CellContext prepare_cell(const ExperimentConfig& cfg, const Cell& cell);

struct ReplicationRecord {
    int cell_id = 0;
    int rep = 0;
    std::uint64_t seed = 0;
    double ewa_int_kl = 0.0;
    double ewa_mean_kl = 0.0;
    double oracle_kl = 0.0;
    double excess_int = 0.0;
    double excess_mean = 0.0;
    double accept_rate = 0.0;
    double ess = 0.0;
    double wall_ms = 0.0;
    /// Monte Carlo standard error of ewa_int_kl (not written to CSV).
    double int_kl_se = 0.0;
    /// excess_int < -3 * int_kl_se
    bool flagged = false;
    std::vector<std::string> warnings;
};

/// Draws Y at theta0, runs the chains and scores them. Pure function of
/// (cfg.seed, cell id, rep).
ReplicationRecord run_replication(const ExperimentConfig& cfg, const CellContext& ctx, int rep);

struct CellResult {
    CellContext context;
    std::vector<ReplicationRecord> records;
};

/// Replications in parallel (OpenMP) or serially; identical output.
CellResult run_cell(const ExperimentConfig& cfg, const Cell& cell);
CellResult run_cell_serial(const ExperimentConfig& cfg, const Cell& cell);

struct SuiteResult {
    ExperimentConfig config;
    std::vector<CellResult> cells;
};

using ProgressFn = std::function<void(const CellResult&)>;
SuiteResult run_suite(const ExperimentConfig& cfg, const ProgressFn& progress = {});

struct CellSummary {
    Cell cell;
    double x_norm = 0.0;
    double rate_x = 0.0;
    double mean_excess_int = 0.0;
    double se_excess_int = 0.0;
    double mean_excess_mean = 0.0;
    double mean_ewa_int_kl = 0.0;
    double se_ewa_int_kl = 0.0;
    double oracle_kl = 0.0;
    /// mean EWA integrated KL / oracle KL (NaN when the oracle KL is 0)
    double kl_ratio = 0.0;
    double kl_ratio_se = 0.0;
    double q50 = 0.0, q80 = 0.0, q90 = 0.0, q95 = 0.0;
    int n_flagged = 0;
    int n_replications = 0;
};

CellSummary summarize_cell(const CellResult& cell);

struct RateStudyResult {
    std::vector<CellSummary> cells;
    stats::LinearFit fit;
};

/// OLS of per-cell mean excess on p0 log(n p ||X|| / p0). Throws ConfigError
/// with fewer than four cells.
RateStudyResult fit_rate_law(std::vector<CellSummary> cells);
RateStudyResult rate_study(const SuiteResult& suite);
RateStudyResult rate_study(const ExperimentConfig& cfg);

struct TailRow {
    std::string scope;  // cell id or "pooled"
    double epsilon = 0.0;
    double log_inv_eps = 0.0;
    double quantile = 0.0;
    double rate_x = 0.0;
    /// x + log(1/eps), the shape of the high-probability bound
    double bound_shape = 0.0;
};

struct TailCheck {
    std::string scope;
    /// sup-norm gap between the quantiles and their nondecreasing fit
    double monotone_residual = 0.0;
    /// sup-norm excess of the quantile increments (per unit log(1/eps)) over
    /// their nonincreasing fit, relative to the mean increment
    double superlinear_residual = 0.0;
    double slope = 0.0;
    bool pass = false;
};

struct TailStudyResult {
    std::vector<TailRow> rows;
    std::vector<TailCheck> checks;
    /// The pooled scope uses excess / rate_x over all cells.
    TailCheck pooled;
};

inline constexpr double kSuperlinearTolerance = 0.5;

/// Empirical (1 - eps) quantiles of the integrated excess per cell and pooled,
/// with an isotonic check that growth in log(1/eps) is at most linear.
/// Requires at least 50 replications per cell.
TailStudyResult tail_study(const SuiteResult& suite, const std::vector<double>& epsilons);
TailStudyResult tail_study(const ExperimentConfig& cfg);
TailCheck check_tail_growth(const std::string& scope, const std::vector<double>& log_inv_eps,
                            const std::vector<double>& quantiles);

struct ReportPaths {
    std::filesystem::path dir;
    std::vector<std::filesystem::path> files;
};

/// Writes config_echo.json, replications.csv, cells.csv, ratefit.csv,
/// tails.csv and plots/*.svg under out_dir/seed_<seed>/. Rate and tail
/// outputs are written when the corresponding result is given.
ReportPaths emit_report(const SuiteResult& suite, const std::optional<RateStudyResult>& rate,
                        const std::optional<TailStudyResult>& tails, const std::filesystem::path& out_dir);

std::vector<ReplicationRecord> load_replications_csv(const std::filesystem::path& path);

}  // namespace ewa

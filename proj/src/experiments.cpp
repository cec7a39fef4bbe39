#include "ewa/experiments.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>

#include "ewa/error.hpp"
#include "ewa/prior.hpp"
#include "ewa/stats.hpp"

namespace ewa {

Interval FamilySpec::interval() const {
    Interval iv;
    if (kind == FamilyKind::Poisson) iv.hi = 3.0;
    if (theta_lo) iv.lo = *theta_lo;
    if (theta_hi) iv.hi = *theta_hi;
    return iv;
}

Family FamilySpec::make() const { return Family(kind, scale, interval()); }

std::string_view to_string(DesignKind k) {
    switch (k) {
        case DesignKind::GaussianIid: return "gaussian-iid";
        case DesignKind::Correlated: return "correlated";
        case DesignKind::Orthogonal: return "orthogonal";
    }
    return "unknown";
}

std::string_view to_string(TruthKind k) { return k == TruthKind::ExactSparse ? "exact-sparse" : "misspecified"; }

DesignKind parse_design_kind(std::string_view s) {
    if (s == "gaussian-iid") return DesignKind::GaussianIid;
    if (s == "correlated") return DesignKind::Correlated;
    if (s == "orthogonal") return DesignKind::Orthogonal;
    throw ConfigError("unknown design kind '" + std::string(s) + "'");
}

TruthKind parse_truth_kind(std::string_view s) {
    if (s == "exact-sparse") return TruthKind::ExactSparse;
    if (s == "misspecified") return TruthKind::Misspecified;
    throw ConfigError("unknown truth kind '" + std::string(s) + "'");
}

void ExperimentConfig::validate() const {
    const Family fam = family.make();
    if (fam.kind() != FamilyKind::Gaussian && fam.scale() != 1.0)
        throw ConfigError("family: bernoulli and poisson fix scale a = 1");
    if (n_list.empty() || p_list.empty() || p0_list.empty()) throw ConfigError("cells: n, p and p0 lists must be non-empty");
    for (long n : n_list)
        if (n < 1) throw ConfigError("cells: every n must be >= 1");
    const long pmin = *std::min_element(p_list.begin(), p_list.end());
    if (pmin < 1) throw ConfigError("cells: every p must be >= 1");
    for (int p0 : p0_list)
        if (p0 < 1 || p0 > pmin) {
            std::ostringstream os;
            os << "cells: p0 = " << p0 << " must satisfy 1 <= p0 <= p for every p (smallest p is " << pmin << ")";
            throw ConfigError(os.str());
        }
    if (n_replications < 1) throw ConfigError("replications must be >= 1");
    for (double e : epsilon_list)
        if (!(e > 0.0 && e < 1.0)) throw ConfigError("epsilon values must lie in (0, 1)");
    if (design.kind == DesignKind::Correlated && !(std::abs(design.rho) < 1.0))
        throw ConfigError("design: correlated rho must satisfy |rho| < 1");
    if (lambda && !(*lambda >= 0.0)) throw ConfigError("overrides: lambda must be nonnegative");
    if (zeta && !(*zeta > 0.0)) throw ConfigError("overrides: zeta must be positive");
    if (!(B1 > 0.0)) throw ConfigError("overrides: B1 must be positive");
    sampler.validate();
}

std::vector<Cell> enumerate_cells(const ExperimentConfig& cfg) {
    std::vector<Cell> cells;
    int id = 0;
    for (long n : cfg.n_list)
        for (long p : cfg.p_list)
            for (int p0 : cfg.p0_list) cells.push_back({id++, n, p, p0});
    return cells;
}

Matrix generate_design(long n, long p, const DesignSpec& spec, Rng& rng) {
    if (n < 1 || p < 1) throw ConfigError("generate_design: n and p must be >= 1");
    Matrix X(n, p);
    switch (spec.kind) {
        case DesignKind::GaussianIid:
            for (long i = 0; i < n; ++i)
                for (long j = 0; j < p; ++j) X(i, j) = standard_normal(rng);
            for (long j = 0; j < p; ++j) X.col(j) *= std::sqrt(static_cast<double>(n)) / X.col(j).norm();
            break;
        case DesignKind::Correlated: {
            const double r = spec.rho;
            const double innov = std::sqrt(1.0 - r * r);
            for (long i = 0; i < n; ++i) {
                X(i, 0) = standard_normal(rng);
                for (long j = 1; j < p; ++j) X(i, j) = r * X(i, j - 1) + innov * standard_normal(rng);
            }
            break;
        }
        case DesignKind::Orthogonal: {
            if (p > n) throw ConfigError("generate_design: orthogonal design requires p <= n");
            Matrix G(n, p);
            for (long i = 0; i < n; ++i)
                for (long j = 0; j < p; ++j) G(i, j) = standard_normal(rng);
            Eigen::HouseholderQR<Matrix> qr(G);
            Matrix Q = qr.householderQ() * Matrix::Identity(n, p);
            // sign convention makes Q a deterministic function of G
            const Matrix R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
            for (long j = 0; j < p; ++j)
                if (R(j, j) < 0.0) Q.col(j) *= -1.0;
            X = std::sqrt(static_cast<double>(n)) * Q;
            break;
        }
    }
    return X;
}

Truth generate_truth(const Matrix& X, int p0, const TruthSpec& spec, Rng& rng) {
    const long p = X.cols();
    if (p0 < 1 || p0 > p) throw ConfigError("generate_truth: p0 must satisfy 1 <= p0 <= p");
    Truth t;
    if (spec.kind == TruthKind::ExactSparse) {
        std::vector<long> idx(static_cast<std::size_t>(p));
        std::iota(idx.begin(), idx.end(), 0L);
        // partial Fisher-Yates for a uniform p0-subset
        for (int k = 0; k < p0; ++k) {
            const auto r = static_cast<long>(k + static_cast<long>(rng() % static_cast<std::uint64_t>(p - k)));
            std::swap(idx[static_cast<std::size_t>(k)], idx[static_cast<std::size_t>(r)]);
        }
        Vector beta = Vector::Zero(p);
        for (int k = 0; k < p0; ++k)
            beta[idx[static_cast<std::size_t>(k)]] = (rng() & 1U) ? spec.amplitude : -spec.amplitude;
        t.theta0 = X * beta;
        t.beta0 = std::move(beta);
    } else {
        Vector dense(p);
        for (long j = 0; j < p; ++j) {
            const double sign = (rng() & 1U) ? 1.0 : -1.0;
            dense[j] = sign * spec.amplitude * std::pow(static_cast<double>(j + 1), -spec.decay);
        }
        t.theta0 = X * dense;
        for (long i = 0; i < X.rows(); ++i) {
            const double x = X(i, 0);
            t.theta0[i] += spec.bump * (x * x - 1.0) / std::sqrt(2.0);
        }
    }
    return t;
}

CellContext prepare_cell(const ExperimentConfig& cfg, const Cell& cell) {
    const Family fam = cfg.family.make();
    Rng design_rng = make_rng(cfg.seed, "design", static_cast<std::uint64_t>(cell.id));
    Matrix X = generate_design(cell.n, cell.p, cfg.design, design_rng);
    Rng truth_rng = make_rng(cfg.seed, "truth", static_cast<std::uint64_t>(cell.id));
    Truth truth = generate_truth(X, cell.p0, cfg.truth, truth_rng);
    NaturalParams theta0(truth.theta0, fam);
    const double xnorm = spectral_norm(X);

    PriorConfig prior;
    prior.p = cell.p;
    prior.zeta = cfg.zeta ? *cfg.zeta
                          : 1.0 / (static_cast<double>(cell.n) * static_cast<double>(cell.p) * xnorm);
    prior.B1 = cfg.B1;

    OracleResult oracle = truth.beta0 ? realizable_oracle(theta0, X, *truth.beta0, fam, prior)
                                      : best_subset_kl(theta0, X, cell.p0, fam, OracleOptions{.prior = prior});
    const double rate_x = cell.p0 * std::log(static_cast<double>(cell.n) * static_cast<double>(cell.p) * xnorm /
                                             static_cast<double>(cell.p0));
    return CellContext{cell,   fam,   std::move(X), std::move(truth), std::move(theta0),
                       xnorm,  rate_x, prior,       std::move(oracle)};
}

ReplicationRecord run_replication(const ExperimentConfig& cfg, const CellContext& ctx, int rep) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cid = static_cast<std::uint64_t>(ctx.cell.id);
    const auto r = static_cast<std::uint64_t>(rep);
    ReplicationRecord rec;
    rec.cell_id = ctx.cell.id;
    rec.rep = rep;
    rec.seed = derive_seed(cfg.seed, "replication", cid, r);

    Rng y_rng = make_rng(rec.seed, "response");
    Vector Y(ctx.X.rows());
    for (Eigen::Index i = 0; i < Y.size(); ++i) Y[i] = sample_response(ctx.family, ctx.theta0.theta()[i], y_rng);
    auto data = std::make_shared<const Dataset>(ctx.X, std::move(Y), ctx.family);

    GibbsConfig gc;
    gc.lambda = cfg.lambda.value_or(static_cast<double>(ctx.cell.n));
    gc.prior = ctx.prior;
    gc.data = data;
    const GibbsPosterior post(std::move(gc));
    SamplerConfig sc = cfg.sampler;
    sc.seed = derive_seed(rec.seed, "sampler");
    const std::vector<Chain> chains = run_chains_serial(post, sc);

    const KlRiskEstimate integrated = integrated_kl_risk(chains, ctx.theta0, *data);
    const Vector mean = posterior_mean(chains);
    rec.ewa_int_kl = integrated.value;
    rec.int_kl_se = integrated.standard_error;
    rec.ess = integrated.ess;
    rec.ewa_mean_kl = kl_risk(ctx.theta0, ctx.X, mean, ctx.family);
    rec.oracle_kl = ctx.oracle.kl_star;
    rec.excess_int = rec.ewa_int_kl - rec.oracle_kl;
    rec.excess_mean = rec.ewa_mean_kl - rec.oracle_kl;
    double acc = 0.0;
    for (const Chain& c : chains) {
        acc += c.accept_rate;
        rec.warnings.insert(rec.warnings.end(), c.warnings.begin(), c.warnings.end());
    }
    rec.accept_rate = acc / static_cast<double>(chains.size());
    rec.flagged = rec.excess_int < -3.0 * rec.int_kl_se;
    if (cfg.record_wall_time)
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

CellResult run_cell_serial(const ExperimentConfig& cfg, const Cell& cell) {
    CellResult res{prepare_cell(cfg, cell), {}};
    for (int r = 0; r < cfg.n_replications; ++r) res.records.push_back(run_replication(cfg, res.context, r));
    return res;
}

CellResult run_cell(const ExperimentConfig& cfg, const Cell& cell) {
    CellResult res{prepare_cell(cfg, cell), {}};
    res.records.resize(static_cast<std::size_t>(cfg.n_replications));
    std::vector<std::exception_ptr> errors(res.records.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (int r = 0; r < cfg.n_replications; ++r) {
        try {
            res.records[static_cast<std::size_t>(r)] = run_replication(cfg, res.context, r);
        } catch (...) {
            errors[static_cast<std::size_t>(r)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return res;
}

SuiteResult run_suite(const ExperimentConfig& cfg, const ProgressFn& progress) {
    cfg.validate();
    SuiteResult suite{cfg, {}};
    for (const Cell& cell : enumerate_cells(cfg)) {
        suite.cells.push_back(run_cell(cfg, cell));
        if (progress) progress(suite.cells.back());
    }
    return suite;
}

CellSummary summarize_cell(const CellResult& cell) {
    const auto& recs = cell.records;
    if (recs.empty()) throw ConfigError("summarize_cell: no replications");
    std::vector<double> ex, exm, ewa;
    CellSummary s;
    for (const auto& r : recs) {
        ex.push_back(r.excess_int);
        exm.push_back(r.excess_mean);
        ewa.push_back(r.ewa_int_kl);
        s.n_flagged += r.flagged ? 1 : 0;
    }
    const double rn = std::sqrt(static_cast<double>(recs.size()));
    s.cell = cell.context.cell;
    s.x_norm = cell.context.x_norm;
    s.rate_x = cell.context.rate_x;
    s.n_replications = static_cast<int>(recs.size());
    s.mean_excess_int = stats::mean(ex);
    s.se_excess_int = std::sqrt(stats::variance(ex)) / rn;
    s.mean_excess_mean = stats::mean(exm);
    s.mean_ewa_int_kl = stats::mean(ewa);
    s.se_ewa_int_kl = std::sqrt(stats::variance(ewa)) / rn;
    s.oracle_kl = cell.context.oracle.kl_star;
    if (s.oracle_kl > 0.0) {
        s.kl_ratio = s.mean_ewa_int_kl / s.oracle_kl;
        s.kl_ratio_se = s.se_ewa_int_kl / s.oracle_kl;
    } else {
        s.kl_ratio = std::numeric_limits<double>::quiet_NaN();
        s.kl_ratio_se = std::numeric_limits<double>::quiet_NaN();
    }
    s.q50 = stats::quantile(ex, 0.5);
    s.q80 = stats::quantile(ex, 0.8);
    s.q90 = stats::quantile(ex, 0.9);
    s.q95 = stats::quantile(ex, 0.95);
    return s;
}

RateStudyResult fit_rate_law(std::vector<CellSummary> cells) {
    if (cells.size() < 4) {
        std::ostringstream os;
        os << "rate_study needs at least 4 cells, got " << cells.size();
        throw ConfigError(os.str());
    }
    std::vector<double> x, y;
    for (const auto& c : cells) {
        x.push_back(c.rate_x);
        y.push_back(c.mean_excess_int);
    }
    RateStudyResult res;
    res.fit = stats::ols(x, y);
    res.cells = std::move(cells);
    return res;
}

RateStudyResult rate_study(const SuiteResult& suite) {
    std::vector<CellSummary> cells;
    for (const auto& c : suite.cells) cells.push_back(summarize_cell(c));
    return fit_rate_law(std::move(cells));
}

RateStudyResult rate_study(const ExperimentConfig& cfg) {
    if (enumerate_cells(cfg).size() < 4) throw ConfigError("rate_study needs at least 4 cells");
    return rate_study(run_suite(cfg));
}

TailCheck check_tail_growth(const std::string& scope, const std::vector<double>& log_inv_eps,
                            const std::vector<double>& quantiles) {
    if (log_inv_eps.size() != quantiles.size() || quantiles.size() < 2)
        throw DimensionError("check_tail_growth: need at least two matching points");
    // sort by log(1/eps)
    std::vector<std::size_t> order(quantiles.size());
    std::iota(order.begin(), order.end(), 0U);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return log_inv_eps[a] < log_inv_eps[b]; });
    std::vector<double> L, q;
    for (auto i : order) {
        L.push_back(log_inv_eps[i]);
        q.push_back(quantiles[i]);
    }
    TailCheck chk;
    chk.scope = scope;
    const auto iso = stats::isotonic_increasing(q);
    double scale = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        chk.monotone_residual = std::max(chk.monotone_residual, std::abs(q[i] - iso[i]));
        scale = std::max(scale, std::abs(q[i]));
    }
    std::vector<double> inc;
    for (std::size_t i = 0; i + 1 < q.size(); ++i) inc.push_back((q[i + 1] - q[i]) / (L[i + 1] - L[i]));
    const auto dec = stats::isotonic_decreasing(inc);
    double mean_inc = 0.0;
    for (double d : inc) mean_inc += std::abs(d);
    mean_inc /= static_cast<double>(inc.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < inc.size(); ++i) worst = std::max(worst, inc[i] - dec[i]);
    chk.superlinear_residual = mean_inc > 0.0 ? worst / mean_inc : 0.0;
    chk.slope = stats::ols(L, q).slope;
    chk.pass = chk.monotone_residual <= 1e-12 * std::max(1.0, scale) &&
               chk.superlinear_residual <= kSuperlinearTolerance;
    return chk;
}

TailStudyResult tail_study(const SuiteResult& suite, const std::vector<double>& epsilons) {
    if (epsilons.size() < 2) throw ConfigError("tail_study needs at least two epsilon levels");
    TailStudyResult res;
    std::vector<double> pooled;
    std::vector<double> L;
    for (double e : epsilons) L.push_back(std::log(1.0 / e));
    for (const auto& c : suite.cells) {
        if (c.records.size() < 50) {
            std::ostringstream os;
            os << "tail_study needs at least 50 replications per cell; cell " << c.context.cell.id << " has "
               << c.records.size();
            throw ConfigError(os.str());
        }
        std::vector<double> ex;
        for (const auto& r : c.records) {
            ex.push_back(r.excess_int);
            pooled.push_back(r.excess_int / c.context.rate_x);
        }
        const std::string scope = std::to_string(c.context.cell.id);
        std::vector<double> qs;
        for (std::size_t k = 0; k < epsilons.size(); ++k) {
            const double q = stats::quantile(ex, 1.0 - epsilons[k]);
            qs.push_back(q);
            res.rows.push_back({scope, epsilons[k], L[k], q, c.context.rate_x, c.context.rate_x + L[k]});
        }
        res.checks.push_back(check_tail_growth(scope, L, qs));
    }
    std::vector<double> qs;
    for (std::size_t k = 0; k < epsilons.size(); ++k) {
        const double q = stats::quantile(pooled, 1.0 - epsilons[k]);
        qs.push_back(q);
        res.rows.push_back({"pooled", epsilons[k], L[k], q, 1.0, 1.0 + L[k]});
    }
    res.pooled = check_tail_growth("pooled", L, qs);
    return res;
}

TailStudyResult tail_study(const ExperimentConfig& cfg) {
    if (cfg.n_replications < 50) throw ConfigError("tail_study needs at least 50 replications per cell");
    return tail_study(run_suite(cfg), cfg.epsilon_list);
}

}  // namespace ewa

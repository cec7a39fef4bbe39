#include "ewa/oracle.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>

#include "ewa/error.hpp"

namespace ewa {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SubsetFit {
    SubsetRecord record;
    Vector beta_s;
};

// KL(theta0 || X_S b) and its Newton pieces, on the restricted problem.
SubsetFit fit_subset(const NaturalParams& theta0, const Matrix& X, const Family& fam, const std::vector<int>& subset,
                     const OracleOptions& opts) {
    const Eigen::Index n = X.rows();
    const auto k = static_cast<Eigen::Index>(subset.size());
    Matrix Xs(n, k);
    for (Eigen::Index c = 0; c < k; ++c) Xs.col(c) = X.col(subset[static_cast<std::size_t>(c)]);

    const FamilyKind kind = fam.kind();
    const Vector& t0 = theta0.theta();
    Vector mean0(n);
    double const0 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        mean0[i] = detail::mean(kind, t0[i]);
        const0 += mean0[i] * t0[i] - detail::cumulant(kind, t0[i]);
    }
    const double inv_a = 1.0 / fam.scale();
    auto kl_at = [&](const Vector& theta) {
        if (!in_domain(fam, theta)) return kInf;
        double s = const0;
        for (Eigen::Index i = 0; i < n; ++i) s += detail::cumulant(kind, theta[i]) - mean0[i] * theta[i];
        return s * inv_a;
    };

    SubsetFit out;
    out.record.subset = subset;
    Vector b = Vector::Zero(k);
    Vector theta = Vector::Zero(n);
    double kl = kl_at(theta);
    if (!std::isfinite(kl)) {
        out.record.kl = kInf;
        out.beta_s = b;
        return out;
    }
    int it = 0;
    for (; it < opts.max_newton; ++it) {
        Vector diff(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            diff[i] = detail::mean(kind, theta[i]) - mean0[i];
            w[i] = detail::variance_rate(kind, theta[i]);
        }
        const Vector grad = inv_a * (Xs.transpose() * diff);
        if (grad.norm() <= opts.grad_tol) {
            out.record.converged = true;
            break;
        }
        const Matrix hess = inv_a * (Xs.transpose() * w.asDiagonal() * Xs);
        Vector step = hess.ldlt().solve(-grad);
        if (!step.allFinite()) step = -grad;
        double t = 1.0;
        bool moved = false;
        for (int h = 0; h < 60; ++h, t *= 0.5) {
            const Vector cand = b + t * step;
            const Vector tc = Xs * cand;
            const double kc = kl_at(tc);
            if (kc <= kl) {
                moved = cand != b;
                b = cand;
                theta = tc;
                kl = kc;
                break;
            }
        }
        if (!moved) break;
    }
    if (!out.record.converged) {
        Vector diff(n);
        for (Eigen::Index i = 0; i < n; ++i) diff[i] = detail::mean(kind, theta[i]) - mean0[i];
        out.record.converged = (inv_a * (Xs.transpose() * diff)).norm() <= opts.grad_tol;
    }
    out.record.kl = kl;
    out.record.newton_iters = it;
    out.beta_s = b;
    return out;
}

std::vector<int> enumerate_subsets(int p, int p0, std::uint64_t count) {
    std::vector<int> flat;
    flat.reserve(static_cast<std::size_t>(count) * static_cast<std::size_t>(p0));
    std::vector<int> c(static_cast<std::size_t>(p0));
    for (int i = 0; i < p0; ++i) c[static_cast<std::size_t>(i)] = i;
    while (true) {
        flat.insert(flat.end(), c.begin(), c.end());
        int i = p0 - 1;
        while (i >= 0 && c[static_cast<std::size_t>(i)] == p - p0 + i) --i;
        if (i < 0) break;
        ++c[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < p0; ++j) c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
    }
    return flat;
}

void check_oracle_args(const NaturalParams& theta0, const Matrix& X, int p0, const OracleOptions& opts,
                       std::uint64_t& count) {
    const auto p = static_cast<int>(X.cols());
    if (theta0.size() != X.rows()) throw DimensionError("best_subset_kl: theta0 length differs from design rows");
    if (p0 < 1 || p0 > p) {
        std::ostringstream os;
        os << "best_subset_kl: p0 = " << p0 << " must satisfy 1 <= p0 <= p = " << p;
        throw ConfigError(os.str());
    }
    count = binomial(p, p0);
    if (count > opts.budget) {
        std::ostringstream os;
        os << "best_subset_kl: C(" << p << ", " << p0 << ") subsets exceeds the enumeration budget of "
           << opts.budget << "; use a smaller p or p0";
        throw ConfigError(os.str());
    }
}

void attach_warning(OracleResult& res, const std::optional<PriorConfig>& prior) {
    if (!prior) return;
    const double radius = prior->B1 - 2.0 * static_cast<double>(prior->p) * prior->zeta;
    if (res.beta_star.norm() > radius) {
        std::ostringstream os;
        os << "||beta*|| = " << res.beta_star.norm() << " exceeds B1 - 2 p zeta = " << radius;
        res.warning = os.str();
    }
}

OracleResult reduce(std::vector<SubsetFit>& fits, Eigen::Index p, const std::optional<PriorConfig>& prior) {
    OracleResult res;
    std::size_t best = fits.size();
    for (std::size_t i = 0; i < fits.size(); ++i) {
        const auto& r = fits[i].record;
        if (!r.converged) continue;
        if (best == fits.size() || r.kl < fits[best].record.kl) best = i;
    }
    if (best == fits.size()) throw ConvergenceError("best_subset_kl: Newton failed on every subset", 0);
    res.kl_star = fits[best].record.kl;
    res.subset_chosen = fits[best].record.subset;
    res.beta_star = Vector::Zero(p);
    for (std::size_t c = 0; c < res.subset_chosen.size(); ++c)
        res.beta_star[res.subset_chosen[c]] = fits[best].beta_s[static_cast<Eigen::Index>(c)];
    res.per_subset_records.reserve(fits.size());
    for (auto& f : fits) res.per_subset_records.push_back(std::move(f.record));
    attach_warning(res, prior);
    return res;
}

}  // namespace

std::uint64_t binomial(int p, int p0) {
    if (p0 < 0 || p0 > p) return 0;
    p0 = std::min(p0, p - p0);
    unsigned __int128 r = 1;
    for (int i = 1; i <= p0; ++i) {
        r = r * static_cast<unsigned>(p - p0 + i) / static_cast<unsigned>(i);
        if (r > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
    }
    return static_cast<std::uint64_t>(r);
}

OracleResult best_subset_kl_serial(const NaturalParams& theta0, const Matrix& X, int p0, const Family& family,
                                   const OracleOptions& opts) {
    std::uint64_t count = 0;
    check_oracle_args(theta0, X, p0, opts, count);
    const auto flat = enumerate_subsets(static_cast<int>(X.cols()), p0, count);
    std::vector<SubsetFit> fits;
    fits.reserve(static_cast<std::size_t>(count));
    for (std::uint64_t s = 0; s < count; ++s) {
        const auto* first = flat.data() + s * static_cast<std::uint64_t>(p0);
        fits.push_back(fit_subset(theta0, X, family, std::vector<int>(first, first + p0), opts));
    }
    return reduce(fits, X.cols(), opts.prior);
}

OracleResult best_subset_kl(const NaturalParams& theta0, const Matrix& X, int p0, const Family& family,
                            const OracleOptions& opts) {
    std::uint64_t count = 0;
    check_oracle_args(theta0, X, p0, opts, count);
    const auto flat = enumerate_subsets(static_cast<int>(X.cols()), p0, count);
    std::vector<SubsetFit> fits(static_cast<std::size_t>(count));
    std::vector<std::exception_ptr> errors(fits.size());
    const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 64)
    for (long long s = 0; s < n; ++s) {
        try {
            const auto* first = flat.data() + s * p0;
            fits[static_cast<std::size_t>(s)] = fit_subset(theta0, X, family, std::vector<int>(first, first + p0), opts);
        } catch (...) {
            errors[static_cast<std::size_t>(s)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return reduce(fits, X.cols(), opts.prior);
}

OracleResult realizable_oracle(const NaturalParams& theta0, const Matrix& X, const Vector& beta0,
                               const Family& family, const std::optional<PriorConfig>& prior) {
    OracleResult res;
    res.beta_star = beta0;
    res.kl_star = kl_risk(theta0, X, beta0, family);
    for (Eigen::Index j = 0; j < beta0.size(); ++j)
        if (beta0[j] != 0.0) res.subset_chosen.push_back(static_cast<int>(j));
    res.per_subset_records.push_back({res.subset_chosen, true, res.kl_star, 0});
    attach_warning(res, prior);
    return res;
}

Vector GridPosterior::node(std::size_t flat_index) const {
    Vector v(static_cast<Eigen::Index>(axes.size()));
    for (std::size_t k = axes.size(); k-- > 0;) {
        const auto c = static_cast<std::size_t>(axes[k].count);
        v[static_cast<Eigen::Index>(k)] = axes[k].node(static_cast<int>(flat_index % c));
        flat_index /= c;
    }
    return v;
}

std::optional<std::size_t> GridPosterior::nearest(const Vector& beta) const {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < axes.size(); ++k) {
        const GridAxis& ax = axes[k];
        const double h = ax.spacing();
        const double x = beta[static_cast<Eigen::Index>(k)];
        long i = 0;
        if (h > 0.0) {
            const double r = (x - ax.lo) / h;
            if (r < -0.5 || r >= ax.count - 0.5) return std::nullopt;
            i = std::lround(r);
            i = std::clamp(i, 0L, static_cast<long>(ax.count - 1));
        }
        idx = idx * static_cast<std::size_t>(ax.count) + static_cast<std::size_t>(i);
    }
    return idx;
}

namespace {

GridPosterior grid_prepare(const GibbsPosterior& post, std::span<const GridAxis> axes) {
    if (post.dim() > 3) throw ConfigError("grid_posterior supports p <= 3");
    if (static_cast<Eigen::Index>(axes.size()) != post.dim())
        throw DimensionError("grid_posterior: one axis per coefficient required");
    std::size_t total = 1;
    for (const GridAxis& ax : axes) {
        if (ax.count < 1 || !(ax.hi >= ax.lo)) throw ConfigError("grid axis needs count >= 1 and lo <= hi");
        total *= static_cast<std::size_t>(ax.count);
        if (total > 2'000'000) throw ConfigError("grid_posterior: more than 2e6 nodes");
    }
    GridPosterior g;
    g.axes.assign(axes.begin(), axes.end());
    g.masses.assign(total, 0.0);
    return g;
}

void grid_finish(GridPosterior& g, const GibbsPosterior& post, const NaturalParams* theta0) {
    const double mx = *std::max_element(g.masses.begin(), g.masses.end());
    if (!std::isfinite(mx)) throw SamplingError("grid_posterior: every grid node has zero posterior density");
    double z = 0.0;
    for (double& m : g.masses) {
        m = std::exp(m - mx);
        z += m;
    }
    const Eigen::Index p = post.dim();
    g.mean = Vector::Zero(p);
    double kl = 0.0;
    std::optional<KlRiskEvaluator> eval;
    if (theta0) eval.emplace(*theta0, post.config().data->X(), post.config().data->family());
    for (std::size_t i = 0; i < g.masses.size(); ++i) {
        g.masses[i] /= z;
        if (g.masses[i] == 0.0) continue;
        const Vector b = g.node(i);
        g.mean += g.masses[i] * b;
        if (eval) kl += g.masses[i] * (*eval)(b);
    }
    if (eval) g.kl_risk = kl;
}

}  // namespace

GridPosterior grid_posterior_serial(const GibbsPosterior& post, std::span<const GridAxis> axes,
                                    const NaturalParams* theta0) {
    GridPosterior g = grid_prepare(post, axes);
    for (std::size_t i = 0; i < g.masses.size(); ++i) g.masses[i] = post.log_density(g.node(i));
    grid_finish(g, post, theta0);
    return g;
}

GridPosterior grid_posterior(const GibbsPosterior& post, std::span<const GridAxis> axes,
                             const NaturalParams* theta0) {
    GridPosterior g = grid_prepare(post, axes);
    const auto n = static_cast<long long>(g.masses.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i)
        g.masses[static_cast<std::size_t>(i)] = post.log_density(g.node(static_cast<std::size_t>(i)));
    grid_finish(g, post, theta0);
    return g;
}

double grid_tv_distance(const GridPosterior& grid, std::span<const Chain> chains) {
    std::vector<double> hist(grid.size(), 0.0);
    double total = 0.0, outside = 0.0;
    for (const Chain& c : chains)
        for (const Vector& d : c.draws) {
            total += 1.0;
            if (auto i = grid.nearest(d))
                hist[*i] += 1.0;
            else
                outside += 1.0;
        }
    if (total == 0.0) throw SamplingError("grid_tv_distance: no draws");
    double s = outside / total;
    for (std::size_t i = 0; i < hist.size(); ++i) s += std::abs(hist[i] / total - grid.masses[i]);
    return 0.5 * s;
}

double DvCheckResult::worst() const { return std::max(std::abs(analytic_residual), worst_violation); }

namespace {

double log_sum_exp(std::span<const double> v) {
    const double mx = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

}  // namespace

DvCheckResult dv_gibbs_check(std::span<const double> log_weights, std::span<const double> h, double lambda,
                             std::uint64_t seed, int n_perturbations) {
    const std::size_t m = log_weights.size();
    if (m < 2 || h.size() != m) throw DimensionError("dv_gibbs_check: need equal lengths >= 2");
    for (std::size_t i = 0; i < m; ++i)
        if (!std::isfinite(log_weights[i]) || !std::isfinite(h[i]))
            throw DomainError("dv_gibbs_check: non-finite weight or function value");
    if (!std::isfinite(lambda)) throw DomainError("dv_gibbs_check: non-finite lambda");

    const double lz = log_sum_exp(log_weights);
    std::vector<double> log_pi(m), tilted(m);
    for (std::size_t i = 0; i < m; ++i) {
        log_pi[i] = log_weights[i] - lz;
        tilted[i] = log_pi[i] + lambda * h[i];
    }
    DvCheckResult res;
    res.log_moment = log_sum_exp(tilted);

    // objective lambda <rho, h> - KL(rho || pi), rho given by its logs
    auto objective = [&](const std::vector<double>& log_rho) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (log_rho[i] == -kInf) continue;
            const double r = std::exp(log_rho[i]);
            s += r * (lambda * h[i] - log_rho[i] + log_pi[i]);
        }
        return s;
    };
    auto normalize = [&](std::vector<double>& lr) {
        const double c = log_sum_exp(lr);
        for (double& x : lr) x -= c;
    };

    std::vector<double> gibbs(tilted);
    normalize(gibbs);
    res.analytic_residual = res.log_moment - objective(gibbs);

    Rng rng = make_rng(seed, "dv");
    std::vector<double> lr(m);
    double worst = -kInf;
    for (int t = 0; t < n_perturbations; ++t) {
        switch (t % 3) {
            case 0: {  // multiplicative perturbation of the Gibbs measure
                const double s = std::exp(std::log(1e-4) + uniform01(rng) * std::log(3.0 / 1e-4));
                for (std::size_t i = 0; i < m; ++i) lr[i] = gibbs[i] + s * standard_normal(rng);
                break;
            }
            case 1:  // flat Dirichlet
                for (std::size_t i = 0; i < m; ++i) lr[i] = std::log(-std::log(uniform01(rng)));
                break;
            default: {  // sparse: mass on a random subset
                for (std::size_t i = 0; i < m; ++i) lr[i] = uniform01(rng) < 0.5 ? -kInf : standard_normal(rng);
                lr[static_cast<std::size_t>(rng() % m)] = 0.0;
                break;
            }
        }
        normalize(lr);
        worst = std::max(worst, objective(lr) - res.log_moment);
    }
    res.worst_violation = worst;
    return res;
}

}  // namespace ewa

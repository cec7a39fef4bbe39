#include "ewa/validate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>

#include <Eigen/QR>

#include "ewa/error.hpp"
#include "ewa/expfam.hpp"
#include "ewa/gibbs.hpp"
#include "ewa/glm.hpp"
#include "ewa/oracle.hpp"
#include "ewa/prior.hpp"
#include "ewa/rng.hpp"
#include "ewa/sampler.hpp"
#include "ewa/stats.hpp"

namespace ewa {

namespace {

PropertyResult timed(const std::string& name, double threshold,
                     const std::function<void(PropertyResult&)>& body) {
    PropertyResult r;
    r.name = name;
    r.threshold = threshold;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.passed = false;
        r.value = std::numeric_limits<double>::quiet_NaN();
        r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

double rel_err(double approx, double exact, double floor) {
    return std::abs(approx - exact) / std::max(std::abs(exact), floor);
}

SamplerConfig sampling_config(const ValidateOptions& opts) {
    SamplerConfig s;
    s.step_size = opts.step_size;
    s.adapt = opts.adapt;
    s.max_halvings = opts.max_halvings;
    return s;
}

// Least-squares projection: min over |S| = p0 of ||(I - P_S) theta0||^2 / (2a).
double projection_oracle(const Vector& theta0, const Matrix& X, int p0, double a) {
    const int p = static_cast<int>(X.cols());
    std::vector<int> s(p0);
    for (int i = 0; i < p0; ++i) s[i] = i;
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        Matrix Xs(X.rows(), p0);
        for (int i = 0; i < p0; ++i) Xs.col(i) = X.col(s[i]);
        const Eigen::HouseholderQR<Matrix> qr(Xs);
        const Matrix Q = qr.householderQ() * Matrix::Identity(X.rows(), p0);
        const Vector resid = theta0 - Q * (Q.transpose() * theta0);
        best = std::min(best, 0.5 * resid.squaredNorm() / a);
        int k = p0 - 1;
        while (k >= 0 && s[k] == p - p0 + k) --k;
        if (k < 0) break;
        ++s[k];
        for (int i = k + 1; i < p0; ++i) s[i] = s[i - 1] + 1;
    }
    return best;
}

}  // namespace

PropertyResult check_expfam_derivatives(const ValidateOptions& opts) {
    // Worst ratio of the observed relative error to its tolerance.
    return timed("expfam_derivatives", 1.0, [&](PropertyResult& r) {
        const double tol1 = 1e-6, tol2 = 1e-5, h = 1e-3;
        Rng rng = make_rng(opts.seed, "validate-expfam");
        double worst1 = 0.0, worst2 = 0.0;
        std::ostringstream detail;
        for (const Family& fam : {Family::gaussian(), Family::bernoulli(), Family::poisson()}) {
            const Interval& iv = fam.theta_interval();
            const double lo = std::max(iv.lo, -10.0), hi = std::min(iv.hi, 10.0);
            double w1 = 0.0, w2 = 0.0;
            for (int i = 0; i < 1000; ++i) {
                const double t = lo + (hi - lo) * uniform01(rng);
                const double d1 = (cumulant(fam, std::min(t + h, iv.hi)) - cumulant(fam, std::max(t - h, iv.lo))) /
                                  (std::min(t + h, iv.hi) - std::max(t - h, iv.lo));
                const double d2 = (mean(fam, std::min(t + h, iv.hi)) - mean(fam, std::max(t - h, iv.lo))) /
                                  (std::min(t + h, iv.hi) - std::max(t - h, iv.lo));
                // one-sided near an endpoint loses an order; keep central points only
                if (t + h > iv.hi || t - h < iv.lo) continue;
                w1 = std::max(w1, rel_err(d1, mean(fam, t), 1e-8));
                w2 = std::max(w2, rel_err(d2, variance_rate(fam, t), 1e-8));
            }
            detail << to_string(fam.kind()) << ": b' " << w1 << ", b'' " << w2 << "; ";
            worst1 = std::max(worst1, w1);
            worst2 = std::max(worst2, w2);
        }
        r.value = std::max(worst1 / tol1, worst2 / tol2);
        r.passed = r.value <= 1.0;
        r.detail = detail.str();
    });
}

PropertyResult check_gaussian_closed_form(const ValidateOptions& opts) {
    return timed("gaussian_closed_form", 1e-10, [&](PropertyResult& r) {
        Rng rng = make_rng(opts.seed, "validate-closed-form");
        double worst = 0.0;
        for (int k = 0; k < 10000; ++k) {
            const double sigma2 = 0.25 + 3.75 * uniform01(rng);
            const Family fam = Family::gaussian(sigma2);
            const int n = 1 + static_cast<int>(rng() % 20);
            Vector t0(n), t1(n);
            for (int i = 0; i < n; ++i) {
                t0[i] = 3.0 * standard_normal(rng);
                t1[i] = 3.0 * standard_normal(rng);
            }
            const double kl = kl_divergence(NaturalParams(t0, fam), NaturalParams(t1, fam), fam);
            const double closed = 0.5 * (t0 - t1).squaredNorm() / sigma2;
            double generic = 0.0;
            for (int i = 0; i < n; ++i)
                generic += detail::mean(FamilyKind::Gaussian, t0[i]) * (t0[i] - t1[i]) -
                           detail::cumulant(FamilyKind::Gaussian, t0[i]) + detail::cumulant(FamilyKind::Gaussian, t1[i]);
            generic /= sigma2;
            worst = std::max({worst, rel_err(kl, closed, 1.0), rel_err(generic, closed, 1.0)});
        }
        r.value = worst;
        r.passed = worst <= r.threshold;
        r.detail = "10000 pairs, sup relative error";
    });
}

PropertyResult check_bernoulli_curvature(const ValidateOptions&) {
    return timed("bernoulli_curvature", 1e-9, [&](PropertyResult& r) {
        const Family fam = Family::bernoulli();
        auto f = [&](double t) { return variance_rate(fam, t); };
        // coarse scan, then golden section around the best node
        const int m = 10001;
        double best_t = -50.0, best = f(-50.0);
        for (int i = 1; i < m; ++i) {
            const double t = -50.0 + 100.0 * i / (m - 1);
            if (f(t) > best) best = f(t), best_t = t;
        }
        double a = best_t - 0.01, b = best_t + 0.01;
        const double g = (std::sqrt(5.0) - 1.0) / 2.0;
        for (int it = 0; it < 200; ++it) {
            const double c = b - g * (b - a), d = a + g * (b - a);
            if (f(c) > f(d)) b = d; else a = c;
        }
        const double umax = std::max(best, f(0.5 * (a + b)));
        r.value = std::max(std::abs(umax - 0.25), std::abs(fam.curvature_upper() - 0.25));
        r.passed = r.value <= r.threshold;
        std::ostringstream os;
        os << "max b'' = " << umax << " at theta = " << 0.5 * (a + b) << "; U = " << fam.curvature_upper();
        r.detail = os.str();
    });
}

PropertyResult check_dv_variational(const ValidateOptions& opts) {
    // value: worst of residual / 1e-12 and violation / 1e-10
    return timed("dv_variational", 1.0, [&](PropertyResult& r) {
        Rng rng = make_rng(opts.seed, "validate-dv");
        double worst_res = 0.0, worst_viol = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < 100; ++k) {
            const int m = 2 + static_cast<int>(rng() % 50);
            std::vector<double> lw(m), h(m);
            for (int i = 0; i < m; ++i) {
                lw[i] = 2.0 * standard_normal(rng);
                h[i] = standard_normal(rng);
            }
            const double lambda = 0.1 + 4.9 * uniform01(rng);
            const DvCheckResult dv = dv_gibbs_check(lw, h, lambda, derive_seed(opts.seed, "dv-space", k), 1000);
            worst_res = std::max(worst_res, std::abs(dv.analytic_residual));
            worst_viol = std::max(worst_viol, dv.worst_violation);
        }
        r.value = std::max(worst_res / 1e-12, worst_viol / 1e-10);
        r.passed = r.value <= 1.0;
        std::ostringstream os;
        os << "100 spaces; max |residual| " << worst_res << ", max violation " << worst_viol;
        r.detail = os.str();
    });
}

PropertyResult check_posterior_gradients(const ValidateOptions& opts) {
    return timed("posterior_gradients", 1e-6, [&](PropertyResult& r) {
        Rng rng = make_rng(opts.seed, "validate-gradients");
        double worst = 0.0;
        std::ostringstream detail;
        for (const Family& fam : {Family::gaussian(2.0), Family::bernoulli(), Family::poisson()}) {
            double w = 0.0;
            for (int rep = 0; rep < 20; ++rep) {
                const int n = 30, p = 4;
                Matrix X(n, p);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < p; ++j) X(i, j) = 0.5 * standard_normal(rng);
                Vector beta(p);
                for (int j = 0; j < p; ++j) beta[j] = 0.4 * standard_normal(rng);
                Vector Y(n);
                const Vector theta = X * beta;
                for (int i = 0; i < n; ++i) Y[i] = sample_response(fam, std::min(theta[i], 3.0), rng);
                GibbsConfig gc;
                gc.lambda = n;
                gc.prior = {0.1, 100.0, p};
                gc.data = std::make_shared<const Dataset>(X, Y, fam);
                const Vector g = log_posterior_gradient(beta, gc);
                const double eps = 1e-5;
                Vector fd(p);
                for (int j = 0; j < p; ++j) {
                    Vector bp = beta, bm = beta;
                    bp[j] += eps;
                    bm[j] -= eps;
                    fd[j] = (log_posterior_unnormalized(bp, gc) - log_posterior_unnormalized(bm, gc)) / (2 * eps);
                }
                w = std::max(w, (fd - g).lpNorm<Eigen::Infinity>() / std::max(1.0, g.lpNorm<Eigen::Infinity>()));
            }
            detail << to_string(fam.kind()) << " " << w << "; ";
            worst = std::max(worst, w);
        }
        r.value = worst;
        r.passed = worst <= r.threshold;
        r.detail = detail.str();
    });
}

PropertyResult check_grid_tv(const ValidateOptions& opts) {
    return timed("grid_tv", 0.05, [&](PropertyResult& r) {
        const int n = 20, p = 2;
        Rng rng = make_rng(opts.seed, "validate-grid-data");
        Matrix X(n, p);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p; ++j) X(i, j) = standard_normal(rng);
        const Vector beta0 = Vector::Map(std::vector<double>{0.8, 0.0}.data(), p);
        const Family fam = Family::gaussian();
        Vector Y(n);
        const Vector theta = X * beta0;
        for (int i = 0; i < n; ++i) Y[i] = sample_response(fam, theta[i], rng);

        GibbsConfig gc;
        gc.lambda = n;
        gc.prior = {0.3, 100.0, p};
        gc.data = std::make_shared<const Dataset>(X, Y, fam);
        const GibbsPosterior post(gc);

        // +-20 likelihood standard deviations around the mode keeps the
        // cells coarse enough for 1e5 draws to resolve the histogram
        const Vector mode = find_posterior_mode(post).beta;
        const Matrix cov = (X.transpose() * X).inverse();
        std::vector<GridAxis> axes(p);
        for (int j = 0; j < p; ++j) {
            const double sd = std::sqrt(cov(j, j));
            axes[j] = {mode[j] - 20.0 * sd, mode[j] + 20.0 * sd, 101};
        }
        const GridPosterior grid = grid_posterior(post, axes);

        SamplerConfig sc = sampling_config(opts);
        sc.n_chains = 4;
        sc.thin = 10;
        sc.burn_in = 5000;
        sc.n_iters = 5000 + 25000 * sc.thin;
        sc.seed = derive_seed(opts.seed, "validate-grid-chains");
        std::ostringstream detail;
        double worst = 0.0;
        for (Parametrization par : {Parametrization::Asinh, Parametrization::Direct}) {
            sc.parametrization = par;
            const auto chains = run_chains(post, sc);
            const double tv = grid_tv_distance(grid, chains);
            double acc = 0.0;
            for (const auto& c : chains) acc += c.accept_rate / chains.size();
            detail << to_string(par) << ": tv " << tv << ", accept " << acc << "; ";
            worst = std::max(worst, tv);
        }
        r.value = worst;
        r.passed = worst <= r.threshold;
        r.detail = detail.str();
    });
}

PropertyResult check_prior_ks(const ValidateOptions& opts) {
    // value: KS p-value, passes when >= 0.01
    return timed("prior_ks", 0.01, [&](PropertyResult& r) {
        const double zeta = 1.0;
        GibbsConfig gc;
        gc.lambda = 0.0;
        gc.prior = {zeta, 1e6, 1};
        gc.data = std::make_shared<const Dataset>(Matrix::Ones(1, 1), Vector::Zero(1), Family::gaussian());
        const GibbsPosterior post(gc);

        SamplerConfig sc = sampling_config(opts);
        sc.n_chains = 1;
        sc.thin = 20;
        sc.burn_in = 5000;
        sc.n_iters = 5000 + 10000 * sc.thin;
        sc.init = InitKind::Zero;
        sc.seed = derive_seed(opts.seed, "validate-prior-chain");
        const Chain chain = run_chain(post, sc);
        std::vector<double> xs;
        xs.reserve(chain.draws.size());
        for (const auto& d : chain.draws) xs.push_back(d[0]);
        const double s = prior_t3_scale(zeta);
        const double d = stats::ks_statistic(xs, [s](double x) { return stats::student_t3_cdf(x / s); });
        r.value = stats::ks_pvalue(d, static_cast<long>(xs.size()));
        r.passed = r.value >= r.threshold;
        std::ostringstream os;
        os << xs.size() << " draws, D = " << d << ", accept " << chain.accept_rate;
        r.detail = os.str();
    });
}

PropertyResult check_oracle_projection(const ValidateOptions& opts) {
    return timed("oracle_projection", 1e-8, [&](PropertyResult& r) {
        Rng rng = make_rng(opts.seed, "validate-oracle");
        double worst = 0.0;
        int monotone_failures = 0;
        for (int k = 0; k < 50; ++k) {
            const int p = 3 + static_cast<int>(rng() % 8);
            const int n = p + 5 + static_cast<int>(rng() % 30);
            const double a = 0.5 + uniform01(rng);
            const Family fam = Family::gaussian(a);
            Matrix X(n, p);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < p; ++j) X(i, j) = standard_normal(rng);
            Vector t0(n);
            for (int i = 0; i < n; ++i) t0[i] = 2.0 * standard_normal(rng);
            const NaturalParams theta0(t0, fam);
            double prev = std::numeric_limits<double>::infinity();
            for (int p0 = 1; p0 <= std::min(3, p); ++p0) {
                const OracleResult res = best_subset_kl(theta0, X, p0, fam);
                const double ref = projection_oracle(t0, X, p0, a);
                worst = std::max(worst, rel_err(res.kl_star, ref, 1.0));
                if (res.kl_star > prev + 1e-12 * std::max(1.0, prev)) ++monotone_failures;
                prev = res.kl_star;
            }
        }
        r.value = worst;
        r.passed = worst <= r.threshold && monotone_failures == 0;
        std::ostringstream os;
        os << "50 instances, sup relative error " << worst << ", monotonicity failures " << monotone_failures;
        r.detail = os.str();
    });
}

ValidationReport run_validation(const ValidateOptions& opts) {
    ValidationReport rep;
    rep.properties.push_back(check_expfam_derivatives(opts));
    rep.properties.push_back(check_gaussian_closed_form(opts));
    rep.properties.push_back(check_bernoulli_curvature(opts));
    rep.properties.push_back(check_dv_variational(opts));
    rep.properties.push_back(check_posterior_gradients(opts));
    rep.properties.push_back(check_grid_tv(opts));
    rep.properties.push_back(check_prior_ks(opts));
    rep.properties.push_back(check_oracle_projection(opts));
    return rep;
}

bool ValidationReport::all_passed() const {
    return std::all_of(properties.begin(), properties.end(), [](const auto& p) { return p.passed; });
}

std::vector<std::string> ValidationReport::failures() const {
    std::vector<std::string> out;
    for (const auto& p : properties)
        if (!p.passed) out.push_back(p.name);
    return out;
}

nlohmann::json ValidationReport::to_json() const {
    nlohmann::json props = nlohmann::json::array();
    for (const auto& p : properties) {
        props.push_back({{"name", p.name},
                         {"passed", p.passed},
                         {"value", std::isfinite(p.value) ? nlohmann::json(p.value) : nlohmann::json()},
                         {"threshold", p.threshold},
                         {"detail", p.detail},
                         {"seconds", p.seconds}});
    }
    return {{"passed", all_passed()}, {"failures", failures()}, {"properties", props}};
}

}  // namespace ewa

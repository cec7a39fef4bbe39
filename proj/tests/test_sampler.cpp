#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>

#include "ewa/error.hpp"
#include "ewa/oracle.hpp"
#include "ewa/sampler.hpp"
#include "ewa/stats.hpp"

using namespace ewa;

namespace {

struct P2Problem {
    std::shared_ptr<const Dataset> data;
    GibbsConfig gibbs;
    Vector theta0;
};

P2Problem p2_problem(std::uint64_t seed) {
    const int n = 20, p = 2;
    Rng rng = make_rng(seed, "p2");
    Matrix X(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) X(i, j) = standard_normal(rng);
    Vector beta0(p);
    beta0 << 0.8, -0.3;
    const Vector theta0 = X * beta0;
    Vector Y(n);
    for (int i = 0; i < n; ++i) Y[i] = theta0[i] + standard_normal(rng);
    P2Problem pr;
    pr.data = std::make_shared<const Dataset>(X, Y, Family::gaussian());
    pr.gibbs.lambda = n;
    pr.gibbs.prior = {0.3, 100.0, p};
    pr.gibbs.data = pr.data;
    pr.theta0 = theta0;
    return pr;
}

// Monte Carlo standard error of the pooled mean of coordinate j.
double mc_se(std::span<const Chain> chains, int j) {
    double ess = 0.0;
    std::vector<double> all;
    for (const auto& c : chains) {
        std::vector<double> xs;
        for (const auto& d : c.draws) xs.push_back(d[j]);
        ess += xs.size() / stats::autocorrelation_time(xs);
        all.insert(all.end(), xs.begin(), xs.end());
    }
    return std::sqrt(stats::variance(all) / ess);
}

SamplerConfig short_config() {
    SamplerConfig s;
    s.n_iters = 3000;
    s.n_chains = 2;
    s.seed = 99;
    return s;
}

}  // namespace

TEST_CASE("config validation") {
    SamplerConfig s;
    s.burn_in = s.n_iters;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.step_size = 0.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.thin = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.n_chains = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.init = InitKind::User;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    CHECK(s.burn_in_iters() == 2000);
    CHECK(s.target_accept() == doctest::Approx(0.574));
    CHECK(parse_algorithm("rwm") == Algorithm::RWM);
    CHECK(parse_init_kind("prior-draw") == InitKind::PriorDraw);
    CHECK(parse_parametrization("direct") == Parametrization::Direct);
    CHECK_THROWS_AS(parse_algorithm("hmc"), ConfigError);
}

TEST_CASE("chains are reproducible and parallel equals serial") {
    const P2Problem pr = p2_problem(1);
    const GibbsPosterior post(pr.gibbs);
    SamplerConfig s = short_config();
    s.n_chains = 4;
    const auto a = run_chains(post, s);
    const auto b = run_chains_serial(post, s);
    const auto c = run_chains(post, s);
    REQUIRE(a.size() == 4);
    for (int k = 0; k < 4; ++k) {
        CHECK(a[k].seed_used == s.seed + k);
        CHECK(a[k].accept_rate == b[k].accept_rate);
        REQUIRE(a[k].draws.size() == b[k].draws.size());
        bool same = true;
        for (std::size_t t = 0; t < a[k].draws.size(); ++t)
            same = same && a[k].draws[t] == b[k].draws[t] && a[k].draws[t] == c[k].draws[t] &&
                   a[k].log_post_trace[t] == b[k].log_post_trace[t];
        CHECK(same);
    }
    CHECK(a[0].draws != a[1].draws);
}

TEST_CASE("draw bookkeeping") {
    const P2Problem pr = p2_problem(2);
    SamplerConfig s = short_config();
    s.n_chains = 1;
    s.burn_in = 1000;
    s.thin = 7;
    const Chain ch = run_chain(pr.gibbs, s);
    CHECK(ch.draws.size() == (2000 + 6) / 7);
    CHECK(ch.log_post_trace.size() == ch.draws.size());
    CHECK(ch.accept_rate >= 0.0);
    CHECK(ch.accept_rate <= 1.0);
    CHECK(ch.config_echo.thin == 7);
    const GibbsPosterior post(pr.gibbs);
    for (std::size_t t = 0; t < ch.draws.size(); t += 37)
        CHECK(ch.log_post_trace[t] == doctest::Approx(post.log_density(ch.draws[t])).epsilon(1e-12));
}

TEST_CASE("support invariance near the Poisson cap and inside a small ball") {
    const int n = 30;
    Rng rng = make_rng(3, "support");
    Matrix X(n, 2);
    for (int i = 0; i < n; ++i) X(i, 0) = 1.0, X(i, 1) = standard_normal(rng);
    Vector Y(n);
    for (int i = 0; i < n; ++i) Y[i] = sample_response(Family::poisson(), 2.8, rng);
    GibbsConfig g;
    g.lambda = n;
    g.prior = {0.5, 3.2, 2};
    g.data = std::make_shared<const Dataset>(X, Y, Family::poisson());
    for (Algorithm alg : {Algorithm::MALA, Algorithm::RWM})
        for (Parametrization par : {Parametrization::Direct, Parametrization::Asinh}) {
            SamplerConfig s = short_config();
            s.algorithm = alg;
            s.parametrization = par;
            const auto chains = run_chains(GibbsPosterior(g), s);
            for (const auto& c : chains)
                for (const auto& d : c.draws) {
                    CHECK(d.norm() <= 3.2);
                    CHECK(in_domain(g.data->family(), X * d));
                }
        }
}

TEST_CASE("prior-only target passes KS against the scaled t3") {
    GibbsConfig g;
    g.lambda = 0.0;
    g.prior = {2.0, 1e7, 1};
    g.data = std::make_shared<const Dataset>(Matrix::Ones(1, 1), Vector::Zero(1), Family::gaussian());
    SamplerConfig s;
    s.n_chains = 1;
    s.burn_in = 2000;
    s.thin = 20;
    s.n_iters = 2000 + 20 * 10000;
    s.init = InitKind::PriorDraw;
    s.seed = 5;
    const Chain ch = run_chain(GibbsPosterior(g), s);
    std::vector<double> xs;
    for (const auto& d : ch.draws) xs.push_back(d[0]);
    const double sc = prior_t3_scale(2.0);
    const double D = stats::ks_statistic(xs, [sc](double x) { return stats::student_t3_cdf(x / sc); });
    CHECK(stats::ks_pvalue(D, static_cast<long>(xs.size())) >= 0.01);
    // symmetric prior: mean near zero within Monte Carlo error (t3 has
    // finite variance 3 * scale^2)
    CHECK(std::abs(posterior_mean(ch)[0]) <= 4 * sc * std::sqrt(3.0 / xs.size()) * 3);
}

TEST_CASE("chain mean and integrated KL match the grid oracle") {
    const P2Problem pr = p2_problem(4);
    const GibbsPosterior post(pr.gibbs);
    const NaturalParams theta0(pr.theta0, pr.data->family());
    const Vector mode = find_posterior_mode(post).beta;
    std::vector<GridAxis> axes(2);
    for (int j = 0; j < 2; ++j) axes[j] = {mode[j] - 2.5, mode[j] + 2.5, 501};
    const GridPosterior grid = grid_posterior(post, axes, &theta0);
    REQUIRE(grid.kl_risk.has_value());
    for (Algorithm alg : {Algorithm::MALA, Algorithm::RWM})
        for (Parametrization par : {Parametrization::Direct, Parametrization::Asinh}) {
            SamplerConfig s;
            s.algorithm = alg;
            s.parametrization = par;
            s.n_iters = 30000;
            s.seed = 17;
            const auto chains = run_chains(post, s);
            const Vector m = posterior_mean(chains);
            for (int j = 0; j < 2; ++j) CHECK(std::abs(m[j] - grid.mean[j]) <= 3 * mc_se(chains, j) + 1e-4);
            const KlRiskEstimate kl = integrated_kl_risk(chains, theta0, *pr.data);
            CHECK(std::abs(kl.value - *grid.kl_risk) <= 3 * kl.standard_error + 1e-3);
            for (const auto& c : chains) CHECK(c.accept_rate > 0.15);
        }
}

TEST_CASE("absurd step size yields the all-rejection diagnostic") {
    const P2Problem pr = p2_problem(5);
    SamplerConfig s = short_config();
    s.step_size = 1e6;
    s.adapt = false;
    CHECK_THROWS_AS(run_chain(pr.gibbs, s), SamplingError);
    try {
        run_chain(pr.gibbs, s);
    } catch (const SamplingError& e) {
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}

TEST_CASE("low acceptance triggers step halving") {
    const P2Problem pr = p2_problem(6);
    SamplerConfig s = short_config();
    s.step_size = 3.0;
    s.adapt = false;
    s.parametrization = Parametrization::Direct;
    const Chain ch = run_chain(pr.gibbs, s);
    CHECK(ch.halvings > 0);
    CHECK(ch.step_size_used == doctest::Approx(3.0 / std::pow(2.0, ch.halvings)));
    CHECK(ch.accept_rate >= 0.1);
    CHECK_FALSE(ch.warnings.empty());
}

TEST_CASE("initial points") {
    const P2Problem pr = p2_problem(7);
    const GibbsPosterior post(pr.gibbs);
    SamplerConfig s = short_config();
    s.init = InitKind::Zero;
    CHECK(initial_point(post, s, 1).isZero(0.0));
    s.init = InitKind::User;
    s.init_vector = Vector::Constant(2, 0.25);
    CHECK(initial_point(post, s, 1) == s.init_vector);
    s.init_vector = Vector::Constant(3, 0.25);
    CHECK_THROWS_AS(initial_point(post, s, 1), DimensionError);
    s.init_vector = Vector::Constant(2, 500.0);
    CHECK_THROWS_AS(run_chain(post, s), SamplingError);
    s.init = InitKind::PriorDraw;
    CHECK(initial_point(post, s, 1) == initial_point(post, s, 1));
    CHECK(initial_point(post, s, 1) != initial_point(post, s, 2));
}

TEST_CASE("posterior_mean and integrated_kl_risk degenerate cases") {
    const P2Problem pr = p2_problem(8);
    Chain c;
    Vector v(2);
    v << 0.3, -0.1;
    c.draws.assign(5, v);
    CHECK(posterior_mean(c) == v);
    const NaturalParams exact(pr.data->X() * v, pr.data->family());
    const KlRiskEstimate zero = integrated_kl_risk(c, exact, *pr.data);
    CHECK(std::abs(zero.value) <= 1e-12);
    Chain one;
    one.draws = {v};
    const NaturalParams t0(pr.theta0, pr.data->family());
    CHECK(integrated_kl_risk(one, t0, *pr.data).value ==
          doctest::Approx(kl_risk(t0, pr.data->X(), v, pr.data->family())).epsilon(1e-12));
    CHECK_THROWS_AS(posterior_mean(Chain{}), SamplingError);
    CHECK_THROWS_AS(integrated_kl_risk(Chain{}, t0, *pr.data), SamplingError);
}

TEST_CASE("detailed balance of the Metropolis kernel on three states") {
    const double w[3] = {0.2, 0.5, 0.3};
    Rng rng = make_rng(9, "balance");
    long counts[3][3] = {};
    int state = 0;
    const long N = 600000;
    for (long t = 0; t < N; ++t) {
        const int prop = (state + 1 + static_cast<int>(rng() % 2)) % 3;
        const int next = metropolis_accept(std::log(w[prop] / w[state]), rng) ? prop : state;
        ++counts[state][next];
        state = next;
    }
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            const double fij = static_cast<double>(counts[i][j]) / N, fji = static_cast<double>(counts[j][i]) / N;
            const double se = std::sqrt((fij + fji) / N);
            CHECK(std::abs(fij - fji) <= 3 * se);
        }
}

TEST_CASE("chain CSV layout") {
    const P2Problem pr = p2_problem(10);
    SamplerConfig s = short_config();
    s.n_iters = 500;
    const auto chains = run_chains(GibbsPosterior(pr.gibbs), s);
    const auto path = std::filesystem::temp_directory_path() / "ewa_test_chain.csv";
    write_chain_csv(chains, path);
    std::ifstream in(path);
    std::string header, line;
    std::getline(in, header);
    CHECK(header == "chain,draw,beta_1,beta_2,log_post");
    long rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == static_cast<long>(chains[0].draws.size() + chains[1].draws.size()));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(write_chain_csv(chains, "/nonexistent-dir/x.csv"), IoError);
}

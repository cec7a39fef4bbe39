#include <doctest.h>

#include <cmath>
#include <set>
#include <tuple>

#include "ewa/error.hpp"
#include "ewa/experiments.hpp"

using namespace ewa;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.seed = 7;
    cfg.n_list = {40};
    cfg.p_list = {6};
    cfg.p0_list = {1, 2};
    cfg.n_replications = 4;
    cfg.sampler.n_iters = 2000;
    cfg.sampler.n_chains = 2;
    return cfg;
}

CellSummary planted(int id, double x, double y) {
    CellSummary s;
    s.cell.id = id;
    s.rate_x = x;
    s.mean_excess_int = y;
    return s;
}

}  // namespace

TEST_CASE("config validation") {
    ExperimentConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.p0_list = {1, 30};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.n_replications = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.epsilon_list = {0.5, 1.0};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.design = {DesignKind::Correlated, 1.0};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.family.kind = FamilyKind::Bernoulli;
    cfg.family.scale = 2.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(parse_design_kind("orthogonal") == DesignKind::Orthogonal);
    CHECK(parse_truth_kind("misspecified") == TruthKind::Misspecified);
    CHECK_THROWS_AS(parse_design_kind("banded"), ConfigError);
}

TEST_CASE("cells cover every combination once, n outermost") {
    const ExperimentConfig cfg;
    const auto cells = enumerate_cells(cfg);
    CHECK(cells.size() == 24);
    std::set<std::tuple<long, long, int>> seen;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        CHECK(cells[i].id == static_cast<int>(i));
        seen.insert({cells[i].n, cells[i].p, cells[i].p0});
    }
    CHECK(seen.size() == 24);
    CHECK(cells[0].n == 100);
    CHECK(cells[7].n == 100);
    CHECK(cells[8].n == 200);
    CHECK(cells[1].p0 == 2);
}

TEST_CASE("design generation") {
    Rng rng = make_rng(1, "design");
    const Matrix O = generate_design(30, 30, {DesignKind::Orthogonal, 0.0}, rng);
    CHECK((O.transpose() * O - 30.0 * Matrix::Identity(30, 30)).cwiseAbs().maxCoeff() <= 1e-8);
    const Matrix G = generate_design(50, 7, {}, rng);
    for (int j = 0; j < 7; ++j) CHECK(std::abs(G.col(j).norm() - std::sqrt(50.0)) <= 1e-12);
    const long n = 2000;
    const Matrix C = generate_design(n, 4, {DesignKind::Correlated, 0.0}, rng);
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) {
            const Vector ca = C.col(a).array() - C.col(a).mean(), cb = C.col(b).array() - C.col(b).mean();
            CHECK(std::abs(ca.dot(cb) / (ca.norm() * cb.norm())) <= 4.0 / std::sqrt(double(n)));
        }
    const Matrix R = generate_design(n, 2, {DesignKind::Correlated, 0.8}, rng);
    const Vector r0 = R.col(0).array() - R.col(0).mean(), r1 = R.col(1).array() - R.col(1).mean();
    CHECK(r0.dot(r1) / (r0.norm() * r1.norm()) == doctest::Approx(0.8).epsilon(0.05));
    CHECK_THROWS_AS(generate_design(5, 6, {DesignKind::Orthogonal, 0.0}, rng), ConfigError);
    Rng a = make_rng(2, "d"), b = make_rng(2, "d");
    CHECK(generate_design(10, 3, {}, a) == generate_design(10, 3, {}, b));
}

TEST_CASE("truth generation") {
    Rng rng = make_rng(3, "truth");
    const Matrix X = generate_design(30, 8, {}, rng);
    for (int p0 = 1; p0 <= 8; ++p0) {
        const Truth t = generate_truth(X, p0, {TruthKind::ExactSparse, 2.0}, rng);
        REQUIRE(t.beta0.has_value());
        CHECK((t.beta0->array() != 0.0).count() == p0);
        CHECK(t.beta0->cwiseAbs().maxCoeff() == 2.0);
        CHECK((t.theta0 - X * *t.beta0).norm() == 0.0);
    }
    const Truth m = generate_truth(X, 2, {TruthKind::Misspecified}, rng);
    CHECK_FALSE(m.beta0.has_value());
    const Family f = Family::gaussian();
    CHECK(best_subset_kl(NaturalParams(m.theta0, f), X, 2, f).kl_star > 0.0);
    CHECK_THROWS_AS(generate_truth(X, 9, {}, rng), ConfigError);
}

TEST_CASE("prepared cells") {
    ExperimentConfig cfg = small_config();
    const CellContext ctx = prepare_cell(cfg, enumerate_cells(cfg)[1]);
    CHECK(ctx.oracle.kl_star == 0.0);
    CHECK(ctx.x_norm == doctest::Approx(spectral_norm(ctx.X)));
    CHECK(ctx.prior.zeta == doctest::Approx(1.0 / (40 * 6 * ctx.x_norm)));
    CHECK(ctx.rate_x == doctest::Approx(2 * std::log(40 * 6 * ctx.x_norm / 2)));
    cfg.truth.kind = TruthKind::Misspecified;
    const CellContext mis = prepare_cell(cfg, enumerate_cells(cfg)[1]);
    CHECK(mis.oracle.kl_star > 0.0);
    CHECK(mis.oracle.subset_chosen.size() == 2);
}

TEST_CASE("replications are deterministic and internally consistent") {
    const ExperimentConfig cfg = small_config();
    const CellContext ctx = prepare_cell(cfg, enumerate_cells(cfg)[1]);
    const ReplicationRecord a = run_replication(cfg, ctx, 2), b = run_replication(cfg, ctx, 2);
    CHECK(a.seed == b.seed);
    CHECK(a.ewa_int_kl == b.ewa_int_kl);
    CHECK(a.ewa_mean_kl == b.ewa_mean_kl);
    CHECK(a.ess == b.ess);
    CHECK(a.wall_ms == 0.0);
    CHECK(a.excess_int == a.ewa_int_kl - a.oracle_kl);
    CHECK(a.excess_mean == a.ewa_mean_kl - a.oracle_kl);
    CHECK(a.accept_rate > 0.0);
    // Jensen: KL of the mean is at most the mean KL for Gaussian data
    CHECK(a.ewa_mean_kl <= a.ewa_int_kl + 3 * a.int_kl_se);
    const ReplicationRecord c = run_replication(cfg, ctx, 3);
    CHECK(c.seed != a.seed);
    CHECK(c.ewa_int_kl != a.ewa_int_kl);
}

TEST_CASE("Gaussian records equal the half squared distance") {
    ExperimentConfig cfg = small_config();
    cfg.family.scale = 2.0;
    cfg.truth.kind = TruthKind::Misspecified;
    const CellResult res = run_cell(cfg, enumerate_cells(cfg)[0]);
    const auto& ctx = res.context;
    const double oracle = 0.5 * (ctx.theta0.theta() - ctx.X * ctx.oracle.beta_star).squaredNorm() / 2.0;
    CHECK(std::abs(ctx.oracle.kl_star - oracle) <= 1e-10 * std::max(1.0, oracle));
    for (const auto& r : res.records) {
        CHECK(r.oracle_kl == ctx.oracle.kl_star);
        CHECK(r.ewa_int_kl > r.oracle_kl - 3 * r.int_kl_se);
    }
}

TEST_CASE("parallel cell equals the serial reference") {
    const ExperimentConfig cfg = small_config();
    const Cell cell = enumerate_cells(cfg)[0];
    const CellResult a = run_cell(cfg, cell), b = run_cell_serial(cfg, cell);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].rep == static_cast<int>(i));
        CHECK(a.records[i].ewa_int_kl == b.records[i].ewa_int_kl);
        CHECK(a.records[i].ewa_mean_kl == b.records[i].ewa_mean_kl);
        CHECK(a.records[i].ess == b.records[i].ess);
    }
}

TEST_CASE("suite excess is nonnegative up to Monte Carlo error") {
    ExperimentConfig cfg = small_config();
    cfg.n_replications = 10;
    int calls = 0;
    const SuiteResult s = run_suite(cfg, [&](const CellResult&) { ++calls; });
    CHECK(calls == 2);
    for (const auto& c : s.cells) {
        const CellSummary sum = summarize_cell(c);
        CHECK(sum.mean_excess_int >= -3 * sum.se_excess_int);
        CHECK(sum.n_replications == 10);
        CHECK(std::isnan(sum.kl_ratio));
        CHECK(sum.q50 <= sum.q80);
        CHECK(sum.q80 <= sum.q90);
        CHECK(sum.q90 <= sum.q95);
    }
}

TEST_CASE("rate-law fit on planted records") {
    std::vector<CellSummary> lin, flat;
    for (int i = 0; i < 6; ++i) {
        lin.push_back(planted(i, 1.0 + i, 2.5 * (1.0 + i)));
        flat.push_back(planted(i, 1.0 + i, 4.0));
    }
    const RateStudyResult a = fit_rate_law(lin);
    CHECK(a.fit.slope == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(a.fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(a.fit.intercept) <= 1e-12);
    CHECK(std::abs(fit_rate_law(flat).fit.slope) <= 1e-12);
    lin.resize(3);
    CHECK_THROWS_AS(fit_rate_law(lin), ConfigError);
    ExperimentConfig cfg = small_config();
    CHECK_THROWS_AS(rate_study(cfg), ConfigError);
}

TEST_CASE("tail growth check") {
    const std::vector<double> L{std::log(2.0), std::log(5.0), std::log(10.0), std::log(20.0)};
    std::vector<double> lin, convex, concave, wiggle;
    for (double l : L) {
        lin.push_back(1.0 + 2.0 * l);
        convex.push_back(std::exp(l));
        concave.push_back(std::sqrt(l));
    }
    CHECK(check_tail_growth("a", L, lin).pass);
    CHECK(check_tail_growth("a", L, lin).slope == doctest::Approx(2.0));
    CHECK(check_tail_growth("b", L, concave).pass);
    const TailCheck c = check_tail_growth("c", L, convex);
    CHECK_FALSE(c.pass);
    CHECK(c.superlinear_residual > kSuperlinearTolerance);
    const TailCheck d = check_tail_growth("d", L, {3.0, 2.0, 4.0, 5.0});
    CHECK_FALSE(d.pass);
    CHECK(d.monotone_residual > 0.0);
}

TEST_CASE("tail study on a small suite") {
    ExperimentConfig cfg = small_config();
    cfg.p0_list = {1};
    cfg.n_replications = 50;
    cfg.sampler.n_iters = 1000;
    const SuiteResult s = run_suite(cfg);
    const TailStudyResult t = tail_study(s, cfg.epsilon_list);
    CHECK(t.rows.size() == 2 * cfg.epsilon_list.size());
    CHECK(t.checks.size() == 1);
    double prev = -1e300;
    for (const auto& r : t.rows)
        if (r.scope == "0") {
            CHECK(r.quantile >= prev);
            CHECK(r.bound_shape == doctest::Approx(r.rate_x + r.log_inv_eps));
            prev = r.quantile;
        }
    std::vector<double> ex;
    for (const auto& r : s.cells[0].records) ex.push_back(r.excess_int);
    CHECK(stats::quantile(ex, 0.0) == *std::min_element(ex.begin(), ex.end()));
    cfg.n_replications = 10;
    CHECK_THROWS_AS(tail_study(run_suite(cfg), cfg.epsilon_list), ConfigError);
    CHECK_THROWS_AS(tail_study(cfg), ConfigError);
}

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ewa/config.hpp"
#include "ewa/csv.hpp"
#include "ewa/error.hpp"
#include "ewa/experiments.hpp"
#include "ewa/gibbs.hpp"
#include "ewa/sampler.hpp"
#include "ewa/stats.hpp"
#include "ewa/validate.hpp"

namespace fs = std::filesystem;
using namespace ewa;

namespace {

enum class Verbosity { Quiet, Normal, Verbose };

struct Invocation {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    bool verbose = false;
    std::string x_path;
    std::string y_path;

    Verbosity verbosity() const { return quiet ? Verbosity::Quiet : verbose ? Verbosity::Verbose : Verbosity::Normal; }
};

ExperimentConfig resolve_config(const Invocation& inv) {
    ExperimentConfig cfg;
    if (!inv.config_path.empty()) {
        if (!fs::exists(inv.config_path)) throw IoError("config file not found: " + inv.config_path);
        cfg = load_experiment_config(inv.config_path);
    }
    if (inv.seed) cfg.seed = *inv.seed;
    cfg.validate();
    return cfg;
}

fs::path make_run_dir(const Invocation& inv, std::uint64_t seed) {
    const fs::path dir = fs::path(inv.out_dir) / ("seed_" + std::to_string(seed));
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw IoError("write failed for " + path.string());
}

ProgressFn progress_printer(const Invocation& inv, std::size_t n_cells) {
    if (inv.verbosity() == Verbosity::Quiet) return {};
    auto done = std::make_shared<std::size_t>(0);
    const bool verbose = inv.verbosity() == Verbosity::Verbose;
    return [done, n_cells, verbose](const CellResult& res) {
        ++*done;
        const CellSummary s = summarize_cell(res);
        std::fprintf(stderr, "cell %zu/%zu (id %d, n=%ld p=%ld p0=%d): mean excess %.4g (se %.2g), flagged %d\n",
                     *done, n_cells, s.cell.id, s.cell.n, s.cell.p, s.cell.p0, s.mean_excess_int, s.se_excess_int,
                     s.n_flagged);
        if (!res.context.oracle.warning.empty()) std::fprintf(stderr, "  warning: %s\n", res.context.oracle.warning.c_str());
        if (verbose)
            for (const auto& r : res.records)
                for (const auto& w : r.warnings) std::fprintf(stderr, "  rep %d: %s\n", r.rep, w.c_str());
    };
}

void report_paths(const Invocation& inv, const ReportPaths& paths) {
    if (inv.verbosity() == Verbosity::Quiet) return;
    for (const auto& f : paths.files) std::printf("wrote %s\n", f.string().c_str());
}

int cmd_simulate(const Invocation& inv, bool rate, bool tails) {
    const ExperimentConfig cfg = resolve_config(inv);
    // fail on an unwritable output directory before spending the compute
    make_run_dir(inv, cfg.seed);
    const SuiteResult suite = run_suite(cfg, progress_printer(inv, enumerate_cells(cfg).size()));
    std::optional<RateStudyResult> rs;
    std::optional<TailStudyResult> ts;
    if (rate) {
        rs = rate_study(suite);
        if (inv.verbosity() != Verbosity::Quiet)
            std::printf("rate fit: slope %.6g, intercept %.6g, R^2 %.6g\n", rs->fit.slope, rs->fit.intercept,
                        rs->fit.r_squared);
    }
    if (tails) {
        ts = tail_study(suite, cfg.epsilon_list);
        if (inv.verbosity() != Verbosity::Quiet)
            std::printf("tail check (pooled): monotone residual %.3g, superlinear residual %.3g, %s\n",
                        ts->pooled.monotone_residual, ts->pooled.superlinear_residual,
                        ts->pooled.pass ? "pass" : "fail");
    }
    report_paths(inv, emit_report(suite, rs, ts, inv.out_dir));
    return 0;
}

int cmd_validate(const Invocation& inv) {
    const ExperimentConfig cfg = resolve_config(inv);
    ValidateOptions opts;
    opts.seed = cfg.seed;
    opts.step_size = cfg.sampler.step_size;
    opts.adapt = cfg.sampler.adapt;
    opts.max_halvings = cfg.sampler.max_halvings;
    const ValidationReport rep = run_validation(opts);
    for (const auto& p : rep.properties) {
        if (inv.verbosity() == Verbosity::Quiet && p.passed) continue;
        std::printf("%s %-20s value=%.6g threshold=%.6g", p.passed ? "PASS" : "FAIL", p.name.c_str(), p.value,
                    p.threshold);
        if (inv.verbosity() == Verbosity::Verbose || !p.passed) std::printf("  %s", p.detail.c_str());
        std::printf("\n");
    }
    const fs::path dir = make_run_dir(inv, cfg.seed);
    write_text(dir / "config_echo.json", to_json(cfg).dump(2) + "\n");
    write_text(dir / "validate.json", rep.to_json().dump(2) + "\n");
    if (!rep.all_passed()) {
        std::string names;
        for (const auto& f : rep.failures()) names += (names.empty() ? "" : ", ") + f;
        std::fprintf(stderr, "validation failed: %s\n", names.c_str());
        return 1;
    }
    return 0;
}

int cmd_fit(const Invocation& inv) {
    const ExperimentConfig cfg = resolve_config(inv);
    const Matrix X = csv::read_matrix(inv.x_path);
    const Vector Y = csv::read_vector(inv.y_path);
    if (Y.size() != X.rows())
        throw DimensionError("Y has " + std::to_string(Y.size()) + " rows but X has " + std::to_string(X.rows()));
    auto data = std::make_shared<const Dataset>(X, Y, cfg.family.make());
    GibbsConfig gc = GibbsConfig::with_defaults(data, cfg.lambda, cfg.zeta, cfg.B1);
    if (const std::string w = gc.prior.feasibility_warning(); !w.empty() && inv.verbosity() != Verbosity::Quiet)
        std::fprintf(stderr, "warning: %s\n", w.c_str());
    const GibbsPosterior post(gc);
    SamplerConfig sc = cfg.sampler;
    sc.seed = derive_seed(cfg.seed, "fit");
    const std::vector<Chain> chains = run_chains(post, sc);

    const Vector beta_hat = posterior_mean(chains);
    const std::vector<double> levels{0.025, 0.25, 0.5, 0.75, 0.975};
    const std::vector<Vector> q = posterior_quantiles(chains, levels);
    const long p = X.cols();

    nlohmann::json diag = nlohmann::json::array();
    for (std::size_t k = 0; k < chains.size(); ++k)
        diag.push_back({{"chain", k},
                        {"seed", chains[k].seed_used},
                        {"accept_rate", chains[k].accept_rate},
                        {"step_size", chains[k].step_size_used},
                        {"halvings", chains[k].halvings},
                        {"draws", chains[k].draws.size()},
                        {"warnings", chains[k].warnings}});
    std::vector<double> ess(p, 0.0);
    for (long j = 0; j < p; ++j)
        for (const auto& c : chains) {
            std::vector<double> xs;
            xs.reserve(c.draws.size());
            for (const auto& d : c.draws) xs.push_back(d[j]);
            ess[j] += static_cast<double>(xs.size()) / stats::autocorrelation_time(xs);
        }

    const fs::path dir = make_run_dir(inv, cfg.seed);
    write_text(dir / "config_echo.json", to_json(cfg).dump(2) + "\n");
    {
        std::string s = "coordinate,beta_hat,q025,q25,q50,q75,q975,ess\n";
        for (long j = 0; j < p; ++j) {
            s += std::to_string(j + 1) + "," + csv::format(beta_hat[j]);
            for (const auto& v : q) s += "," + csv::format(v[j]);
            s += "," + csv::format(ess[j]) + "\n";
        }
        write_text(dir / "fit.csv", s);
    }
    const nlohmann::json summary = {{"n", X.rows()},
                                    {"p", p},
                                    {"lambda", gc.lambda},
                                    {"zeta", gc.prior.zeta},
                                    {"B1", gc.prior.B1},
                                    {"beta_hat", std::vector<double>(beta_hat.data(), beta_hat.data() + p)},
                                    {"ess", ess},
                                    {"chains", diag}};
    write_text(dir / "fit.json", summary.dump(2) + "\n");
    write_chain_csv(chains, dir / "chains.csv");

    if (inv.verbosity() != Verbosity::Quiet) {
        std::printf("coordinate  beta_hat        2.5%%            97.5%%\n");
        for (long j = 0; j < p; ++j)
            std::printf("%10ld  % .6e  % .6e  % .6e\n", j + 1, beta_hat[j], q[0][j], q[4][j]);
        for (const auto& c : chains)
            for (const auto& w : c.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        std::printf("wrote %s\n", dir.string().c_str());
    }
    return 0;
}

void add_common(CLI::App* sub, Invocation& inv) {
    sub->add_option("--config", inv.config_path, "JSON experiment config");
    sub->add_option("--out", inv.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--seed", inv.seed, "Override the config seed");
    auto* q = sub->add_flag("--quiet", inv.quiet, "Only print errors and failures");
    sub->add_flag("--verbose", inv.verbose, "Print details and per-replication warnings")->excludes(q);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse exponentially weighted aggregation for GLMs"};
    app.require_subcommand(1);
    Invocation inv;

    auto* fit = app.add_subcommand("fit", "Sample the Gibbs posterior for CSV data");
    add_common(fit, inv);
    fit->add_option("--x", inv.x_path, "Design matrix CSV (n rows, p columns)")->required();
    fit->add_option("--y", inv.y_path, "Response CSV (one column)")->required();
    auto* val = app.add_subcommand("validate", "Run the property suite");
    add_common(val, inv);
    auto* sim = app.add_subcommand("simulate", "Run the simulation suite");
    add_common(sim, inv);
    auto* rate = app.add_subcommand("rate-study", "Simulation suite plus the rate-law fit");
    add_common(rate, inv);
    auto* tail = app.add_subcommand("tail-study", "Simulation suite plus the excess quantile study");
    add_common(tail, inv);

    CLI11_PARSE(app, argc, argv);
    try {
        if (fit->parsed()) return cmd_fit(inv);
        if (val->parsed()) return cmd_validate(inv);
        if (sim->parsed()) return cmd_simulate(inv, false, false);
        if (rate->parsed()) return cmd_simulate(inv, true, false);
        if (tail->parsed()) return cmd_simulate(inv, false, true);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return 4;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
    return 1;
}

#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ewa/csv.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(EWA_CLI_PATH) + " " + args + " 2>&1";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    while (fgets(buf, sizeof buf, pipe)) r.out += buf;
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string fixture(const char* name) { return std::string(EWA_FIXTURE_DIR) + "/" + name; }
std::string config(const char* name) { return std::string(EWA_CONFIG_DIR) + "/" + name; }

fs::path temp_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("ewa_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("fit on the bundled fixture recovers the planted support") {
    const fs::path out = temp_dir("fit");
    const Run r = run("fit --x " + fixture("x.csv") + " --y " + fixture("y.csv") + " --config " + config("fit.json") +
                      " --out " + out.string());
    INFO(r.out);
    REQUIRE(r.code == 0);
    const fs::path dir = out / "seed_1";
    for (const char* f : {"fit.csv", "fit.json", "chains.csv", "config_echo.json"}) CHECK(fs::exists(dir / f));
    const auto summary = nlohmann::json::parse(slurp(dir / "fit.json"));
    const auto beta = summary.at("beta_hat").get<std::vector<double>>();
    const ewa::Vector beta0 = ewa::csv::read_vector(fixture("beta0.csv"));
    REQUIRE(beta.size() == 5);
    double min_signal = 1e300, max_noise = 0.0;
    for (int j = 0; j < 5; ++j) {
        if (beta0[j] != 0.0)
            min_signal = std::min(min_signal, std::abs(beta[j]));
        else
            max_noise = std::max(max_noise, std::abs(beta[j]));
    }
    CHECK(min_signal > 100 * max_noise);
    CHECK(summary.at("lambda").get<double>() == 20.0);
    CHECK(summary.at("chains").size() == 4);
}

TEST_CASE("fit input errors") {
    const fs::path d = temp_dir("fit_errors");
    {
        std::ifstream in(fixture("y.csv"));
        std::ofstream short_y(d / "y19.csv");
        std::string line;
        for (int i = 0; i < 19 && std::getline(in, line); ++i) short_y << line << '\n';
    }
    Run r = run("fit --x " + fixture("x.csv") + " --y " + (d / "y19.csv").string() + " --out " + d.string());
    CHECK(r.code != 0);
    CHECK(r.out.find("19") != std::string::npos);
    CHECK(r.out.find("20") != std::string::npos);

    std::ofstream(d / "xb.csv") << "1,0\n0,1\n1,1\n";
    std::ofstream(d / "yb.csv") << "0\n2\n1\n";
    std::ofstream(d / "bern.json") << R"({"family": {"kind": "bernoulli"}})";
    r = run("fit --config " + (d / "bern.json").string() + " --x " + (d / "xb.csv").string() + " --y " +
            (d / "yb.csv").string() + " --out " + d.string());
    CHECK(r.code != 0);
    CHECK(r.out.find("row 2") != std::string::npos);

    std::ofstream(d / "xbad.csv") << "1,0\n0,x\n";
    r = run("fit --x " + (d / "xbad.csv").string() + " --y " + (d / "yb.csv").string());
    CHECK(r.code != 0);
    CHECK(r.out.find("line 2") != std::string::npos);

    r = run("fit --x " + fixture("x.csv"));
    CHECK(r.code != 0);
}

TEST_CASE("config errors") {
    const fs::path d = temp_dir("config_errors");
    std::ofstream(d / "typo.json") << R"({"seeed": 1})";
    Run r = run("simulate --config " + (d / "typo.json").string() + " --out " + d.string());
    CHECK(r.code != 0);
    CHECK(r.out.find("seeed") != std::string::npos);
    r = run("simulate --config " + (d / "absent.json").string() + " --out " + d.string());
    CHECK(r.code != 0);
    CHECK(r.out.find("absent.json") != std::string::npos);
    r = run("frobnicate");
    CHECK(r.code != 0);
}

TEST_CASE("validate: default passes, fault injection fails by name") {
    const fs::path d = temp_dir("validate");
    Run r = run("validate --out " + d.string());
    INFO(r.out);
    CHECK(r.code == 0);
    CHECK(r.out.find("PASS grid_tv") != std::string::npos);
    const auto rep = nlohmann::json::parse(slurp(d / "seed_20240601" / "validate.json"));
    CHECK(rep.at("passed").get<bool>());
    for (const auto& p : rep.at("properties"))
        if (p.at("name") == "grid_tv") CHECK(p.at("value").get<double>() <= 0.05);

    r = run("validate --config " + config("fault_step.json") + " --out " + d.string());
    CHECK(r.code != 0);
    CHECK(r.out.find("FAIL grid_tv") != std::string::npos);
    CHECK(r.out.find("all proposals rejected") != std::string::npos);
    CHECK(r.out.find("PASS gaussian_closed_form") != std::string::npos);
    CHECK(r.out.find("PASS oracle_projection") != std::string::npos);
}

TEST_CASE("simulate and rate-study outputs are deterministic") {
    const fs::path a = temp_dir("rate_a"), b = temp_dir("rate_b");
    Run r = run("rate-study --config " + config("smoke.json") + " --out " + a.string());
    INFO(r.out);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("cell 4/4") != std::string::npos);
    CHECK(r.out.find("R^2") != std::string::npos);
    REQUIRE(run("rate-study --quiet --config " + config("smoke.json") + " --out " + b.string()).code == 0);
    for (const char* f : {"replications.csv", "cells.csv", "ratefit.csv", "config_echo.json", "plots/ratefit.svg"})
        CHECK(slurp(a / "seed_3" / f) == slurp(b / "seed_3" / f));
    const std::string fit = slurp(a / "seed_3" / "ratefit.csv");
    CHECK(fit.rfind("slope,intercept,r_squared,n_cells\n", 0) == 0);
    CHECK(std::count(fit.begin(), fit.end(), '\n') == 2);

    r = run("simulate --seed 99 --config " + config("smoke.json") + " --out " + a.string());
    CHECK(r.code == 0);
    CHECK(fs::exists(a / "seed_99" / "replications.csv"));
    CHECK_FALSE(fs::exists(a / "seed_99" / "ratefit.csv"));
    CHECK(slurp(a / "seed_99" / "replications.csv") != slurp(a / "seed_3" / "replications.csv"));
}

TEST_CASE("tail-study") {
    const fs::path d = temp_dir("tails");
    Run r = run("tail-study --config " + config("smoke_tails.json") + " --out " + d.string());
    INFO(r.out);
    REQUIRE(r.code == 0);
    CHECK(fs::exists(d / "seed_4" / "tails.csv"));
    CHECK(fs::exists(d / "seed_4" / "plots" / "tails.svg"));
    r = run("tail-study --config " + config("smoke.json") + " --out " + d.string());
    CHECK(r.code != 0);
    CHECK(r.out.find("50 replications") != std::string::npos);
}

TEST_CASE("unwritable output directory is named") {
    const Run r = run("simulate --config " + config("smoke.json") + " --out /proc/ewa-no-such-dir");
    CHECK(r.code != 0);
    CHECK(r.out.find("/proc/ewa-no-such-dir") != std::string::npos);
}

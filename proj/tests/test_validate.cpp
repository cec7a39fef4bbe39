#include <doctest.h>

#include "ewa/validate.hpp"

using namespace ewa;

TEST_CASE("property suite passes with defaults") {
    const ValidationReport rep = run_validation({});
    CHECK(rep.properties.size() == 8);
    for (const auto& p : rep.properties) {
        INFO(p.name << ": " << p.detail);
        CHECK(p.passed);
    }
    CHECK(rep.all_passed());
    CHECK(rep.failures().empty());
    const auto j = rep.to_json();
    CHECK(j.at("passed").get<bool>());
    CHECK(j.at("properties").size() == 8);
}

TEST_CASE("grid TV value is reported") {
    const PropertyResult r = check_grid_tv({});
    CHECK(r.passed);
    CHECK(r.value <= 0.05);
    CHECK(r.threshold == 0.05);
}

TEST_CASE("corrupted step size fails the sampler properties only") {
    ValidateOptions o;
    o.step_size = 1e6;
    o.adapt = false;
    const ValidationReport rep = run_validation(o);
    CHECK_FALSE(rep.all_passed());
    const auto f = rep.failures();
    CHECK(f == std::vector<std::string>{"grid_tv", "prior_ks"});
    for (const auto& p : rep.properties)
        if (!p.passed) CHECK(p.detail.find("rejected") != std::string::npos);
    CHECK(rep.to_json().at("failures").size() == 2);
}

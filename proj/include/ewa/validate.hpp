#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ewa {

struct PropertyResult {
    std::string name;
    bool passed = false;
    /// The statistic compared against the threshold (a max error, a
    /// distance or a p-value).
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
    double seconds = 0.0;
};

struct ValidationReport {
    std::vector<PropertyResult> properties;
    bool all_passed() const;
    std::vector<std::string> failures() const;
    nlohmann::json to_json() const;
};

struct ValidateOptions {
    std::uint64_t seed = 20240601;
    /// Sampler overrides for the sampling properties (fault injection).
    std::optional<double> step_size;
    bool adapt = true;
    int max_halvings = 10;
};

/// Each property catches its own errors and reports them as a failure, so
/// one broken check does not stop the others.
PropertyResult check_expfam_derivatives(const ValidateOptions& opts);
PropertyResult check_gaussian_closed_form(const ValidateOptions& opts);
PropertyResult check_bernoulli_curvature(const ValidateOptions& opts);
PropertyResult check_dv_variational(const ValidateOptions& opts);
PropertyResult check_posterior_gradients(const ValidateOptions& opts);
PropertyResult check_grid_tv(const ValidateOptions& opts);
PropertyResult check_prior_ks(const ValidateOptions& opts);
PropertyResult check_oracle_projection(const ValidateOptions& opts);

ValidationReport run_validation(const ValidateOptions& opts);

}  // namespace ewa

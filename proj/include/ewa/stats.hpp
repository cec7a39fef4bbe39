#pragma once

#include <functional>
#include <span>
#include <vector>

namespace ewa::stats {

double mean(std::span<const double> xs);

/// Unbiased sample variance; 0 for fewer than two values.
double variance(std::span<const double> xs);

/// Empirical quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). level in [0, 1]; level 0 is the minimum.
double quantile(std::vector<double> xs, double level);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares of y on x with intercept. R^2 is 1 when y is
/// constant and exactly fitted.
LinearFit ols(std::span<const double> x, std::span<const double> y);

/// Pool-adjacent-violators fit, nondecreasing, optional weights.
std::vector<double> isotonic_increasing(std::span<const double> y,
                                        std::span<const double> w = {});
std::vector<double> isotonic_decreasing(std::span<const double> y,
                                        std::span<const double> w = {});

/// Integrated autocorrelation time by Geyer's initial positive sequence.
/// Clamped below at 1.
double autocorrelation_time(std::span<const double> xs);

/// Kolmogorov-Smirnov distance between the sample and a continuous CDF.
double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf);

/// Asymptotic p-value of sqrt(n) * D for the one-sample KS test.
double ks_pvalue(double d, std::size_t n);

/// CDF of Student's t with three degrees of freedom.
double student_t3_cdf(double t);

/// Total-variation distance between two probability vectors of equal size.
double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace ewa::stats

#pragma once

#include <span>
#include <vector>

namespace abclim {

double mean(std::span<const double> v);
// Sample standard error of the mean (n - 1 denominator).
double std_error(std::span<const double> v);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
};

// Ordinary least squares y ~ intercept + slope * x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

// Slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

// Two-sided exact binomial test p-value for k successes in n trials.
double binomial_two_sided_p(int k, int n, double p);

}  // namespace abclim

#pragma once

#include <span>
#include <vector>

namespace liqjump::stats {

double mean(std::span<const double> x);

// Sample variance with n-1 denominator; 0 for fewer than two observations.
double sample_variance(std::span<const double> x);

double sample_std(std::span<const double> x);

// Linear interpolation between order statistics: position q*(n-1) in the
// sorted sample. q in [0, 1]. Throws on empty input.
double percentile_linear(std::vector<double> x, double q);

// Same rule on data that is already sorted ascending.
double percentile_sorted(std::span<const double> sorted, double q);

}  // namespace liqjump::stats

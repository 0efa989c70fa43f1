#pragma once

#include <vector>

namespace sops {

double mean(const std::vector<double>& xs);
double stddev(const std::vector<double>& xs);

/// Least-squares slope of log(y) against log(x); x and y must be positive.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace sops

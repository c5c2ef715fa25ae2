#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "dtd/common.hpp"

namespace dtd {

// Brent root solve on [lo, hi]; requires a sign change.
double find_root(const std::function<double(double)>& f, double lo, double hi,
                 double xtol = 1e-12, int max_iter = 200);

// Linear-interpolation quantile (numpy default convention), p in [0, 1].
double quantile(std::vector<double> values, double p);

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

}  // namespace dtd

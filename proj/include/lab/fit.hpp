#pragma once

#include <utility>
#include <vector>

namespace lab {

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    /// RMS deviation of log y from the fitted line
    double residual = 0.0;
};

/// Least squares on (log x, log y). Needs at least 3 points with x, y > 0.
RateFit fit_rate(const std::vector<std::pair<double, double>>& points);

}  // namespace lab

#include "lab/fit.hpp"

#include "lab/errors.hpp"

#include <cmath>
#include <string>

namespace lab {

RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw ArgumentError("rate fit needs at least 3 points");
    const double n = static_cast<double>(points.size());
    double sx = 0.0, sy = 0.0;
    for (const auto& [x, y] : points) {
        if (!(x > 0.0) || !(y > 0.0))
            throw ArgumentError("rate fit needs positive data, got (" + std::to_string(x) + ", " + std::to_string(y) + ")");
        sx += std::log(x);
        sy += std::log(y);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : points) {
        const double dx = std::log(x) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(y) - my);
    }
    if (sxx == 0.0) throw ArgumentError("rate fit needs distinct x values");
    RateFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0.0;
    for (const auto& [x, y] : points) {
        const double e = std::log(y) - (fit.intercept + fit.slope * std::log(x));
        ss += e * e;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

}  // namespace lab

#include "lab/levelset.hpp"

#include "lab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lab {

double irwin_hall_cdf(double x, int n) {
    if (x <= 0.0) return 0.0;
    if (x >= n) return 1.0;
    // symmetric about n/2: evaluate on the short side
    bool flip = false;
    if (x > 0.5 * n) {
        x = n - x;
        flip = true;
    }
    double fact = 1.0, binom = 1.0, acc = 0.0;
    for (int m = 2; m <= n; ++m) fact *= m;
    for (int k = 0; k <= n && k < x; ++k) {
        acc += ((k & 1) ? -1.0 : 1.0) * binom * std::pow(x - k, n);
        binom = binom * (n - k) / (k + 1);
    }
    const double F = acc / fact;
    return flip ? 1.0 - F : F;
}

double LevelContext::band_weight(std::size_t p, double c, double d) const {
    const double l = lo[p];
    const double w = width[p];
    const int n = order[p];
    if (d < l || c > l + n * w) return 0.0;
    if (w <= 0.0) return (c <= l && l <= d) ? 1.0 : 0.0;
    return irwin_hall_cdf((d - l) / w, n) - irwin_hall_cdf((c - l) / w, n);
}

double LevelContext::mean_range_at(double y) const {
    double acc = 0.0;
    std::size_t cnt = 0;
    for_nodes_meeting(y, y, [&](std::size_t p) {
        if (width[p] > 0.0 && lo[p] <= y && y <= lo[p] + order[p] * width[p]) {
            acc += width[p];
            ++cnt;
        }
    });
    return cnt ? acc / cnt : 0.0;
}

LevelContext make_level_context(const GridFunction& u, const MetricField& g, bool geometry, int kernel_order) {
    if (kernel_order < 1 || kernel_order > 4) throw ArgumentError("kernel order must lie in [1, 4]");
    const ShellGrid& grid = u.grid;
    const std::size_t n = grid.size();
    LevelContext ctx;
    ctx.u = u;
    ctx.kernel_order = kernel_order;
    ctx.grad = gradient_field(u);
    ctx.gnorm.resize(n);
    ctx.dv.resize(n);
    ctx.lo.resize(n);
    ctx.width.resize(n);
    ctx.order.resize(n);
    ctx.u_min = *std::min_element(u.values.begin(), u.values.end());
    ctx.u_max = *std::max_element(u.values.begin(), u.values.end());
    ctx.grad_floor = 1e-6 * (ctx.u_max - ctx.u_min);

    std::vector<Mat3> metric(n);
    for (std::size_t p = 0; p < n; ++p) {
        const Vec3 x = grid.position(p);
        metric[p] = g.eval(x);
        require_spd(metric[p], x);
        ctx.gnorm[p] = grad_norm_g(metric[p], ctx.grad[p]);
        ctx.dv[p] = std::sqrt(metric[p].determinant()) * grid.volume(p);

        const auto [i, j, k] = grid.ijk(p);
        const double v = u.values[p];
        const double wt = 0.5 * (u.values[grid.wrap(i, j + 1, k)] - u.values[grid.wrap(i, j - 1, k)]);
        const double wp = 0.5 * (u.values[grid.wrap(i, j, k + 1)] - u.values[grid.wrap(i, j, k - 1)]);
        const double ang = wt * wt + wp * wp;
        if (i == 0 || i == grid.nr() - 1) {
            // half cell on a boundary sphere: one-sided radial extent
            const int in = i == 0 ? 1 : i - 1;
            const double h = 0.5 * (u.values[grid.index(in, j, k)] - v);
            const double w = std::sqrt(h * h + ang);
            ctx.width[p] = w;
            ctx.order[p] = 1;
            ctx.lo[p] = v + std::min(0.0, h) - 0.5 * (w - std::abs(h));
        } else {
            const double ws = 0.5 * (u.values[grid.index(i + 1, j, k)] - u.values[grid.index(i - 1, j, k)]);
            const double w = std::sqrt(ws * ws + ang);
            ctx.width[p] = w;
            ctx.order[p] = static_cast<unsigned char>(kernel_order);
            ctx.lo[p] = v - 0.5 * kernel_order * w;
        }
    }

    ctx.layer_lo.assign(grid.nr(), std::numeric_limits<double>::infinity());
    ctx.layer_hi.assign(grid.nr(), -std::numeric_limits<double>::infinity());
    for (std::size_t p = 0; p < n; ++p) {
        const int i = ctx.layer(p);
        ctx.layer_lo[i] = std::min(ctx.layer_lo[i], ctx.lo[p]);
        ctx.layer_hi[i] = std::max(ctx.layer_hi[i], ctx.lo[p] + ctx.order[p] * ctx.width[p]);
    }

    if (!geometry) return ctx;

    const auto hess = hessian_field(u, ctx.grad);
    ctx.has_geometry = true;
    ctx.H.resize(n);
    ctx.A_sq.resize(n);
    ctx.A_ring_sq.resize(n);
    ctx.tan_grad_sq.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
        const Vec3 x = grid.position(p);
        const Mat3& gm = metric[p];
        const Mat3 gi = gm.inverse();
        const auto gamma = christoffel(gm, g.d_eval(x));
        const Vec3& du = ctx.grad[p];
        Mat3 Hc = hess[p];
        for (int k = 0; k < 3; ++k) Hc -= gamma[k] * du[k];
        const double gn = ctx.gnorm[p];
        if (gn <= 0.0) {
            ctx.H[p] = ctx.A_sq[p] = ctx.A_ring_sq[p] = ctx.tan_grad_sq[p] = 0.0;
            continue;
        }
        const Vec3 nu_up = gi * du / gn;
        const Vec3 nu_dn = du / gn;
        const double hnn = nu_up.dot(Hc * nu_up);
        const double lap = gi.cwiseProduct(Hc).sum();
        const double H = (-lap + hnn) / gn;
        const Mat3 S = gi * Hc;
        const Mat3 Pi = Mat3::Identity() - nu_up * nu_dn.transpose();
        const Mat3 M = Pi * S * Pi;
        const double A2 = (M * M).trace() / (gn * gn);
        const Vec3 v = Hc * nu_up;
        ctx.H[p] = H;
        ctx.A_sq[p] = A2;
        ctx.A_ring_sq[p] = std::max(0.0, A2 - 0.5 * H * H);
        ctx.tan_grad_sq[p] = std::max(0.0, v.dot(gi * v) - hnn * hnn);
    }
    return ctx;
}

BandResult band_integral(const LevelContext& ctx, double c, double d, const NodeIntegrand& f) {
    BandResult res;
    if (d < c) std::swap(c, d);
    // u takes no values outside [u_min, u_max]: a band reaching past either end is open there
    if (c <= ctx.u_min) c = -std::numeric_limits<double>::infinity();
    if (d >= ctx.u_max) d = std::numeric_limits<double>::infinity();
    const int nr = ctx.u.grid.nr();
    double acc = 0.0, wsum = 0.0, rng = 0.0;
    ctx.for_nodes_meeting(c, d, [&](std::size_t p) {
        const double w = ctx.band_weight(p, c, d);
        if (w <= 0.0) return;
        acc += w * f(p) * ctx.dv[p];
        wsum += w;
        rng += w * ctx.width[p];
        const int i = ctx.layer(p);
        if (i == 0 || i == nr - 1) res.touches_boundary = true;
    });
    res.value = acc;
    res.empty = wsum == 0.0;
    res.cells_across = rng > 0.0 && std::isfinite(d - c) ? (d - c) / (rng / wsum) : 0.0;
    return res;
}

BandResult band_integral(const GridFunction& u, const MetricField& g, double c, double d, const NodeIntegrand& f) {
    return band_integral(make_level_context(u, g, false), c, d, f);
}

namespace {

double band_average(const LevelContext& ctx, double level, double delta, const NodeIntegrand& f, bool& boundary) {
    const double c = level - delta, d = level + delta;
    const int nr = ctx.u.grid.nr();
    double acc = 0.0;
    ctx.for_nodes_meeting(c, d, [&](std::size_t p) {
        const double w = ctx.band_weight(p, c, d);
        if (w <= 0.0) return;
        if (ctx.gnorm[p] < ctx.grad_floor)
            throw DomainError("degenerate level " + std::to_string(level) + ": |grad u| below floor at " +
                              describe(ctx.u.grid.position(p)));
        acc += w * f(p) * ctx.gnorm[p] * ctx.dv[p];
        const int i = ctx.layer(p);
        if (i == 0 || i == nr - 1) boundary = true;
    });
    return acc / (2.0 * delta);
}

}  // namespace

SurfaceResult surface_integral(const LevelContext& ctx, double level, const NodeIntegrand& f,
                               const SurfaceOptions& opt) {
    const double delta = ctx.mean_range_at(level);
    if (delta <= 0.0) throw RangeError("level " + std::to_string(level) + " is not attained on the grid");
    SurfaceResult res;
    res.half_width = delta;
    const double s1 = band_average(ctx, level, delta, f, res.touches_boundary);
    if (!opt.extrapolate) {
        res.value = s1;
        return res;
    }
    // The band average smooths the level profile with variance delta^2/3 plus the
    // kernel variance K w^2/12 (w ~ delta). Doubling delta adds delta^2; remove the
    // total smoothing variance by linear extrapolation.
    const double s2 = band_average(ctx, level, 2.0 * delta, f, res.touches_boundary);
    const double var1 = 1.0 / 3.0 + ctx.kernel_order / 12.0;
    res.value = s1 - var1 * (s2 - s1);
    return res;
}

IntegrandTerms integrand_terms(const LevelContext& ctx, std::size_t p) {
    if (!ctx.has_geometry) throw ArgumentError("level context was built without geometry");
    IntegrandTerms t;
    const double gn = ctx.gnorm[p];
    t.tangential = ctx.tan_grad_sq[p] / (gn * gn);
    t.traceless = 0.5 * ctx.A_ring_sq[p];
    const double q = 2.0 * gn / ctx.u.values[p] - ctx.H[p];
    t.umbilic = 0.75 * q * q;
    return t;
}

}  // namespace lab

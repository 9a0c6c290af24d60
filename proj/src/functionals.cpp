#include "lab/functionals.hpp"

#include "lab/errors.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace lab {

namespace {

constexpr double kPi = boost::math::constants::pi<double>();
constexpr double kLn2 = boost::math::constants::ln_two<double>();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_scale(double a) {
    if (!(a > 0.0)) throw ArgumentError("scale a must be positive, got " + std::to_string(a));
}

void check_y(double y) {
    if (!(y >= 0.0)) throw ArgumentError("weight argument y must be nonnegative, got " + std::to_string(y));
}

template <class Fn>
double gauss_legendre(const Fn& fn, double lo, double hi, int points) {
    if (hi <= lo) return 0.0;
    switch (points) {
        case 8: return boost::math::quadrature::gauss<double, 8>::integrate(fn, lo, hi);
        case 16: return boost::math::quadrature::gauss<double, 16>::integrate(fn, lo, hi);
        default: throw ArgumentError("Gauss-Legendre order must be 8 or 16, got " + std::to_string(points));
    }
}

void require_geometry(const LevelModel& m) {
    if (!m.ctx.has_geometry) throw ArgumentError("level model was built without geometry");
}

double f_at(const LevelModel& m, std::size_t p) { return m.f.empty() ? 0.0 : m.f[p]; }

double S_integral(const LevelModel& m, double level) {
    const auto& c = m.ctx;
    return surface_integral(c, level, [&](std::size_t p) { return c.gnorm[p] * c.gnorm[p] / c.u.values[p]; }).value;
}

// integral of w(u) f |grad u| / u^2 over {c <= u <= d}
double weighted_bulk(const LevelModel& m, double c, double d, const std::function<double(double)>& w) {
    const auto& ctx = m.ctx;
    return band_integral(ctx, c, d, [&](std::size_t p) {
               const double v = ctx.u.values[p];
               return w(v) * f_at(m, p) * ctx.gnorm[p] / (v * v);
           }).value;
}

BandResult cubic_band(const LevelModel& m, double c, double d) {
    const auto& ctx = m.ctx;
    return band_integral(ctx, c, d, [&](std::size_t p) {
        const double q = ctx.gnorm[p] / ctx.u.values[p];
        return q * q * q;
    });
}

void check_cells(const BandResult& b, double c, double d, double min_cells) {
    if (b.cells_across < min_cells)
        throw ResolutionError("band [" + std::to_string(c) + ", " + std::to_string(d) + "] spans " +
                              std::to_string(b.cells_across) + " cells, need " + std::to_string(min_cells));
}

}  // namespace

double weight_phi(double y, double a, double s) {
    check_scale(a);
    check_y(y);
    if (s < 0.0 || s > a) throw ArgumentError("phi shift s must lie in [0, a]");
    const double A = a + s, B = 2.0 * a + 2.0 * s;
    if (y >= 1.0 / A && y <= 1.0 / a) return 0.25 / (A * A) - 0.25 / (B * B);
    if (y >= 1.0 / B && y <= 1.0 / A) return 0.25 * y * y - 0.25 / (B * B);
    return 0.0;
}

double weight_phi1(double y, double a, double s) {
    check_scale(a);
    check_y(y);
    if (s < 0.0 || s > 8.0 * a) throw ArgumentError("phi1 shift s must lie in [0, 8a]");
    const double A = 8.0 * a + s, B = 16.0 * a + 2.0 * s;
    if (y >= 1.0 / A && y <= 1.0 / a) return 0.25 / (A * A) - 0.25 / (B * B);
    if (y >= 1.0 / B && y <= 1.0 / A) return 0.25 * y * y - 0.25 / (B * B);
    return 0.0;
}

double weight_psi(double y, double a) {
    check_scale(a);
    check_y(y);
    if (y >= 1.0 / (4.0 * a) && y <= 1.0 / (2.0 * a)) return 0.5 * a * y * y - 0.25 * y + 1.0 / (32.0 * a);
    if (y >= 1.0 / (2.0 * a) && y <= 1.0 / a) return -0.25 * a * y * y + 0.5 * y - 5.0 / (32.0 * a);
    return 0.0;
}

double weight_psi1(double y, double a) {
    check_scale(a);
    check_y(y);
    if (y >= 1.0 / (32.0 * a) && y <= 1.0 / (16.0 * a)) return 4.0 * a * y * y - 0.25 * y + 1.0 / (256.0 * a);
    if (y >= 1.0 / (16.0 * a) && y <= 1.0 / (8.0 * a)) return -2.0 * a * y * y + 0.5 * y - 5.0 / (256.0 * a);
    if (y >= 1.0 / (8.0 * a) && y <= 1.0 / a) return 3.0 / (256.0 * a);
    return 0.0;
}

std::vector<double> sample_nodes(const ShellGrid& grid, const ScalarFn& f) {
    std::vector<double> out(grid.size());
    for (std::size_t p = 0; p < grid.size(); ++p) out[p] = f(grid.position(p));
    return out;
}

LevelModel make_level_model(const GridFunction& u, const MetricField& g, const ScalarFn& f_field, int kernel_order) {
    LevelModel m;
    m.ctx = make_level_context(u, g, true, kernel_order);
    if (f_field) m.f = sample_nodes(u.grid, f_field);
    return m;
}

LevelModel with_bulk_weight(LevelModel m, std::vector<double> f) {
    if (!f.empty() && f.size() != m.ctx.size()) throw ArgumentError("bulk weight does not match the grid");
    m.f = std::move(f);
    return m;
}

MResult M_of_a(const LevelModel& m0, const ScalarFn& f_field, double a) {
    check_scale(a);
    const auto& ctx = m0.ctx;
    if (1.0 / a >= ctx.u_max)
        throw RangeError("level 1/a = " + std::to_string(1.0 / a) + " is not resolved (max u0 " +
                         std::to_string(ctx.u_max) + ")");
    MResult res;
    res.value = weighted_bulk(m0, 1.0 / a, std::numeric_limits<double>::infinity(), [](double) { return 1.0; });

    // excised core: |grad u0| / u0^2 ~ 1 there, so the missing part is at most max|f| times its volume
    const double rho = m0.grid().rho_in();
    double fmax = 0.0;
    if (f_field) {
        fmax = std::abs(f_field(Vec3::Zero()));
        const Vec3 dirs[] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (double frac : {0.5, 1.0})
            for (const Vec3& d : dirs) fmax = std::max(fmax, std::abs(f_field(frac * rho * d)));
    }
    res.error_bar = fmax * 4.0 * kPi / 3.0 * rho * rho * rho;
    if (res.error_bar > 0.1 * std::abs(res.value)) {
        res.warning = true;
        res.note = "core error bar " + std::to_string(res.error_bar) + " exceeds 10% of M(a) = " +
                   std::to_string(res.value);
    }
    return res;
}

double FValue::recompute() const { return 4.0 * kPi * t - t * t * H_term + t * t * t * G_term; }

FValue F_functional(const LevelModel& m, double t) {
    require_geometry(m);
    if (!(t > 0.0)) throw ArgumentError("F needs t > 0");
    const auto& c = m.ctx;
    const double level = 1.0 / t;
    FValue v;
    v.t = t;
    const auto h = surface_integral(c, level, [&](std::size_t p) { return c.H[p] * c.gnorm[p]; });
    const auto g = surface_integral(c, level, [&](std::size_t p) { return c.gnorm[p] * c.gnorm[p]; });
    v.H_term = h.value;
    v.G_term = g.value;
    v.touches_boundary = h.touches_boundary || g.touches_boundary;
    v.value = v.recompute();
    return v;
}

FTildeValue F_tilde(const LevelModel& m, double a, double t, double M_a) {
    check_scale(a);
    FTildeValue v;
    v.F = F_functional(m, t);
    // {1/t <= u <= 1/a} is empty for t < a
    v.bulk = t > a ? weighted_bulk(m, 1.0 / t, 1.0 / a, [](double) { return 1.0; }) : 0.0;
    v.M_a = M_a;
    v.value = v.recompute();
    return v;
}

namespace {

EValue E_window(const LevelModel& m, double a, double s, double M_a, double base,
                const std::function<double(double)>& weight) {
    const double A = base + s, B = 2.0 * (base + s);
    EValue e;
    e.s = s;
    e.const_term = 2.0 * kPi / A;
    e.S_outer = S_integral(m, 1.0 / B);
    e.S_inner = S_integral(m, 1.0 / A);
    e.M_term = 3.0 * M_a / (16.0 * A * A);
    e.weight_term = weighted_bulk(m, 1.0 / B, 1.0 / a, weight);
    e.value = e.recompute();
    e.direct = kNaN;
    return e;
}

}  // namespace

EValue E_closed(const LevelModel& m, double a, double s, double M_a) {
    require_geometry(m);
    check_scale(a);
    if (s < 0.0 || s > a) throw ArgumentError("E(s) needs s in [0, a]");
    return E_window(m, a, s, M_a, a, [&](double y) { return weight_phi(y, a, s); });
}

EValue E1_closed(const LevelModel& m, double a, double s, double M_a) {
    require_geometry(m);
    check_scale(a);
    if (s < 0.0 || s > 8.0 * a) throw ArgumentError("E1(s) needs s in [0, 8a]");
    return E_window(m, a, s, M_a, 8.0 * a, [&](double y) { return weight_phi1(y, a, s); });
}

double E_direct(const LevelModel& m, double a, double s, double M_a, int points) {
    return gauss_legendre([&](double t) { return F_tilde(m, a, t, M_a).value / (t * t * t); }, a + s,
                          2.0 * (a + s), points);
}

double E1_direct(const LevelModel& m, double a, double s, double M_a, int points) {
    return gauss_legendre([&](double t) { return F_tilde(m, a, t, M_a).value / (t * t * t); }, 8.0 * a + s,
                          2.0 * (8.0 * a + s), points);
}

FunctionalReport E_D_quantities(const LevelModel& m, double a, double M_a, const FunctionalOptions& opt) {
    require_geometry(m);
    check_scale(a);
    FunctionalReport rep;
    rep.a = a;
    rep.M_a = M_a;
    DValue& D = rep.D;
    const auto lo = cubic_band(m, 1.0 / (4.0 * a), 1.0 / (2.0 * a));
    const auto hi = cubic_band(m, 1.0 / (2.0 * a), 1.0 / a);
    check_cells(lo, 1.0 / (4.0 * a), 1.0 / (2.0 * a), opt.min_cells);
    check_cells(hi, 1.0 / (2.0 * a), 1.0 / a, opt.min_cells);
    D.const_term = 2.0 * kPi * kLn2;
    D.band_lo = lo.value;
    D.band_hi = hi.value;
    D.cells_lo = lo.cells_across;
    D.cells_hi = hi.cells_across;
    D.M_term = 3.0 * M_a / (32.0 * a);
    D.weight_term = weighted_bulk(m, 1.0 / (4.0 * a), 1.0 / a, [&](double y) { return weight_psi(y, a); });
    D.value = D.recompute();

    rep.D_fubini = kNaN;
    if (opt.with_fubini || opt.with_direct_E) {
        rep.D_fubini = gauss_legendre(
            [&](double s) {
                EValue e = E_closed(m, a, s, M_a);
                if (opt.with_direct_E) e.direct = E_direct(m, a, s, M_a, opt.quad_points);
                rep.E_values.push_back(e);
                return e.value;
            },
            0.0, a, opt.quad_points);
        std::sort(rep.E_values.begin(), rep.E_values.end(), [](const EValue& x, const EValue& y) { return x.s < y.s; });
    }
    return rep;
}

FunctionalReport D1_quantities(const LevelModel& m, double a, double M_a, const FunctionalOptions& opt) {
    require_geometry(m);
    check_scale(a);
    FunctionalReport rep;
    rep.a = a;
    rep.M_a = M_a;
    D1Value& D = rep.D1;
    const auto lo = cubic_band(m, 1.0 / (32.0 * a), 1.0 / (16.0 * a));
    const auto hi = cubic_band(m, 1.0 / (16.0 * a), 1.0 / (8.0 * a));
    check_cells(lo, 1.0 / (32.0 * a), 1.0 / (16.0 * a), opt.min_cells);
    check_cells(hi, 1.0 / (16.0 * a), 1.0 / (8.0 * a), opt.min_cells);
    D.const_term = 2.0 * kPi * kLn2;
    D.band_lo = lo.value;
    D.band_hi = hi.value;
    D.cells_lo = lo.cells_across;
    D.cells_hi = hi.cells_across;
    D.M_term = 3.0 * M_a / (256.0 * a);
    D.M_term_printed = 3.0 * M_a / 256.0;
    const auto psi1 = [&](double y) { return weight_psi1(y, a); };
    const double ramp = weighted_bulk(m, 1.0 / (32.0 * a), 1.0 / (8.0 * a), psi1);
    D.plateau_term = weighted_bulk(m, 1.0 / (8.0 * a), 1.0 / a, psi1);
    D.plateau_check = 3.0 / (256.0 * a) * weighted_bulk(m, 1.0 / (8.0 * a), 1.0 / a, [](double) { return 1.0; });
    D.weight_term = ramp + D.plateau_term;
    D.value = D.recompute();
    D.value_printed = D.value + D.M_term - D.M_term_printed;

    rep.D1_fubini = kNaN;
    if (opt.with_fubini || opt.with_direct_E) {
        rep.D1_fubini = gauss_legendre(
            [&](double s) {
                EValue e = E1_closed(m, a, s, M_a);
                if (opt.with_direct_E) e.direct = E1_direct(m, a, s, M_a, opt.quad_points);
                rep.E1_values.push_back(e);
                return e.value;
            },
            0.0, 8.0 * a, opt.quad_points);
        std::sort(rep.E1_values.begin(), rep.E1_values.end(),
                  [](const EValue& x, const EValue& y) { return x.s < y.s; });
    }
    return rep;
}

DerivativeIntegrand F_derivative_integrand(const LevelModel& m, const std::vector<double>& R, double t) {
    require_geometry(m);
    if (R.size() != m.ctx.size()) throw ArgumentError("curvature samples do not match the grid");
    const auto& c = m.ctx;
    const double level = 1.0 / t;
    DerivativeIntegrand d;
    d.t = t;
    d.R_half = surface_integral(c, level, [&](std::size_t p) { return 0.5 * R[p]; }).value;
    d.tangential = surface_integral(c, level, [&](std::size_t p) { return integrand_terms(c, p).tangential; }).value;
    d.traceless = surface_integral(c, level, [&](std::size_t p) { return integrand_terms(c, p).traceless; }).value;
    d.umbilic = surface_integral(c, level, [&](std::size_t p) { return integrand_terms(c, p).umbilic; }).value;
    d.area = surface_integral(c, level, [](std::size_t) { return 1.0; }).value;
    d.total = d.R_half + d.tangential + d.traceless + d.umbilic;
    return d;
}

// Rotationally symmetric functionals on the grid.

RotsymModel make_rotsym_model(LevelModel m, std::shared_ptr<const RadialProfile> profile) {
    require_geometry(m);
    RotsymModel rm;
    rm.profile = std::move(profile);
    const auto& P = *rm.profile;
    const double lo = std::min(P.bc().val_in, P.bc().val_out);
    const double hi = std::max(P.bc().val_in, P.bc().val_out);
    const std::size_t n = m.ctx.size();
    rm.inv_bprime.resize(n);
    rm.c3_weight.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
        // discrete u may overshoot the boundary data by round-off
        const double v = std::clamp(m.ctx.u.values[p], lo, hi);
        const double r = P.b_inverse(v);
        const double ib = 1.0 / std::abs(P.b_prime(r));
        rm.inv_bprime[p] = ib;
        rm.c3_weight[p] = P.c3(r) * ib;
    }
    rm.m = std::move(m);
    return rm;
}

ModifiedFValue modified_Fbar(const RotsymModel& rm, double t) {
    const auto& P = *rm.profile;
    const auto& c = rm.m.ctx;
    if (t < P.bc().r_in || t > P.bc().r_out)
        throw RangeError("t = " + std::to_string(t) + " outside the profile range");
    ModifiedFValue v;
    v.t = t;
    v.level = P.b(t);
    const auto B = surface_integral(c, v.level, [&](std::size_t p) { return c.H[p] * c.gnorm[p]; });
    const auto A = surface_integral(c, v.level, [&](std::size_t p) { return c.gnorm[p] * c.gnorm[p]; });
    v.B = B.value;
    v.A = A.value;
    v.touches_boundary = B.touches_boundary || A.touches_boundary;
    v.Fbar = 4.0 * kPi * t - P.c1(t) * v.B + P.c2(t) * v.A;
    return v;
}

ModifiedFValue modified_F(const RotsymModel& rm, double a, double t, double Fbar0_a) {
    ModifiedFValue v = modified_Fbar(rm, t);
    const auto& P = *rm.profile;
    const auto& c = rm.m.ctx;
    v.Fbar0_a = Fbar0_a;
    if (t > a) {
        const double lo = P.b(t), hi = P.b(a);
        v.bulk_R = band_integral(c, lo, hi, [&](std::size_t p) {
                       return f_at(rm.m, p) * c.gnorm[p] * rm.inv_bprime[p];
                   }).value;
        v.bulk_c3 = band_integral(c, lo, hi, [&](std::size_t p) {
                        const double gn = c.gnorm[p];
                        return rm.c3_weight[p] * gn * gn * gn;
                    }).value;
    }
    v.value = v.recompute();
    return v;
}

RotsymD rotsym_D(const RotsymModel& rm, double a, double Fbar0_a, double t_cap, int points) {
    check_scale(a);
    const auto& P = *rm.profile;
    RotsymD out;
    out.t_cap = t_cap;
    const auto integrand = [&](double t) { return modified_F(rm, a, t, Fbar0_a).value / (t * P.c1(t)); };
    const auto window = [&](double base, double s, bool& clipped) {
        const double lo = base + s;
        double hi = 2.0 * (base + s);
        if (hi > t_cap) {
            clipped = true;
            hi = t_cap;
        }
        return gauss_legendre(integrand, lo, hi, points);
    };
    out.D = gauss_legendre(
        [&](double s) {
            const double e = window(a, s, out.D_clipped);
            out.E.emplace_back(s, e);
            return e;
        },
        0.0, a, points);
    out.D1 = gauss_legendre(
        [&](double s) {
            const double e = window(8.0 * a, s, out.D1_clipped);
            out.E1.emplace_back(s, e);
            return e;
        },
        0.0, 8.0 * a, points);
    std::sort(out.E.begin(), out.E.end());
    std::sort(out.E1.begin(), out.E1.end());
    return out;
}

AsymptoticsResult bulk_asymptotics_check(const LevelModel& m0, double f0, const std::vector<double>& a_values) {
    if (a_values.size() < 3) throw ArgumentError("asymptotics sweep needs at least 3 scales");
    const auto& ctx = m0.ctx;
    AsymptoticsResult res;
    std::vector<std::pair<double, double>> bulk_pts, lemma_pts;
    bool bulk_zero = true, lemma_zero = true;
    for (double a : a_values) {
        check_scale(a);
        AsymptoticsPoint pt;
        pt.a = a;
        const double c = 1.0 / (4.0 * a), d = 1.0 / a;
        const auto band = band_integral(ctx, c, d, [&](std::size_t p) {
            const double v = ctx.u.values[p];
            return (f_at(m0, p) - f0) * ctx.gnorm[p] / (v * v);
        });
        pt.bulk = band.value;
        pt.cells = band.cells_across;
        for (std::size_t p = 0; p < ctx.size(); ++p) {
            const double v = ctx.u.values[p];
            if (v < c || v > d) continue;
            pt.lemma_max = std::max(pt.lemma_max, std::abs(ctx.u.grid.position(p).norm() - 1.0 / v));
        }
        bulk_zero = bulk_zero && pt.bulk == 0.0;
        lemma_zero = lemma_zero && pt.lemma_max == 0.0;
        bulk_pts.emplace_back(a, std::abs(pt.bulk));
        lemma_pts.emplace_back(a, pt.lemma_max);
        res.points.push_back(pt);
    }
    res.bulk_vanishes = bulk_zero;
    res.lemma_vanishes = lemma_zero;
    if (!bulk_zero) res.bulk_fit = fit_rate(bulk_pts);
    if (!lemma_zero) res.lemma_fit = fit_rate(lemma_pts);
    return res;
}

}  // namespace lab

#include "lab/errors.hpp"
#include "lab/functionals.hpp"
#include "lab/harness.hpp"

#include <boost/math/constants/constants.hpp>

#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <sstream>

namespace lab {

namespace {

constexpr double kPi = boost::math::constants::pi<double>();

std::string num_str(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

std::vector<Vec3> subsample(const ShellGrid& grid, std::size_t stride) {
    std::vector<Vec3> out;
    for (std::size_t p = 0; p < grid.size(); p += stride) out.push_back(grid.position(p));
    return out;
}

ScalarJet unit_jet(const Vec3&) {
    ScalarJet j;
    j.value = 1.0;
    return j;
}

MetricField base_metric(const std::string& name) {
    if (name == "phi0") return conformal_metric(phi0_jet, Region::ball(1.0)).with_normalized_flag(true);
    if (name == "euclidean") return conformal_metric(unit_jet, Region::ball(1.0)).with_normalized_flag(true);
    throw ConfigError("unknown base metric '" + name + "' (phi0 | euclidean)");
}

/// h(y / L): the same shape stretched to length scale L
SymFieldFn stretched(SymFieldFn h, double L) {
    return [h, L](const Vec3& y) {
        SymJet j = h(y / L);
        for (int k = 0; k < 3; ++k) {
            j.d[k] /= L;
            for (int l = 0; l < 3; ++l) j.dd[k][l] /= L * L;
        }
        return j;
    };
}

ScalarFieldFn conformal_shape(const std::string& name) {
    if (name == "cos5")
        return [](const Vec3& x) {
            ScalarJet j;
            j.value = std::cos(5.0 * x[0]);
            j.grad = Vec3(-5.0 * std::sin(5.0 * x[0]), 0.0, 0.0);
            j.hess(0, 0) = -25.0 * std::cos(5.0 * x[0]);
            return j;
        };
    if (name == "const") return unit_jet;
    throw ConfigError("unknown conformal perturbation '" + name + "' (cos5 | const)");
}

std::vector<std::pair<double, double>> positive_pairs(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > 0.0 && y[i] > 0.0) out.emplace_back(x[i], y[i]);
    return out;
}

/// Fits y against x over the positive entries; records the fit or a note when
/// fewer than three usable points remain.
const FitRecord* add_fit(ExperimentReport& rep, const std::string& name, const std::vector<double>& x,
                         const std::vector<double>& y) {
    const auto pts = positive_pairs(x, y);
    if (pts.size() < 3) {
        rep.notes.push_back("fit '" + name + "' skipped: " + std::to_string(pts.size()) + " positive points");
        return nullptr;
    }
    rep.fits.push_back({name, fit_rate(pts), pts.size()});
    return &rep.fits.back();
}

void slope_check(ExperimentReport& rep, const std::string& check, const std::string& fit, double lo, double hi,
                 double max_residual = std::numeric_limits<double>::infinity()) {
    const FitRecord* f = rep.fit(fit);
    if (!f) {
        rep.add_check(check, false, "no fit for " + fit);
        return;
    }
    const bool ok = f->fit.slope >= lo && f->fit.slope <= hi && f->fit.residual <= max_residual;
    std::string d = fit + " slope " + num_str(f->fit.slope) + " residual " + num_str(f->fit.residual) + ", window [" +
                    num_str(lo) + ", " + num_str(hi) + "]";
    if (std::isfinite(max_residual)) d += ", residual max " + num_str(max_residual);
    rep.add_check(check, ok, d);
}

/// Runs the sweep and rethrows configuration errors; numeric failures mark the report.
template <class T>
std::vector<std::optional<T>> run_sweep(ExperimentReport& rep, const ExperimentConfig& cfg, std::size_t n,
                                        const std::function<T(std::size_t)>& fn,
                                        const std::function<std::string(std::size_t)>& label) {
    std::vector<std::exception_ptr> errs;
    auto out = parallel_map<T>(n, cfg.workers, fn, &errs);
    for (std::size_t i = 0; i < n; ++i) {
        if (!errs[i]) continue;
        try {
            std::rethrow_exception(errs[i]);
        } catch (const ConfigError&) {
            throw;
        } catch (const ArgumentError&) {
            throw;
        } catch (const std::exception& e) {
            rep.solver_failure = true;
            rep.notes.push_back("point " + label(i) + " failed: " + e.what());
        }
    }
    return out;
}

FunctionalOptions functional_options(const ExperimentConfig& cfg) {
    FunctionalOptions fo;
    fo.min_cells = cfg.num("min_cells", fo.min_cells);
    return fo;
}

SolveOptions solve_options(const ExperimentConfig& cfg) {
    SolveOptions so;
    so.rel_tol = cfg.num("solver_tol", so.rel_tol);
    return so;
}

// Green's function of the base metric and its level model with f = R_{g0}.
struct GreenBase {
    MetricField g0;
    GreenResult green;
    LevelModel model;
    ScalarFn R0;
};

GreenBase green_base(const ExperimentConfig& cfg, const MetricField& g0, double r_core) {
    const ShellGrid grid(r_core, 1.0, cfg.cfg.integer("green.nr", cfg.nr), cfg.cfg.integer("green.ntheta", cfg.ntheta),
                         cfg.cfg.integer("green.nphi", cfg.nphi));
    GreenBase b{g0, green_function(g0, grid, solve_options(cfg)), {}, {}};
    b.R0 = [g0](const Vec3& x) { return scalar_curvature(g0, x); };
    b.model = make_level_model(b.green.u0_on_grid(), g0, b.R0);
    return b;
}

// Unit-scale picture w(y) = a u(a y) on the shell [rho_in, rho_out] with u = u0 on both spheres.
struct RescaledBase {
    explicit RescaledBase(MetricField h) : h0(std::move(h)) {}

    double a = 0.0;
    MetricField h0;
    ShellGrid shell;
    GridFunction bc;
    std::vector<double> f;  // a^2 R_{g0}(a y)
    MResult M;              // in the original scale
    double M_r = 0.0;       // M(a) / a
    GridFunction w0;
    LevelModel m0;
    FunctionalReport D, D1;
    int iterations = 0;
};

struct SolvedPoint {
    FunctionalReport D, D1;
    double L2 = 0.0, L4 = 0.0, sup = 0.0;
    int iterations = 0;
    double rel_residual = 0.0;
    double ratio = 0.0;  // ellipticity Lambda / lambda
};

std::shared_ptr<const RescaledBase> rescaled_base(const ExperimentConfig& cfg, const GreenBase& gb, double a) {
    auto b = std::make_shared<RescaledBase>(rescale_metric(gb.g0, a));
    b->a = a;
    b->M = M_of_a(gb.model, gb.R0, a);
    b->M_r = b->M.value / a;
    b->shell = ShellGrid(cfg.num("rho_in"), cfg.num("rho_out"), cfg.nr, cfg.ntheta, cfg.nphi);
    if (b->shell.rho_out() * a > 1.0 + 1e-12)
        throw ConfigError("rescaled shell reaches past the unit ball: rho_out * a = " + num_str(b->shell.rho_out() * a));
    if (b->shell.rho_in() * a < gb.green.e.grid.rho_in())
        throw ConfigError("rescaled shell reaches into the excised Green core");
    b->bc = GridFunction{b->shell, std::vector<double>(b->shell.size(), 0.0)};
    const auto& g = b->shell;
    for (int i : {0, g.nr() - 1})
        for (int j = 0; j < g.ntheta(); ++j)
            for (int k = 0; k < g.nphi(); ++k) {
                const Vec3 y = g.position(i, j, k);
                b->bc[g.index(i, j, k)] = a * gb.green.u0(a * y);
            }
    const auto R0 = gb.R0;
    b->f = sample_nodes(g, [&](const Vec3& y) { return a * a * R0(a * y); });
    const auto samples = subsample(g, 7);
    const auto sol = solve_dirichlet(coefficient_field(b->h0, samples), g, nullptr, b->bc, solve_options(cfg));
    b->w0 = sol.u;
    b->iterations = sol.iterations;
    b->m0 = with_bulk_weight(make_level_model(b->w0, b->h0), b->f);
    const auto fo = functional_options(cfg);
    b->D = E_D_quantities(b->m0, 1.0, b->M_r, fo);
    b->D1 = D1_quantities(b->m0, 1.0, b->M_r, fo);
    return b;
}

SolvedPoint solve_rescaled(const ExperimentConfig& cfg, const RescaledBase& b, const MetricField& h) {
    const auto samples = subsample(b.shell, 7);
    const auto coef = coefficient_field(h, samples);
    const auto sol = solve_dirichlet(coef, b.shell, nullptr, b.bc, solve_options(cfg));
    SolvedPoint out;
    out.iterations = sol.iterations;
    out.rel_residual = sol.rel_residual;
    out.ratio = coef.Lambda() / coef.lambda();
    const auto m = with_bulk_weight(make_level_model(sol.u, h), b.f);
    const auto fo = functional_options(cfg);
    out.D = E_D_quantities(m, 1.0, b.M_r, fo);
    out.D1 = D1_quantities(m, 1.0, b.M_r, fo);
    const RadialWindow omega_p{cfg.num("omega_prime_in"), cfg.num("omega_prime_out")};
    out.L2 = lp_gradient_error(sol.u, b.w0, b.h0, 2.0, RadialWindow{});
    out.L4 = lp_gradient_error(sol.u, b.w0, b.h0, 4.0, omega_p);
    out.sup = sup_error(sol.u, b.w0, omega_p);
    return out;
}

std::vector<std::string> d_columns(const std::string& p) {
    return {p + "D",        p + "D_const",   p + "D_band_lo", p + "D_band_hi",  p + "D_M",        p + "D_weight",
            p + "D1",       p + "D1_const",  p + "D1_band_lo", p + "D1_band_hi", p + "D1_M",      p + "D1_weight",
            p + "D1_plateau", p + "D1_plateau_check", p + "D1_printed", p + "cells_lo", p + "cells_hi"};
}

void append_d(std::vector<double>& row, const FunctionalReport& D, const FunctionalReport& D1) {
    const auto& d = D.D;
    const auto& e = D1.D1;
    for (double v : {d.value, d.const_term, d.band_lo, d.band_hi, d.M_term, d.weight_term, e.value, e.const_term,
                     e.band_lo, e.band_hi, e.M_term, e.weight_term, e.plateau_term, e.plateau_check, e.value_printed,
                     std::min(d.cells_lo, e.cells_lo), std::min(d.cells_hi, e.cells_hi)})
        row.push_back(v);
}

double clamp_scale(double a, double lo, double hi, bool& limited) {
    limited = a < lo || a > hi;
    return std::clamp(a, lo, hi);
}

// inf of R over a sample set that includes the known loci of the family
struct SampleSet {
    std::vector<Vec3> points;
};

SampleSet sharpness_samples(const ExperimentConfig& cfg, double r) {
    SampleSet s;
    const int radial = cfg.cfg.integer("sharpness.radial_samples");
    const int cube = cfg.cfg.integer("sharpness.cube_samples");
    const int random = cfg.cfg.integer("sharpness.random_samples");
    const Vec3 dirs[] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, Vec3(1, 1, 1).normalized(), Vec3(1, -2, 0.5).normalized()};
    for (const Vec3& d : dirs)
        for (int i = 0; i < radial; ++i) s.points.push_back((static_cast<double>(i) / radial) * d);
    // regime boundaries
    for (double q : {0.0, 0.5 * r, r})
        for (const Vec3& d : dirs) s.points.push_back(q * d);
    for (int i = 0; i < cube; ++i)
        for (int j = 0; j < cube; ++j)
            for (int k = 0; k < cube; ++k) {
                const Vec3 x(-1.0 + 2.0 * i / (cube - 1), -1.0 + 2.0 * j / (cube - 1), -1.0 + 2.0 * k / (cube - 1));
                if (x.norm() < 1.0) s.points.push_back(x);
            }
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int n = 0; n < random;) {
        const Vec3 x(U(rng), U(rng), U(rng));
        if (x.norm() >= 1.0) continue;
        s.points.push_back(x);
        ++n;
    }
    return s;
}

}  // namespace

ExperimentReport run_sharpness(const ExperimentConfig& cfg) {
    ExperimentReport rep;
    rep.experiment = "sharpness";
    const auto eps = cfg.list("epsilon");
    const double a_coeff = cfg.num("a_coeff");
    if (eps.empty()) throw ConfigError("sharpness.epsilon is empty");

    struct Row {
        double eps, r, dist, infR, R0, diff, bound;
        int below_inner, below_transition, below_outer;
        double min_inner, min_transition, min_outer;
    };
    auto rows = run_sweep<Row>(
        rep, cfg, eps.size(),
        [&](std::size_t i) {
            const double e = eps[i];
            const auto pair = sharpness_pair(e, a_coeff);
            const double r = pair.family.r;
            const auto samples = sharpness_samples(cfg, r);
            Row row{};
            row.eps = e;
            row.r = r;
            row.dist = c0_distance(pair.g, pair.g0, samples.points);
            row.R0 = scalar_curvature(pair.g0, Vec3::Zero());
            row.infR = std::numeric_limits<double>::infinity();
            row.min_inner = row.min_transition = row.min_outer = std::numeric_limits<double>::infinity();
            const double se = std::sqrt(e);
            for (const Vec3& x : samples.points) {
                const double R = scalar_curvature(pair.g, x);
                row.infR = std::min(row.infR, R);
                const double s = x.norm();
                if (s <= 0.5 * r) {
                    row.min_inner = std::min(row.min_inner, R);
                    if (R < a_coeff * se) ++row.below_inner;
                } else if (s <= r) {
                    row.min_transition = std::min(row.min_transition, R);
                    if (R < se / 8.0) ++row.below_transition;
                } else {
                    row.min_outer = std::min(row.min_outer, R);
                    if (R < se) ++row.below_outer;
                }
            }
            row.diff = row.infR - row.R0;
            row.bound = se / 8.0;
            return row;
        },
        [&](std::size_t i) { return "epsilon=" + num_str(eps[i]); });

    Table t{"sweep",
            {"epsilon", "r", "c0_distance", "inf_R", "R0_origin", "inf_R_minus_R0", "bound_eighth_sqrt_eps",
             "flag_inf_ge_bound", "min_R_inner", "min_R_transition", "min_R_outer", "violations_inner",
             "violations_transition", "violations_outer"},
            {}};
    bool all_flags = true, all_regimes = true;
    std::vector<double> dist, diff;
    for (const auto& r : rows) {
        if (!r) continue;
        const bool flag = r->infR >= r->bound;
        all_flags = all_flags && flag;
        all_regimes = all_regimes && r->below_inner == 0 && r->below_transition == 0 && r->below_outer == 0;
        t.add({r->eps, r->r, r->dist, r->infR, r->R0, r->diff, r->bound, flag ? 1.0 : 0.0, r->min_inner,
               r->min_transition, r->min_outer, double(r->below_inner), double(r->below_transition),
               double(r->below_outer)});
        dist.push_back(r->dist);
        diff.push_back(r->diff);
    }
    rep.tables.push_back(t);
    if (rep.solver_failure) return rep;

    add_fit(rep, "inf_R_minus_R0_vs_c0_distance", dist, diff);
    slope_check(rep, "sharpness_exponent", "inf_R_minus_R0_vs_c0_distance", cfg.num("slope_min"),
                cfg.num("slope_max"));
    rep.add_check("inf_R_lower_bound", all_flags, "inf R_g >= sqrt(eps)/8 at every sweep point");
    rep.add_check("regime_bounds", all_regimes,
                  "pointwise: R >= sqrt(eps) outside B_r, >= a_coeff sqrt(eps) in B_{r/2}, >= sqrt(eps)/8 between");
    return rep;
}

ExperimentReport run_stability(const ExperimentConfig& cfg) {
    ExperimentReport rep;
    rep.experiment = "stability";
    const auto eps = cfg.list("epsilon");
    const ARule rule = ARule::parse(cfg.str("a_rule"));
    const MetricField g0 = base_metric(cfg.str("base"));
    const double L = cfg.num("h_scale");
    const SymFieldFn shape = stretched(perturbation_shape(cfg.str("h")), L);
    const double rho_in = cfg.num("rho_in"), rho_out = cfg.num("rho_out");

    const GreenBase gb = green_base(cfg, g0, cfg.num("green_r_core"));
    // resolvable scales: the rescaled shell must sit between the Green core and the unit sphere
    const double a_lo = gb.green.e.grid.rho_in() / rho_in, a_hi = 1.0 / rho_out;

    std::vector<double> scales(eps.size());
    std::vector<bool> limited(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) {
        bool lim = false;
        scales[i] = rule.quarter_power ? clamp_scale(std::pow(eps[i], 0.25), a_lo, a_hi, lim) : rule.a;
        limited[i] = lim;
        if (lim) rep.notes.push_back("resolution-limited: a = eps^(1/4) clamped to " + num_str(scales[i]) +
                                     " at eps = " + num_str(eps[i]));
    }
    std::map<double, std::shared_ptr<const RescaledBase>> bases;
    for (double a : scales)
        if (!bases.count(a)) bases[a] = rescaled_base(cfg, gb, a);
    for (const auto& [a, b] : bases) {
        if (b->M.warning) rep.notes.push_back("M(a) at a = " + num_str(a) + ": " + b->M.note);
        rep.add_scalar("M_a@" + num_str(a), b->M.value);
        rep.add_scalar("M_a_error_bar@" + num_str(a), b->M.error_bar);
    }

    auto points = run_sweep<SolvedPoint>(
        rep, cfg, eps.size(),
        [&](std::size_t i) {
            const auto& b = *bases.at(scales[i]);
            const auto samples = subsample(b.shell, 7);
            return solve_rescaled(cfg, b, perturbation_family(b.h0, shape, eps[i], samples));
        },
        [&](std::size_t i) { return "epsilon=" + num_str(eps[i]); });

    Table t{"sweep", {"epsilon", "a", "resolution_limited"}, {}};
    for (const auto& c : d_columns("")) t.columns.push_back(c);
    for (const auto& c : d_columns("base_")) t.columns.push_back(c);
    for (const char* c : {"abs_D_minus_D0", "abs_D1_minus_D10", "L2_grad_omega", "L4_grad_omega_prime",
                          "sup_omega_prime", "ellipticity_ratio", "iterations", "rel_residual", "M_a"})
        t.columns.push_back(c);
    std::vector<double> E, dD, dD1, l2, l4, sup;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!points[i]) continue;
        const auto& p = *points[i];
        const auto& b = *bases.at(scales[i]);
        std::vector<double> row{eps[i], scales[i], limited[i] ? 1.0 : 0.0};
        append_d(row, p.D, p.D1);
        append_d(row, b.D, b.D1);
        const double a1 = std::abs(p.D.D.value - b.D.D.value), a2 = std::abs(p.D1.D1.value - b.D1.D1.value);
        for (double v : {a1, a2, p.L2, p.L4, p.sup, p.ratio, double(p.iterations), p.rel_residual, b.M.value})
            row.push_back(v);
        t.add(row);
        E.push_back(eps[i]);
        dD.push_back(a1);
        dD1.push_back(a2);
        l2.push_back(p.L2);
        l4.push_back(p.L4);
        sup.push_back(p.sup);
    }
    rep.tables.push_back(t);
    if (rep.solver_failure) return rep;

    const double smin = cfg.num("slope_min"), rmax = cfg.num("residual_max"), mmin = cfg.num("meyers_slope_min");
    const double inf = std::numeric_limits<double>::infinity();
    add_fit(rep, "D_minus_D0_vs_eps", E, dD);
    add_fit(rep, "D1_minus_D10_vs_eps", E, dD1);
    add_fit(rep, "L2_grad_vs_eps", E, l2);
    add_fit(rep, "L4_grad_vs_eps", E, l4);
    add_fit(rep, "sup_vs_eps", E, sup);
    slope_check(rep, "D_linear_rate", "D_minus_D0_vs_eps", smin, inf, rmax);
    slope_check(rep, "D1_linear_rate", "D1_minus_D10_vs_eps", smin, inf, rmax);
    slope_check(rep, "L2_gradient_rate", "L2_grad_vs_eps", mmin, inf);
    slope_check(rep, "L4_gradient_rate", "L4_grad_vs_eps", mmin, inf);
    slope_check(rep, "sup_rate", "sup_vs_eps", mmin, inf);

    // L2 error / eps stays within a factor of its value at the largest eps
    const double ratio_max = cfg.num("meyers_ratio_max");
    std::size_t top = 0;
    for (std::size_t i = 0; i < E.size(); ++i)
        if (E[i] > E[top]) top = i;
    bool bounded = !E.empty() && E[top] > 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; bounded && i < E.size(); ++i) {
        if (E[i] <= 0.0) continue;
        const double q = (l2[i] / E[i]) / (l2[top] / E[top]);
        worst = std::max(worst, q);
    }
    bounded = bounded && worst <= ratio_max;
    rep.add_check("L2_over_eps_bounded", bounded,
                  "max ratio of (L2/eps) to its value at the largest eps: " + num_str(worst));
    return rep;
}

namespace {

struct RotsymBase {
    explicit RotsymBase(RadialMetricSpec s) : spec(s), g0(warped_metric(s)) {}

    RadialMetricSpec spec;
    std::shared_ptr<const RadialProfile> profile;
    MetricField g0;
    ShellGrid grid;
    GridFunction bc;
    std::vector<double> R;
    RotsymModel rm0;
    double Fbar0_a = 0.0;
    RotsymD D0;
};

GridFunction profile_bc(const ShellGrid& g, const RadialProfile& p) {
    GridFunction bc{g, std::vector<double>(g.size(), 0.0)};
    for (int i : {0, g.nr() - 1}) {
        const double v = i == 0 ? p.bc().val_in : p.bc().val_out;
        for (int j = 0; j < g.ntheta(); ++j)
            for (int k = 0; k < g.nphi(); ++k) bc[g.index(i, j, k)] = v;
    }
    return bc;
}

}  // namespace

ExperimentReport run_rotsym(const ExperimentConfig& cfg) {
    ExperimentReport rep;
    rep.experiment = "rotsym";
    const double a = cfg.num("a");
    const RadialBC rbc{cfg.num("r_in"), cfg.num("val_in"), cfg.num("r_out"), cfg.num("val_out")};
    const auto eps = cfg.list("epsilon");
    const ScalarFieldFn chi = conformal_shape(cfg.str("chi"));
    const int levels = static_cast<int>(cfg.num("levels"));
    const double span = cfg.num("span");
    const int cap_layers = static_cast<int>(cfg.num("cap_layers"));
    const int points = static_cast<int>(cfg.num("quad_points"));
    if (levels < 2) throw ConfigError("rotsym.levels must be at least 2");

    RotsymBase b(radial_spec_by_name(cfg.str("psi"), rbc.r_in, rbc.r_out));
    b.profile = std::make_shared<RadialProfile>(b.spec, rbc);
    b.grid = ShellGrid(rbc.r_in, rbc.r_out, cfg.nr, cfg.ntheta, cfg.nphi);
    b.bc = profile_bc(b.grid, *b.profile);
    const auto samples = subsample(b.grid, 7);
    const auto sol0 = solve_dirichlet(coefficient_field(b.g0, samples), b.grid, nullptr, b.bc, solve_options(cfg));
    b.R = sample_nodes(b.grid, [&](const Vec3& x) { return warped_curvature(b.spec, x.norm()); });
    b.rm0 = make_rotsym_model(with_bulk_weight(make_level_model(sol0.u, b.g0), b.R), b.profile);
    b.Fbar0_a = modified_Fbar(b.rm0, a).Fbar;
    const double t_cap = b.grid.r(b.grid.nr() - 1 - cap_layers);
    b.D0 = rotsym_D(b.rm0, a, b.Fbar0_a, t_cap, points);
    double prof_err = 0.0;
    for (std::size_t p = 0; p < b.grid.size(); ++p)
        prof_err = std::max(prof_err, std::abs(sol0.u[p] - b.profile->b(b.grid.position(p).norm())));
    rep.add_scalar("solve_vs_profile_max", prof_err);
    rep.add_scalar("Fbar0_a_3d", b.Fbar0_a);
    rep.add_scalar("Fbar0_a_1d", model_Fbar_1d(*b.profile, a));
    rep.add_scalar("t_cap", t_cap);

    // identity on the unperturbed pair
    Table ft{"identity",
             {"t", "level", "Ftilde0_1d", "rel_1d", "Ftilde0_3d", "rel_3d", "Fbar", "B", "A", "bulk_R", "bulk_c3",
              "touches_boundary"},
             {}};
    double max1 = 0.0, max3 = 0.0;
    for (int i = 0; i < levels; ++i) {
        const double t = a * std::pow(span, static_cast<double>(i) / (levels - 1));
        const double v1 = model_Ftilde_1d(*b.profile, a, t);
        const auto v3 = modified_F(b.rm0, a, t, b.Fbar0_a);
        const double n = 4.0 * kPi * t;
        max1 = std::max(max1, std::abs(v1) / n);
        max3 = std::max(max3, std::abs(v3.value) / n);
        ft.add({t, v3.level, v1, v1 / n, v3.value, v3.value / n, v3.Fbar, v3.B, v3.A, v3.bulk_R, v3.bulk_c3,
                v3.touches_boundary ? 1.0 : 0.0});
    }
    rep.tables.push_back(ft);
    rep.add_check("identity_1d", max1 <= cfg.num("identity_tol_1d"),
                  "max |Ftilde0| / (4 pi t) on the radial path: " + num_str(max1));
    rep.add_check("identity_3d", max3 <= cfg.num("identity_tol_3d"),
                  "max |Ftilde0| / (4 pi t) on the grid path: " + num_str(max3));

    // Euclidean radial profile against its closed form
    {
        const RadialBC ebc{};
        const RadialProfile ep(euclidean_radial(ebc.r_in, ebc.r_out), ebc);
        double err = 0.0;
        for (int i = 0; i <= 200; ++i) {
            const double r = ebc.r_in + (ebc.r_out - ebc.r_in) * i / 200.0;
            err = std::max(err, std::abs(ep.b(r) - (100.0 / 99.0) * (1.0 / r - 1.0)));
        }
        rep.add_scalar("euclidean_profile_error", err);
        rep.add_check("euclidean_profile", err <= cfg.num("profile_tol"),
                      "max |b(r) - (100/99)(1/r - 1)| over 201 radii: " + num_str(err));
    }

    auto pts = run_sweep<RotsymD>(
        rep, cfg, eps.size(),
        [&](std::size_t i) {
            const MetricField g = conformal_perturbation(b.g0, chi, eps[i], samples);
            const auto sol = solve_dirichlet(coefficient_field(g, samples), b.grid, nullptr, b.bc, solve_options(cfg));
            const auto rm = make_rotsym_model(with_bulk_weight(make_level_model(sol.u, g), b.R), b.profile);
            return rotsym_D(rm, a, b.Fbar0_a, t_cap, points);
        },
        [&](std::size_t i) { return "epsilon=" + num_str(eps[i]); });

    Table t{"sweep",
            {"epsilon", "D", "D1", "D0", "D10", "abs_D_minus_D0", "abs_D1_minus_D10", "D_clipped", "D1_clipped"},
            {}};
    std::vector<double> E, dD, dD1;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!pts[i]) continue;
        const auto& p = *pts[i];
        const double x = std::abs(p.D - b.D0.D), y = std::abs(p.D1 - b.D0.D1);
        t.add({eps[i], p.D, p.D1, b.D0.D, b.D0.D1, x, y, p.D_clipped ? 1.0 : 0.0, p.D1_clipped ? 1.0 : 0.0});
        E.push_back(eps[i]);
        dD.push_back(x);
        dD1.push_back(y);
    }
    rep.tables.push_back(t);
    Table et{"E_base", {"window", "s", "E"}, {}};
    for (const auto& [s, v] : b.D0.E) et.add({0.0, s, v});
    for (const auto& [s, v] : b.D0.E1) et.add({1.0, s, v});
    rep.tables.push_back(et);
    if (b.D0.D1_clipped || b.D0.D_clipped)
        rep.notes.push_back("D windows cut at t_cap = " + num_str(t_cap) + " (outer boundary layers excluded)");
    if (rep.solver_failure) return rep;

    const double inf = std::numeric_limits<double>::infinity();
    add_fit(rep, "D_minus_D0_vs_eps", E, dD);
    add_fit(rep, "D1_minus_D10_vs_eps", E, dD1);
    slope_check(rep, "D_linear_rate", "D_minus_D0_vs_eps", cfg.num("slope_min"), inf);
    slope_check(rep, "D1_linear_rate", "D1_minus_D10_vs_eps", cfg.num("slope_min"), inf);
    return rep;
}

ExperimentReport run_inmeasure(const ExperimentConfig& cfg) {
    ExperimentReport rep;
    rep.experiment = "inmeasure";
    const auto ks = cfg.cfg.int_list("inmeasure.k");
    const ARule rule = ARule::parse(cfg.str("a_rule"));
    if (rule.quarter_power) throw ConfigError("inmeasure needs a fixed scale");
    const double a = rule.a;
    InMeasureSpec spec;
    spec.delta = cfg.num("delta");
    spec.center = Vec3(cfg.num("center_x"), 0.0, 0.0);
    const MetricField g0 = base_metric(cfg.str("base"));

    const GreenBase gb = green_base(cfg, g0, cfg.num("green_r_core"));
    const auto base = rescaled_base(cfg, gb, a);
    const auto& b = *base;

    struct Row {
        SolvedPoint p;
        double c0 = 0.0, bilip = 0.0;
        double support_nodes = 0.0;
    };
    auto rows = run_sweep<Row>(
        rep, cfg, ks.size(),
        [&](std::size_t i) {
            const MetricField gk = shrinking_support_family(g0, ks[i], spec);
            const MetricField hk = rescale_metric(gk, a);
            Row r;
            r.p = solve_rescaled(cfg, b, hk);
            // c0 distance in the original scale on the grid nodes plus the bump center
            std::vector<Vec3> pts;
            const double rho = std::ldexp(1.0, -ks[i]);
            for (std::size_t q = 0; q < b.shell.size(); ++q) {
                const Vec3 x = a * b.shell.position(q);
                pts.push_back(x);
                if ((x - spec.center).norm() < rho) r.support_nodes += 1.0;
            }
            pts.push_back(spec.center);
            r.c0 = c0_distance(gk, g0, pts);
            r.bilip = bilipschitz_constant(gk, g0, pts);
            return r;
        },
        [&](std::size_t i) { return "k=" + std::to_string(ks[i]); });

    Table t{"sweep", {"k", "support_radius"}, {}};
    for (const auto& c : d_columns("")) t.columns.push_back(c);
    for (const char* c : {"base_D", "base_D1", "abs_D_minus_D0", "abs_D1_minus_D10", "L2_grad_omega",
                          "sup_omega_prime", "c0_distance", "bilipschitz", "support_nodes", "iterations"})
        t.columns.push_back(c);
    std::vector<double> dD, l2, sup;
    bool c0_ok = true, bl_ok = true;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (!rows[i]) continue;
        const auto& r = *rows[i];
        std::vector<double> row{double(ks[i]), std::ldexp(1.0, -ks[i])};
        append_d(row, r.p.D, r.p.D1);
        const double x = std::abs(r.p.D.D.value - b.D.D.value), y = std::abs(r.p.D1.D1.value - b.D1.D1.value);
        for (double v : {b.D.D.value, b.D1.D1.value, x, y, r.p.L2, r.p.sup, r.c0, r.bilip, r.support_nodes,
                         double(r.p.iterations)})
            row.push_back(v);
        t.add(row);
        dD.push_back(x);
        l2.push_back(r.p.L2);
        sup.push_back(r.p.sup);
        c0_ok = c0_ok && r.c0 >= 0.5 * spec.delta && r.c0 <= spec.delta * (1.0 + 1e-12);
        bl_ok = bl_ok && r.bilip <= 1.0 + 2.0 * spec.delta;
        if (r.support_nodes == 0.0)
            rep.notes.push_back("k = " + std::to_string(ks[i]) + ": no grid node inside the bump support");
    }
    rep.tables.push_back(t);
    if (rep.solver_failure) return rep;

    const double tie = cfg.num("tie_tol");
    const int ties = static_cast<int>(cfg.num("ties_allowed"));
    auto dec = [&](const std::string& name, const std::vector<double>& v) {
        int used = 0;
        const bool ok = decreasing_with_ties(v, tie, ties, &used);
        std::string d = name + " along k:";
        for (double x : v) d += " " + num_str(x);
        d += " (ties " + std::to_string(used) + ")";
        rep.add_check(name + "_decreasing", ok, d);
    };
    dec("D_minus_D0", dD);
    dec("L2_grad", l2);
    dec("sup", sup);
    rep.add_check("c0_distance_stays", c0_ok, "c0_distance(g_k, g0) in [delta/2, delta] for every k");
    rep.add_check("bilipschitz_budget", bl_ok, "identity map bi-Lipschitz constant <= 1 + 2 delta for every k");
    return rep;
}

ExperimentReport run_asymptotics(const ExperimentConfig& cfg) {
    ExperimentReport rep;
    rep.experiment = "asymptotics";
    const auto as = cfg.list("a");
    const MetricField g0 = base_metric(cfg.str("base"));
    const GreenBase gb = green_base(cfg, g0, cfg.num("green_r_core"));
    const double f0 = gb.R0(Vec3::Zero());
    const auto res = bulk_asymptotics_check(gb.model, f0, as);
    const double tf = cfg.num("t_factor");

    Table t{"sweep",
            {"a", "bulk", "lemma_max", "cells", "t", "Ftilde0", "F", "H_term", "G_term", "Ftilde_bulk", "M_a",
             "M_error_bar", "Ftilde0_over_t5"},
            {}};
    std::vector<double> scaled;
    double null_err = 0.0;  // max |Ftilde0| / (4 pi t)
    for (const auto& p : res.points) {
        const auto M = M_of_a(gb.model, gb.R0, p.a);
        if (M.warning) rep.notes.push_back("M(a) at a = " + num_str(p.a) + ": " + M.note);
        const double tt = tf * p.a;
        const auto F = F_tilde(gb.model, p.a, tt, M.value);
        const double q = F.value / std::pow(tt, 5);
        scaled.push_back(std::abs(q));
        null_err = std::max(null_err, std::abs(F.value) / (4.0 * kPi * tt));
        t.add({p.a, p.bulk, p.lemma_max, p.cells, tt, F.value, F.F.value, F.F.H_term, F.F.G_term, F.bulk, M.value,
               M.error_bar, q});
    }
    rep.tables.push_back(t);
    rep.add_scalar("R0_origin", f0);
    rep.add_scalar("green_e0", gb.green.e0);
    rep.add_scalar("green_e0_check", gb.green.e0_check);
    if (gb.green.warning) rep.notes.push_back("Green's function: " + gb.green.note);

    if (res.bulk_vanishes) {
        // flat base: R is exactly zero, the rest vanishes up to solver and grid error
        double lemma = 0.0;
        for (const auto& p : res.points) lemma = std::max(lemma, p.lemma_max);
        const double lt = cfg.num("lemma_zero_tol", 1e-8), nt = cfg.num("null_tol", 2e-2);
        rep.add_scalar("lemma_max", lemma);
        rep.add_scalar("Ftilde0_null_error", null_err);
        rep.add_check("vanishing_model", lemma <= lt && null_err <= nt,
                      "bulk integral exactly 0, max ||x| - 1/u0| = " + num_str(lemma) + " (tol " + num_str(lt) +
                          "), max |Ftilde0|/(4 pi t) = " + num_str(null_err) + " (tol " + num_str(nt) + ")");
        return rep;
    }
    const double inf = std::numeric_limits<double>::infinity();
    if (!res.bulk_vanishes) rep.fits.push_back({"bulk_vs_a", res.bulk_fit, res.points.size()});
    if (!res.lemma_vanishes) rep.fits.push_back({"lemma_vs_a", res.lemma_fit, res.points.size()});
    slope_check(rep, "bulk_order", "bulk_vs_a", cfg.num("bulk_order_min"), inf);
    slope_check(rep, "lemma_order", "lemma_vs_a", cfg.num("lemma_order_min"), cfg.num("lemma_order_max"));
    const double mx = *std::max_element(scaled.begin(), scaled.end());
    const double mn = *std::min_element(scaled.begin(), scaled.end());
    const double spread = mn > 0.0 ? mx / mn : inf;
    rep.add_scalar("Ftilde0_over_t5_spread", spread);
    rep.add_check("Ftilde0_over_t5_bounded", spread <= cfg.num("ftilde_spread_max"),
                  "max/min of |Ftilde0(t)|/t^5 over the sweep: " + num_str(spread));
    return rep;
}

namespace {

struct NullRun {
    std::vector<FValue> F;
    FunctionalReport D, D1;
    double F_err = 0.0;  // max |F| / (4 pi t)
    double terms[3] = {0.0, 0.0, 0.0};  // normalized integrand term maxima
};

NullRun null_suite(const ExperimentConfig& cfg, const ShellGrid& grid, bool with_terms) {
    const MetricField g = base_metric("euclidean").with_domain(Region::shell(grid.rho_in(), grid.rho_out()));
    const GridFunction u = sample(grid, [](const Vec3& x) { return 1.0 / x.norm(); });
    const LevelModel m = make_level_model(u, g);
    NullRun out;
    const int levels = cfg.cfg.integer("selftest.null_levels");
    const double span = cfg.num("null_span");
    for (int i = 0; i < levels; ++i) {
        const double t = std::pow(span, static_cast<double>(i) / (levels - 1));
        const auto F = F_functional(m, t);
        out.F.push_back(F);
        out.F_err = std::max(out.F_err, std::abs(F.value) / (4.0 * kPi * t));
    }
    const auto fo = functional_options(cfg);
    out.D = E_D_quantities(m, 1.0, 0.0, fo);
    out.D1 = D1_quantities(m, 1.0, 0.0, fo);
    if (with_terms) {
        // pointwise over the working band, away from the one-sided layers
        const double r_lo = 1.0, r_hi = span;
        for (std::size_t p = 0; p < grid.size(); ++p) {
            const int i = grid.ijk(p)[0];
            if (i < 2 || i > grid.nr() - 3) continue;
            const double r = grid.r(i);
            if (r < r_lo || r > r_hi) continue;
            const auto tm = integrand_terms(m.ctx, p);
            // round-sphere sizes: (2/r)^2, |A|^2/2 = 1/r^2, 3/4 (2/r)^2
            out.terms[0] = std::max(out.terms[0], tm.tangential * r * r / 4.0);
            out.terms[1] = std::max(out.terms[1], tm.traceless * r * r);
            out.terms[2] = std::max(out.terms[2], tm.umbilic * r * r / 3.0);
        }
    }
    return out;
}

double order_of(double coarse, double fine) {
    if (fine == 0.0) return std::numeric_limits<double>::infinity();
    return std::log2(coarse / fine);
}

SymJet poly_jet(const Vec3& x) {
    // g = G + x_k S_k + |x|^2 T, all symmetric
    Mat3 G;
    G << 1.3, 0.2, -0.1, 0.2, 0.9, 0.05, -0.1, 0.05, 1.1;
    std::array<Mat3, 3> S;
    S[0] << 0.3, 0.1, 0.0, 0.1, -0.2, 0.05, 0.0, 0.05, 0.1;
    S[1] << -0.1, 0.2, 0.1, 0.2, 0.15, 0.0, 0.1, 0.0, -0.05;
    S[2] << 0.05, 0.0, -0.2, 0.0, 0.1, 0.1, -0.2, 0.1, 0.2;
    Mat3 T;
    T << 0.2, 0.05, 0.0, 0.05, 0.1, 0.0, 0.0, 0.0, 0.15;
    SymJet j;
    j.value = G + x[0] * S[0] + x[1] * S[1] + x[2] * S[2] + x.squaredNorm() * T;
    for (int k = 0; k < 3; ++k) {
        j.d[k] = S[k] + 2.0 * x[k] * T;
        for (int l = 0; l < 3; ++l) j.dd[k][l] = (k == l ? 2.0 : 0.0) * T;
    }
    return j;
}

ScalarJet tilted_phi(const Vec3& x) {
    // 1 + 0.1 x1 + 0.05 x2^2 - 0.03 x1 x3
    ScalarJet j;
    j.value = 1.0 + 0.1 * x[0] + 0.05 * x[1] * x[1] - 0.03 * x[0] * x[2];
    j.grad = Vec3(0.1 - 0.03 * x[2], 0.1 * x[1], -0.03 * x[0]);
    j.hess.setZero();
    j.hess(1, 1) = 0.1;
    j.hess(0, 2) = j.hess(2, 0) = -0.03;
    return j;
}

}  // namespace

ExperimentReport run_selftest(const ExperimentConfig& cfg) {
    ExperimentReport rep;
    rep.experiment = "selftest";
    std::mt19937_64 rng(cfg.seed);

    // 1. weight algebra
    {
        const double tol = cfg.num("weight_tol");
        double worst_knot = 0.0, worst_scale = 0.0, worst_value = 0.0;
        // one-ulp jump across y, relative to the sup of the weight
        auto jump = [](const std::function<double(double)>& w, double y, double sup) {
            const double l = w(std::nextafter(y, 0.0)), r = w(std::nextafter(y, 2.0 * y + 1.0));
            return std::abs(l - r) / sup;
        };
        std::uniform_real_distribution<double> U(0.0, 1.0);
        Table wt{"weights", {"a", "s_frac", "knot_jump_max", "value_error_max"}, {}};
        for (int n = 0; n < 8; ++n) {
            const double a = std::pow(10.0, -3.0 * U(rng));
            const double sf = U(rng);
            const double s = sf * a, s1 = 8.0 * sf * a;
            double jm = 0.0, ve = 0.0;
            auto psi = [a](double y) { return weight_psi(y, a); };
            auto psi1 = [a](double y) { return weight_psi1(y, a); };
            auto phi = [a, s](double y) { return weight_phi(y, a, s); };
            auto phi1 = [a, s1](double y) { return weight_phi1(y, a, s1); };
            // joins between branches; y = 1/a is the cut of the bulk term, where the weights stop
            const double sup_psi = 3.0 / (32 * a), sup_psi1 = 3.0 / (256 * a);
            const double sup_phi = 3.0 / (16 * (a + s) * (a + s)), sup_phi1 = 3.0 / (16 * (8 * a + s1) * (8 * a + s1));
            for (double y : {1.0 / (4 * a), 1.0 / (2 * a)}) jm = std::max(jm, jump(psi, y, sup_psi));
            for (double y : {1.0 / (32 * a), 1.0 / (16 * a), 1.0 / (8 * a)}) jm = std::max(jm, jump(psi1, y, sup_psi1));
            for (double y : {1.0 / (2 * a + 2 * s), 1.0 / (a + s)}) jm = std::max(jm, jump(phi, y, sup_phi));
            for (double y : {1.0 / (16 * a + 2 * s1), 1.0 / (8 * a + s1)}) jm = std::max(jm, jump(phi1, y, sup_phi1));
            // knot values, relative to the value itself
            const std::pair<double, double> vals[] = {{weight_psi(1.0 / (2 * a), a), 1.0 / (32 * a)},
                                                      {weight_psi1(1.0 / (16 * a), a), 1.0 / (256 * a)},
                                                      {weight_psi1(1.0 / (8 * a), a), 3.0 / (256 * a)},
                                                      {weight_psi1(0.5 / a, a), 3.0 / (256 * a)}};
            for (const auto& [got, want] : vals) ve = std::max(ve, std::abs(got - want) / want);
            worst_knot = std::max(worst_knot, jm);
            worst_value = std::max(worst_value, ve);
            wt.add({a, sf, jm, ve});
        }
        for (int n = 0; n < 50; ++n) {
            const double a = std::pow(10.0, -3.0 * U(rng));
            const double y = 1.2 * U(rng);
            const double e1 = std::abs(weight_psi(y / a, a) - weight_psi(y, 1.0) / a) * a;
            const double e2 = std::abs(weight_psi1(y / a, a) - weight_psi1(y, 1.0) / a) * a;
            worst_scale = std::max({worst_scale, e1, e2});
        }
        rep.tables.push_back(wt);
        rep.add_scalar("weight_knot_jump", worst_knot);
        rep.add_scalar("weight_knot_value", worst_value);
        rep.add_scalar("weight_scaling", worst_scale);
        rep.add_check("weight_algebra", worst_knot <= tol && worst_value <= tol && worst_scale <= tol,
                      "knot jump " + num_str(worst_knot) + ", knot values " + num_str(worst_value) + ", scaling " +
                          num_str(worst_scale));
    }

    // 2. Euclidean null suite, with one grid doubling
    {
        const ShellGrid coarse(cfg.num("null_rho_in"), cfg.num("null_rho_out"), cfg.nr, cfg.ntheta, cfg.nphi);
        const NullRun c = null_suite(cfg, coarse, true);
        const bool doubling = cfg.cfg.flag("selftest.null_doubling", true);
        Table nt{"null_levels", {"grid_level", "t", "F", "H_term", "G_term", "F_over_4pi_t"}, {}};
        for (const auto& F : c.F) nt.add({0.0, F.t, F.value, F.H_term, F.G_term, F.value / (4.0 * kPi * F.t)});
        Table dt{"null_D", {"grid_level", "nr", "F_err"}, {}};
        for (const auto& col : d_columns("")) dt.columns.push_back(col);
        std::vector<double> row{0.0, double(coarse.nr()), c.F_err};
        append_d(row, c.D, c.D1);
        dt.add(row);
        const double fl = cfg.num("null_F_tol"), dl = cfg.num("null_D_tol");
        const bool ok = c.F_err <= fl && std::abs(c.D.D.value) <= dl && std::abs(c.D1.D1.value) <= dl;
        rep.add_check("null_suite", ok,
                      "max |F|/(4 pi t) " + num_str(c.F_err) + ", D " + num_str(c.D.D.value) + ", D1 " +
                          num_str(c.D1.D1.value));
        if (doubling) {
            const NullRun f = null_suite(cfg, coarse.refined(), false);
            for (const auto& F : f.F) nt.add({1.0, F.t, F.value, F.H_term, F.G_term, F.value / (4.0 * kPi * F.t)});
            std::vector<double> r2{1.0, double(coarse.refined().nr()), f.F_err};
            append_d(r2, f.D, f.D1);
            dt.add(r2);
            const double oF = order_of(c.F_err, f.F_err);
            const double oD = order_of(std::abs(c.D.D.value), std::abs(f.D.D.value));
            const double oD1 = order_of(std::abs(c.D1.D1.value), std::abs(f.D1.D1.value));
            rep.add_scalar("null_order_F", oF);
            rep.add_scalar("null_order_D", oD);
            rep.add_scalar("null_order_D1", oD1);
            const double omin = cfg.num("null_order_min");
            rep.add_check("null_suite_order", oF >= omin && oD >= omin && oD1 >= omin,
                          "observed orders F " + num_str(oF) + ", D " + num_str(oD) + ", D1 " + num_str(oD1));
        }
        rep.tables.push_back(nt);
        rep.tables.push_back(dt);

        const double tt = cfg.num("terms_tol");
        rep.add_scalar("term_tangential", c.terms[0]);
        rep.add_scalar("term_traceless", c.terms[1]);
        rep.add_scalar("term_umbilic", c.terms[2]);
        rep.add_check("euclidean_terms_vanish", c.terms[0] <= tt && c.terms[1] <= tt && c.terms[2] <= tt,
                      "normalized maxima: tangential " + num_str(c.terms[0]) + ", traceless " + num_str(c.terms[1]) +
                          ", umbilic " + num_str(c.terms[2]));
    }

    // 3a. Euclidean ball Green's function
    {
        const ShellGrid grid(cfg.num("green_r_core"), 1.0, cfg.nr, cfg.ntheta, cfg.nphi);
        const auto gr = green_function(base_metric("euclidean"), grid, solve_options(cfg));
        double err = 0.0;
        for (std::size_t p = 0; p < grid.size(); ++p) {
            const Vec3 x = grid.position(p);
            const double r = x.norm();
            if (r < 0.1 || r > 0.9) continue;
            const double u0 = 1.0 / r + gr.e[p] - gr.e0;
            err = std::max(err, std::abs(u0 * r - 1.0));
        }
        rep.add_scalar("green_ball_rel_error", err);
        rep.add_scalar("green_ball_e0", gr.e0);
        rep.add_check("green_ball", err <= cfg.num("green_tol"),
                      "relative max error of u0 against 1/|x| on 0.1 <= |x| <= 0.9: " + num_str(err));
    }

    // 7. monotonicity of Ftilde on a warped model with R > 0
    {
        const double r_in = cfg.num("mono_r_in"), r_out = cfg.num("mono_r_out"), a = cfg.num("mono_a");
        const auto spec = radial_spec_by_name(cfg.str("mono_psi"), r_in, r_out);
        if (spec.name != "sine") throw ConfigError("selftest.mono_psi: only the sine model has the cot r solution");
        const MetricField g = warped_metric(spec);
        const ShellGrid grid(r_in, r_out, cfg.nr, cfg.ntheta, cfg.nphi);
        // u = cot r is harmonic for psi = sin r
        const GridFunction bc = sample(grid, [](const Vec3& x) { return 1.0 / std::tan(x.norm()); });
        const auto samples = subsample(grid, 7);
        const auto sol = solve_dirichlet(coefficient_field(g, samples), grid, nullptr, bc, solve_options(cfg));
        const auto m = make_level_model(sol.u, g, [&](const Vec3& x) { return warped_curvature(spec, x.norm()); });
        // {u >= 1/a} = {r <= atan a}; integral of 6 tan^2 r times 4 pi over it
        const double ra = std::atan(a);
        const double M = 24.0 * kPi * (std::tan(ra) - ra);
        const int levels = cfg.cfg.integer("selftest.mono_levels");
        const double span = cfg.num("mono_span");
        Table mt{"monotonicity", {"t", "Ftilde", "F", "H_term", "G_term", "bulk", "M_a", "largest_term_over_t"}, {}};
        std::vector<FTildeValue> vals;
        double big = 0.0;
        for (int i = 0; i < levels; ++i) {
            const double t = a * std::pow(span, static_cast<double>(i) / (levels - 1));
            const auto v = F_tilde(m, a, t, M);
            const double lt = std::max({4.0 * kPi * t, t * t * std::abs(v.F.H_term), t * t * t * v.F.G_term,
                                        0.5 * std::abs(v.bulk), 0.5 * std::abs(M)}) /
                              t;
            big = std::max(big, lt);
            vals.push_back(v);
            mt.add({t, v.value, v.F.value, v.F.H_term, v.F.G_term, v.bulk, M, lt});
        }
        rep.tables.push_back(mt);
        const double tol = cfg.num("mono_tol") * big;
        double worst = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < vals.size(); ++i) {
            const double slope = (vals[i].value - vals[i - 1].value) / (vals[i].F.t - vals[i - 1].F.t);
            worst = std::min(worst, slope);
        }
        rep.add_scalar("mono_min_slope", worst);
        rep.add_scalar("mono_tolerance", tol);
        rep.add_check("monotonicity", worst >= -tol,
                      "min finite-difference slope " + num_str(worst) + " against -" + num_str(tol));
    }

    // 11. coordinate normalization
    {
        Table ct{"normalization", {"metric", "max_value_dev", "max_first_derivative", "roundtrip_error"}, {}};
        const MetricField tests[] = {metric_from_jet(poly_jet, Region::ball(1.0)),
                                     conformal_metric(tilted_phi, Region::ball(1.0))};
        double worst_d = 0.0, worst_rt = 0.0;
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        for (int n = 0; n < 2; ++n) {
            const auto nm = normalize_coordinates(tests[n]);
            const Mat3 v = nm.metric.eval(Vec3::Zero());
            const Deriv1 d = nm.metric.d_eval(Vec3::Zero());
            double dmax = 0.0;
            for (const auto& m : d) dmax = std::max(dmax, m.cwiseAbs().maxCoeff());
            const double vdev = (v - Mat3::Identity()).cwiseAbs().maxCoeff();
            const MetricField back = pushforward(pullback(tests[n], nm.map), nm.map);
            double rt = 0.0;
            for (int q = 0; q < 100;) {
                const Vec3 x(U(rng), U(rng), U(rng));
                if (x.norm() > 0.4) continue;
                rt = std::max(rt, (back.eval(x) - tests[n].eval(x)).cwiseAbs().maxCoeff());
                ++q;
            }
            worst_d = std::max({worst_d, dmax, vdev});
            worst_rt = std::max(worst_rt, rt);
            ct.add({double(n), vdev, dmax, rt});
        }
        rep.tables.push_back(ct);
        rep.add_check("normalization", worst_d <= cfg.num("normalization_tol") && worst_rt <= cfg.num("roundtrip_tol"),
                      "max |g(0) - I|, |dg(0)| " + num_str(worst_d) + ", round trip " + num_str(worst_rt));
    }
    return rep;
}

}  // namespace lab

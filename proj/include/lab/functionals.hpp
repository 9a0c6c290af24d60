#pragma once

#include "lab/examples.hpp"
#include "lab/fit.hpp"
#include "lab/levelset.hpp"

// pchip in Boost 1.74 relies on isnan being declared beforehand
#include <boost/math/special_functions/fpclassify.hpp>
#include <boost/math/interpolators/pchip.hpp>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace lab {

// Piecewise weights from integrating the bulk term over sliding dyadic windows.
// phi and psi live at scale a, phi1 and psi1 at scale 8a with the bulk still cut at 1/a.
double weight_phi(double y, double a, double s);
double weight_phi1(double y, double a, double s);
double weight_psi(double y, double a);
double weight_psi1(double y, double a);

using ScalarFn = std::function<double(const Vec3&)>;

std::vector<double> sample_nodes(const ShellGrid& grid, const ScalarFn& f);

/// u with its level geometry and the bulk weight f at the nodes (zero when absent).
struct LevelModel {
    LevelContext ctx;
    std::vector<double> f;

    const GridFunction& u() const { return ctx.u; }
    const ShellGrid& grid() const { return ctx.u.grid; }
};

LevelModel make_level_model(const GridFunction& u, const MetricField& g, const ScalarFn& f_field = {},
                            int kernel_order = 3);
/// Same geometry, different bulk weight.
LevelModel with_bulk_weight(LevelModel m, std::vector<double> f);

struct FunctionalOptions {
    /// closed-form bands must span at least this many cells
    double min_cells = 8.0;
    /// Gauss-Legendre points for E(s) by direct quadrature and the Fubini check (8 or 16)
    int quad_points = 16;
    bool with_direct_E = false;
    bool with_fubini = false;
};

struct MResult {
    double value = 0.0;
    /// bound on the excised core: max |f| near the core times its volume factor
    double error_bar = 0.0;
    bool warning = false;
    std::string note;
};

/// M(a) = integral over {u0 >= 1/a} of f |grad u0| / u0^2.
MResult M_of_a(const LevelModel& m0, const ScalarFn& f_field, double a);

struct FValue {
    double t = 0.0;
    double H_term = 0.0;  // integral of H |grad u| over {u = 1/t}
    double G_term = 0.0;  // integral of |grad u|^2
    double value = 0.0;
    bool touches_boundary = false;

    double recompute() const;
};

FValue F_functional(const LevelModel& m, double t);

struct FTildeValue {
    FValue F;
    double bulk = 0.0;  // integral over {1/t <= u <= 1/a} of f |grad u| / u^2
    double M_a = 0.0;
    double value = 0.0;

    double recompute() const { return F.value - 0.5 * bulk - 0.5 * M_a; }
};

FTildeValue F_tilde(const LevelModel& m, double a, double t, double M_a);

struct EValue {
    double s = 0.0;
    double const_term = 0.0;
    double S_outer = 0.0;  // integral of |grad u|^2 / u over the outer level
    double S_inner = 0.0;
    double M_term = 0.0;
    double weight_term = 0.0;
    double value = 0.0;
    /// integral of Ftilde / t^3 by Gauss-Legendre, NaN when not computed
    double direct = 0.0;

    double recompute() const { return const_term + S_outer - S_inner - M_term - weight_term; }
};

/// E(s) for s in [0, a] from its closed form.
EValue E_closed(const LevelModel& m, double a, double s, double M_a);
/// E^1(s) for s in [0, 8a].
EValue E1_closed(const LevelModel& m, double a, double s, double M_a);
double E_direct(const LevelModel& m, double a, double s, double M_a, int points = 16);
double E1_direct(const LevelModel& m, double a, double s, double M_a, int points = 16);

struct DValue {
    double const_term = 0.0;  // 2 pi ln 2
    double band_lo = 0.0;     // |grad u|^3 / u^3 over the band of smaller u (enters with 1/2)
    double band_hi = 0.0;
    double M_term = 0.0;
    double weight_term = 0.0;
    double value = 0.0;
    double cells_lo = 0.0;
    double cells_hi = 0.0;

    double recompute() const { return const_term + 0.5 * band_lo - band_hi - M_term - weight_term; }
};

struct D1Value : DValue {
    /// M term with the coefficient 3/256 and no 1/a, and the total it produces
    double M_term_printed = 0.0;
    double value_printed = 0.0;
    /// contribution of the psi1 plateau {1/(8a) <= u <= 1/a}
    double plateau_term = 0.0;
    /// 3/(256 a) times the plain bulk integral over the plateau band
    double plateau_check = 0.0;
};

struct FunctionalReport {
    double a = 0.0;
    double M_a = 0.0;
    std::vector<FValue> F_values;
    std::vector<FTildeValue> Ftilde_values;
    std::vector<EValue> E_values;
    std::vector<EValue> E1_values;
    DValue D;
    D1Value D1;
    /// integral of E over [0, a] by Gauss-Legendre, NaN when not computed
    double D_fubini = 0.0;
    double D1_fubini = 0.0;
};

FunctionalReport E_D_quantities(const LevelModel& m, double a, double M_a, const FunctionalOptions& opt = {});
FunctionalReport D1_quantities(const LevelModel& m, double a, double M_a, const FunctionalOptions& opt = {});

struct DerivativeIntegrand {
    double t = 0.0;
    double R_half = 0.0;
    double tangential = 0.0;
    double traceless = 0.0;
    double umbilic = 0.0;
    double area = 0.0;
    double total = 0.0;
};

/// Lower-bound integrand of F'(t) (R/2 plus the three nonnegative terms) integrated
/// over {u = 1/t}. R holds the scalar curvature of the model metric at the nodes.
DerivativeIntegrand F_derivative_integrand(const LevelModel& m, const std::vector<double>& R, double t);

// Rotationally symmetric reduction.

struct RadialBC {
    double r_in = 0.01;
    double val_in = 100.0;
    double r_out = 1.0;
    double val_out = 0.0;
};

/// b solves (psi^2 b')' = 0 with the given boundary data, so b' = kappa / psi^2.
class RadialProfile {
public:
    RadialProfile(RadialMetricSpec spec, RadialBC bc);

    const RadialMetricSpec& spec() const { return spec_; }
    const RadialBC& bc() const { return bc_; }
    double kappa() const { return kappa_; }

    double psi(double r) const { return spec_.psi(r); }
    double b(double r) const;
    double b_prime(double r) const;
    /// monotone cubic inverse of b on the tabulated profile
    double b_inverse(double u) const;
    /// mean curvature of the level sphere at radius r
    double H(double r) const;
    double f_of_t(double t) const;
    double c1(double t) const;
    double c1_prime(double t) const;
    double c2(double t) const;
    double c2_prime(double t) const;
    double c3(double t) const;

    const std::vector<double>& table_r() const { return table_r_; }

private:
    template <class Fn>
    double diff(const Fn& fn, double t) const;

    RadialMetricSpec spec_;
    RadialBC bc_;
    double kappa_ = 0.0;
    std::vector<double> table_r_;
    std::vector<double> table_b_;
    std::shared_ptr<boost::math::interpolators::pchip<std::vector<double>>> inverse_;
};

RadialProfile radial_profile(const RadialMetricSpec& spec, const RadialBC& bc);

/// Fbar for the model pair itself, evaluated on the profile: area 4 pi psi^2,
/// |grad u0| = |b'|, H = 2 psi'/psi.
double model_Fbar_1d(const RadialProfile& p, double t);
/// Ftilde of the model pair by 1-D quadrature of the bulk terms.
double model_Ftilde_1d(const RadialProfile& p, double a, double t);

/// A level model together with the per-node profile data the bulk terms need.
struct RotsymModel {
    LevelModel m;  // f holds R_{g0} at the nodes
    std::shared_ptr<const RadialProfile> profile;
    std::vector<double> inv_bprime;  // 1 / |b'(b^-1(u))|
    std::vector<double> c3_weight;   // c3(b^-1(u)) / |b'(b^-1(u))|
};

RotsymModel make_rotsym_model(LevelModel m, std::shared_ptr<const RadialProfile> profile);

struct ModifiedFValue {
    double t = 0.0;
    double level = 0.0;
    double B = 0.0;  // integral of H |grad u| over {u = b(t)}
    double A = 0.0;  // integral of |grad u|^2
    double Fbar = 0.0;
    double Fbar0_a = 0.0;
    double bulk_R = 0.0;   // integral of R_{g0} |grad u| / |b'| over {b(t) <= u <= b(a)}
    double bulk_c3 = 0.0;  // integral of c3 |grad u|^3 / |b'|
    double value = 0.0;
    bool touches_boundary = false;

    double recompute() const { return Fbar - Fbar0_a - 0.5 * bulk_R - bulk_c3; }
};

ModifiedFValue modified_Fbar(const RotsymModel& rm, double t);
ModifiedFValue modified_F(const RotsymModel& rm, double a, double t, double Fbar0_a);

struct RotsymD {
    double D = 0.0;
    double D1 = 0.0;
    /// a window reaches past t_cap and was cut there
    bool D_clipped = false;
    bool D1_clipped = false;
    double t_cap = 0.0;
    std::vector<std::pair<double, double>> E;   // (s, E(s))
    std::vector<std::pair<double, double>> E1;
};

/// Nested Gauss-Legendre of Ftilde / (t c1) over the D and D1 windows; t beyond t_cap is dropped.
RotsymD rotsym_D(const RotsymModel& rm, double a, double Fbar0_a, double t_cap, int points = 8);

struct AsymptoticsPoint {
    double a = 0.0;
    double bulk = 0.0;        // integral of (f - f(0)) |grad u0| / u0^2 over {1/(4a) <= u0 <= 1/a}
    double lemma_max = 0.0;   // max over the band of ||x| - 1/u0|
    double cells = 0.0;
};

struct AsymptoticsResult {
    std::vector<AsymptoticsPoint> points;
    bool bulk_vanishes = false;
    bool lemma_vanishes = false;
    RateFit bulk_fit;
    RateFit lemma_fit;
};

/// m0 carries u0 from the Green's function and f = R_{g0}; f0 = R_{g0}(0).
AsymptoticsResult bulk_asymptotics_check(const LevelModel& m0, double f0, const std::vector<double>& a_values);

}  // namespace lab

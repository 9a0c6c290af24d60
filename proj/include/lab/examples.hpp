#pragma once

#include "lab/metric.hpp"

#include <functional>
#include <string>
#include <vector>

namespace lab {

/// Radial profile eta for the sharpness family: 1 on [0, r/2], 0 past r,
/// quintic smoothstep in between (C2 at both knots).
struct RadialCutoff {
    double r = 1.0;
    /// value, first and second derivative in s = |x|
    std::array<double, 3> profile(double s) const;
    ScalarJet jet(const Vec3& x) const;
};

struct SharpnessFamily {
    double epsilon = 0.0;
    double r = 0.0;  // inner scale epsilon^(1/4)
    double a_coeff = 0.0;
    ScalarFieldFn phi0;
    ScalarFieldFn v;
    ScalarFieldFn eta;
    ScalarFieldFn phi;
};

SharpnessFamily sharpness_family(double epsilon, double a_coeff);

struct SharpnessPair {
    MetricField g0;
    MetricField g;
    SharpnessFamily family;
};

SharpnessPair sharpness_pair(double epsilon, double a_coeff);

/// g = phi^4 g_euc with analytic derivatives and the conformal tag set.
MetricField conformal_metric(ScalarFieldFn phi, Region domain);

/// phi0 = 1 - |x|^4 / 20, shared by several experiments.
ScalarJet phi0_jet(const Vec3& x);

/// g0 = dr^2 + psi(r)^2 g_S2
struct RadialMetricSpec {
    std::string name;
    std::function<double(double)> psi;
    std::function<double(double)> dpsi;
    std::function<double(double)> ddpsi;
    double r_in = 0.01;
    double r_out = 1.0;
};

RadialMetricSpec euclidean_radial(double r_in, double r_out);
RadialMetricSpec sine_radial(double r_in, double r_out);
/// psi = r (1 + c r^2)
RadialMetricSpec cubic_radial(double c, double r_in, double r_out);

RadialMetricSpec radial_spec_by_name(const std::string& name, double r_in, double r_out);

/// R = 2 (1 - psi'^2 - 2 psi psi'') / psi^2
double warped_curvature(const RadialMetricSpec& spec, double r);

MetricField warped_metric(const RadialMetricSpec& spec);

/// Bounded symmetric perturbation shapes.
SymJet h_sin5(const Vec3& x);
SymJet h_cos5(const Vec3& x);
SymJet h_const(const Vec3& x);
SymFieldFn perturbation_shape(const std::string& name);

/// g = g0 + epsilon h; SPD checked on the given samples.
MetricField perturbation_family(const MetricField& g0, SymFieldFn h, double epsilon,
                                std::span<const Vec3> samples = {});

/// Conformal perturbation g = (1 + epsilon chi) g0 with chi a bounded scalar field.
MetricField conformal_perturbation(const MetricField& g0, ScalarFieldFn chi, double epsilon,
                                   std::span<const Vec3> samples = {});

struct InMeasureSpec {
    double delta = 0.05;
    Vec3 center = Vec3(0.3, 0.0, 0.0);
    SymFieldFn h = h_const;
};

/// chi_k = (1 - |x - c|^2 / rho^2)^3_+ with rho = 2^-k
ScalarJet bump_jet(const Vec3& x, const Vec3& center, double rho);

MetricField shrinking_support_family(const MetricField& g0, int k, const InMeasureSpec& spec = {});

/// max over samples of the extreme generalized eigenvalue ratio of g vs g0
double bilipschitz_constant(const MetricField& g, const MetricField& g0, std::span<const Vec3> samples);

}  // namespace lab

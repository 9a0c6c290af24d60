#include "lab/examples.hpp"

#include "lab/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

namespace lab {

namespace {

ScalarJet radial_jet(const Vec3& x, double f, double df, double ddf) {
    ScalarJet j;
    j.value = f;
    const double s = x.norm();
    if (s == 0.0) {
        // radial C2 profile with f'(0) = 0: Hessian is f''(0) I
        j.hess = ddf * Mat3::Identity();
        return j;
    }
    const Vec3 n = x / s;
    j.grad = df * n;
    j.hess = ddf * n * n.transpose() + (df / s) * (Mat3::Identity() - n * n.transpose());
    return j;
}

ScalarJet product(const ScalarJet& a, const ScalarJet& b) {
    ScalarJet p;
    p.value = a.value * b.value;
    p.grad = a.value * b.grad + b.value * a.grad;
    p.hess = a.value * b.hess + b.value * a.hess + a.grad * b.grad.transpose() + b.grad * a.grad.transpose();
    return p;
}

}  // namespace

std::array<double, 3> RadialCutoff::profile(double s) const {
    const double h = 0.5 * r;
    if (s <= h) return {1.0, 0.0, 0.0};
    if (s >= r) return {0.0, 0.0, 0.0};
    const double t = (s - h) / h;
    const double S = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    const double dS = 30.0 * t * t * (1.0 - 2.0 * t + t * t);
    const double ddS = 60.0 * t * (1.0 - 3.0 * t + 2.0 * t * t);
    return {1.0 - S, -dS / h, -ddS / (h * h)};
}

ScalarJet RadialCutoff::jet(const Vec3& x) const {
    const auto p = profile(x.norm());
    return radial_jet(x, p[0], p[1], p[2]);
}

ScalarJet phi0_jet(const Vec3& x) {
    const double s2 = x.squaredNorm();
    ScalarJet j;
    j.value = 1.0 - s2 * s2 / 20.0;
    j.grad = -(s2 / 5.0) * x;
    j.hess = -(s2 * Mat3::Identity() + 2.0 * x * x.transpose()) / 5.0;
    return j;
}

MetricField conformal_metric(ScalarFieldFn phi, Region domain) {
    auto jet = [phi](const Vec3& x) {
        const ScalarJet p = phi(x);
        const double f = p.value;
        SymJet out;
        out.value = std::pow(f, 4) * Mat3::Identity();
        for (int k = 0; k < 3; ++k) {
            out.d[k] = 4.0 * f * f * f * p.grad[k] * Mat3::Identity();
            for (int l = 0; l < 3; ++l)
                out.dd[k][l] = (12.0 * f * f * p.grad[k] * p.grad[l] + 4.0 * f * f * f * p.hess(k, l)) *
                               Mat3::Identity();
        }
        return out;
    };
    return metric_from_jet(jet, domain).with_conformal(std::move(phi));
}

SharpnessFamily sharpness_family(double epsilon, double a_coeff) {
    if (!(epsilon > 0.0) || epsilon > 1e-1) throw ArgumentError("sharpness family needs 0 < epsilon <= 0.1");
    if (a_coeff < 0.0 || a_coeff > 1.0) throw ArgumentError("sharpness family needs 0 <= a_coeff <= 1");
    SharpnessFamily fam;
    fam.epsilon = epsilon;
    fam.r = std::pow(epsilon, 0.25);
    fam.a_coeff = a_coeff;
    if (fam.r >= 0.5) throw ArgumentError("sharpness family: inner scale r = eps^(1/4) must stay below 1/2");

    const double r = fam.r;
    const double amp = a_coeff * std::sqrt(epsilon);
    const RadialCutoff cut{r};
    fam.phi0 = phi0_jet;
    fam.v = [r](const Vec3& x) {
        ScalarJet j;
        j.value = (r * r - x.squaredNorm()) / 6.0;
        j.grad = -x / 3.0;
        j.hess = -Mat3::Identity() / 3.0;
        return j;
    };
    fam.eta = [cut](const Vec3& x) { return cut.jet(x); };
    auto v = fam.v;
    fam.phi = [cut, v, amp](const Vec3& x) {
        ScalarJet j = phi0_jet(x);
        if (amp == 0.0 || x.norm() >= cut.r) return j;
        const ScalarJet ev = product(cut.jet(x), v(x));
        j.value += amp * ev.value;
        j.grad += amp * ev.grad;
        j.hess += amp * ev.hess;
        return j;
    };
    return fam;
}

SharpnessPair sharpness_pair(double epsilon, double a_coeff) {
    SharpnessFamily fam = sharpness_family(epsilon, a_coeff);
    MetricField g0 = conformal_metric(fam.phi0, Region::ball(1.0)).with_normalized_flag(true);
    MetricField g = conformal_metric(fam.phi, Region::ball(1.0));
    return {g0, g, fam};
}

// ---------------------------------------------------------------- warped

RadialMetricSpec euclidean_radial(double r_in, double r_out) {
    return {"euclidean", [](double r) { return r; }, [](double) { return 1.0; }, [](double) { return 0.0; },
            r_in, r_out};
}

RadialMetricSpec sine_radial(double r_in, double r_out) {
    return {"sine", [](double r) { return std::sin(r); }, [](double r) { return std::cos(r); },
            [](double r) { return -std::sin(r); }, r_in, r_out};
}

RadialMetricSpec cubic_radial(double c, double r_in, double r_out) {
    return {"cubic", [c](double r) { return r * (1.0 + c * r * r); },
            [c](double r) { return 1.0 + 3.0 * c * r * r; }, [c](double r) { return 6.0 * c * r; }, r_in, r_out};
}

RadialMetricSpec radial_spec_by_name(const std::string& name, double r_in, double r_out) {
    if (name == "euclidean") return euclidean_radial(r_in, r_out);
    if (name == "sine") return sine_radial(r_in, r_out);
    if (name == "cubic") return cubic_radial(0.02, r_in, r_out);
    throw ArgumentError("unknown radial profile '" + name + "' (euclidean | sine | cubic)");
}

double warped_curvature(const RadialMetricSpec& spec, double r) {
    const double p = spec.psi(r), dp = spec.dpsi(r), ddp = spec.ddpsi(r);
    return 2.0 * (1.0 - dp * dp - 2.0 * p * ddp) / (p * p);
}

MetricField warped_metric(const RadialMetricSpec& spec) {
    if (!(spec.r_in > 0.0)) throw ArgumentError("warped metric needs a shell with r_in > 0");
    if (!(spec.r_out > spec.r_in)) throw ArgumentError("warped metric needs r_out > r_in");
    auto jet = [spec](const Vec3& x) {
        const double r = x.norm();
        const double p = spec.psi(r), dp = spec.dpsi(r), ddp = spec.ddpsi(r);
        if (!(p > 0.0)) throw DomainError("warping function not positive at " + describe(x));
        const double q = (p * p) / (r * r);
        const double q1 = 2.0 * p * dp / (r * r) - 2.0 * p * p / (r * r * r);
        const double q2 = 2.0 * (dp * dp + p * ddp) / (r * r) - 8.0 * p * dp / (r * r * r) +
                          6.0 * p * p / (r * r * r * r);
        const double r2 = r * r, r4 = r2 * r2, r6 = r4 * r2;
        const Mat3 I = Mat3::Identity();
        const Mat3 P = x * x.transpose() / r2;

        std::array<double, 3> dq;
        Mat3 ddq;
        for (int k = 0; k < 3; ++k) dq[k] = q1 * x[k] / r;
        ddq = q2 * P + (q1 / r) * (I - P);

        Deriv1 dP;
        for (int k = 0; k < 3; ++k)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    dP[k](i, j) = ((i == k) * x[j] + x[i] * (j == k)) / r2 - 2.0 * x[i] * x[j] * x[k] / r4;

        SymJet out;
        out.value = q * I + (1.0 - q) * P;
        for (int k = 0; k < 3; ++k) out.d[k] = dq[k] * (I - P) + (1.0 - q) * dP[k];
        for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 3; ++l) {
                Mat3 ddP;
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) {
                        double v = ((i == k) * (j == l) + (i == l) * (j == k)) / r2;
                        v -= 2.0 * ((i == k) * x[j] + x[i] * (j == k)) * x[l] / r4;
                        v -= 2.0 * ((i == l) * x[j] * x[k] + x[i] * (j == l) * x[k] + x[i] * x[j] * (k == l)) / r4;
                        v += 8.0 * x[i] * x[j] * x[k] * x[l] / r6;
                        ddP(i, j) = v;
                    }
                out.dd[k][l] = ddq(k, l) * (I - P) - dq[k] * dP[l] - dq[l] * dP[k] + (1.0 - q) * ddP;
            }
        return out;
    };
    return metric_from_jet(jet, Region::shell(spec.r_in, spec.r_out));
}

// ---------------------------------------------------------------- perturbations

namespace {

Mat3 e11_minus_e22() {
    Mat3 m = Mat3::Zero();
    m(0, 0) = 1.0;
    m(1, 1) = -1.0;
    return m;
}

}  // namespace

SymJet h_sin5(const Vec3& x) {
    const Mat3 m = e11_minus_e22();
    SymJet j;
    j.value = std::sin(5.0 * x[0]) * m;
    for (int k = 0; k < 3; ++k) {
        j.d[k].setZero();
        for (int l = 0; l < 3; ++l) j.dd[k][l].setZero();
    }
    j.d[0] = 5.0 * std::cos(5.0 * x[0]) * m;
    j.dd[0][0] = -25.0 * std::sin(5.0 * x[0]) * m;
    return j;
}

SymJet h_cos5(const Vec3& x) {
    const Mat3 m = e11_minus_e22();
    SymJet j;
    j.value = std::cos(5.0 * x[0]) * m;
    for (int k = 0; k < 3; ++k) {
        j.d[k].setZero();
        for (int l = 0; l < 3; ++l) j.dd[k][l].setZero();
    }
    j.d[0] = -5.0 * std::sin(5.0 * x[0]) * m;
    j.dd[0][0] = -25.0 * std::cos(5.0 * x[0]) * m;
    return j;
}

SymJet h_const(const Vec3&) {
    SymJet j;
    j.value = e11_minus_e22() / std::numbers::sqrt2;
    for (int k = 0; k < 3; ++k) {
        j.d[k].setZero();
        for (int l = 0; l < 3; ++l) j.dd[k][l].setZero();
    }
    return j;
}

SymFieldFn perturbation_shape(const std::string& name) {
    if (name == "sin5") return h_sin5;
    if (name == "cos5") return h_cos5;
    if (name == "const") return h_const;
    throw ArgumentError("unknown perturbation shape '" + name + "' (sin5 | cos5 | const)");
}

MetricField perturbation_family(const MetricField& g0, SymFieldFn h, double epsilon,
                                std::span<const Vec3> samples) {
    if (epsilon == 0.0) return g0;
    auto value = [g0, h, epsilon](const Vec3& x) { return Mat3(g0.eval(x) + epsilon * h(x).value); };
    auto d1 = [g0, h, epsilon](const Vec3& x) {
        Deriv1 d = g0.d_eval(x);
        const SymJet j = h(x);
        for (int k = 0; k < 3; ++k) d[k] += epsilon * j.d[k];
        return d;
    };
    auto d2 = [g0, h, epsilon](const Vec3& x) {
        Deriv2 d = g0.dd_eval(x);
        const SymJet j = h(x);
        for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 3; ++l) d[k][l] += epsilon * j.dd[k][l];
        return d;
    };
    MetricField g = g0.analytic_derivatives() ? MetricField(value, g0.domain(), d1, d2)
                                              : MetricField(value, g0.domain());
    check_spd(g, samples);
    return g;
}

MetricField conformal_perturbation(const MetricField& g0, ScalarFieldFn chi, double epsilon,
                                   std::span<const Vec3> samples) {
    if (epsilon == 0.0) return g0;
    auto value = [g0, chi, epsilon](const Vec3& x) { return Mat3((1.0 + epsilon * chi(x).value) * g0.eval(x)); };
    auto d1 = [g0, chi, epsilon](const Vec3& x) {
        const ScalarJet c = chi(x);
        const Mat3 g = g0.eval(x);
        Deriv1 d = g0.d_eval(x);
        for (int k = 0; k < 3; ++k) d[k] = (1.0 + epsilon * c.value) * d[k] + epsilon * c.grad[k] * g;
        return d;
    };
    auto d2 = [g0, chi, epsilon](const Vec3& x) {
        const ScalarJet c = chi(x);
        const Mat3 g = g0.eval(x);
        const Deriv1 d = g0.d_eval(x);
        Deriv2 dd = g0.dd_eval(x);
        for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 3; ++l)
                dd[k][l] = (1.0 + epsilon * c.value) * dd[k][l] + epsilon * c.grad[l] * d[k] +
                           epsilon * c.grad[k] * d[l] + epsilon * c.hess(k, l) * g;
        return dd;
    };
    MetricField g = g0.analytic_derivatives() ? MetricField(value, g0.domain(), d1, d2)
                                              : MetricField(value, g0.domain());
    check_spd(g, samples);
    return g;
}

ScalarJet bump_jet(const Vec3& x, const Vec3& center, double rho) {
    ScalarJet j;
    const Vec3 y = x - center;
    const double q = 1.0 - y.squaredNorm() / (rho * rho);
    if (q <= 0.0) return j;
    const Vec3 dq = -2.0 * y / (rho * rho);
    j.value = q * q * q;
    j.grad = 3.0 * q * q * dq;
    j.hess = 6.0 * q * dq * dq.transpose() - 6.0 * q * q * Mat3::Identity() / (rho * rho);
    return j;
}

MetricField shrinking_support_family(const MetricField& g0, int k, const InMeasureSpec& spec) {
    if (k < 1) throw ArgumentError("shrinking support family needs k >= 1");
    const double rho = std::ldexp(1.0, -k);
    const Vec3 c = spec.center;
    const double delta = spec.delta;
    SymFieldFn h = spec.h;
    SymFieldFn bumped = [c, rho, h](const Vec3& x) {
        const ScalarJet b = bump_jet(x, c, rho);
        SymJet out = h(x);
        SymJet res;
        res.value = b.value * out.value;
        for (int i = 0; i < 3; ++i) {
            res.d[i] = b.value * out.d[i] + b.grad[i] * out.value;
            for (int l = 0; l < 3; ++l)
                res.dd[i][l] = b.value * out.dd[i][l] + b.grad[l] * out.d[i] + b.grad[i] * out.d[l] +
                               b.hess(i, l) * out.value;
        }
        return res;
    };
    return perturbation_family(g0, bumped, delta);
}

double bilipschitz_constant(const MetricField& g, const MetricField& g0, std::span<const Vec3> samples) {
    double worst = 1.0;
    for (const Vec3& x : samples) {
        Eigen::GeneralizedSelfAdjointEigenSolver<Mat3> es(g.eval(x), g0.eval(x), Eigen::EigenvaluesOnly);
        const auto ev = es.eigenvalues();
        worst = std::max({worst, std::sqrt(ev[2]), 1.0 / std::sqrt(ev[0])});
    }
    return worst;
}

}  // namespace lab

#include "lab/errors.hpp"
#include "lab/functionals.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>

namespace lab {

namespace {

constexpr double kPi = boost::math::constants::pi<double>();
constexpr double kQuadTol = 1e-10;
constexpr int kTableSize = 2049;

template <class Fn>
double integrate(const Fn& fn, double lo, double hi) {
    if (hi == lo) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(fn, lo, hi, 15, kQuadTol);
}

// table segments are short and smooth: a fixed rule is exact to round-off
template <class Fn>
double integrate_short(const Fn& fn, double lo, double hi) {
    if (hi == lo) return 0.0;
    return boost::math::quadrature::gauss<double, 20>::integrate(fn, lo, hi);
}

}  // namespace

RadialProfile::RadialProfile(RadialMetricSpec spec, RadialBC bc) : spec_(std::move(spec)), bc_(bc) {
    if (!(bc_.r_in > 0.0) || !(bc_.r_out > bc_.r_in)) throw ArgumentError("radial profile needs 0 < r_in < r_out");
    if (bc_.val_in == bc_.val_out) throw ArgumentError("equal boundary data give a constant profile");
    for (int i = 0; i <= 200; ++i) {
        const double r = bc_.r_in + (bc_.r_out - bc_.r_in) * i / 200.0;
        if (!(spec_.psi(r) > 0.0))
            throw ArgumentError("psi must be positive on the profile range, fails at r = " + std::to_string(r));
    }
    const auto inv_sq = [&](double r) {
        const double p = spec_.psi(r);
        return 1.0 / (p * p);
    };
    const double total = integrate(inv_sq, bc_.r_in, bc_.r_out);
    kappa_ = (bc_.val_out - bc_.val_in) / total;

    // geometric table in r, cumulative integrals segment by segment
    table_r_.resize(kTableSize);
    table_b_.resize(kTableSize);
    const double q = std::log(bc_.r_out / bc_.r_in) / (kTableSize - 1);
    table_r_[0] = bc_.r_in;
    table_b_[0] = bc_.val_in;
    double acc = 0.0;
    for (int i = 1; i < kTableSize; ++i) {
        table_r_[i] = i == kTableSize - 1 ? bc_.r_out : bc_.r_in * std::exp(q * i);
        acc += integrate_short(inv_sq, table_r_[i - 1], table_r_[i]);
        table_b_[i] = bc_.val_in + kappa_ * acc;
    }
    if (std::abs(acc - total) > 1e-9 * total)
        throw NumericError("radial quadrature disagrees: " + std::to_string(acc) + " vs " + std::to_string(total));
    table_b_.back() = bc_.val_out;
    std::vector<double> x(table_b_), y(table_r_);
    if (x.front() > x.back()) {
        std::reverse(x.begin(), x.end());
        std::reverse(y.begin(), y.end());
    }
    for (std::size_t i = 1; i < x.size(); ++i)
        if (!(x[i] > x[i - 1])) throw NumericError("radial profile is not strictly monotone");
    inverse_ = std::make_shared<boost::math::interpolators::pchip<std::vector<double>>>(std::move(x), std::move(y));
}

double RadialProfile::b(double r) const {
    const double slack = 1e-12 * bc_.r_out;
    if (r < bc_.r_in - slack || r > bc_.r_out + slack)
        throw RangeError("r = " + std::to_string(r) + " outside the profile range");
    const auto inv_sq = [&](double s) {
        const double p = spec_.psi(s);
        return 1.0 / (p * p);
    };
    // start from the nearest table node so the quadrature interval stays short
    r = std::clamp(r, bc_.r_in, bc_.r_out);
    const double q = std::log(bc_.r_out / bc_.r_in) / (table_r_.size() - 1);
    const auto i = static_cast<std::size_t>(
        std::clamp(std::lround(std::log(r / bc_.r_in) / q), 0L, static_cast<long>(table_r_.size() - 1)));
    return table_b_[i] + kappa_ * integrate_short(inv_sq, table_r_[i], r);
}

double RadialProfile::b_prime(double r) const {
    const double p = spec_.psi(r);
    return kappa_ / (p * p);
}

double RadialProfile::b_inverse(double u) const {
    const double lo = std::min(bc_.val_in, bc_.val_out), hi = std::max(bc_.val_in, bc_.val_out);
    const double slack = 1e-12 * (hi - lo);
    if (u < lo - slack || u > hi + slack)
        throw RangeError("level " + std::to_string(u) + " outside the profile range");
    u = std::clamp(u, lo, hi);
    double r = std::clamp((*inverse_)(u), bc_.r_in, bc_.r_out);
    // one Newton step on b(r) = u removes the interpolation error
    r = std::clamp(r - (b(r) - u) / b_prime(r), bc_.r_in, bc_.r_out);
    return r;
}

double RadialProfile::H(double r) const { return 2.0 * spec_.dpsi(r) / spec_.psi(r); }

double RadialProfile::f_of_t(double t) const { return H(t) / std::abs(b_prime(t)); }

double RadialProfile::c1(double t) const { return -1.0 / b_prime(t); }

template <class Fn>
double RadialProfile::diff(const Fn& fn, double t) const {
    const double h = 1e-4 * t;
    if (t - h >= bc_.r_in && t + h <= bc_.r_out) return (fn(t + h) - fn(t - h)) / (2.0 * h);
    if (t + 2.0 * h <= bc_.r_out) return (-3.0 * fn(t) + 4.0 * fn(t + h) - fn(t + 2.0 * h)) / (2.0 * h);
    return (3.0 * fn(t) - 4.0 * fn(t - h) + fn(t - 2.0 * h)) / (2.0 * h);
}

double RadialProfile::c1_prime(double t) const {
    return diff([this](double s) { return c1(s); }, t);
}

double RadialProfile::c2(double t) const { return (c1_prime(t) - 1.5 * f_of_t(t)) / b_prime(t); }

double RadialProfile::c2_prime(double t) const {
    return diff([this](double s) { return c2(s); }, t);
}

double RadialProfile::c3(double t) const {
    const double f = f_of_t(t);
    return c2_prime(t) - 0.75 * f * f;
}

RadialProfile radial_profile(const RadialMetricSpec& spec, const RadialBC& bc) { return RadialProfile(spec, bc); }

double model_Fbar_1d(const RadialProfile& p, double t) {
    const double psi = p.psi(t);
    const double area = 4.0 * kPi * psi * psi;
    const double gn = std::abs(p.b_prime(t));
    return 4.0 * kPi * t - p.c1(t) * p.H(t) * gn * area + p.c2(t) * gn * gn * area;
}

double model_Ftilde_1d(const RadialProfile& p, double a, double t) {
    const auto bulk = [&](double s) {
        const double psi = p.psi(s);
        const double area = 4.0 * kPi * psi * psi;
        const double bp = p.b_prime(s);
        return 0.5 * warped_curvature(p.spec(), s) * area + p.c3(s) * bp * bp * area;
    };
    const double b = t > a ? integrate(bulk, a, t) : 0.0;
    return model_Fbar_1d(p, t) - model_Fbar_1d(p, a) - b;
}

}  // namespace lab

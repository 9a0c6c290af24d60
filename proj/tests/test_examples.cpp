#include "lab/errors.hpp"
#include "lab/examples.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace lab;

namespace {

std::vector<Vec3> random_ball(int n, double radius, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-radius, radius);
    std::vector<Vec3> out;
    while (static_cast<int>(out.size()) < n) {
        const Vec3 x(U(rng), U(rng), U(rng));
        if (x.norm() < radius) out.push_back(x);
    }
    return out;
}

}  // namespace

TEST_CASE("cutoff profile is C2 with the right plateau and support") {
    const RadialCutoff c{0.2};
    CHECK(c.profile(0.05)[0] == 1.0);
    CHECK(c.profile(0.1)[0] == doctest::Approx(1.0));
    CHECK(c.profile(0.2)[0] == doctest::Approx(0.0));
    CHECK(c.profile(0.3)[0] == 0.0);
    for (double s : {0.1, 0.2}) {
        CHECK(std::abs(c.profile(s)[1]) < 1e-12);
        CHECK(std::abs(c.profile(s)[2]) < 1e-9);
    }
    // derivatives against centered differences
    const double h = 1e-6;
    for (double s : {0.12, 0.15, 0.18}) {
        const auto p = c.profile(s);
        CHECK(p[1] == doctest::Approx((c.profile(s + h)[0] - c.profile(s - h)[0]) / (2 * h)).epsilon(1e-6));
        CHECK(p[2] == doctest::Approx((c.profile(s + h)[1] - c.profile(s - h)[1]) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("sharpness family curvature bounds") {
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        const double a = 1.0 / 16.0;
        const auto pair = sharpness_pair(eps, a);
        const double r = std::pow(eps, 0.25);
        double inf_R = INFINITY;
        for (const auto& x : random_ball(3000, 0.999, 11)) inf_R = std::min(inf_R, scalar_curvature(pair.g, x));
        CHECK(inf_R >= -std::sqrt(eps) / 8.0);
        for (const auto& x : random_ball(300, r / 2, 12)) CHECK(scalar_curvature(pair.g, x) >= a * std::sqrt(eps));
    }
}

TEST_CASE("sharpness family with zero amplitude is the base metric") {
    const auto pair = sharpness_pair(1e-3, 0.0);
    for (const auto& x : random_ball(200, 0.99, 5)) CHECK((pair.g.eval(x) - pair.g0.eval(x)).norm() == 0.0);
}

TEST_CASE("sharpness family distance is O(epsilon)") {
    // dense ray through the support, which shrinks with epsilon
    std::vector<Vec3> pts;
    for (int i = 0; i < 4000; ++i) pts.push_back(Vec3(i / 4000.0, 0.0, 0.0));
    auto dist = [&](double eps) {
        const auto p = sharpness_pair(eps, 1.0 / 16.0);
        return c0_distance(p.g, p.g0, pts);
    };
    const double ratio = (dist(1e-2) / 1e-2) / (dist(1e-4) / 1e-4);
    CHECK(ratio > 0.5);
    CHECK(ratio < 2.0);
}

TEST_CASE("sharpness family argument checks") {
    CHECK_THROWS_AS(sharpness_family(0.0, 0.1), ArgumentError);
    CHECK_THROWS_AS(sharpness_family(0.2, 0.1), ArgumentError);
    // eps^(1/4) = 0.56 > 1/2
    CHECK_THROWS_AS(sharpness_family(0.1, 0.1), ArgumentError);
}

TEST_CASE("conformal factor laplacian matches finite differences at second order") {
    const auto fam = sharpness_family(1e-3, 1.0 / 16.0);
    const Vec3 x(0.08, 0.05, -0.03);
    auto fd = [&](double h) {
        double s = -6.0 * fam.phi(x).value;
        for (int k = 0; k < 3; ++k) {
            Vec3 e = Vec3::Zero();
            e[k] = h;
            s += fam.phi(x + e).value + fam.phi(x - e).value;
        }
        return s / (h * h);
    };
    const double exact = fam.phi(x).laplacian();
    const double e1 = std::abs(fd(2e-3) - exact), e2 = std::abs(fd(1e-3) - exact);
    CHECK(e2 < e1);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("warped metric with psi = r is Euclidean") {
    const MetricField g = warped_metric(euclidean_radial(0.01, 1.0));
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(-0.55, 0.55);
    int n = 0;
    while (n < 1000) {
        const Vec3 x(U(rng), U(rng), U(rng));
        if (x.norm() < 0.02 || x.norm() > 0.95) continue;
        ++n;
        CHECK((g.eval(x) - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("warped metric curvature") {
    const MetricField s = warped_metric(sine_radial(0.01, 1.0));
    const MetricField c = warped_metric(cubic_radial(0.3, 0.01, 1.0));
    for (double r : {0.1, 0.3, 0.7}) {
        const Vec3 x = r * Vec3(0.6, 0.0, 0.8);
        CHECK(scalar_curvature(s, x) == doctest::Approx(6.0).epsilon(1e-6));
        // psi = r + 0.3 r^3: psi' = 1 + 0.9 r^2, psi'' = 1.8 r
        const double p = r + 0.3 * r * r * r, dp = 1.0 + 0.9 * r * r, ddp = 1.8 * r;
        const double want = 2.0 * (1.0 - dp * dp - 2.0 * p * ddp) / (p * p);
        CHECK(scalar_curvature(c, x) == doctest::Approx(want).epsilon(1e-6));
        CHECK(warped_curvature(cubic_radial(0.3, 0.01, 1.0), r) == doctest::Approx(want).epsilon(1e-12));
    }
    CHECK_THROWS_AS(warped_metric(sine_radial(0.0, 1.0)), ArgumentError);
}

TEST_CASE("perturbation family") {
    const MetricField g0 = warped_metric(euclidean_radial(0.01, 1.0));
    const auto pts = random_ball(500, 0.9, 4);
    CHECK(c0_distance(perturbation_family(g0, h_sin5, 0.0), g0, pts) == 0.0);
    const double d = c0_distance(perturbation_family(g0, h_sin5, 1e-3), g0, pts);
    CHECK(d > 0.0);
    // ||sin(5 x1) (e11 - e22)||_F <= sqrt 2
    CHECK(d <= 1e-3 * std::sqrt(2.0) + 1e-15);
    CHECK_THROWS_AS(perturbation_shape("nope"), ArgumentError);
    CHECK_THROWS_AS(perturbation_family(g0, h_const, 5.0, pts), DomainError);
}

TEST_CASE("shrinking support family") {
    const MetricField g0 = conformal_metric(phi0_jet, Region::ball(1.0));
    InMeasureSpec spec;
    const auto pts = random_ball(4000, 0.99, 6);
    for (int k : {2, 4, 6}) {
        const MetricField g = shrinking_support_family(g0, k, spec);
        const double rho = std::ldexp(1.0, -k);
        // zero outside the support, full size at the centre
        const Vec3 out = spec.center + Vec3(0.0, 1.01 * rho, 0.0);
        CHECK((g.eval(out) - g0.eval(out)).norm() == 0.0);
        CHECK((g.eval(spec.center) - g0.eval(spec.center)).norm() == doctest::Approx(spec.delta).epsilon(1e-12));
        CHECK(c0_distance(g, g0, std::vector<Vec3>{spec.center}) == doctest::Approx(spec.delta));
        CHECK(bilipschitz_constant(g, g0, pts) <= 1.0 + 2.0 * spec.delta);
    }
    InMeasureSpec zero = spec;
    zero.delta = 0.0;
    const MetricField g = shrinking_support_family(g0, 3, zero);
    for (const auto& x : random_ball(100, 0.9, 8)) CHECK((g.eval(x) - g0.eval(x)).norm() == 0.0);
    CHECK_THROWS_AS(shrinking_support_family(g0, 0, spec), ArgumentError);
}

TEST_CASE("bump jet derivatives") {
    const Vec3 c(0.3, 0.0, 0.0), x(0.35, 0.02, -0.01);
    const double rho = 0.1, h = 1e-6;
    const ScalarJet j = bump_jet(x, c, rho);
    for (int k = 0; k < 3; ++k) {
        Vec3 e = Vec3::Zero();
        e[k] = h;
        CHECK(j.grad[k] == doctest::Approx((bump_jet(x + e, c, rho).value - bump_jet(x - e, c, rho).value) / (2 * h))
                               .epsilon(1e-6));
        const Vec3 dg = (bump_jet(x + e, c, rho).grad - bump_jet(x - e, c, rho).grad) / (2 * h);
        CHECK((j.hess.col(k) - dg).norm() < 1e-5 * (1.0 + j.hess.norm()));
    }
}

#include "lab/errors.hpp"
#include "lab/examples.hpp"
#include "lab/metric.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace lab;

namespace {

// phi = 1 + c |x|^2, so lap phi = 6c and R = -8 phi^-5 * 6c
constexpr double kC = 0.1;

ScalarJet quad_phi(const Vec3& x) {
    ScalarJet j;
    j.value = 1.0 + kC * x.squaredNorm();
    j.grad = 2.0 * kC * x;
    j.hess = 2.0 * kC * Mat3::Identity();
    return j;
}

// same metric phi^4 I written out by hand, without the conformal tag
SymJet quad_jet(const Vec3& x) {
    const ScalarJet p = quad_phi(x);
    SymJet j;
    j.value = std::pow(p.value, 4) * Mat3::Identity();
    for (int k = 0; k < 3; ++k) {
        j.d[k] = 4.0 * std::pow(p.value, 3) * p.grad[k] * Mat3::Identity();
        for (int l = 0; l < 3; ++l)
            j.dd[k][l] = (12.0 * p.value * p.value * p.grad[k] * p.grad[l] + 4.0 * std::pow(p.value, 3) * p.hess(k, l)) *
                         Mat3::Identity();
    }
    return j;
}

SymJet skew_jet(const Vec3& x) {
    Mat3 G;
    G << 2.0, 0.3, 0.0, 0.3, 1.0, -0.2, 0.0, -0.2, 1.5;
    Mat3 S;
    S << 0.2, 0.1, 0.0, 0.1, -0.1, 0.05, 0.0, 0.05, 0.3;
    SymJet j;
    j.value = G + x[0] * S + x[1] * x[2] * Mat3::Identity() * 0.1;
    for (int k = 0; k < 3; ++k) {
        j.d[k].setZero();
        for (int l = 0; l < 3; ++l) j.dd[k][l].setZero();
    }
    j.d[0] = S;
    j.d[1] = 0.1 * x[2] * Mat3::Identity();
    j.d[2] = 0.1 * x[1] * Mat3::Identity();
    j.dd[1][2] = j.dd[2][1] = 0.1 * Mat3::Identity();
    return j;
}

}  // namespace

TEST_CASE("region membership") {
    const Region b = Region::ball(1.0);
    CHECK(b.is_ball());
    CHECK(b.contains(Vec3(1, 0, 0)));
    CHECK_FALSE(b.strictly_inside(Vec3(1, 0, 0)));
    const Region s = Region::shell(0.5, 2.0);
    CHECK_FALSE(s.contains(Vec3(0.1, 0, 0)));
    CHECK(s.strictly_inside(Vec3(1, 0, 0)));
    CHECK(s.scaled(2.0).rho_out == doctest::Approx(4.0));
}

TEST_CASE("conformal and general curvature paths agree with the closed form") {
    const MetricField conf = conformal_metric(quad_phi, Region::ball(1.0));
    const MetricField gen = metric_from_jet(quad_jet, Region::ball(1.0));
    REQUIRE(conf.is_conformal());
    REQUIRE_FALSE(gen.is_conformal());
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-0.5, 0.5);
    for (int n = 0; n < 20; ++n) {
        const Vec3 x(U(rng), U(rng), U(rng));
        const double phi = 1.0 + kC * x.squaredNorm();
        const double want = -48.0 * kC * std::pow(phi, -5);
        CHECK(scalar_curvature(conf, x) == doctest::Approx(want).epsilon(1e-12));
        CHECK(scalar_curvature_general(gen, x) == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("curvature of the flat metric vanishes") {
    const MetricField flat = metric_from_jet(
        [](const Vec3&) {
            SymJet j;
            j.value = Mat3::Identity();
            return j;
        },
        Region::ball(1.0));
    CHECK(std::abs(scalar_curvature(flat, Vec3(0.2, 0.1, -0.3))) < 1e-14);
}

TEST_CASE("finite-difference derivatives match analytic ones") {
    const MetricField an = metric_from_jet(quad_jet, Region::ball(1.0));
    const MetricField fd([](const Vec3& x) { return quad_jet(x).value; }, Region::ball(1.0));
    REQUIRE_FALSE(fd.analytic_derivatives());
    const Vec3 x(0.3, -0.2, 0.1);
    const auto d1 = an.d_eval(x), e1 = fd.d_eval(x);
    for (int k = 0; k < 3; ++k) CHECK((d1[k] - e1[k]).norm() < 1e-7);
    CHECK(scalar_curvature(fd, x) == doctest::Approx(scalar_curvature(an, x)).epsilon(1e-4));
}

TEST_CASE("Christoffel symbols of a conformally flat metric") {
    // Gamma^k_ij = (2/phi)(delta_ik d_j phi + delta_jk d_i phi - delta_ij d_k phi)
    const Vec3 x(0.2, -0.4, 0.3);
    const SymJet j = quad_jet(x);
    const auto gam = christoffel(j.value, j.d);
    const ScalarJet p = quad_phi(x);
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i)
            for (int l = 0; l < 3; ++l) {
                const double want =
                    2.0 / p.value * ((i == k) * p.grad[l] + (l == k) * p.grad[i] - (i == l) * p.grad[k]);
                CHECK(gam[k](i, l) == doctest::Approx(want).epsilon(1e-12));
            }
}

TEST_CASE("coefficient matrix and its divergence") {
    Mat3 g = Mat3::Identity();
    g(0, 0) = 4.0;
    const Mat3 a = coefficient_matrix(g);
    CHECK(a(0, 0) == doctest::Approx(0.5));
    CHECK(a(1, 1) == doctest::Approx(2.0));

    // a = phi^2 I for g = phi^4 I, so div a = grad phi^2
    const CoefficientField cf(conformal_metric(quad_phi, Region::ball(1.0)));
    const Vec3 x(0.1, 0.3, -0.2);
    const ScalarJet p = quad_phi(x);
    const Vec3 want = 2.0 * p.value * p.grad;
    CHECK((cf.div_a(x) - want).norm() < 1e-9);
    CHECK((cf.a(x) - p.value * p.value * Mat3::Identity()).norm() < 1e-13);
}

TEST_CASE("c0 distance and SPD checks") {
    const MetricField g0 = metric_from_jet(quad_jet, Region::ball(1.0));
    const MetricField g = perturbation_family(g0, h_const, 0.01);
    const std::vector<Vec3> pts = {Vec3::Zero(), Vec3(0.5, 0, 0)};
    // ||h_const||_F = 1
    CHECK(c0_distance(g, g0, pts) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK_THROWS_AS(c0_distance(g, g0, std::vector<Vec3>{}), ArgumentError);
    Mat3 bad = Mat3::Identity();
    bad(2, 2) = -1.0;
    CHECK_FALSE(is_spd(bad));
    CHECK_THROWS_AS(require_spd(bad, Vec3::Zero()), DomainError);
}

TEST_CASE("c0 distance triangle inequality") {
    const MetricField a = metric_from_jet(quad_jet, Region::ball(1.0));
    const MetricField b = perturbation_family(a, h_sin5, 0.02);
    const MetricField c = perturbation_family(a, h_cos5, -0.03);
    std::vector<Vec3> pts;
    for (int i = 0; i < 200; ++i) pts.push_back(Vec3(i / 200.0, 0.1, -0.2));
    CHECK(c0_distance(a, c, pts) <= c0_distance(a, b, pts) + c0_distance(b, c, pts) + 1e-15);
}

TEST_CASE("coefficient field of the flat metric is the identity") {
    const MetricField flat = metric_from_jet(
        [](const Vec3&) {
            SymJet j;
            j.value = Mat3::Identity();
            return j;
        },
        Region::ball(1.0));
    const std::vector<Vec3> pts = {Vec3::Zero(), Vec3(0.3, 0.2, 0.1)};
    const CoefficientField cf = coefficient_field(flat, pts);
    CHECK(cf.a(Vec3(0.3, 0.2, 0.1)) == Mat3::Identity());
    CHECK(cf.lambda() == doctest::Approx(1.0));
    CHECK(cf.Lambda() == doctest::Approx(1.0));
    // the ellipticity ratio tends to 1 as the perturbation shrinks
    double prev = INFINITY;
    for (double eps : {0.2, 0.05, 0.01}) {
        const CoefficientField p = coefficient_field(perturbation_family(flat, h_const, eps), pts);
        const double ratio = p.Lambda() / p.lambda();
        CHECK(ratio < prev);
        CHECK(ratio > 1.0);
        prev = ratio;
    }
}

TEST_CASE("normalization removes value and first derivatives at the origin") {
    const MetricField g = metric_from_jet(skew_jet, Region::ball(1.0));
    CHECK_FALSE(check_normalized_at_origin(g, 1e-10, 1e-6));
    const auto nm = normalize_coordinates(g);
    CHECK((nm.metric.eval(Vec3::Zero()) - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    for (const auto& d : nm.metric.d_eval(Vec3::Zero())) CHECK(d.cwiseAbs().maxCoeff() < 1e-6);
    CHECK(nm.metric.normalized_at_origin());

    const MetricField back = pushforward(pullback(g, nm.map), nm.map);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-0.3, 0.3);
    for (int n = 0; n < 100; ++n) {
        const Vec3 x(U(rng), U(rng), U(rng));
        CHECK((back.eval(x) - g.eval(x)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("coordinate map inverse") {
    CoordinateMap m;
    m.P << 1.0, 0.1, 0.0, 0.0, 0.9, 0.05, 0.0, 0.0, 1.1;
    m.gamma[0](1, 1) = 0.2;
    m.gamma[2](0, 1) = m.gamma[2](1, 0) = -0.1;
    const Vec3 y(0.2, -0.1, 0.3);
    CHECK((m.inverse(m.forward(y)) - y).norm() < 1e-13);
}

TEST_CASE("rescaled metric") {
    const MetricField g = metric_from_jet(quad_jet, Region::ball(1.0));
    const MetricField h = rescale_metric(g, 0.25);
    const Vec3 y(1.0, 2.0, -0.5);
    CHECK((h.eval(y) - g.eval(0.25 * y)).norm() < 1e-15);
    const auto dh = h.d_eval(y), dg = g.d_eval(0.25 * y);
    for (int k = 0; k < 3; ++k) CHECK((dh[k] - 0.25 * dg[k]).norm() < 1e-15);
    CHECK(h.domain().rho_out == doctest::Approx(4.0));
    CHECK_THROWS_AS(rescale_metric(g, 0.0), ArgumentError);
}

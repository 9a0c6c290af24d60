#include "lab/elliptic.hpp"
#include "lab/errors.hpp"
#include "lab/examples.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

using namespace lab;

namespace {

ScalarJet one(const Vec3&) {
    ScalarJet j;
    j.value = 1.0;
    return j;
}

MetricField flat(double r_in, double r_out) { return conformal_metric(one, Region::shell(r_in, r_out)); }

double inv_r(const Vec3& x) { return 1.0 / x.norm(); }

double max_err(const GridFunction& u, const std::function<double(const Vec3&)>& f) {
    double e = 0.0;
    for (std::size_t p = 0; p < u.grid.size(); ++p) e = std::max(e, std::abs(u[p] - f(u.grid.position(p))));
    return e;
}

}  // namespace

TEST_CASE("shell grid geometry") {
    const ShellGrid g(0.5, 2.0, 9, 8, 16);
    CHECK(g.r(0) == doctest::Approx(0.5));
    CHECK(g.r(8) == doctest::Approx(2.0));
    for (std::size_t p = 0; p < g.size(); p += 37) {
        const auto [i, j, k] = g.ijk(p);
        CHECK(g.index(i, j, k) == p);
        CHECK(g.position(p).norm() == doctest::Approx(g.r(i)));
        // nothing on the axis
        CHECK(std::hypot(g.position(p)[0], g.position(p)[1]) > 0.0);
    }
    double vol = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) vol += g.volume(p);
    CHECK(vol == doctest::Approx(4.0 / 3.0 * std::numbers::pi * (8.0 - 0.125)).epsilon(1e-12));
    CHECK(g.shell_volume() == doctest::Approx(vol));
    const ShellGrid f = g.refined();
    CHECK(f.nr() == 17);
    CHECK(f.r(2) == doctest::Approx(g.r(1)));
    CHECK_FALSE(f.same_as(g));
}

TEST_CASE("interpolation reproduces radial functions at nodes and rejects outside points") {
    const ShellGrid g(0.5, 2.0, 9, 8, 16);
    const GridFunction u = sample(g, inv_r);
    CHECK(interpolate(u, g.position(std::size_t{100})) == doctest::Approx(u[100]));
    CHECK_THROWS_AS(interpolate(u, Vec3(3.0, 0, 0)), RangeError);
}

TEST_CASE("radial harmonic data is reproduced to solver tolerance") {
    // the log-radial finite-volume flux is exact for 1/r
    const CoefficientField cf(flat(0.5, 2.0));
    const ShellGrid g(0.5, 2.0, 17, 16, 32);
    const auto res = solve_dirichlet(cf, g, nullptr, sample(g, inv_r));
    CHECK(max_err(res.u, inv_r) < 1e-8);
}

TEST_CASE("Euclidean Dirichlet solve converges at second order") {
    const CoefficientField cf(flat(0.5, 2.0));
    auto dipole = [](const Vec3& x) {
        const double r = x.norm();
        return x[2] / (r * r * r) + x[0];
    };
    double prev = 0.0;
    ShellGrid g(0.5, 2.0, 9, 8, 16);
    for (int level = 0; level < 3; ++level) {
        const auto res = solve_dirichlet(cf, g, nullptr, sample(g, dipole));
        const double e = max_err(res.u, dipole);
        if (level > 0) CHECK(prev / e == doctest::Approx(4.0).epsilon(0.25));
        prev = e;
        g = g.refined();
    }
    CHECK(prev < 2e-3);
}

TEST_CASE("source term sign") {
    // lap r^2 = 6
    const CoefficientField cf(flat(0.5, 2.0));
    const ShellGrid g(0.5, 2.0, 17, 16, 32);
    auto r2 = [](const Vec3& x) { return x.squaredNorm(); };
    const GridFunction rhs = sample(g, [](const Vec3&) { return 6.0; });
    const auto res = solve_dirichlet(cf, g, &rhs, sample(g, r2));
    CHECK(max_err(res.u, r2) < 1e-2);
}

TEST_CASE("linear data is solved to discretization accuracy") {
    const CoefficientField cf(flat(0.5, 2.0));
    const ShellGrid g(0.5, 2.0, 17, 16, 32);
    auto x1 = [](const Vec3& x) { return x[0]; };
    const auto res = solve_dirichlet(cf, g, nullptr, sample(g, x1));
    CHECK(max_err(res.u, x1) < 5e-3);
}

TEST_CASE("radial solution of a warped model") {
    // Delta_g u = 0 for u radial is (psi^2 u')' = 0, so u(r) = A + B int psi^-2
    const auto spec = cubic_radial(0.5, 0.2, 0.9);
    const MetricField g0 = warped_metric(spec);
    auto Q = [&](double r) {
        // int_r^0.9 psi^-2 by Simpson with 2000 panels
        const int n = 2000;
        const double h = (0.9 - r) / n;
        double s = 0.0;
        for (int m = 0; m <= n; ++m) {
            const double t = r + m * h, p = spec.psi(t);
            s += (m == 0 || m == n ? 1.0 : (m % 2 ? 4.0 : 2.0)) / (p * p);
        }
        return s * h / 3.0;
    };
    const double Q0 = Q(0.2);
    auto exact = [&](const Vec3& x) { return Q(x.norm()) / Q0; };
    double prev = 0.0;
    ShellGrid g(0.2, 0.9, 9, 8, 16);
    for (int level = 0; level < 2; ++level) {
        const auto res = solve_dirichlet(CoefficientField(g0), g, nullptr, sample(g, exact));
        const double e = max_err(res.u, exact);
        if (level > 0) CHECK(e < prev / 3.0);
        prev = e;
        g = g.refined();
    }
    CHECK(prev < 2e-3);
}

TEST_CASE("maximum principle and flux balance for a rough coefficient") {
    const MetricField g0 = flat(0.5, 2.0);
    const MetricField g = perturbation_family(g0, h_sin5, 0.3);
    const ShellGrid grid(0.5, 2.0, 13, 12, 24);
    const Stencil st = assemble(CoefficientField(g), grid);
    const GridFunction bc = sample(grid, [](const Vec3& x) { return std::sin(3.0 * x[0]) + x[2] * x[2]; });
    const auto res = solve_with_stencil(st, nullptr, bc);
    double bmin = INFINITY, bmax = -INFINITY, imin = INFINITY, imax = -INFINITY;
    for (std::size_t p = 0; p < grid.size(); ++p) {
        const int i = grid.ijk(p)[0];
        if (grid.is_boundary_layer(i)) {
            bmin = std::min(bmin, res.u[p]);
            bmax = std::max(bmax, res.u[p]);
        } else {
            imin = std::min(imin, res.u[p]);
            imax = std::max(imax, res.u[p]);
        }
    }
    CHECK(imin >= bmin - 1e-9);
    CHECK(imax <= bmax + 1e-9);
    const auto flux = boundary_fluxes(st, res.u);
    CHECK(std::abs(flux[0] + flux[1]) <= 1e-7 * (std::abs(flux[0]) + std::abs(flux[1])));
}

TEST_CASE("solver reports failure to converge") {
    const CoefficientField cf(flat(0.5, 2.0));
    const ShellGrid g(0.5, 2.0, 9, 8, 16);
    SolveOptions opt;
    opt.max_iter = 2;
    CHECK_THROWS_AS(solve_dirichlet(cf, g, nullptr, sample(g, inv_r), opt), NumericError);
    const GridFunction other = sample(g.refined(), inv_r);
    CHECK_THROWS_AS(solve_dirichlet(cf, g, nullptr, other), ArgumentError);
}

TEST_CASE("Green's function of the Euclidean ball") {
    const MetricField g0 = conformal_metric(one, Region::ball(1.0)).with_normalized_flag(true);
    const ShellGrid grid(1.0 / 64.0, 1.0, 25, 12, 24);
    const GreenResult gr = green_function(g0, grid);
    // Gamma = 1/|x| - 1 on the unit ball, so e = -1 and u0 = 1/|x|
    for (std::size_t p = 0; p < grid.size(); p += 11) CHECK(gr.e[p] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(gr.e0 == doctest::Approx(-1.0).epsilon(1e-6));
    for (double r = 0.1; r <= 0.9; r += 0.1) {
        const Vec3 x = r * Vec3(0.36, 0.48, 0.8);
        CHECK(gr.u0(x) * r == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("Green's function of a curved ball behaves like 1/|x| at the pole") {
    const MetricField g0 = conformal_metric(phi0_jet, Region::ball(1.0)).with_normalized_flag(true);
    const ShellGrid grid(1.0 / 256.0, 1.0, 41, 16, 32);
    const GreenResult gr = green_function(g0, grid);
    const Vec3 x(0.02, 0.0, 0.0);
    CHECK(gr.u0(x) * x.norm() == doctest::Approx(1.0).epsilon(5e-3));
    CHECK(std::abs(gr.e0 - gr.e0_check) < 1e-2 * std::abs(gr.e0));
}

TEST_CASE("Green's function needs a normalized metric") {
    auto skew = [](const Vec3& x) {
        ScalarJet j;
        j.value = 1.0 + 0.1 * x[0];
        j.grad = Vec3(0.1, 0.0, 0.0);
        return j;
    };
    const MetricField g0 = conformal_metric(skew, Region::ball(1.0));
    CHECK_THROWS_AS(green_function(g0, ShellGrid(0.01, 1.0, 9, 8, 16)), PreconditionError);
}

TEST_CASE("gradients and Hessians") {
    const ShellGrid g(0.5, 2.0, 17, 16, 32);
    const GridFunction lin = sample(g, [](const Vec3& x) { return 2.0 * x[0] - x[1] + 0.5 * x[2]; });
    for (std::size_t p = g.size() / 3; p < g.size() / 3 + 40; ++p)
        CHECK((gradient_at(lin, p) - Vec3(2.0, -1.0, 0.5)).norm() < 1e-12);
    CHECK_THROWS_AS(gradient_at(lin, 0), RangeError);

    // radial b(r) = 1/r: chords along rays see the exact gradient; Hessian
    // eigenvalues are b'' = 2/r^3 and b'/r = -1/r^3 twice
    auto err = [](const ShellGrid& gr) {
        const GridFunction u = sample(gr, inv_r);
        double eg = 0.0, eh = 0.0;
        for (int j = 0; j < gr.ntheta(); ++j) {
            const int i = (gr.nr() - 1) / 2;
            const std::size_t p = gr.index(i, j, 3);
            const Vec3 x = gr.position(p);
            const double r = x.norm();
            eg = std::max(eg, (gradient_at(u, p) + x / (r * r * r)).norm() * r * r);
            Eigen::SelfAdjointEigenSolver<Mat3> es(hessian_at(u, p));
            const Vec3 ev = es.eigenvalues() * r * r * r;
            eh = std::max({eh, std::abs(ev[0] + 1.0), std::abs(ev[1] + 1.0), std::abs(ev[2] - 2.0)});
        }
        return std::pair{eg, eh};
    };
    const auto [g1, h1] = err(g);
    const auto [g2, h2] = err(g.refined());
    CHECK(g1 < 1e-12);
    CHECK(g2 < 1e-12);
    CHECK(h1 < 5e-2);
    CHECK(h1 / h2 == doctest::Approx(4.0).epsilon(0.3));
}

TEST_CASE("error norms") {
    const MetricField g0 = flat(0.5, 2.0);
    const ShellGrid g(0.5, 2.0, 9, 8, 16);
    const GridFunction u = sample(g, inv_r);
    CHECK(lp_gradient_error(u, u, g0, 2.0, {}) == 0.0);
    CHECK(sup_error(u, u, {}) == 0.0);
    GridFunction v = u;
    for (auto& x : v.values) x += 0.25;
    CHECK(sup_error(u, v, {}) == doctest::Approx(0.25));
    CHECK(lp_gradient_error(u, v, g0, 2.0, {}) < 1e-12);
    CHECK_THROWS_AS(lp_gradient_error(u, sample(g.refined(), inv_r), g0, 2.0, {}), ArgumentError);
    CHECK_THROWS_AS(lp_gradient_error(u, u, g0, 0.5, {}), ArgumentError);
}

TEST_CASE("grid function dump round trip") {
    const ShellGrid g(0.5, 2.0, 9, 8, 16);
    const GridFunction u = sample(g, [](const Vec3& x) { return std::exp(x[0]) / 3.0; });
    const auto path = (std::filesystem::temp_directory_path() / "lab_gridfn_roundtrip.bin").string();
    write_grid_function(path, u);
    const GridFunction w = read_grid_function(path);
    std::filesystem::remove(path);
    CHECK(w.grid.same_as(g));
    CHECK(w.values == u.values);
    CHECK_THROWS_AS(read_grid_function(path), ArgumentError);
}

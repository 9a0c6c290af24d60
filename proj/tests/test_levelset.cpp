#include "lab/errors.hpp"
#include "lab/examples.hpp"
#include "lab/levelset.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

using namespace lab;

namespace {

constexpr double kPi = std::numbers::pi;

ScalarJet one(const Vec3&) {
    ScalarJet j;
    j.value = 1.0;
    return j;
}

struct Fixture {
    MetricField g = conformal_metric(one, Region::shell(0.5, 8.0));
    ShellGrid grid{0.5, 8.0, 49, 32, 64};
    GridFunction u = sample(grid, [](const Vec3& x) { return 1.0 / x.norm(); });
    LevelContext ctx = make_level_context(u, g, true);
};

const Fixture& fx() {
    static const Fixture f;
    return f;
}

}  // namespace

TEST_CASE("Irwin-Hall CDF") {
    for (double x : {0.1, 0.4, 0.9}) CHECK(irwin_hall_cdf(x, 1) == doctest::Approx(x));
    // triangle density for two uniforms
    CHECK(irwin_hall_cdf(0.6, 2) == doctest::Approx(0.18));
    CHECK(irwin_hall_cdf(1.5, 2) == doctest::Approx(1.0 - 0.125));
    CHECK(irwin_hall_cdf(1.5, 3) == doctest::Approx(0.5));
    CHECK(irwin_hall_cdf(0.5, 3) == doctest::Approx(0.125 / 6.0));
    for (int n = 1; n <= 4; ++n) {
        CHECK(irwin_hall_cdf(-1.0, n) == 0.0);
        CHECK(irwin_hall_cdf(n + 1.0, n) == 1.0);
        CHECK(irwin_hall_cdf(0.3 * n, n) + irwin_hall_cdf(0.7 * n, n) == doctest::Approx(1.0));
    }
}

TEST_CASE("band over the whole range is the total volume") {
    const auto& f = fx();
    const double total = std::accumulate(f.ctx.dv.begin(), f.ctx.dv.end(), 0.0);
    const BandResult b = band_integral(f.ctx, f.ctx.u_min - 1.0, f.ctx.u_max + 1.0, [](std::size_t) { return 1.0; });
    CHECK(b.value == doctest::Approx(total).epsilon(1e-12));
    CHECK(total == doctest::Approx(4.0 / 3.0 * kPi * (512.0 - 0.125)).epsilon(1e-12));
}

TEST_CASE("band volume between two spheres") {
    const auto& f = fx();
    // {1/4 <= 1/r <= 1/2} is 2 <= r <= 4
    const BandResult b = band_integral(f.ctx, 0.25, 0.5, [](std::size_t) { return 1.0; });
    CHECK(b.value == doctest::Approx(4.0 / 3.0 * kPi * (64.0 - 8.0)).epsilon(1e-2));
    CHECK_FALSE(b.touches_boundary);
    CHECK(b.cells_across > 8.0);
    CHECK(band_integral(f.ctx, 5.0, 6.0, [](std::size_t) { return 1.0; }).empty);
}

TEST_CASE("surface area and boundary flag") {
    const auto& f = fx();
    const auto area = surface_integral(f.ctx, 0.5, [](std::size_t) { return 1.0; });
    CHECK(area.value == doctest::Approx(16.0 * kPi).epsilon(1e-2));
    CHECK(area.half_width > 0.0);
    CHECK(surface_integral(f.ctx, 1.0 / 8.0, [](std::size_t) { return 1.0; }).touches_boundary);
    CHECK_THROWS_AS(surface_integral(f.ctx, 10.0, [](std::size_t) { return 1.0; }), RangeError);
}

TEST_CASE("round spheres: H = 2/r and every integrand term vanishes") {
    const auto& f = fx();
    const ShellGrid& g = f.grid;
    double eH = 0.0, eT = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        const int i = g.ijk(p)[0];
        if (i < 3 || i > g.nr() - 4) continue;
        const double r = g.r(i);
        eH = std::max(eH, std::abs(f.ctx.H[p] * r / 2.0 - 1.0));
        const IntegrandTerms t = integrand_terms(f.ctx, p);
        // natural size of each term is 1/r^2
        eT = std::max({eT, t.tangential * r * r, t.traceless * r * r, t.umbilic * r * r});
        CHECK(t.tangential >= 0.0);
        CHECK(t.traceless >= 0.0);
        CHECK(t.umbilic >= 0.0);
    }
    CHECK(eH < 1e-2);
    CHECK(eT < 1e-3);
}

TEST_CASE("context without geometry refuses integrand terms") {
    const auto& f = fx();
    const LevelContext bare = make_level_context(f.u, f.g, false);
    CHECK_FALSE(bare.has_geometry);
    CHECK_THROWS_AS(integrand_terms(bare, 100), ArgumentError);
    CHECK_THROWS_AS(make_level_context(f.u, f.g, false, 5), ArgumentError);
}

TEST_CASE("degenerate level is reported") {
    const MetricField g = conformal_metric(one, Region::shell(0.5, 2.0));
    const ShellGrid grid(0.5, 2.0, 33, 16, 32);
    // u is flat for r <= 1, so the level u = 0+ sits on a plateau
    const GridFunction u = sample(grid, [](const Vec3& x) { return std::pow(std::max(x.norm() - 1.0, 0.0), 3); });
    const LevelContext ctx = make_level_context(u, g, true);
    CHECK_THROWS_AS(surface_integral(ctx, 1e-12, [](std::size_t) { return 1.0; }), DomainError);
}

TEST_CASE("band integrals converge at second order") {
    const MetricField g = conformal_metric(one, Region::shell(0.5, 8.0));
    // integral of |grad u|^2 over 2 <= r <= 4 for u = 1/r: 4 pi (1/2 - 1/4)
    const double want = kPi;
    double prev = 0.0;
    ShellGrid grid(0.5, 8.0, 13, 8, 16);
    for (int level = 0; level < 3; ++level) {
        const GridFunction u = sample(grid, [](const Vec3& x) { return 1.0 / x.norm(); });
        const LevelContext ctx = make_level_context(u, g, false);
        const double v = band_integral(ctx, 0.25, 0.5, [&](std::size_t p) { return ctx.gnorm[p] * ctx.gnorm[p]; }).value;
        const double e = std::abs(v - want);
        if (level > 0) CHECK(prev / e > 3.0);
        prev = e;
        grid = grid.refined();
    }
}

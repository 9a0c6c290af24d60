#pragma once

#include "lab/metric.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lab {

/// Spherical shell tensor grid. Radial nodes are uniform in s = ln r (both
/// boundary spheres carry nodes), polar nodes sit at (j + 1/2) pi / ntheta so
/// no node lands on the axis, azimuthal nodes at 2 pi k / nphi.
/// Node index is (i * ntheta + j) * nphi + k.
class ShellGrid {
public:
    ShellGrid() = default;
    ShellGrid(double rho_in, double rho_out, int nr, int ntheta, int nphi);

    double rho_in() const { return rho_in_; }
    double rho_out() const { return rho_out_; }
    int nr() const { return nr_; }
    int ntheta() const { return nt_; }
    int nphi() const { return np_; }
    std::size_t size() const { return static_cast<std::size_t>(nr_) * nt_ * np_; }

    double ds() const { return ds_; }
    double dtheta() const { return dth_; }
    double dphi() const { return dph_; }

    double r(int i) const { return r_[i]; }
    double theta(int j) const { return (j + 0.5) * dth_; }
    double phi(int k) const { return k * dph_; }

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * nt_ + j) * np_ + k;
    }
    std::array<int, 3> ijk(std::size_t idx) const;
    Vec3 position(int i, int j, int k) const;
    Vec3 position(std::size_t idx) const;

    /// Euclidean volume of the dual cell around a node (half cells on the boundary spheres).
    double volume(std::size_t idx) const;
    double shell_volume() const;
    bool is_boundary_layer(int i) const { return i == 0 || i == nr_ - 1; }

    /// Node with the same (i, k) mirrored across a pole: used for j = -1 and j = ntheta.
    std::size_t wrap(int i, int j, int k) const;

    ShellGrid refined() const { return ShellGrid(rho_in_, rho_out_, 2 * nr_ - 1, 2 * nt_, 2 * np_); }
    bool same_as(const ShellGrid& o) const;
    std::string describe() const;

private:
    double rho_in_ = 0.0, rho_out_ = 0.0;
    int nr_ = 0, nt_ = 0, np_ = 0;
    double ds_ = 0.0, dth_ = 0.0, dph_ = 0.0;
    std::vector<double> r_;
    std::vector<double> rvol_;   // radial factor of the dual-cell volume
    std::vector<double> thvol_;  // polar factor
};

struct GridFunction {
    ShellGrid grid;
    std::vector<double> values;

    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
};

GridFunction sample(const ShellGrid& grid, const std::function<double(const Vec3&)>& f);

/// Trilinear interpolation in (ln r, theta, phi), mirrored across the poles.
double interpolate(const GridFunction& u, const Vec3& x);

/// 19-point symmetric stencil in (s, theta, phi) from the finite-volume energy.
struct Stencil {
    static constexpr int kWidth = 19;
    ShellGrid grid;
    std::vector<double> coef;   // size() * kWidth, slot 0 is the diagonal
    std::vector<std::int32_t> nbr;  // neighbour index or -1

    static int slot(int di, int dj, int dk);
    void apply(const std::vector<double>& x, std::vector<double>& y) const;
};

Stencil assemble(const CoefficientField& coef, const ShellGrid& grid);

struct SolveOptions {
    double rel_tol = 1e-10;
    int max_iter = 50000;
    int stagnation_window = 500;
    /// zero-flux condition on the inner sphere instead of Dirichlet data
    bool neumann_inner = false;
};

struct SolveResult {
    GridFunction u;
    int iterations = 0;
    double rel_residual = 0.0;
    std::vector<double> history;
};

/// Solves D_j(a^{ij} D_i u) = rhs with u = bc on the boundary spheres.
/// rhs may be empty (treated as zero); only boundary-layer entries of bc are read.
SolveResult solve_dirichlet(const CoefficientField& coef, const ShellGrid& grid, const GridFunction* rhs,
                            const GridFunction& bc, const SolveOptions& opt = {});
SolveResult solve_with_stencil(const Stencil& st, const GridFunction* rhs, const GridFunction& bc,
                               const SolveOptions& opt = {});

/// Net discrete flux through the inner and outer spheres.
std::array<double, 2> boundary_fluxes(const Stencil& st, const GridFunction& u);

struct GreenResult {
    GridFunction e;
    double e0 = 0.0;
    double e0_check = 0.0;  // same extrapolation from the next three shells
    bool warning = false;
    std::string note;
    int iterations = 0;

    double u0(const Vec3& x) const { return 1.0 / x.norm() + interpolate(e, x) - e0; }
    /// u0 at grid nodes of e
    GridFunction u0_on_grid() const;
};

/// Regular part e of the Green's function on a ball grid with the core excised.
GreenResult green_function(const MetricField& g0, const ShellGrid& grid, const SolveOptions& opt = {});

/// Cartesian partials from symmetric chords in the three grid directions.
/// Valid for 1 <= i <= nr - 2; boundary layers raise a range error.
Vec3 gradient_at(const GridFunction& u, std::size_t idx);
/// Every node; boundary layers fall back to one-sided chords.
std::vector<Vec3> gradient_field(const GridFunction& u);
/// Gradient of the gradient, symmetrized. Interior nodes 2 <= i <= nr - 3 are second order.
std::vector<Mat3> hessian_field(const GridFunction& u, const std::vector<Vec3>& grad);
Mat3 hessian_at(const GridFunction& u, std::size_t idx);

double grad_norm_g(const Mat3& g, const Vec3& du);

struct RadialWindow {
    double r_lo = 0.0;
    double r_hi = 1e300;
    bool contains(double r) const { return r >= r_lo && r <= r_hi; }
};

/// (sum |grad u - grad u0|^p dv_g)^(1/p) over interior nodes inside the window.
double lp_gradient_error(const GridFunction& u, const GridFunction& u0, const MetricField& g, double p,
                         const RadialWindow& region);
double sup_error(const GridFunction& u, const GridFunction& u0, const RadialWindow& region);

void write_grid_function(const std::string& path, const GridFunction& u);
GridFunction read_grid_function(const std::string& path);

}  // namespace lab

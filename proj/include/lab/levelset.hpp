#pragma once

#include "lab/elliptic.hpp"

#include <functional>
#include <string>
#include <vector>

namespace lab {

/// Per-node data shared by every band and surface integral over one function u.
/// Each node spreads its measure over u-values with a kernel: the sum of
/// `kernel_order` uniforms whose width is the u-range of the dual cell. Order 1
/// is the plain linear sub-cell fraction; order 3 suppresses the grid-phase error
/// at band edges so that band integrals converge at a clean second order.
struct LevelContext {
    GridFunction u;
    std::vector<Vec3> grad;       // Cartesian partials
    std::vector<double> gnorm;    // |grad u|_g
    std::vector<double> dv;       // sqrt(det g) * cell volume
    std::vector<double> lo;       // lower end of the kernel support
    std::vector<double> width;    // u-range of the cell
    std::vector<unsigned char> order;  // uniforms in the kernel (1 on boundary spheres)
    int kernel_order = 3;
    /// kernel support of each radial layer, used to skip layers outside a band
    std::vector<double> layer_lo, layer_hi;
    double grad_floor = 0.0;
    double u_min = 0.0, u_max = 0.0;

    bool has_geometry = false;
    std::vector<double> H;        // -div(grad u / |grad u|)
    std::vector<double> A_sq;     // |A|^2
    std::vector<double> A_ring_sq;
    std::vector<double> tan_grad_sq;  // |grad^Sigma |grad u||^2

    std::size_t size() const { return u.values.size(); }
    int layer(std::size_t p) const { return u.grid.ijk(p)[0]; }
    /// probability that the cell model of node p lies in [c, d]
    double band_weight(std::size_t p, double c, double d) const;
    /// mean cell range over nodes whose range contains level y (0 when none)
    double mean_range_at(double y) const;
    /// calls fn(p) for every node whose kernel support meets [c, d], in index order
    template <class Fn>
    void for_nodes_meeting(double c, double d, Fn&& fn) const {
        const std::size_t per_layer = static_cast<std::size_t>(u.grid.ntheta()) * u.grid.nphi();
        for (std::size_t i = 0; i < layer_lo.size(); ++i) {
            if (d < layer_lo[i] || c > layer_hi[i]) continue;
            for (std::size_t p = i * per_layer; p < (i + 1) * per_layer; ++p) fn(p);
        }
    }
};

LevelContext make_level_context(const GridFunction& u, const MetricField& g, bool geometry,
                                int kernel_order = 3);

/// CDF of the sum of n independent uniforms on [0, 1].
double irwin_hall_cdf(double x, int n);

using NodeIntegrand = std::function<double(std::size_t)>;

struct BandResult {
    double value = 0.0;
    bool empty = false;
    bool touches_boundary = false;
    /// (d - c) over the mean cell range of the nodes in the band
    double cells_across = 0.0;
};

BandResult band_integral(const LevelContext& ctx, double c, double d, const NodeIntegrand& f);
/// Convenience overload that builds the context.
BandResult band_integral(const GridFunction& u, const MetricField& g, double c, double d, const NodeIntegrand& f);

struct SurfaceResult {
    double value = 0.0;
    double half_width = 0.0;
    bool touches_boundary = false;
};

struct SurfaceOptions {
    /// combine half-widths delta and 2 delta to cancel the smoothing bias of each
    /// integral separately (off: the biases largely cancel inside F)
    bool extrapolate = false;
};

/// Co-area band average: (1/(2 delta)) * band(level -/+ delta, f |grad u|_g), with
/// delta the mean cell u-range at the level.
SurfaceResult surface_integral(const LevelContext& ctx, double level, const NodeIntegrand& f,
                               const SurfaceOptions& opt = {});

/// Nonnegative terms of the monotonicity integrand at node p.
struct IntegrandTerms {
    double tangential = 0.0;  // |grad^Sigma |grad u||^2 / |grad u|^2
    double traceless = 0.0;   // |A_ring|^2 / 2
    double umbilic = 0.0;     // 3/4 (2 |grad u| / u - H)^2
};

IntegrandTerms integrand_terms(const LevelContext& ctx, std::size_t p);

}  // namespace lab

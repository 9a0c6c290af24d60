#include "lab/elliptic.hpp"

#include "lab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace lab {

// ---------------------------------------------------------------- grid

ShellGrid::ShellGrid(double rho_in, double rho_out, int nr, int ntheta, int nphi)
    : rho_in_(rho_in), rho_out_(rho_out), nr_(nr), nt_(ntheta), np_(nphi) {
    if (!(rho_in > 0.0) || !(rho_out > rho_in)) throw ArgumentError("shell grid needs 0 < rho_in < rho_out");
    if (nr < 4 || ntheta < 2 || nphi < 4 || nphi % 2 != 0)
        throw ArgumentError("shell grid needs nr >= 4, ntheta >= 2 and an even nphi >= 4");
    ds_ = std::log(rho_out / rho_in) / (nr - 1);
    dth_ = std::numbers::pi / nt_;
    dph_ = 2.0 * std::numbers::pi / np_;
    const double s0 = std::log(rho_in);
    r_.resize(nr_);
    rvol_.resize(nr_);
    for (int i = 0; i < nr_; ++i) r_[i] = std::exp(s0 + i * ds_);
    r_.front() = rho_in;
    r_.back() = rho_out;
    for (int i = 0; i < nr_; ++i) {
        const double lo = i == 0 ? rho_in : std::exp(s0 + (i - 0.5) * ds_);
        const double hi = i == nr_ - 1 ? rho_out : std::exp(s0 + (i + 0.5) * ds_);
        rvol_[i] = (hi * hi * hi - lo * lo * lo) / 3.0;
    }
    thvol_.resize(nt_);
    for (int j = 0; j < nt_; ++j) thvol_[j] = std::cos(j * dth_) - std::cos((j + 1) * dth_);
}

std::array<int, 3> ShellGrid::ijk(std::size_t idx) const {
    const int k = static_cast<int>(idx % np_);
    const std::size_t rest = idx / np_;
    return {static_cast<int>(rest / nt_), static_cast<int>(rest % nt_), k};
}

Vec3 ShellGrid::position(int i, int j, int k) const {
    const double r = r_[i], th = theta(j), ph = phi(k);
    return {r * std::sin(th) * std::cos(ph), r * std::sin(th) * std::sin(ph), r * std::cos(th)};
}

Vec3 ShellGrid::position(std::size_t idx) const {
    const auto [i, j, k] = ijk(idx);
    return position(i, j, k);
}

double ShellGrid::volume(std::size_t idx) const {
    const auto [i, j, k] = ijk(idx);
    return rvol_[i] * thvol_[j] * dph_;
}

double ShellGrid::shell_volume() const {
    return 4.0 * std::numbers::pi / 3.0 * (rho_out_ * rho_out_ * rho_out_ - rho_in_ * rho_in_ * rho_in_);
}

std::size_t ShellGrid::wrap(int i, int j, int k) const {
    if (j < 0) {
        j = -1 - j;
        k += np_ / 2;
    } else if (j >= nt_) {
        j = 2 * nt_ - 1 - j;
        k += np_ / 2;
    }
    k %= np_;
    if (k < 0) k += np_;
    return index(i, j, k);
}

bool ShellGrid::same_as(const ShellGrid& o) const {
    return rho_in_ == o.rho_in_ && rho_out_ == o.rho_out_ && nr_ == o.nr_ && nt_ == o.nt_ && np_ == o.np_;
}

std::string ShellGrid::describe() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "shell [%.6g, %.6g] %dx%dx%d", rho_in_, rho_out_, nr_, nt_, np_);
    return buf;
}

GridFunction sample(const ShellGrid& grid, const std::function<double(const Vec3&)>& f) {
    GridFunction u{grid, std::vector<double>(grid.size())};
    for (std::size_t n = 0; n < grid.size(); ++n) u.values[n] = f(grid.position(n));
    return u;
}

double interpolate(const GridFunction& u, const Vec3& x) {
    const ShellGrid& g = u.grid;
    const double r = x.norm();
    const double fi = std::log(r / g.rho_in()) / g.ds();
    if (fi < -1e-9 || fi > g.nr() - 1 + 1e-9)
        throw RangeError("interpolation point outside the shell at " + lab::describe(x));
    const int i0 = std::clamp(static_cast<int>(std::floor(fi)), 0, g.nr() - 2);
    const double wi = std::clamp(fi - i0, 0.0, 1.0);

    const double th = std::acos(std::clamp(x[2] / r, -1.0, 1.0));
    double ph = std::atan2(x[1], x[0]);
    if (ph < 0.0) ph += 2.0 * std::numbers::pi;
    const double ft = th / g.dtheta() - 0.5;
    const int j0 = std::clamp(static_cast<int>(std::floor(ft)), -1, g.ntheta() - 1);
    const double wj = ft - j0;
    const double fp = ph / g.dphi();
    const int k0 = static_cast<int>(std::floor(fp));
    const double wk = fp - k0;

    double acc = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
                const double w = (a ? wi : 1.0 - wi) * (b ? wj : 1.0 - wj) * (c ? wk : 1.0 - wk);
                if (w == 0.0) continue;
                acc += w * u.values[g.wrap(i0 + a, j0 + b, k0 + c)];
            }
    return acc;
}

// ---------------------------------------------------------------- stencil

int Stencil::slot(int di, int dj, int dk) {
    static const std::array<int, 27> table = [] {
        std::array<int, 27> t{};
        t.fill(-1);
        int next = 1;
        for (int a = -1; a <= 1; ++a)
            for (int b = -1; b <= 1; ++b)
                for (int c = -1; c <= 1; ++c) {
                    const int nz = (a != 0) + (b != 0) + (c != 0);
                    const int key = (a + 1) * 9 + (b + 1) * 3 + (c + 1);
                    if (nz == 0) t[key] = 0;
                    else if (nz <= 2) t[key] = next++;
                }
        return t;
    }();
    return table[(di + 1) * 9 + (dj + 1) * 3 + (dk + 1)];
}

void Stencil::apply(const std::vector<double>& x, std::vector<double>& y) const {
    const std::size_t n = grid.size();
    y.assign(n, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        const double* c = &coef[p * kWidth];
        const std::int32_t* nb = &nbr[p * kWidth];
        double acc = 0.0;
        for (int s = 0; s < kWidth; ++s)
            if (nb[s] >= 0) acc += c[s] * x[nb[s]];
        y[p] = acc;
    }
}

namespace {

struct Frame {
    Mat3 R;  // columns e_r, e_theta, e_phi
};

Mat3 frame(double th, double ph) {
    const double st = std::sin(th), ct = std::cos(th), sp = std::sin(ph), cp = std::cos(ph);
    Mat3 R;
    R << st * cp, ct * cp, -sp,
         st * sp, ct * sp, cp,
         ct, -st, 0.0;
    return R;
}

}  // namespace

Stencil assemble(const CoefficientField& coef, const ShellGrid& grid) {
    const int nr = grid.nr(), nt = grid.ntheta(), np = grid.nphi();
    const std::size_t n = grid.size();
    const double ds = grid.ds(), dth = grid.dtheta(), dph = grid.dphi();
    const double s0 = std::log(grid.rho_in());

    Stencil st;
    st.grid = grid;
    st.coef.assign(n * Stencil::kWidth, 0.0);
    st.nbr.assign(n * Stencil::kWidth, -1);
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nt; ++j)
            for (int k = 0; k < np; ++k) {
                const std::size_t p = grid.index(i, j, k);
                for (int di = -1; di <= 1; ++di)
                    for (int dj = -1; dj <= 1; ++dj)
                        for (int dk = -1; dk <= 1; ++dk) {
                            const int s = Stencil::slot(di, dj, dk);
                            if (s < 0) continue;
                            const int ii = i + di, jj = j + dj;
                            if (ii < 0 || ii >= nr || jj < 0 || jj >= nt) continue;
                            st.nbr[p * Stencil::kWidth + s] =
                                static_cast<std::int32_t>(grid.index(ii, jj, (k + dk + np) % np));
                        }
            }

    std::vector<Mat3> a(n);
    for (std::size_t p = 0; p < n; ++p) a[p] = coef.a(grid.position(p));

    auto node = [&](int i, int j, int k) { return grid.index(i, j, ((k % np) + np) % np); };
    auto add = [&](int i, int j, int k, int di, int dj, int dk, double v) {
        st.coef[node(i, j, k) * Stencil::kWidth + Stencil::slot(di, dj, dk)] += v;
    };
    auto half = [&](int i) { return grid.is_boundary_layer(i) ? 0.5 : 1.0; };
    auto rface = [&](double fi) { return std::exp(s0 + fi * ds); };

    // pair of nodes joined by a face with weight w
    auto face = [&](int i, int j, int k, int di, int dj, int dk, double w) {
        add(i, j, k, 0, 0, 0, w);
        add(i + di, j + dj, k + dk, 0, 0, 0, w);
        add(i, j, k, di, dj, dk, -w);
        add(i + di, j + dj, k + dk, -di, -dj, -dk, -w);
    };

    // cross term c * D_alpha * D_beta over a plaquette spanned by offsets ea, eb
    auto plaquette = [&](int i, int j, int k, const std::array<int, 3>& ea, const std::array<int, 3>& eb, double c) {
        static constexpr double va[4] = {-1, 1, -1, 1};
        static constexpr double vb[4] = {-1, -1, 1, 1};
        std::array<std::array<int, 3>, 4> off;
        for (int m = 0; m < 3; ++m) {
            off[0][m] = 0;
            off[1][m] = ea[m];
            off[2][m] = eb[m];
            off[3][m] = ea[m] + eb[m];
        }
        for (int p = 0; p < 4; ++p)
            for (int q = 0; q < 4; ++q) {
                const double v = c * (va[p] * vb[q] + vb[p] * va[q]);
                if (v == 0.0) continue;
                add(i + off[p][0], j + off[p][1], k + off[p][2], off[q][0] - off[p][0], off[q][1] - off[p][1],
                    off[q][2] - off[p][2], v);
            }
    };

    // radial faces
    for (int i = 0; i + 1 < nr; ++i) {
        const double r = rface(i + 0.5);
        for (int j = 0; j < nt; ++j) {
            const double th = grid.theta(j);
            for (int k = 0; k < np; ++k) {
                const Mat3 R = frame(th, grid.phi(k));
                const Mat3 af = 0.5 * (a[node(i, j, k)] + a[node(i + 1, j, k)]);
                const double K = r * std::sin(th) * R.col(0).dot(af * R.col(0));
                face(i, j, k, 1, 0, 0, K * dth * dph / ds);
            }
        }
    }
    // polar faces
    for (int i = 0; i < nr; ++i) {
        const double r = grid.r(i);
        for (int j = 0; j + 1 < nt; ++j) {
            const double th = (j + 1) * dth;
            for (int k = 0; k < np; ++k) {
                const Mat3 R = frame(th, grid.phi(k));
                const Mat3 af = 0.5 * (a[node(i, j, k)] + a[node(i, j + 1, k)]);
                const double K = r * std::sin(th) * R.col(1).dot(af * R.col(1));
                face(i, j, k, 0, 1, 0, K * half(i) * ds * dph / dth);
            }
        }
    }
    // azimuthal faces
    for (int i = 0; i < nr; ++i) {
        const double r = grid.r(i);
        for (int j = 0; j < nt; ++j) {
            const double th = grid.theta(j);
            for (int k = 0; k < np; ++k) {
                const Mat3 R = frame(th, (k + 0.5) * dph);
                const Mat3 af = 0.5 * (a[node(i, j, k)] + a[node(i, j, k + 1)]);
                const double K = r / std::sin(th) * R.col(2).dot(af * R.col(2));
                face(i, j, k, 0, 0, 1, K * half(i) * ds * dth / dph);
            }
        }
    }
    // (s, theta) plaquettes
    for (int i = 0; i + 1 < nr; ++i) {
        const double r = rface(i + 0.5);
        for (int j = 0; j + 1 < nt; ++j) {
            const double th = (j + 1) * dth;
            for (int k = 0; k < np; ++k) {
                const Mat3 R = frame(th, grid.phi(k));
                const Mat3 ap = 0.25 * (a[node(i, j, k)] + a[node(i + 1, j, k)] + a[node(i, j + 1, k)] +
                                        a[node(i + 1, j + 1, k)]);
                const double K = r * std::sin(th) * R.col(0).dot(ap * R.col(1));
                plaquette(i, j, k, {1, 0, 0}, {0, 1, 0}, K * dph / 4.0);
            }
        }
    }
    // (s, phi) plaquettes
    for (int i = 0; i + 1 < nr; ++i) {
        const double r = rface(i + 0.5);
        for (int j = 0; j < nt; ++j) {
            const double th = grid.theta(j);
            for (int k = 0; k < np; ++k) {
                const Mat3 R = frame(th, (k + 0.5) * dph);
                const Mat3 ap = 0.25 * (a[node(i, j, k)] + a[node(i + 1, j, k)] + a[node(i, j, k + 1)] +
                                        a[node(i + 1, j, k + 1)]);
                const double K = r * R.col(0).dot(ap * R.col(2));
                plaquette(i, j, k, {1, 0, 0}, {0, 0, 1}, K * dth / 4.0);
            }
        }
    }
    // (theta, phi) plaquettes
    for (int i = 0; i < nr; ++i) {
        const double r = grid.r(i);
        for (int j = 0; j + 1 < nt; ++j) {
            const double th = (j + 1) * dth;
            for (int k = 0; k < np; ++k) {
                const Mat3 R = frame(th, (k + 0.5) * dph);
                const Mat3 ap = 0.25 * (a[node(i, j, k)] + a[node(i, j + 1, k)] + a[node(i, j, k + 1)] +
                                        a[node(i, j + 1, k + 1)]);
                const double K = r * R.col(1).dot(ap * R.col(2));
                plaquette(i, j, k, {0, 1, 0}, {0, 0, 1}, K * half(i) * ds / 4.0);
            }
        }
    }
    return st;
}

// ---------------------------------------------------------------- solver

SolveResult solve_with_stencil(const Stencil& st, const GridFunction* rhs, const GridFunction& bc,
                               const SolveOptions& opt) {
    const ShellGrid& grid = st.grid;
    if (!bc.grid.same_as(grid)) throw ArgumentError("boundary data lives on a different grid");
    if (rhs && !rhs->grid.same_as(grid)) throw ArgumentError("right-hand side lives on a different grid");
    const std::size_t n = grid.size();
    const std::size_t layer = static_cast<std::size_t>(grid.ntheta()) * grid.nphi();

    std::vector<char> fixed(n, 0);
    for (std::size_t p = n - layer; p < n; ++p) fixed[p] = 1;
    if (!opt.neumann_inner)
        for (std::size_t p = 0; p < layer; ++p) fixed[p] = 1;

    std::vector<double> x(n, 0.0);
    for (std::size_t p = 0; p < n; ++p)
        if (fixed[p]) x[p] = bc.values[p];

    std::vector<double> Ax;
    st.apply(x, Ax);
    std::vector<double> b(n, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        if (fixed[p]) continue;
        const double f = rhs ? rhs->values[p] : 0.0;
        b[p] = -grid.volume(p) * f - Ax[p];
    }

    auto dot = [&](const std::vector<double>& u, const std::vector<double>& v) {
        double s = 0.0;
        for (std::size_t p = 0; p < n; ++p) s += u[p] * v[p];
        return s;
    };
    auto op = [&](const std::vector<double>& v, std::vector<double>& out) {
        st.apply(v, out);
        for (std::size_t p = 0; p < n; ++p)
            if (fixed[p]) out[p] = 0.0;
    };

    SolveResult res;
    res.u = GridFunction{grid, x};
    const double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0) return res;

    std::vector<double> dinv(n, 0.0);
    for (std::size_t p = 0; p < n; ++p)
        if (!fixed[p]) dinv[p] = 1.0 / st.coef[p * Stencil::kWidth];

    std::vector<double> u(n, 0.0), r = b, z(n), d(n), q(n);
    for (std::size_t p = 0; p < n; ++p) z[p] = dinv[p] * r[p];
    d = z;
    double rz = dot(r, z);
    const int W = opt.stagnation_window;
    int it = 0;
    double rel = 1.0;
    res.history.push_back(rel);
    for (; it < opt.max_iter; ++it) {
        op(d, q);
        const double dq = dot(d, q);
        if (!(dq > 0.0)) throw NumericError("operator lost positive definiteness during CG");
        const double alpha = rz / dq;
        for (std::size_t p = 0; p < n; ++p) {
            u[p] += alpha * d[p];
            r[p] -= alpha * q[p];
        }
        rel = std::sqrt(dot(r, r)) / bnorm;
        res.history.push_back(rel);
        if (rel <= opt.rel_tol) break;
        const int h = static_cast<int>(res.history.size()) - 1;
        if (h >= W) {
            const double ref = res.history[h - W];
            const double best = *std::min_element(res.history.end() - W, res.history.end());
            if (best > 0.1 * ref) {
                std::ostringstream os;
                os << "CG stagnated after " << h << " iterations; residual history tail:";
                for (int m = std::max(0, h - 5); m <= h; ++m) os << ' ' << res.history[m];
                throw NumericError(os.str());
            }
        }
        for (std::size_t p = 0; p < n; ++p) z[p] = dinv[p] * r[p];
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t p = 0; p < n; ++p) d[p] = z[p] + beta * d[p];
    }
    if (rel > opt.rel_tol) throw NumericError("CG hit the iteration cap with residual " + std::to_string(rel));

    for (std::size_t p = 0; p < n; ++p)
        if (!fixed[p]) res.u.values[p] = u[p];
    res.iterations = it + 1;
    res.rel_residual = rel;
    return res;
}

SolveResult solve_dirichlet(const CoefficientField& coef, const ShellGrid& grid, const GridFunction* rhs,
                            const GridFunction& bc, const SolveOptions& opt) {
    return solve_with_stencil(assemble(coef, grid), rhs, bc, opt);
}

std::array<double, 2> boundary_fluxes(const Stencil& st, const GridFunction& u) {
    std::vector<double> Au;
    st.apply(u.values, Au);
    const std::size_t layer = static_cast<std::size_t>(st.grid.ntheta()) * st.grid.nphi();
    const std::size_t n = st.grid.size();
    double in = 0.0, out = 0.0;
    for (std::size_t p = 0; p < layer; ++p) in += Au[p];
    for (std::size_t p = n - layer; p < n; ++p) out += Au[p];
    return {in, out};
}

// ---------------------------------------------------------------- Green's function

GridFunction GreenResult::u0_on_grid() const {
    GridFunction u = e;
    for (std::size_t p = 0; p < u.values.size(); ++p) u.values[p] = 1.0 / e.grid.position(p).norm() + e.values[p] - e0;
    return u;
}

namespace {

double shell_average(const GridFunction& u, int i) {
    const ShellGrid& g = u.grid;
    double num = 0.0, den = 0.0;
    for (int j = 0; j < g.ntheta(); ++j) {
        const double w = std::cos(j * g.dtheta()) - std::cos((j + 1) * g.dtheta());
        for (int k = 0; k < g.nphi(); ++k) {
            num += w * u.values[g.index(i, j, k)];
            den += w;
        }
    }
    return num / den;
}

// quadratic through (r_m, v_m), evaluated at 0
double extrapolate_to_zero(const double* r, const double* v) {
    double acc = 0.0;
    for (int m = 0; m < 3; ++m) {
        double l = 1.0;
        for (int q = 0; q < 3; ++q)
            if (q != m) l *= (0.0 - r[q]) / (r[m] - r[q]);
        acc += l * v[m];
    }
    return acc;
}

}  // namespace

GreenResult green_function(const MetricField& g0, const ShellGrid& grid, const SolveOptions& opt) {
    if (!g0.normalized_at_origin() && !check_normalized_at_origin(g0, 1e-10, 1e-6))
        throw PreconditionError("Green's function needs a metric with g(0) = I and dg(0) = 0");
    const CoefficientField coef(g0);
    GridFunction rhs{grid, std::vector<double>(grid.size())};
    for (std::size_t p = 0; p < grid.size(); ++p) {
        const Vec3 x = grid.position(p);
        const double r = x.norm(), r3 = r * r * r, r5 = r3 * r * r;
        const Mat3 a = coef.a(x);
        const Vec3 div = coef.div_a(x);
        const Mat3 T = 3.0 * x * x.transpose() / r5 - Mat3::Identity() / r3;
        const double f = -div.dot(x) / r3 + a.cwiseProduct(T).sum();
        rhs.values[p] = -f;
    }
    GridFunction bc = sample(grid, [](const Vec3& x) { return -1.0 / x.norm(); });
    SolveOptions o = opt;
    o.neumann_inner = true;
    const SolveResult sol = solve_dirichlet(coef, grid, &rhs, bc, o);

    GreenResult res;
    res.e = sol.u;
    res.iterations = sol.iterations;
    double r[4], v[4];
    for (int i = 0; i < 4; ++i) {
        r[i] = grid.r(i);
        v[i] = shell_average(res.e, i);
    }
    res.e0 = extrapolate_to_zero(r, v);
    res.e0_check = extrapolate_to_zero(r + 1, v + 1);
    if (std::abs(res.e0 - res.e0_check) > 1e-3) {
        res.warning = true;
        res.note = "e(0) extrapolation from shells 0-2 and 1-3 differs by " +
                   std::to_string(std::abs(res.e0 - res.e0_check));
    }
    return res;
}

// ---------------------------------------------------------------- derivatives

namespace {

struct Chords {
    std::size_t plus[3];
    std::size_t minus[3];
};

Chords chords(const ShellGrid& g, std::size_t idx) {
    const auto [i, j, k] = g.ijk(idx);
    Chords c;
    const int ip = std::min(i + 1, g.nr() - 1), im = std::max(i - 1, 0);
    c.plus[0] = g.index(ip, j, k);
    c.minus[0] = g.index(im, j, k);
    c.plus[1] = g.wrap(i, j + 1, k);
    c.minus[1] = g.wrap(i, j - 1, k);
    c.plus[2] = g.wrap(i, j, k + 1);
    c.minus[2] = g.wrap(i, j, k - 1);
    return c;
}

Mat3 chord_inverse(const std::vector<Vec3>& pos, const Chords& c) {
    Mat3 M;
    for (int a = 0; a < 3; ++a) M.row(a) = (pos[c.plus[a]] - pos[c.minus[a]]).transpose();
    return M.inverse();
}

std::vector<Vec3> positions(const ShellGrid& g) {
    std::vector<Vec3> pos(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) pos[p] = g.position(p);
    return pos;
}

}  // namespace

Vec3 gradient_at(const GridFunction& u, std::size_t idx) {
    const ShellGrid& g = u.grid;
    const int i = g.ijk(idx)[0];
    if (i < 1 || i > g.nr() - 2) throw RangeError("gradient requested on a boundary layer");
    const Chords c = chords(g, idx);
    Mat3 M;
    Vec3 du;
    for (int a = 0; a < 3; ++a) {
        M.row(a) = (g.position(c.plus[a]) - g.position(c.minus[a])).transpose();
        du[a] = u.values[c.plus[a]] - u.values[c.minus[a]];
    }
    return M.inverse() * du;
}

std::vector<Vec3> gradient_field(const GridFunction& u) {
    const ShellGrid& g = u.grid;
    const auto pos = positions(g);
    std::vector<Vec3> out(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) {
        const Chords c = chords(g, p);
        Vec3 du;
        for (int a = 0; a < 3; ++a) du[a] = u.values[c.plus[a]] - u.values[c.minus[a]];
        out[p] = chord_inverse(pos, c) * du;
    }
    return out;
}

std::vector<Mat3> hessian_field(const GridFunction& u, const std::vector<Vec3>& grad) {
    const ShellGrid& g = u.grid;
    const auto pos = positions(g);
    std::vector<Mat3> out(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) {
        const Chords c = chords(g, p);
        Mat3 D;  // row a: grad(plus a) - grad(minus a)
        for (int a = 0; a < 3; ++a) D.row(a) = (grad[c.plus[a]] - grad[c.minus[a]]).transpose();
        const Mat3 H = chord_inverse(pos, c) * D;
        out[p] = sym(H);
    }
    return out;
}

Mat3 hessian_at(const GridFunction& u, std::size_t idx) {
    const ShellGrid& g = u.grid;
    const int i = g.ijk(idx)[0];
    if (i < 2 || i > g.nr() - 3) throw RangeError("Hessian requested within two layers of the boundary");
    const Chords c = chords(g, idx);
    Mat3 M, D;
    for (int a = 0; a < 3; ++a) {
        M.row(a) = (g.position(c.plus[a]) - g.position(c.minus[a])).transpose();
        D.row(a) = (gradient_at(u, c.plus[a]) - gradient_at(u, c.minus[a])).transpose();
    }
    return sym(M.inverse() * D);
}

double grad_norm_g(const Mat3& g, const Vec3& du) { return std::sqrt(du.dot(g.inverse() * du)); }

double lp_gradient_error(const GridFunction& u, const GridFunction& u0, const MetricField& g, double p,
                         const RadialWindow& region) {
    if (!u.grid.same_as(u0.grid)) throw ArgumentError("gradient error needs both functions on the same grid");
    if (!(p >= 1.0 && p <= 8.0)) throw ArgumentError("gradient error exponent must lie in [1, 8]");
    const ShellGrid& grid = u.grid;
    const auto gu = gradient_field(u);
    const auto g0 = gradient_field(u0);
    double acc = 0.0;
    for (std::size_t n = 0; n < grid.size(); ++n) {
        const auto [i, j, k] = grid.ijk(n);
        if (i < 1 || i > grid.nr() - 2 || !region.contains(grid.r(i))) continue;
        const Vec3 x = grid.position(n);
        const double dv = std::sqrt(g.eval(x).determinant()) * grid.volume(n);
        acc += std::pow((gu[n] - g0[n]).norm(), p) * dv;
    }
    return std::pow(acc, 1.0 / p);
}

double sup_error(const GridFunction& u, const GridFunction& u0, const RadialWindow& region) {
    if (!u.grid.same_as(u0.grid)) throw ArgumentError("sup error needs both functions on the same grid");
    double best = 0.0;
    for (std::size_t n = 0; n < u.grid.size(); ++n)
        if (region.contains(u.grid.r(u.grid.ijk(n)[0]))) best = std::max(best, std::abs(u.values[n] - u0.values[n]));
    return best;
}

// ---------------------------------------------------------------- dump

void write_grid_function(const std::string& path, const GridFunction& u) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ArgumentError("cannot open " + path + " for writing");
    const std::int32_t dims[3] = {u.grid.nr(), u.grid.ntheta(), u.grid.nphi()};
    const double radii[2] = {u.grid.rho_in(), u.grid.rho_out()};
    os.write(reinterpret_cast<const char*>(dims), sizeof dims);
    os.write(reinterpret_cast<const char*>(radii), sizeof radii);
    os.write(reinterpret_cast<const char*>(u.values.data()), static_cast<std::streamsize>(u.values.size() * sizeof(double)));
}

GridFunction read_grid_function(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ArgumentError("cannot open " + path);
    std::int32_t dims[3];
    double radii[2];
    is.read(reinterpret_cast<char*>(dims), sizeof dims);
    is.read(reinterpret_cast<char*>(radii), sizeof radii);
    GridFunction u{ShellGrid(radii[0], radii[1], dims[0], dims[1], dims[2]), {}};
    u.values.resize(u.grid.size());
    is.read(reinterpret_cast<char*>(u.values.data()), static_cast<std::streamsize>(u.values.size() * sizeof(double)));
    if (!is) throw ArgumentError("truncated grid function dump " + path);
    return u;
}

}  // namespace lab

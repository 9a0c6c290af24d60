#include "lab/metric.hpp"

#include "lab/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <limits>

namespace lab {

std::string describe(const Vec3& x) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "(%.9g, %.9g, %.9g)", x[0], x[1], x[2]);
    return buf;
}

bool Region::contains(const Vec3& x) const {
    const double r = x.norm();
    return r >= rho_in && r <= rho_out;
}

bool Region::strictly_inside(const Vec3& x) const {
    const double r = x.norm();
    if (is_ball()) return r < rho_out;
    return r > rho_in && r < rho_out;
}

Mat3 sym(const Mat3& m) { return 0.5 * (m + m.transpose()); }

bool is_spd(const Mat3& m) {
    if (!m.allFinite()) return false;
    Eigen::SelfAdjointEigenSolver<Mat3> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues()[0] > 0.0;
}

void require_spd(const Mat3& g, const Vec3& x) {
    if (!is_spd(g)) throw DomainError("metric is not positive definite at " + describe(x));
}

namespace {

constexpr double kFdWeights[4] = {1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0};
constexpr double kFdOffsets[4] = {-2.0, -1.0, 1.0, 2.0};

template <class F, class T>
T fd_directional(const F& f, const Vec3& x, int k, double h, T zero) {
    T acc = zero;
    for (int m = 0; m < 4; ++m) {
        Vec3 xp = x;
        xp[k] += kFdOffsets[m] * h;
        acc += kFdWeights[m] * f(xp);
    }
    return acc / h;
}

Deriv1 fd_first(const MetricField::EvalFn& g, const Vec3& x, double h) {
    Deriv1 d;
    for (int k = 0; k < 3; ++k) d[k] = fd_directional(g, x, k, h, Mat3(Mat3::Zero()));
    return d;
}

}  // namespace

MetricField::MetricField(EvalFn g, Region domain, D1Fn dg, D2Fn ddg)
    : g_(std::move(g)), dg_(std::move(dg)), ddg_(std::move(ddg)), domain_(domain) {
    if (!g_) throw ArgumentError("metric field needs an evaluation function");
}

Mat3 MetricField::eval(const Vec3& x) const { return sym(g_(x)); }

Deriv1 MetricField::d_eval(const Vec3& x) const {
    if (dg_) return dg_(x);
    return fd_first(g_, x, kFdStep);
}

Deriv2 MetricField::dd_eval(const Vec3& x) const {
    if (ddg_) return ddg_(x);
    Deriv2 dd;
    for (int k = 0; k < 3; ++k) {
        auto dk = [&](const Vec3& y) { return d_eval(y)[k]; };
        for (int l = 0; l < 3; ++l) dd[k][l] = fd_directional(dk, x, l, kFdStep, Mat3(Mat3::Zero()));
    }
    for (int k = 0; k < 3; ++k)
        for (int l = k + 1; l < 3; ++l) {
            const Mat3 avg = 0.5 * (dd[k][l] + dd[l][k]);
            dd[k][l] = avg;
            dd[l][k] = avg;
        }
    return dd;
}

MetricField MetricField::with_conformal(ScalarFieldFn phi) const {
    MetricField out = *this;
    out.conformal_ = std::move(phi);
    return out;
}

MetricField MetricField::with_normalized_flag(bool flag) const {
    MetricField out = *this;
    out.normalized_ = flag;
    return out;
}

MetricField MetricField::with_domain(Region r) const {
    MetricField out = *this;
    out.domain_ = r;
    return out;
}

MetricField metric_from_jet(SymFieldFn jet, Region domain) {
    auto g = [jet](const Vec3& x) { return jet(x).value; };
    auto dg = [jet](const Vec3& x) { return jet(x).d; };
    auto ddg = [jet](const Vec3& x) { return jet(x).dd; };
    return MetricField(g, domain, dg, ddg);
}

std::array<Mat3, 3> christoffel(const Mat3& g, const Deriv1& dg) {
    const Mat3 ginv = g.inverse();
    std::array<Mat3, 3> gamma;
    for (int k = 0; k < 3; ++k) gamma[k].setZero();
    for (int l = 0; l < 3; ++l)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const double s = dg[i](j, l) + dg[j](i, l) - dg[l](i, j);
                for (int k = 0; k < 3; ++k) gamma[k](i, j) += 0.5 * ginv(k, l) * s;
            }
    return gamma;
}

double scalar_curvature_general(const MetricField& gf, const Vec3& x) {
    const Mat3 g = gf.eval(x);
    require_spd(g, x);
    const Deriv1 dg = gf.d_eval(x);
    const Deriv2 dd = gf.dd_eval(x);
    const Mat3 ginv = g.inverse();

    // S[l](i,j) = d_i g_jl + d_j g_il - d_l g_ij and its derivatives
    std::array<Mat3, 3> S;
    std::array<std::array<Mat3, 3>, 3> dS;  // dS[m][l]
    for (int l = 0; l < 3; ++l)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                S[l](i, j) = dg[i](j, l) + dg[j](i, l) - dg[l](i, j);
                for (int m = 0; m < 3; ++m)
                    dS[m][l](i, j) = dd[m][i](j, l) + dd[m][j](i, l) - dd[m][l](i, j);
            }

    std::array<Mat3, 3> gamma;
    std::array<std::array<Mat3, 3>, 3> dgamma;  // dgamma[m][k](i,j) = d_m Gamma^k_ij
    for (int k = 0; k < 3; ++k) gamma[k].setZero();
    for (int m = 0; m < 3; ++m)
        for (int k = 0; k < 3; ++k) dgamma[m][k].setZero();

    std::array<Mat3, 3> dginv;
    for (int m = 0; m < 3; ++m) dginv[m] = -ginv * dg[m] * ginv;

    for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
            gamma[k] += 0.5 * ginv(k, l) * S[l];
            for (int m = 0; m < 3; ++m)
                dgamma[m][k] += 0.5 * dginv[m](k, l) * S[l] + 0.5 * ginv(k, l) * dS[m][l];
        }

    Mat3 ric = Mat3::Zero();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double r = 0.0;
            for (int k = 0; k < 3; ++k) {
                r += dgamma[k][k](i, j) - dgamma[j][k](i, k);
                for (int l = 0; l < 3; ++l)
                    r += gamma[k](k, l) * gamma[l](i, j) - gamma[k](j, l) * gamma[l](i, k);
            }
            ric(i, j) = r;
        }
    return (ginv.cwiseProduct(ric)).sum();
}

double scalar_curvature_conformal(const MetricField& gf, const Vec3& x) {
    if (!gf.is_conformal()) throw ArgumentError("metric carries no conformal factor");
    const ScalarJet phi = gf.conformal_factor()(x);
    if (!(phi.value > 0.0)) throw DomainError("conformal factor not positive at " + describe(x));
    return -8.0 * std::pow(phi.value, -5.0) * phi.laplacian();
}

double scalar_curvature(const MetricField& g, const Vec3& x) {
    // difference stencils need room around x; analytic jets are fine up to the boundary
    const bool pointwise = g.is_conformal() || g.analytic_derivatives();
    const Region& d = g.domain();
    const double r = x.norm();
    const bool closed = r >= d.rho_in * (1.0 - 1e-12) && r <= d.rho_out * (1.0 + 1e-12);  // grid round-off
    if (!(pointwise ? closed : d.strictly_inside(x)))
        throw RangeError("curvature requested outside the metric domain at " + describe(x));
    if (g.is_conformal()) {
        require_spd(g.eval(x), x);
        return scalar_curvature_conformal(g, x);
    }
    return scalar_curvature_general(g, x);
}

double c0_distance(const MetricField& g, const MetricField& g0, std::span<const Vec3> samples) {
    if (samples.empty()) throw ArgumentError("c0_distance needs at least one sample point");
    double best = 0.0;
    for (const Vec3& x : samples) best = std::max(best, (g.eval(x) - g0.eval(x)).norm());
    return best;
}

Mat3 coefficient_matrix(const Mat3& g) { return g.inverse() * std::sqrt(g.determinant()); }

CoefficientField::CoefficientField(MetricField g) : g_(std::move(g)) {}

CoefficientField::CoefficientField(MetricField g, double lambda, double Lambda)
    : g_(std::move(g)), lambda_(lambda), Lambda_(Lambda) {}

Mat3 CoefficientField::a(const Vec3& x) const { return coefficient_matrix(g_.eval(x)); }

Vec3 CoefficientField::div_a(const Vec3& x) const {
    const Mat3 g = g_.eval(x);
    const Deriv1 dg = g_.d_eval(x);
    const Mat3 ginv = g.inverse();
    const double sd = std::sqrt(g.determinant());
    Vec3 out = Vec3::Zero();
    for (int i = 0; i < 3; ++i) {
        const Mat3 gd = ginv * dg[i];
        const Mat3 da = (-gd * ginv + 0.5 * gd.trace() * ginv) * sd;
        out += da.row(i).transpose();
    }
    return out;
}

CoefficientField coefficient_field(const MetricField& g, std::span<const Vec3> samples) {
    if (samples.empty()) throw ArgumentError("coefficient_field needs sample points");
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const Vec3& x : samples) {
        const Mat3 gx = g.eval(x);
        require_spd(gx, x);
        Eigen::SelfAdjointEigenSolver<Mat3> es(coefficient_matrix(gx), Eigen::EigenvaluesOnly);
        lo = std::min(lo, es.eigenvalues()[0]);
        hi = std::max(hi, es.eigenvalues()[2]);
    }
    return CoefficientField(g, lo, hi);
}

void check_spd(const MetricField& g, std::span<const Vec3> samples) {
    for (const Vec3& x : samples) require_spd(g.eval(x), x);
}

// ---------------------------------------------------------------- maps

CoordinateMap CoordinateMap::scaling(double r) {
    CoordinateMap m;
    m.P = r * Mat3::Identity();
    return m;
}

Vec3 CoordinateMap::forward(const Vec3& y) const {
    Vec3 q;
    for (int k = 0; k < 3; ++k) q[k] = y.dot(gamma[k] * y);
    return center + P * (y - 0.5 * q);
}

Mat3 CoordinateMap::jacobian(const Vec3& y) const {
    Mat3 M = Mat3::Identity();
    for (int k = 0; k < 3; ++k) M.row(k) -= (gamma[k] * y).transpose();
    return P * M;
}

std::array<Mat3, 3> CoordinateMap::second_derivatives() const {
    std::array<Mat3, 3> K;
    for (int l = 0; l < 3; ++l) {
        Mat3 G;  // G(k, i) = gamma[k](i, l)
        for (int k = 0; k < 3; ++k) G.row(k) = gamma[k].col(l).transpose();
        K[l] = -P * G;
    }
    return K;
}

Vec3 CoordinateMap::inverse(const Vec3& x, int max_iter, double tol) const {
    Vec3 y = P.inverse() * (x - center);
    const double scale = std::max(1.0, x.norm());
    for (int it = 0; it < max_iter; ++it) {
        const Vec3 res = forward(y) - x;
        if (res.norm() <= tol * scale) return y;
        const Mat3 J = jacobian(y);
        if (std::abs(J.determinant()) < 1e-300) break;
        y -= J.partialPivLu().solve(res);
    }
    if ((forward(y) - x).norm() <= 1e3 * tol * scale) return y;
    throw NumericError("inverse coordinate map did not converge at " + describe(x));
}

namespace {

Region map_region(const Region& r, const Mat3& P, bool inverse) {
    Eigen::JacobiSVD<Mat3> svd(P);
    const double smax = svd.singularValues()[0];
    const double smin = svd.singularValues()[2];
    if (inverse) return {r.rho_in * smin, r.rho_out * smax};
    return {r.rho_in / smax, r.rho_out / smin};
}

}  // namespace

MetricField pullback(const MetricField& g, const CoordinateMap& map) {
    const auto K = map.second_derivatives();
    auto value = [g, map](const Vec3& y) {
        const Mat3 J = map.jacobian(y);
        if (std::abs(J.determinant()) < 1e-14) throw DomainError("singular map Jacobian at " + describe(y));
        return Mat3(J.transpose() * g.eval(map.forward(y)) * J);
    };
    auto d1 = [g, map, K](const Vec3& y) {
        const Mat3 J = map.jacobian(y);
        const Vec3 x = map.forward(y);
        const Mat3 gx = g.eval(x);
        const Deriv1 dg = g.d_eval(x);
        Deriv1 out;
        for (int l = 0; l < 3; ++l) {
            Mat3 Dg = Mat3::Zero();
            for (int c = 0; c < 3; ++c) Dg += J(c, l) * dg[c];
            out[l] = K[l].transpose() * gx * J + J.transpose() * gx * K[l] + J.transpose() * Dg * J;
        }
        return out;
    };
    auto d2 = [g, map, K](const Vec3& y) {
        const Mat3 J = map.jacobian(y);
        const Vec3 x = map.forward(y);
        const Mat3 gx = g.eval(x);
        const Deriv1 dg = g.d_eval(x);
        const Deriv2 ddg = g.dd_eval(x);
        std::array<Mat3, 3> Dg;
        for (int l = 0; l < 3; ++l) {
            Dg[l].setZero();
            for (int c = 0; c < 3; ++c) Dg[l] += J(c, l) * dg[c];
        }
        Deriv2 out;
        for (int l = 0; l < 3; ++l)
            for (int m = 0; m < 3; ++m) {
                Mat3 DD = Mat3::Zero();
                Mat3 KD = Mat3::Zero();
                for (int c = 0; c < 3; ++c) {
                    KD += K[m](c, l) * dg[c];
                    for (int d = 0; d < 3; ++d) DD += J(c, l) * J(d, m) * ddg[c][d];
                }
                out[l][m] = K[l].transpose() * gx * K[m] + K[m].transpose() * gx * K[l] +
                            K[l].transpose() * Dg[m] * J + J.transpose() * Dg[m] * K[l] +
                            K[m].transpose() * Dg[l] * J + J.transpose() * Dg[l] * K[m] +
                            J.transpose() * (DD + KD) * J;
            }
        return out;
    };
    return MetricField(value, map_region(g.domain(), map.P, false), d1, d2);
}

MetricField pushforward(const MetricField& pulled, const CoordinateMap& map) {
    auto value = [pulled, map](const Vec3& x) {
        const Vec3 y = map.inverse(x);
        const Mat3 J = map.jacobian(y);
        const Mat3 Ji = J.inverse();
        return Mat3(Ji.transpose() * pulled.eval(y) * Ji);
    };
    return MetricField(value, map_region(pulled.domain(), map.P, true));
}

NormalizedMetric normalize_coordinates(const MetricField& g) {
    const Vec3 o = Vec3::Zero();
    if (!g.domain().contains(o)) throw ArgumentError("normalization needs the origin inside the metric domain");
    const Mat3 g0 = g.eval(o);
    require_spd(g0, o);

    CoordinateMap map;
    if ((g0 - Mat3::Identity()).cwiseAbs().maxCoeff() != 0.0) {
        Eigen::SelfAdjointEigenSolver<Mat3> es(g0);
        map.P = es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                es.eigenvectors().transpose();
    }
    const Deriv1 dg = g.d_eval(o);
    Deriv1 dg1;
    for (int c = 0; c < 3; ++c) {
        Mat3 acc = Mat3::Zero();
        for (int k = 0; k < 3; ++k) acc += map.P(k, c) * dg[k];
        dg1[c] = map.P.transpose() * acc * map.P;
    }
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                map.gamma[k](i, j) = 0.5 * (dg1[i](j, k) + dg1[j](i, k) - dg1[k](i, j));

    MetricField out = pullback(g, map).with_normalized_flag(true);
    return {out, map};
}

MetricField rescale_metric(const MetricField& g, double a) {
    if (!(a > 0.0)) throw ArgumentError("rescaling factor must be positive");
    MetricField::D1Fn d1;
    MetricField::D2Fn d2;
    if (g.analytic_derivatives()) {
        d1 = [g, a](const Vec3& x) {
            Deriv1 d = g.d_eval(a * x);
            for (auto& m : d) m *= a;
            return d;
        };
        d2 = [g, a](const Vec3& x) {
            Deriv2 d = g.dd_eval(a * x);
            for (auto& row : d)
                for (auto& m : row) m *= a * a;
            return d;
        };
    }
    MetricField out([g, a](const Vec3& x) { return g.eval(a * x); }, g.domain().scaled(1.0 / a), d1, d2);
    if (g.is_conformal()) {
        ScalarFieldFn phi = g.conformal_factor();
        out = out.with_conformal([phi, a](const Vec3& x) {
            ScalarJet j = phi(a * x);
            j.grad *= a;
            j.hess *= a * a;
            return j;
        });
    }
    return out.with_normalized_flag(g.normalized_at_origin());
}

bool check_normalized_at_origin(const MetricField& g, double tol_value, double tol_deriv) {
    const Vec3 o = Vec3::Zero();
    if (!g.domain().contains(o)) return false;
    if ((g.eval(o) - Mat3::Identity()).norm() > tol_value) return false;
    const Deriv1 d = g.d_eval(o);
    for (const auto& m : d)
        if (m.cwiseAbs().maxCoeff() > tol_deriv) return false;
    return true;
}

}  // namespace lab

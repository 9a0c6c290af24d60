#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lab {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// d[k](i,j) = d_k g_ij
using Deriv1 = std::array<Mat3, 3>;
/// dd[k][l](i,j) = d_k d_l g_ij
using Deriv2 = std::array<std::array<Mat3, 3>, 3>;

std::string describe(const Vec3& x);

/// Ball (rho_in == 0) or shell [rho_in, rho_out].
struct Region {
    double rho_in = 0.0;
    double rho_out = 1.0;

    static Region ball(double radius) { return {0.0, radius}; }
    static Region shell(double a, double b) { return {a, b}; }

    bool is_ball() const { return rho_in == 0.0; }
    bool contains(const Vec3& x) const;
    bool strictly_inside(const Vec3& x) const;
    Region scaled(double factor) const { return {rho_in * factor, rho_out * factor}; }
};

/// Scalar field with gradient and Hessian, used for conformal factors and bumps.
struct ScalarJet {
    double value = 0.0;
    Vec3 grad = Vec3::Zero();
    Mat3 hess = Mat3::Zero();
    double laplacian() const { return hess.trace(); }
};

using ScalarFieldFn = std::function<ScalarJet(const Vec3&)>;

inline Deriv1 zero_deriv1() { return {Mat3::Zero(), Mat3::Zero(), Mat3::Zero()}; }
inline Deriv2 zero_deriv2() { return {zero_deriv1(), zero_deriv1(), zero_deriv1()}; }

/// Symmetric matrix field with analytic first and second derivatives.
/// Derivatives start at zero, so a jet may set only the parts it needs.
struct SymJet {
    Mat3 value = Mat3::Zero();
    Deriv1 d = zero_deriv1();
    Deriv2 dd = zero_deriv2();
};

using SymFieldFn = std::function<SymJet(const Vec3&)>;

class MetricField {
public:
    using EvalFn = std::function<Mat3(const Vec3&)>;
    using D1Fn = std::function<Deriv1(const Vec3&)>;
    using D2Fn = std::function<Deriv2(const Vec3&)>;

    static constexpr double kFdStep = 1e-4;

    MetricField(EvalFn g, Region domain, D1Fn dg = {}, D2Fn ddg = {});

    Mat3 eval(const Vec3& x) const;
    Deriv1 d_eval(const Vec3& x) const;
    Deriv2 dd_eval(const Vec3& x) const;

    const Region& domain() const { return domain_; }
    bool analytic_derivatives() const { return static_cast<bool>(dg_); }

    /// g = phi^4 g_euc; enables the closed-form curvature path.
    const ScalarFieldFn& conformal_factor() const { return conformal_; }
    bool is_conformal() const { return static_cast<bool>(conformal_); }
    MetricField with_conformal(ScalarFieldFn phi) const;

    bool normalized_at_origin() const { return normalized_; }
    MetricField with_normalized_flag(bool flag) const;

    MetricField with_domain(Region r) const;

private:
    EvalFn g_;
    D1Fn dg_;
    D2Fn ddg_;
    Region domain_;
    ScalarFieldFn conformal_;
    bool normalized_ = false;
};

/// Build a metric from a jet function (value + analytic derivatives in one call).
MetricField metric_from_jet(SymFieldFn jet, Region domain);

Mat3 sym(const Mat3& m);
bool is_spd(const Mat3& m);
void require_spd(const Mat3& g, const Vec3& x);

/// Christoffel symbols of the second kind: gamma[k](i,j) = Gamma^k_ij.
std::array<Mat3, 3> christoffel(const Mat3& g, const Deriv1& dg);

double scalar_curvature(const MetricField& g, const Vec3& x);
double scalar_curvature_general(const MetricField& g, const Vec3& x);
double scalar_curvature_conformal(const MetricField& g, const Vec3& x);

double c0_distance(const MetricField& g, const MetricField& g0, std::span<const Vec3> samples);

/// a^{ij} = g^{ij} sqrt(det g) together with its Euclidean divergence.
class CoefficientField {
public:
    explicit CoefficientField(MetricField g);
    CoefficientField(MetricField g, double lambda, double Lambda);

    Mat3 a(const Vec3& x) const;
    /// (sum_i d_i a^{ij})_j
    Vec3 div_a(const Vec3& x) const;

    double lambda() const { return lambda_; }
    double Lambda() const { return Lambda_; }
    const MetricField& metric() const { return g_; }

private:
    MetricField g_;
    double lambda_ = 0.0;
    double Lambda_ = 0.0;
};

Mat3 coefficient_matrix(const Mat3& g);
CoefficientField coefficient_field(const MetricField& g, std::span<const Vec3> samples);

/// Quadratic coordinate change x = c + P (y - 1/2 Gamma(y, y)).
struct CoordinateMap {
    Mat3 P = Mat3::Identity();
    std::array<Mat3, 3> gamma{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
    Vec3 center = Vec3::Zero();

    static CoordinateMap identity() { return {}; }
    static CoordinateMap scaling(double r);

    Vec3 forward(const Vec3& y) const;
    Mat3 jacobian(const Vec3& y) const;
    /// K[l](a, i) = d_l d_i F^a (constant for this family of maps)
    std::array<Mat3, 3> second_derivatives() const;
    Vec3 inverse(const Vec3& x, int max_iter = 60, double tol = 1e-14) const;
};

MetricField pullback(const MetricField& g, const CoordinateMap& map);
/// Inverse of pullback: recovers g from F^*g using the iterative inverse map.
MetricField pushforward(const MetricField& pulled, const CoordinateMap& map);

struct NormalizedMetric {
    MetricField metric;
    CoordinateMap map;
};

NormalizedMetric normalize_coordinates(const MetricField& g);

/// h(x) = g(a x); the rescaling used to move small-scale problems onto unit scale.
MetricField rescale_metric(const MetricField& g, double a);

/// Checks g(0) = I and dg(0) = 0 directly; requires 0 in the domain.
bool check_normalized_at_origin(const MetricField& g, double tol_value, double tol_deriv);

void check_spd(const MetricField& g, std::span<const Vec3> samples);

}  // namespace lab

#pragma once

// B-spline and NURBS kernel: knot vectors, Cox-de Boor evaluation with
// derivatives, curves, trivariate patches and geometry-preserving refinement.

#include <array>
#include <vector>

#include <Eigen/Dense>

namespace cavitiga {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Homogeneous = Eigen::Vector4d;  ///< (w x, w y, w z, w)

/// Open knot vector on [0,1] together with its polynomial degree.
///
/// Construction normalizes the knots to [0,1] and checks that the vector is
/// non-decreasing, open (end knots repeated exactly p+1 times), that interior
/// multiplicities do not exceed p+1 and that there are at least p+1 basis
/// functions. Violations raise DomainError.
class KnotVector {
 public:
  KnotVector() = default;
  KnotVector(std::vector<double> knots, int degree);

  /// Open knot vector with `elements` equal spans and maximal regularity.
  static KnotVector uniform(int degree, int elements);

  int degree() const { return degree_; }
  /// Number of basis functions n.
  int size() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
  const std::vector<double>& knots() const { return knots_; }
  double operator[](int i) const { return knots_[static_cast<std::size_t>(i)]; }

  /// Distinct knot values in increasing order (element boundaries).
  std::vector<double> breaks() const;
  int num_elements() const { return static_cast<int>(breaks().size()) - 1; }
  /// Multiplicity of the knot value `x` (0 if `x` is not a knot).
  int multiplicity(double x) const;
  /// Greville abscissae, one per basis function.
  std::vector<double> greville() const;

  /// Same breakpoints, degree p-1 and regularity lowered by one everywhere:
  /// the knot vector with its first and last knot removed.
  KnotVector reduced() const;
  /// Knot vector of the reparametrization x -> 1 - x.
  KnotVector reversed() const;

  bool operator==(const KnotVector& other) const = default;

 private:
  std::vector<double> knots_;
  int degree_ = 0;
};

/// Nonzero basis functions at one parameter value.
struct BasisEvaluation {
  int span = 0;  ///< knot span index i with ξ_i ≤ x < ξ_{i+1}
  /// ders(k, j) = k-th derivative of B_{span-p+j, p}(x).
  Eigen::MatrixXd ders;

  auto values() const { return ders.row(0); }
};

/// Knot span containing `x`; at x = 1 the last non-empty span is returned.
/// Throws DomainError for x outside [0,1].
int find_span(const KnotVector& kv, double x);

/// Cox-de Boor evaluation of the p+1 nonzero B-splines at `x` and their
/// derivatives up to `max_deriv` (0/0 terms resolve to 0).
BasisEvaluation eval_basis(const KnotVector& kv, double x, int max_deriv = 0);

/// Same as eval_basis but fills a caller-owned (max_deriv+1) x (p+1) matrix.
int eval_basis_into(const KnotVector& kv, double x, int max_deriv, Eigen::Ref<Eigen::MatrixXd> out);

/// Rational (or polynomial, weights = 1) curve in R^3.
struct NurbsCurve {
  KnotVector knots;
  std::vector<Vec3> points;
  std::vector<double> weights;

  NurbsCurve() = default;
  NurbsCurve(KnotVector kv, std::vector<Vec3> pts, std::vector<double> w = {});

  int degree() const { return knots.degree(); }
  Vec3 eval(double x) const;
  Vec3 derivative(double x) const;
};

NurbsCurve knot_insert(const NurbsCurve& curve, double knot);
NurbsCurve degree_elevate(const NurbsCurve& curve);

/// Point and Jacobian of a patch mapping.
struct PatchPoint {
  Vec3 x;
  Mat3 jacobian;  ///< column d = ∂F/∂x̂_d
};

/// Trivariate NURBS patch F: [0,1]^3 -> R^3.
///
/// Control points are stored lexicographically with the first direction
/// fastest: index(i0, i1, i2) = i0 + n0 (i1 + n1 i2).
struct NurbsPatch {
  std::array<KnotVector, 3> knots;
  std::vector<Vec3> points;
  std::vector<double> weights;

  NurbsPatch() = default;
  NurbsPatch(std::array<KnotVector, 3> kv, std::vector<Vec3> pts, std::vector<double> w = {});

  int count(int dir) const { return knots[static_cast<std::size_t>(dir)].size(); }
  std::array<int, 3> counts() const { return {count(0), count(1), count(2)}; }
  std::array<int, 3> degrees() const {
    return {knots[0].degree(), knots[1].degree(), knots[2].degree()};
  }
  int num_points() const { return static_cast<int>(points.size()); }
  int index(int i0, int i1, int i2) const { return i0 + count(0) * (i1 + count(1) * i2); }
  std::array<int, 3> multi_index(int flat) const;
  int num_elements() const {
    return knots[0].num_elements() * knots[1].num_elements() * knots[2].num_elements();
  }

  Vec3 eval(const Vec3& xh) const;
  /// F(x̂) and DF(x̂) via the quotient rule on the homogeneous form. A singular
  /// Jacobian is returned as is.
  PatchPoint eval_with_jacobian(const Vec3& xh) const;
};

NurbsPatch knot_insert(const NurbsPatch& patch, int dir, double knot);
NurbsPatch degree_elevate(const NurbsPatch& patch, int dir);
/// Split every non-empty span in direction `dir` into `subdivisions` equal parts.
NurbsPatch refine_uniform(const NurbsPatch& patch, int dir, int subdivisions);
/// Elevate every direction to `degree` and subdivide spans per direction.
NurbsPatch refine(const NurbsPatch& patch, int degree, const std::array<int, 3>& subdivisions);

/// Gauss-Legendre rule with `n` points on [0,1].
struct GaussRule {
  std::vector<double> points;
  std::vector<double> weights;
};
GaussRule gauss_legendre(int n);

}  // namespace cavitiga

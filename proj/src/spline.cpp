#include "cavitiga/spline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "cavitiga/errors.hpp"

namespace cavitiga {

namespace {

constexpr double kKnotTol = 1e-14;

std::string describe(const std::vector<double>& v) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ']';
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// KnotVector

KnotVector::KnotVector(std::vector<double> knots, int degree) : knots_(std::move(knots)), degree_(degree) {
  if (degree_ < 0) throw DomainError("knot vector degree must be nonnegative");
  const auto m = static_cast<int>(knots_.size());
  if (m < 2 * (degree_ + 1)) throw DomainError("knot vector too short for degree: " + describe(knots_));
  for (int i = 1; i < m; ++i)
    if (knots_[i] < knots_[i - 1]) throw DomainError("knot vector must be non-decreasing: " + describe(knots_));
  const double a = knots_.front();
  const double b = knots_.back();
  if (!(b > a)) throw DomainError("knot vector spans an empty interval: " + describe(knots_));
  if (a != 0.0 || b != 1.0)
    for (auto& k : knots_) k = (k - a) / (b - a);
  knots_.front() = 0.0;
  knots_.back() = 1.0;
  // Snap near-duplicates so that multiplicities are exact.
  for (int i = 1; i < m; ++i)
    if (knots_[i] - knots_[i - 1] < kKnotTol) knots_[i] = knots_[i - 1];
  for (int i = m - 2; i >= 0; --i)
    if (knots_[i + 1] == 1.0 && 1.0 - knots_[i] < kKnotTol) knots_[i] = 1.0;

  if (multiplicity(0.0) != degree_ + 1 || multiplicity(1.0) != degree_ + 1)
    throw DomainError("knot vector is not open: " + describe(knots_));
  for (double x : breaks())
    if (x > 0.0 && x < 1.0 && multiplicity(x) > degree_ + 1)
      throw DomainError("interior knot multiplicity exceeds p+1: " + describe(knots_));
  if (size() < degree_ + 1) throw DomainError("fewer than p+1 basis functions");
}

KnotVector KnotVector::uniform(int degree, int elements) {
  if (elements < 1) throw DomainError("need at least one element");
  std::vector<double> k(static_cast<std::size_t>(degree + 1), 0.0);
  for (int e = 1; e < elements; ++e) k.push_back(static_cast<double>(e) / elements);
  k.insert(k.end(), static_cast<std::size_t>(degree + 1), 1.0);
  return KnotVector(std::move(k), degree);
}

std::vector<double> KnotVector::breaks() const {
  std::vector<double> out;
  for (double k : knots_)
    if (out.empty() || k > out.back()) out.push_back(k);
  return out;
}

int KnotVector::multiplicity(double x) const {
  return static_cast<int>(std::count(knots_.begin(), knots_.end(), x));
}

std::vector<double> KnotVector::greville() const {
  std::vector<double> g(static_cast<std::size_t>(size()));
  for (int i = 0; i < size(); ++i) {
    if (degree_ == 0) {
      g[i] = 0.5 * (knots_[i] + knots_[i + 1]);
      continue;
    }
    double s = 0.0;
    for (int j = 1; j <= degree_; ++j) s += knots_[i + j];
    g[i] = s / degree_;
  }
  return g;
}

KnotVector KnotVector::reduced() const {
  if (degree_ < 1) throw DomainError("cannot reduce a degree-0 knot vector");
  return KnotVector(std::vector<double>(knots_.begin() + 1, knots_.end() - 1), degree_ - 1);
}

KnotVector KnotVector::reversed() const {
  std::vector<double> r(knots_.rbegin(), knots_.rend());
  for (auto& k : r) k = 1.0 - k;
  return KnotVector(std::move(r), degree_);
}

// ---------------------------------------------------------------------------
// Basis evaluation

int find_span(const KnotVector& kv, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("parameter outside [0,1]: " + std::to_string(x));
  const int n = kv.size();
  const int p = kv.degree();
  const auto& U = kv.knots();
  if (x >= U[static_cast<std::size_t>(n)]) {
    // Last non-empty span.
    int i = n - 1;
    while (i > p && U[i] == U[i + 1]) --i;
    return i;
  }
  // Largest i in [p, n-1] with U[i] <= x.
  auto it = std::upper_bound(U.begin() + p, U.begin() + n + 1, x);
  return static_cast<int>(it - U.begin()) - 1;
}

int eval_basis_into(const KnotVector& kv, double x, int max_deriv, Eigen::Ref<Eigen::MatrixXd> out) {
  const int p = kv.degree();
  const int span = find_span(kv, x);
  const auto& U = kv.knots();
  const int nd = std::min(max_deriv, p);

  // The NURBS Book, A2.3.
  double ndu[8][8];
  double left[8], right[8];
  double a[2][8];
  if (p > 7) throw DomainError("degree above 7 not supported");
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - U[span + 1 - j];
    right[j] = U[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[j][r] == 0.0 ? 0.0 : ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  out.setZero();
  for (int j = 0; j <= p; ++j) out(0, j) = ndu[j][p];
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a[0][0] = 1.0;
    for (int k = 1; k <= nd; ++k) {
      double d = 0.0;
      const int rk = r - k, pk = p - k;
      if (r >= k) {
        a[s2][0] = ndu[pk + 1][rk] == 0.0 ? 0.0 : a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = ndu[pk + 1][rk + j] == 0.0 ? 0.0 : (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = ndu[pk + 1][r] == 0.0 ? 0.0 : -a[s1][k - 1] / ndu[pk + 1][r];
        d += a[s2][k] * ndu[r][pk];
      }
      out(k, r) = d;
      std::swap(s1, s2);
    }
  }
  int r = p;
  for (int k = 1; k <= nd; ++k) {
    for (int j = 0; j <= p; ++j) out(k, j) *= r;
    r *= (p - k);
  }
  return span;
}

BasisEvaluation eval_basis(const KnotVector& kv, double x, int max_deriv) {
  if (max_deriv < 0 || max_deriv > kv.degree()) throw DomainError("max_deriv must lie in [0, p]");
  BasisEvaluation be;
  be.ders.resize(max_deriv + 1, kv.degree() + 1);
  be.span = eval_basis_into(kv, x, max_deriv, be.ders);
  return be;
}

// ---------------------------------------------------------------------------
// 1D refinement kernels on homogeneous control polygons

namespace {

using Polygon = std::vector<Homogeneous>;

std::vector<double> insert_knot(const KnotVector& kv, double u, const Polygon& P, Polygon& Q) {
  const int p = kv.degree();
  const auto& U = kv.knots();
  if (!(u > 0.0 && u < 1.0)) throw RefinementError("inserted knot must lie in (0,1)");
  const int s = kv.multiplicity(u);
  if (s + 1 > p) throw RefinementError("knot insertion would exceed multiplicity p");
  const int k = find_span(kv, u);
  const int n = kv.size();
  Q.assign(static_cast<std::size_t>(n + 1), Homogeneous::Zero());
  for (int i = 0; i <= k - p; ++i) Q[i] = P[i];
  for (int i = k - p + 1; i <= k - s; ++i) {
    const double alpha = (u - U[i]) / (U[i + p] - U[i]);
    Q[i] = alpha * P[i] + (1.0 - alpha) * P[i - 1];
  }
  for (int i = k - s + 1; i <= n; ++i) Q[i] = P[i - 1];
  std::vector<double> nk(U.begin(), U.begin() + k + 1);
  nk.push_back(u);
  nk.insert(nk.end(), U.begin() + k + 1, U.end());
  return nk;
}

KnotVector elevated_knots(const KnotVector& kv) {
  std::vector<double> nk;
  for (double b : kv.breaks()) nk.insert(nk.end(), static_cast<std::size_t>(kv.multiplicity(b) + 1), b);
  return KnotVector(std::move(nk), kv.degree() + 1);
}

/// Matrix T with new_coeffs = T * old_coeffs for degree elevation. The old
/// space is a subspace of the new one, so collocation at the Greville points
/// of the new basis reproduces the old function exactly.
Eigen::MatrixXd elevation_operator(const KnotVector& old_kv, const KnotVector& new_kv) {
  const int n_old = old_kv.size(), n_new = new_kv.size();
  const auto g = new_kv.greville();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n_new, n_new);
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(n_new, n_old);
  for (int r = 0; r < n_new; ++r) {
    auto bn = eval_basis(new_kv, g[r], 0);
    for (int j = 0; j <= new_kv.degree(); ++j) A(r, bn.span - new_kv.degree() + j) = bn.ders(0, j);
    auto bo = eval_basis(old_kv, g[r], 0);
    for (int j = 0; j <= old_kv.degree(); ++j) E(r, bo.span - old_kv.degree() + j) = bo.ders(0, j);
  }
  Eigen::MatrixXd T = A.partialPivLu().solve(E);
  // Entries that are zero up to round-off stay exactly zero.
  for (int i = 0; i < T.size(); ++i)
    if (std::abs(T.data()[i]) < 1e-15) T.data()[i] = 0.0;
  return T;
}

Homogeneous lift(const Vec3& x, double w) { return {w * x[0], w * x[1], w * x[2], w}; }

}  // namespace

// ---------------------------------------------------------------------------
// Curves

NurbsCurve::NurbsCurve(KnotVector kv, std::vector<Vec3> pts, std::vector<double> w)
    : knots(std::move(kv)), points(std::move(pts)), weights(std::move(w)) {
  if (weights.empty()) weights.assign(points.size(), 1.0);
  if (static_cast<int>(points.size()) != knots.size() || points.size() != weights.size())
    throw DomainError("curve control polygon does not match knot vector");
  for (double wi : weights)
    if (!(wi > 0.0)) throw DomainError("NURBS weights must be positive");
}

Vec3 NurbsCurve::eval(double x) const {
  auto be = eval_basis(knots, x, 0);
  const int p = degree();
  Homogeneous h = Homogeneous::Zero();
  for (int j = 0; j <= p; ++j) {
    const int i = be.span - p + j;
    h += be.ders(0, j) * lift(points[i], weights[i]);
  }
  return h.head<3>() / h[3];
}

Vec3 NurbsCurve::derivative(double x) const {
  const int p = degree();
  auto be = eval_basis(knots, x, std::min(1, p));
  Homogeneous h = Homogeneous::Zero(), dh = Homogeneous::Zero();
  for (int j = 0; j <= p; ++j) {
    const int i = be.span - p + j;
    const Homogeneous pw = lift(points[i], weights[i]);
    h += be.ders(0, j) * pw;
    if (p > 0) dh += be.ders(1, j) * pw;
  }
  const Vec3 c = h.head<3>() / h[3];
  return (dh.head<3>() - dh[3] * c) / h[3];
}

NurbsCurve knot_insert(const NurbsCurve& curve, double knot) {
  Polygon P, Q;
  for (std::size_t i = 0; i < curve.points.size(); ++i) P.push_back(lift(curve.points[i], curve.weights[i]));
  auto nk = insert_knot(curve.knots, knot, P, Q);
  NurbsCurve out;
  out.knots = KnotVector(std::move(nk), curve.degree());
  for (const auto& q : Q) {
    out.points.push_back(q.head<3>() / q[3]);
    out.weights.push_back(q[3]);
  }
  return out;
}

NurbsCurve degree_elevate(const NurbsCurve& curve) {
  const KnotVector nk = elevated_knots(curve.knots);
  const Eigen::MatrixXd T = elevation_operator(curve.knots, nk);
  Eigen::MatrixXd P(curve.points.size(), 4);
  for (std::size_t i = 0; i < curve.points.size(); ++i) P.row(static_cast<Eigen::Index>(i)) = lift(curve.points[i], curve.weights[i]).transpose();
  const Eigen::MatrixXd Q = T * P;
  NurbsCurve out;
  out.knots = nk;
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    out.points.push_back(Q.row(i).head<3>().transpose() / Q(i, 3));
    out.weights.push_back(Q(i, 3));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Patches

NurbsPatch::NurbsPatch(std::array<KnotVector, 3> kv, std::vector<Vec3> pts, std::vector<double> w)
    : knots(std::move(kv)), points(std::move(pts)), weights(std::move(w)) {
  if (weights.empty()) weights.assign(points.size(), 1.0);
  const auto expected = static_cast<std::size_t>(count(0)) * count(1) * count(2);
  if (points.size() != expected || weights.size() != expected)
    throw DomainError("patch control net size does not match knot vectors");
  for (double wi : weights)
    if (!(wi > 0.0)) throw DomainError("NURBS weights must be positive");
}

std::array<int, 3> NurbsPatch::multi_index(int flat) const {
  const int n0 = count(0), n1 = count(1);
  return {flat % n0, (flat / n0) % n1, flat / (n0 * n1)};
}

Vec3 NurbsPatch::eval(const Vec3& xh) const { return eval_with_jacobian(xh).x; }

PatchPoint NurbsPatch::eval_with_jacobian(const Vec3& xh) const {
  std::array<BasisEvaluation, 3> b;
  for (int d = 0; d < 3; ++d) b[d] = eval_basis(knots[d], xh[d], std::min(1, knots[d].degree()));
  const auto p = degrees();
  Homogeneous h = Homogeneous::Zero();
  std::array<Homogeneous, 3> dh{Homogeneous::Zero(), Homogeneous::Zero(), Homogeneous::Zero()};
  auto der = [&](int d, int order, int j) {
    return order < b[d].ders.rows() ? b[d].ders(order, j) : 0.0;
  };
  for (int k = 0; k <= p[2]; ++k) {
    const int i2 = b[2].span - p[2] + k;
    for (int j = 0; j <= p[1]; ++j) {
      const int i1 = b[1].span - p[1] + j;
      for (int i = 0; i <= p[0]; ++i) {
        const int i0 = b[0].span - p[0] + i;
        const int idx = index(i0, i1, i2);
        const Homogeneous pw = lift(points[idx], weights[idx]);
        const double v0 = der(0, 0, i), v1 = der(1, 0, j), v2 = der(2, 0, k);
        h += v0 * v1 * v2 * pw;
        dh[0] += der(0, 1, i) * v1 * v2 * pw;
        dh[1] += v0 * der(1, 1, j) * v2 * pw;
        dh[2] += v0 * v1 * der(2, 1, k) * pw;
      }
    }
  }
  PatchPoint out;
  out.x = h.head<3>() / h[3];
  for (int d = 0; d < 3; ++d) out.jacobian.col(d) = (dh[d].head<3>() - dh[d][3] * out.x) / h[3];
  return out;
}

namespace {

/// Apply a 1D transformation to every control line of `patch` along `dir`.
template <typename LineOp>
NurbsPatch transform_lines(const NurbsPatch& patch, int dir, const KnotVector& new_kv, LineOp&& op) {
  auto kv = patch.knots;
  kv[dir] = new_kv;
  const auto n = patch.counts();
  std::array<int, 3> m = n;
  m[dir] = new_kv.size();
  std::vector<Vec3> pts(static_cast<std::size_t>(m[0]) * m[1] * m[2]);
  std::vector<double> w(pts.size());
  const int a = (dir + 1) % 3, b = (dir + 2) % 3;
  Polygon line(static_cast<std::size_t>(n[dir])), out;
  for (int ib = 0; ib < n[b]; ++ib) {
    for (int ia = 0; ia < n[a]; ++ia) {
      std::array<int, 3> idx{};
      idx[a] = ia;
      idx[b] = ib;
      for (int i = 0; i < n[dir]; ++i) {
        idx[dir] = i;
        const int f = patch.index(idx[0], idx[1], idx[2]);
        line[i] = lift(patch.points[f], patch.weights[f]);
      }
      op(line, out);
      for (int i = 0; i < m[dir]; ++i) {
        idx[dir] = i;
        const int f = idx[0] + m[0] * (idx[1] + m[1] * idx[2]);
        pts[f] = out[i].head<3>() / out[i][3];
        w[f] = out[i][3];
      }
    }
  }
  return NurbsPatch(std::move(kv), std::move(pts), std::move(w));
}

}  // namespace

NurbsPatch knot_insert(const NurbsPatch& patch, int dir, double knot) {
  Polygon dummy_in(static_cast<std::size_t>(patch.count(dir)), Homogeneous::Zero()), dummy_out;
  const KnotVector& kv = patch.knots[dir];
  KnotVector nk(insert_knot(kv, knot, dummy_in, dummy_out), kv.degree());
  return transform_lines(patch, dir, nk, [&](const Polygon& in, Polygon& out) { insert_knot(kv, knot, in, out); });
}

NurbsPatch degree_elevate(const NurbsPatch& patch, int dir) {
  const KnotVector& kv = patch.knots[dir];
  const KnotVector nk = elevated_knots(kv);
  const Eigen::MatrixXd T = elevation_operator(kv, nk);
  return transform_lines(patch, dir, nk, [&](const Polygon& in, Polygon& out) {
    out.assign(static_cast<std::size_t>(T.rows()), Homogeneous::Zero());
    for (Eigen::Index r = 0; r < T.rows(); ++r)
      for (Eigen::Index c = 0; c < T.cols(); ++c)
        if (T(r, c) != 0.0) out[r] += T(r, c) * in[c];
  });
}

NurbsPatch refine_uniform(const NurbsPatch& patch, int dir, int subdivisions) {
  if (subdivisions < 1) throw RefinementError("subdivisions must be positive");
  NurbsPatch out = patch;
  const auto br = patch.knots[dir].breaks();
  for (std::size_t e = 0; e + 1 < br.size(); ++e)
    for (int s = 1; s < subdivisions; ++s)
      out = knot_insert(out, dir, br[e] + (br[e + 1] - br[e]) * s / subdivisions);
  return out;
}

NurbsPatch refine(const NurbsPatch& patch, int degree, const std::array<int, 3>& subdivisions) {
  NurbsPatch out = patch;
  for (int d = 0; d < 3; ++d) {
    if (out.knots[d].degree() > degree)
      throw RefinementError("geometry degree exceeds requested discretization degree");
    while (out.knots[d].degree() < degree) out = degree_elevate(out, d);
    out = refine_uniform(out, d, subdivisions[d]);
  }
  return out;
}

// ---------------------------------------------------------------------------

GaussRule gauss_legendre(int n) {
  if (n < 1) throw DomainError("quadrature needs at least one point");
  GaussRule rule;
  rule.points.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.points[i] = 0.5 * (1.0 - x);
    rule.points[n - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[i] = rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

}  // namespace cavitiga

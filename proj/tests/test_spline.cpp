#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "cavitiga/errors.hpp"
#include "cavitiga/spline.hpp"

using namespace cavitiga;

namespace {

// Independent textbook recursion, used as an oracle for eval_basis.
double naive_basis(const std::vector<double>& U, int i, int p, double x) {
  if (p == 0) {
    const bool last = (x == U.back()) && U[i] < U[i + 1] && U[i + 1] == U.back();
    return (U[i] <= x && x < U[i + 1]) || last ? 1.0 : 0.0;
  }
  double a = 0.0, b = 0.0;
  if (U[i + p] != U[i]) a = (x - U[i]) / (U[i + p] - U[i]) * naive_basis(U, i, p - 1, x);
  if (U[i + p + 1] != U[i + 1]) b = (U[i + p + 1] - x) / (U[i + p + 1] - U[i + 1]) * naive_basis(U, i + 1, p - 1, x);
  return a + b;
}

NurbsCurve quarter_circle(double R) {
  const double w = std::sqrt(2.0) / 2.0;
  return NurbsCurve(KnotVector({0, 0, 0, 1, 1, 1}, 2), {Vec3(R, 0, 0), Vec3(R, R, 0), Vec3(0, R, 0)}, {1.0, w, 1.0});
}

double max_radius_error(const NurbsCurve& c, double R, int samples = 100) {
  double err = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double x = static_cast<double>(k) / (samples - 1);
    err = std::max(err, std::abs(c.eval(x).norm() - R));
  }
  return err;
}

NurbsPatch quarter_annulus() {
  // Quarter annulus r ∈ [1, 2], θ ∈ [0, π/2], z ∈ [0, 0.5].
  const double w = std::sqrt(2.0) / 2.0;
  std::vector<Vec3> pts;
  std::vector<double> wts;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 2; ++i) {
        const double r = 1.0 + i;
        const Vec3 arc[3] = {Vec3(r, 0, 0), Vec3(r, r, 0), Vec3(0, r, 0)};
        pts.push_back(arc[j] + Vec3(0, 0, 0.5 * k));
        wts.push_back(j == 1 ? w : 1.0);
      }
  return NurbsPatch({KnotVector::uniform(1, 1), KnotVector({0, 0, 0, 1, 1, 1}, 2), KnotVector::uniform(1, 1)}, pts, wts);
}

}  // namespace

TEST_CASE("find_span conventions") {
  CHECK(find_span(KnotVector({0, 0, 1, 1}, 1), 0.0) == 1);
  CHECK(find_span(KnotVector({0, 0, 1, 1}, 1), 1.0) == 1);
  const KnotVector kv({0, 0, 0, 0.5, 1, 1, 1}, 2);
  CHECK(find_span(kv, 0.5) == 3);
  CHECK(find_span(kv, 0.49) == 2);
  CHECK(find_span(kv, 1.0) == 3);
  CHECK_THROWS_AS(find_span(kv, 1.5), DomainError);
  CHECK_THROWS_AS(find_span(kv, -0.1), DomainError);
}

TEST_CASE("knot vector validation and normalization") {
  CHECK_THROWS_AS(KnotVector({0, 0, 1, 0.5}, 1), DomainError);
  CHECK_THROWS_AS(KnotVector({0, 0.2, 1, 1}, 1), DomainError);  // not open
  const KnotVector kv({2, 2, 2, 3, 4, 4, 4}, 2);
  CHECK(kv[3] == doctest::Approx(0.5));
  CHECK(kv.size() == 4);
  CHECK(kv.num_elements() == 2);
  const KnotVector r = kv.reduced();
  CHECK(r.degree() == 1);
  CHECK(r.size() == 3);
}

TEST_CASE("Bernstein values at midpoint") {
  auto be = eval_basis(KnotVector({0, 0, 0, 1, 1, 1}, 2), 0.5, 0);
  CHECK(be.ders(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(be.ders(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(be.ders(0, 2) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("eval_basis matches naive recursion") {
  const std::vector<double> U{0, 0, 0, 0.5, 1, 1, 1};
  const KnotVector kv(U, 2);
  for (double x : {0.25, 0.0, 0.5, 0.75, 1.0, 0.1234}) {
    auto be = eval_basis(kv, x, 0);
    for (int j = 0; j <= 2; ++j) CHECK(be.ders(0, j) == doctest::Approx(naive_basis(U, be.span - 2 + j, 2, x)).epsilon(1e-14));
  }
}

TEST_CASE("partition of unity and derivative sums at random points") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const KnotVector kv({0, 0, 0, 0, 0.1, 0.3, 0.3, 0.55, 0.8, 1, 1, 1, 1}, 3);
  for (int k = 0; k < 1000; ++k) {
    auto be = eval_basis(kv, u(rng), 3);
    CHECK(std::abs(be.ders.row(0).sum() - 1.0) < 1e-12);
    for (int d = 1; d <= 3; ++d) CHECK(std::abs(be.ders.row(d).sum()) < 1e-10 * (1.0 + be.ders.row(d).cwiseAbs().sum()));
  }
}

TEST_CASE("local support") {
  const std::vector<double> U{0, 0, 0, 0.25, 0.5, 0.75, 1, 1, 1};
  const KnotVector kv(U, 2);
  for (double x = 0.0; x <= 1.0; x += 0.01) {
    auto be = eval_basis(kv, x, 0);
    for (int i = 0; i < kv.size(); ++i) {
      const int j = i - (be.span - 2);
      const double v = (j >= 0 && j <= 2) ? be.ders(0, j) : 0.0;
      if (x < U[i] || x > U[i + 3]) CHECK(v == 0.0);
    }
  }
}

TEST_CASE("analytic derivatives agree with central differences") {
  const KnotVector kv({0, 0, 0, 0, 0.3, 0.6, 1, 1, 1, 1}, 3);
  const double h = 1e-6;
  for (double x : {0.1, 0.2, 0.45, 0.77, 0.9}) {
    auto be = eval_basis(kv, x, 1);
    auto bp = eval_basis(kv, x + h, 0), bm = eval_basis(kv, x - h, 0);
    REQUIRE(bp.span == be.span);
    REQUIRE(bm.span == be.span);
    for (int j = 0; j <= 3; ++j) {
      const double fd = (bp.ders(0, j) - bm.ders(0, j)) / (2 * h);
      CHECK(std::abs(fd - be.ders(1, j)) <= 1e-6 * std::max(1.0, std::abs(be.ders(1, j))));
    }
  }
}

TEST_CASE("continuity p - r across interior knots") {
  // Cubic with a simple knot at 0.3 (C2) and a double knot at 0.6 (C1).
  const KnotVector kv({0, 0, 0, 0, 0.3, 0.6, 0.6, 1, 1, 1, 1}, 3);
  std::vector<Vec3> pts;
  for (int i = 0; i < kv.size(); ++i) pts.emplace_back(std::cos(1.3 * i), std::sin(0.7 * i * i), 0.1 * i);
  const NurbsCurve c(kv, pts);
  auto coeff_ders = [&](double x, int order) {
    auto be = eval_basis(kv, x, 3);
    Vec3 v = Vec3::Zero();
    for (int j = 0; j <= 3; ++j) v += be.ders(order, j) * pts[be.span - 3 + j];
    return v;
  };
  const double off = 1e-8;
  for (auto [knot, cont] : {std::pair{0.3, 2}, std::pair{0.6, 1}}) {
    for (int order = 0; order <= cont; ++order) {
      const Vec3 l = coeff_ders(knot - off, order), r = coeff_ders(knot + off, order);
      CHECK((l - r).norm() <= 1e-6 * std::max(1.0, l.norm()));
    }
    const Vec3 l = coeff_ders(knot - off, cont + 1), r = coeff_ders(knot + off, cont + 1);
    CHECK((l - r).norm() > 1e-3);
  }
  // A degree-2 curve with an interior knot of multiplicity 2 has a kink.
  const KnotVector kk({0, 0, 0, 0.5, 0.5, 1, 1, 1}, 2);
  const NurbsCurve kinked(kk, {Vec3(0, 0, 0), Vec3(1, 1, 0), Vec3(2, 0, 0), Vec3(3, 1, 0), Vec3(4, 0, 0)});
  CHECK((kinked.eval(0.5) - Vec3(2, 0, 0)).norm() < 1e-14);
  const Vec3 dl = kinked.derivative(0.5 - 1e-9), dr = kinked.derivative(0.5 + 1e-9);
  CHECK((dl.normalized() - dr.normalized()).norm() > 0.5);
}

TEST_CASE("curves: affine reproduction and exact circle") {
  const NurbsCurve line(KnotVector({0, 0, 0, 0.4, 1, 1, 1}, 2), {Vec3(0, 0, 0), Vec3(1, 2, 3), Vec3(2, 4, 6), Vec3(3, 6, 9)});
  for (double x = 0.0; x <= 1.0; x += 0.05) {
    const Vec3 p = line.eval(x);
    CHECK(p.cross(Vec3(1, 2, 3)).norm() < 1e-13);
  }
  const double R = 0.035;
  CHECK(max_radius_error(quarter_circle(R), R) < 1e-13);
  CHECK(max_radius_error(quarter_circle(1.0), 1.0) < 1e-13);
}

TEST_CASE("knot insertion preserves the curve") {
  const auto c = quarter_circle(1.0);
  auto c2 = knot_insert(c, 0.5);
  CHECK(c2.knots.size() == 4);
  CHECK(max_radius_error(c2, 1.0) < 1e-13);
  for (int k = 0; k <= 50; ++k) {
    const double x = k / 50.0;
    CHECK((c.eval(x) - c2.eval(x)).norm() < 1e-13);
  }
  c2 = knot_insert(c2, 0.5);
  CHECK_THROWS_AS(knot_insert(c2, 0.5), RefinementError);
}

TEST_CASE("degree elevation preserves the curve") {
  const NurbsCurve seg(KnotVector::uniform(1, 1), {Vec3(0, 0, 0), Vec3(1, 1, 0)});
  const auto e = degree_elevate(seg);
  CHECK(e.degree() == 2);
  CHECK(e.points.size() == 3);
  CHECK((e.points[1] - Vec3(0.5, 0.5, 0)).norm() < 1e-15);

  const auto c3 = degree_elevate(quarter_circle(1.0));
  CHECK(c3.degree() == 3);
  CHECK(max_radius_error(c3, 1.0) < 1e-13);

  // Multiplicities all grow by one.
  const NurbsCurve c(KnotVector({0, 0, 0, 0.3, 1, 1, 1}, 2), {Vec3(0, 0, 0), Vec3(1, 2, 0), Vec3(2, -1, 0), Vec3(3, 0, 1)});
  const auto ce = degree_elevate(c);
  CHECK(ce.knots.multiplicity(0.3) == 2);
  CHECK(ce.knots.multiplicity(0.0) == 4);
}

TEST_CASE("elevate-then-insert and insert-then-elevate describe the same curve") {
  const auto c = quarter_circle(2.0);
  const auto a = knot_insert(degree_elevate(c), 0.3);
  const auto b = degree_elevate(knot_insert(c, 0.3));
  CHECK(a.points.size() != b.points.size());  // different control nets
  for (int k = 0; k <= 50; ++k) {
    const double x = k / 50.0;
    CHECK((a.eval(x) - b.eval(x)).norm() < 1e-12);
  }
}

TEST_CASE("patch evaluation: identity, affine, and finite-difference Jacobian") {
  std::vector<Vec3> pts;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) pts.emplace_back(i, j, k);
  const NurbsPatch id({KnotVector::uniform(1, 1), KnotVector::uniform(1, 1), KnotVector::uniform(1, 1)}, pts);
  Mat3 A;
  A << 2, 0.5, 0, 0.1, 1, 0.3, 0, -0.2, 3;
  const Vec3 b(1, -2, 0.5);
  std::vector<Vec3> apts;
  for (const auto& p : pts) apts.push_back(A * p + b);
  const NurbsPatch aff(id.knots, apts);
  const NurbsPatch aff2 = refine(aff, 3, {2, 3, 1});

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    const Vec3 xh(u(rng), u(rng), u(rng));
    const auto pi = id.eval_with_jacobian(xh);
    CHECK((pi.x - xh).norm() < 1e-15);
    CHECK((pi.jacobian - Mat3::Identity()).norm() < 1e-14);
    const auto pa = aff2.eval_with_jacobian(xh);
    CHECK((pa.x - (A * xh + b)).norm() < 1e-13);
    CHECK((pa.jacobian - A).norm() < 1e-12);
  }

  const NurbsPatch ann = quarter_annulus();
  const double h = 1e-6;
  for (int k = 0; k < 20; ++k) {
    const Vec3 xh(0.05 + 0.9 * u(rng), 0.05 + 0.9 * u(rng), 0.05 + 0.9 * u(rng));
    const auto pp = ann.eval_with_jacobian(xh);
    Mat3 fd;
    for (int d = 0; d < 3; ++d) {
      Vec3 e = Vec3::Zero();
      e[d] = h;
      fd.col(d) = (ann.eval(xh + e) - ann.eval(xh - e)) / (2 * h);
    }
    CHECK(std::abs(pp.jacobian.determinant() - fd.determinant()) < 1e-6 * std::abs(fd.determinant()));
    CHECK(pp.jacobian.determinant() > 0.0);
  }
}

TEST_CASE("patch refinement leaves geometry fixed") {
  const NurbsPatch ann = quarter_annulus();
  const NurbsPatch ins = knot_insert(ann, 1, 0.5);
  CHECK(ins.count(1) == ann.count(1) + 1);
  const NurbsPatch fine = refine(ann, 3, {2, 4, 3});
  CHECK(fine.knots[1].num_elements() == 4);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const Vec3 xh(u(rng), u(rng), u(rng));
    const Vec3 x0 = ann.eval(xh);
    CHECK((ins.eval(xh) - x0).norm() < 1e-12);
    CHECK((fine.eval(xh) - x0).norm() < 1e-12);
    // Exact cylinder: radius depends only on the first parameter.
    CHECK(std::abs(Eigen::Vector2d(x0[0], x0[1]).norm() - (1.0 + xh[0])) < 1e-12);
  }
  // Uniform h-refinement k times multiplies the element count by 2^k.
  NurbsPatch h = ann;
  for (int k = 1; k <= 3; ++k) {
    h = refine_uniform(h, 0, 2);
    CHECK(h.knots[0].num_elements() == (1 << k));
  }
}

TEST_CASE("Gauss-Legendre exactness") {
  for (int q = 1; q <= 6; ++q) {
    const auto g = gauss_legendre(q);
    for (int deg = 0; deg <= 2 * q - 1; ++deg) {
      double s = 0.0;
      for (int i = 0; i < q; ++i) s += g.weights[i] * std::pow(g.points[i], deg);
      CHECK(s == doctest::Approx(1.0 / (deg + 1)).epsilon(1e-14));
    }
  }
}

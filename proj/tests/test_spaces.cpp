#include <cmath>
#include <random>

#include <doctest.h>

#include "cavitiga/errors.hpp"
#include "cavitiga/spaces.hpp"

using namespace cavitiga;

namespace {

Eigen::VectorXd random_vector(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = U(rng);
  return v;
}

MultipatchGeometry refined_box(int degree, int elements) {
  return refine(make_box(Vec3(0, 0, 0), Vec3(1, 1, 1)), degree, {elements, elements, elements});
}

MultipatchGeometry two_boxes(int degree) {
  auto a = make_box(Vec3(0, 0, 0), Vec3(1, 1, 1));
  auto b = make_box(Vec3(1, 0, 0), Vec3(2, 1, 1));
  MultipatchGeometry g;
  g.patches = {a.patches[0], b.patches[0]};
  g.interfaces = detect_interfaces(g.patches);
  for (int f = 0; f < 6; ++f) {
    if (f != 1) g.boundary_tags[{0, f}] = BoundaryLabel::PecWall;
    if (f != 0) g.boundary_tags[{1, f}] = BoundaryLabel::PecWall;
  }
  return refine(g, degree, {1, 1, 1});
}

// Tangents of an interface face at face-local (s, t), from side A.
std::array<Vec3, 2> face_tangent_vectors(const NurbsPatch& p, int face, double s, double t) {
  const auto J = p.eval_with_jacobian(face_point(face, s, t)).jacobian;
  const auto tg = face_tangents(face);
  return {J.col(tg[0]), J.col(tg[1])};
}

}  // namespace

TEST_CASE("DOF counts on single and glued boxes") {
  CHECK(make_h1_space(refined_box(2, 1)).num_global() == 27);
  CHECK(make_h1_space(two_boxes(1)).num_global() == 12);
  CHECK(make_hcurl_space(refined_box(1, 1), {}).num_global() == 12);
  CHECK(make_hcurl_space(two_boxes(1), {}).num_global() == 20);
  const auto s = make_hcurl_space(refined_box(2, 1), {});
  CHECK(s.num_global() == 54);
  CHECK(s.num_free() == 54);
}

TEST_CASE("PEC removes exactly the tangential boundary DOFs") {
  for (int p = 1; p <= 3; ++p)
    for (int e = 1; e <= 3; ++e) {
      const int n = p + e;
      const auto s = make_hcurl_space(refined_box(p, e));
      CHECK(s.num_global() == 3 * (n - 1) * n * n);
      CHECK(s.num_free() == 3 * (n - 1) * (n - 2) * (n - 2));
    }
}

TEST_CASE("PEC fields have vanishing tangential trace") {
  const auto geo = refine(make_pillbox(0.035, 0.1).cavity, 2, {2, 2, 2});
  const auto s = make_hcurl_space(geo);
  const auto E = s.expand(random_vector(s.num_free(), 3));
  double err = 0.0, scale = 0.0;
  for (const auto& f : geo.faces_tagged(BoundaryLabel::PecWall))
    for (int a = 0; a <= 7; ++a)
      for (int b = 0; b <= 7; ++b) {
        const auto v = evaluate_hcurl(s, E, f.patch, face_point(f.face, a / 7.0, b / 7.0));
        const auto t = face_tangent_vectors(geo.patches[f.patch], f.face, a / 7.0, b / 7.0);
        err = std::max({err, std::abs(v.value.dot(t[0].normalized())), std::abs(v.value.dot(t[1].normalized()))});
        scale = std::max(scale, v.value.norm());
      }
  CHECK(scale > 0.0);
  CHECK(err < 1e-12 * scale);
}

TEST_CASE("glued spaces are conforming across interfaces") {
  const auto geo = refine(make_revolved_cell(tesla_like_profile()).cavity, 2, {2, 2, 2});
  const auto h1 = make_h1_space(geo);
  const auto hc = make_hcurl_space(geo, {});
  const auto u = random_vector(h1.num_global(), 7);
  const auto E = random_vector(hc.num_global(), 8);
  double err_h1 = 0.0, err_tan = 0.0;
  for (const auto& itf : geo.interfaces) {
    const FaceOrientation o{itf.orientation};
    for (int a = 0; a <= 5; ++a)
      for (int b = 0; b <= 5; ++b) {
        const double s = a / 5.0, t = b / 5.0;
        const auto m = o.map_param(s, t);
        const Vec3 xa = face_point(itf.face_a, s, t), xb = face_point(itf.face_b, m[0], m[1]);
        err_h1 = std::max(err_h1, std::abs(evaluate_h1(h1, u, itf.patch_a, xa).value - evaluate_h1(h1, u, itf.patch_b, xb).value));
        const auto ea = evaluate_hcurl(hc, E, itf.patch_a, xa);
        const auto eb = evaluate_hcurl(hc, E, itf.patch_b, xb);
        for (const Vec3& tv : face_tangent_vectors(geo.patches[itf.patch_a], itf.face_a, s, t))
          err_tan = std::max(err_tan, std::abs((ea.value - eb.value).dot(tv.normalized())) / (1.0 + ea.value.norm()));
      }
  }
  CHECK(err_h1 < 1e-12);
  CHECK(err_tan < 1e-10);
}

TEST_CASE("isoparametric H1 reproduces the coordinates") {
  const auto geo = refine(make_pillbox(0.035, 0.1).cavity, 3, {2, 2, 1});
  const auto h1 = make_h1_space(geo);
  for (int d = 0; d < 3; ++d) {
    Eigen::VectorXd c(h1.num_global());
    for (int p = 0; p < geo.num_patches(); ++p)
      for (int l = 0; l < h1.local_size(p); ++l) c[h1.dof(p, l).global] = geo.patches[p].points[l][d];
    std::mt19937_64 rng(d);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int k = 0; k < 40; ++k) {
      const int p = k % 5;
      const auto v = evaluate_h1(h1, c, p, Vec3(U(rng), U(rng), U(rng)));
      CHECK(std::abs(v.value - v.x[d]) < 1e-14);
      CHECK((v.gradient - Vec3::Unit(d)).norm() < 1e-10);
    }
  }
}

TEST_CASE("discrete gradient matches the pushed-forward gradient") {
  for (const auto& geo : {refine(make_pillbox(0.035, 0.1).cavity, 2, {2, 2, 2}),
                          refine(make_revolved_cell(tesla_like_profile()).cavity, 3, {1, 1, 2})}) {
    const auto h1 = make_h1_space(geo, false);
    const auto hc = make_hcurl_space(geo);
    const auto G = discrete_gradient(h1, hc);
    CHECK(G.rows() == hc.num_global());
    CHECK(G.cols() == h1.num_global());
    const Eigen::VectorXd phi = random_vector(h1.num_global(), 21);
    const Eigen::VectorXd E = G * phi;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double err = 0.0, scale = 0.0;
    for (int k = 0; k < 100; ++k) {
      const int p = k % geo.num_patches();
      const Vec3 xh(U(rng), U(rng), U(rng));
      const auto grad = evaluate_h1(h1, phi, p, xh).gradient;
      const auto v = evaluate_hcurl(hc, E, p, xh);
      err = std::max(err, (grad - v.value).norm());
      err = std::max(err, v.curl.norm() * 1e-3);  // curl of a gradient, relative to 1/h
      scale = std::max(scale, grad.norm());
    }
    CHECK(err < 1e-10 * scale);
    // Row entries are ±p/(knot difference): rows of G sum to zero.
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(h1.num_global());
    CHECK((G * ones).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("space construction errors") {
  CHECK_THROWS_AS(discrete_gradient(make_hcurl_space(refined_box(1, 1)), make_hcurl_space(refined_box(1, 1))), SpaceError);
  const auto s = make_hcurl_space(refined_box(1, 1));
  CHECK_THROWS_AS(s.expand(Eigen::VectorXd::Zero(3)), SpaceError);
  CHECK_THROWS_AS(evaluate_hcurl(s, Eigen::VectorXd::Zero(s.num_global()), 0, Vec3(2, 0, 0)), DomainError);
}

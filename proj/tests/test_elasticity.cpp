#include <cmath>
#include <random>

#include <doctest.h>

#include "cavitiga/elasticity.hpp"
#include "cavitiga/errors.hpp"

using namespace cavitiga;

namespace {

// Plane-strain thick cylinder a < r < b with inner pressure p:
// u = A r + B / r, σ_rr = 2 (λ + η) A - 2 η B / r², σ_rr(a) = -p, σ_rr(b) = 0.
double lame_radial(const Material& m, double a, double b, double p, double r) {
  const double B = p * a * a * b * b / (2.0 * m.eta * (b * b - a * a));
  const double A = p * a * a / (2.0 * (m.lambda + m.eta) * (b * b - a * a));
  return A * r + B / r;
}

struct PressurizedWall {
  double R = 0.035, t = 0.003, L = 0.1, p = 1300.0;
  Material mat = Material::from_young_poisson(1.05e11, 0.38);
  CavityModel model = refine(make_pillbox(R, L, t), 2, 4, 1, 2);
  ElasticitySolver solver{model.wall, model.wall_constraints, mat};

  Eigen::VectorXd load(double scale = 1.0) const {
    return assemble_traction(solver.space(), model.wall.faces_tagged(BoundaryLabel::PecWall),
                             [&](const SurfacePoint& s) { return Vec3(-scale * p * s.normal); });
  }
};

}  // namespace

TEST_CASE("material conversions") {
  const auto m = Material::from_young_poisson(1.05e11, 0.38);
  CHECK(m.eta == doctest::Approx(1.05e11 / 2.76));
  CHECK(m.young() == doctest::Approx(1.05e11));
  CHECK(m.poisson() == doctest::Approx(0.38));
  CHECK_THROWS_AS(Material::from_young_poisson(1.0, 0.5), DomainError);
  CHECK_THROWS_AS(Material::from_young_poisson(-1.0, 0.3), DomainError);
}

TEST_CASE("pressurized pill-box wall matches the Lamé solution") {
  PressurizedWall w;
  const auto u = w.solver.solve(w.load());
  double worst = 0.0, off_axis = 0.0;
  for (int q = 0; q < 4; ++q)
    for (int a = 0; a <= 4; ++a)
      for (int r = 0; r <= 2; ++r) {
        const Vec3 xh(r / 2.0, a / 4.0, 0.37);
        const Vec3 x = w.model.wall.patches[q].eval(xh);
        const Vec3 d = u.at(q, xh);
        const double rad = std::hypot(x[0], x[1]);
        const Vec3 er(x[0] / rad, x[1] / rad, 0.0);
        const double exact = lame_radial(w.mat, w.R, w.R + w.t, w.p, rad);
        worst = std::max(worst, std::abs(d.dot(er) - exact) / exact);
        off_axis = std::max(off_axis, (d - d.dot(er) * er).norm() / exact);
      }
  CHECK(worst < 5e-3);
  CHECK(off_axis < 5e-3);
  CHECK(u.max_norm() == doctest::Approx(lame_radial(w.mat, w.R, w.R + w.t, w.p, w.R)).epsilon(5e-3));
}

TEST_CASE("linearity, energy identity and reciprocity") {
  PressurizedWall w;
  const auto F1 = w.load();
  const auto u1 = w.solver.solve(F1);
  const auto u2 = w.solver.solve(w.load(2.0));
  CHECK((u2.coefficients - 2.0 * u1.coefficients).norm() < 1e-12 * u2.coefficients.norm());

  // A second, non-uniform load.
  const auto F3 = assemble_traction(w.solver.space(), w.model.wall.faces_tagged(BoundaryLabel::Free),
                                    [](const SurfacePoint& s) { return Vec3(1e3 * s.x[2], -500.0, 2e3 * s.x[0]); });
  const auto u3 = w.solver.solve(F3);
  const auto& K = w.solver.stiffness();
  const double work = F1.dot(u1.coefficients);
  CHECK(u1.coefficients.dot(K * u1.coefficients) == doctest::Approx(work).epsilon(1e-10));
  CHECK(F1.dot(u3.coefficients) == doctest::Approx(F3.dot(u1.coefficients)).epsilon(1e-9));
  CHECK(work > 0.0);
}

TEST_CASE("constrained unknowns stay at zero") {
  PressurizedWall w;
  const auto u = w.solver.solve(w.load());
  for (std::size_t k = 0; k < w.solver.constrained().size(); ++k)
    if (w.solver.constrained()[k]) CHECK(u.coefficients[static_cast<Eigen::Index>(k)] == 0.0);
  const auto cp = u.control_points();
  CHECK(cp.size() == 4);
  CHECK(static_cast<int>(cp[0].size()) == w.model.wall.patches[0].num_points());
}

TEST_CASE("insufficient constraints are rejected") {
  const auto m = make_pillbox(0.035, 0.1);
  const auto mat = Material::from_young_poisson(1.05e11, 0.38);
  CHECK_THROWS_AS(ElasticitySolver(m.wall, {}, mat), WellPosednessError);
  // Axial constraints alone leave the in-plane translations and the rotation about z.
  std::vector<FaceConstraint> ends;
  for (const auto& c : m.wall_constraints)
    if (c.face >= 4) ends.push_back(c);
  CHECK_THROWS_AS(ElasticitySolver(m.wall, ends, mat), WellPosednessError);
  CHECK_NOTHROW(ElasticitySolver(m.wall, m.wall_constraints, mat));
}

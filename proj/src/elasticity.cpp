#include "cavitiga/elasticity.hpp"

#include <algorithm>
#include <cmath>

#include "cavitiga/errors.hpp"

namespace cavitiga {

Material Material::from_young_poisson(double young, double poisson) {
  if (!(young > 0.0)) throw DomainError("Young's modulus must be positive");
  if (!(poisson > -1.0 && poisson < 0.5)) throw DomainError("Poisson's ratio must lie in (-1, 1/2)");
  return {young / (2.0 * (1.0 + poisson)), young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))};
}

double Material::young() const { return eta * (3.0 * lambda + 2.0 * eta) / (lambda + eta); }
double Material::poisson() const { return lambda / (2.0 * (lambda + eta)); }

Vec3 Displacement::at(int patch, const Vec3& xh) const {
  Vec3 u;
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd c(space->num_global());
    for (int a = 0; a < space->num_global(); ++a) c[a] = coefficients[3 * a + i];
    u[i] = evaluate_h1(*space, c, patch, xh).value;
  }
  return u;
}

std::vector<std::vector<Vec3>> Displacement::control_points() const {
  std::vector<std::vector<Vec3>> out;
  for (int p = 0; p < space->num_patches(); ++p) {
    std::vector<Vec3> d;
    for (int l = 0; l < space->local_size(p); ++l) d.push_back(coefficients.segment<3>(3 * space->dof(p, l).global));
    out.push_back(std::move(d));
  }
  return out;
}

double Displacement::max_norm(int samples_per_direction) const {
  double m = 0.0;
  for (int a = 0; a < space->num_global(); ++a) m = std::max(m, coefficients.segment<3>(3 * a).norm());
  const int n = std::max(samples_per_direction, 2);
  std::array<Eigen::VectorXd, 3> comp;
  for (int i = 0; i < 3; ++i) {
    comp[i].resize(space->num_global());
    for (int a = 0; a < space->num_global(); ++a) comp[i][a] = coefficients[3 * a + i];
  }
  for (int p = 0; p < space->num_patches(); ++p)
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const Vec3 xh(double(i) / (n - 1), double(j) / (n - 1), double(k) / (n - 1));
          Vec3 u;
          for (int c = 0; c < 3; ++c) u[c] = evaluate_h1(*space, comp[c], p, xh).value;
          m = std::max(m, u.norm());
        }
  return m;
}

namespace {

int face_local_index(const std::array<int, 3>& n, int face, int i, int j) {
  std::array<int, 3> idx{};
  const int d = face_direction(face);
  const auto tg = face_tangents(face);
  idx[d] = face_side(face) ? n[d] - 1 : 0;
  idx[tg[0]] = i;
  idx[tg[1]] = j;
  return idx[0] + n[0] * (idx[1] + n[1] * idx[2]);
}

}  // namespace

ElasticitySolver::ElasticitySolver(const MultipatchGeometry& wall, const std::vector<FaceConstraint>& constraints,
                                   Material material)
    : space_(std::make_shared<const SplineSpace>(make_h1_space(wall))), material_(material) {
  if (!(material.eta > 0.0) || !(3.0 * material.lambda + 2.0 * material.eta > 0.0))
    throw DomainError("material is not positive definite");
  const auto& s = *space_;
  const int N = 3 * s.num_global();
  constrained_.assign(static_cast<std::size_t>(N), 0);
  for (const auto& c : constraints) {
    if (c.patch < 0 || c.patch >= s.num_patches() || c.face < 0 || c.face > 5)
      throw GeometryError("constraint refers to a missing face");
    const auto n = s.counts(c.patch, 0);
    const auto tg = face_tangents(c.face);
    for (int j = 0; j < n[tg[1]]; ++j)
      for (int i = 0; i < n[tg[0]]; ++i) {
        const int g = s.dof(c.patch, face_local_index(n, c.face, i, j)).global;
        for (int k = 0; k < 3; ++k)
          if (c.components[k]) constrained_[3 * g + k] = 1;
      }
  }

  // Rigid motions must not survive the constraints: the constrained rows of
  // the six rigid-body fields need full column rank.
  std::vector<Vec3> pos(static_cast<std::size_t>(s.num_global()));
  for (int p = 0; p < s.num_patches(); ++p)
    for (int l = 0; l < s.local_size(p); ++l) pos[s.dof(p, l).global] = wall.patches[p].points[l];
  const auto [lo, hi] = bounding_box(wall);
  const Vec3 center = 0.5 * (lo + hi);
  const double scale = std::max((hi - lo).norm(), 1e-300);
  std::vector<Eigen::Matrix<double, 1, 6>> rows;
  for (int a = 0; a < s.num_global(); ++a) {
    const Vec3 x = (pos[a] - center) / scale;
    for (int i = 0; i < 3; ++i) {
      if (!constrained_[3 * a + i]) continue;
      Eigen::Matrix<double, 1, 6> r = Eigen::Matrix<double, 1, 6>::Zero();
      r[i] = 1.0;
      for (int w = 0; w < 3; ++w) r[3 + w] = Vec3::Unit(w).cross(x)[i];
      rows.push_back(r);
    }
  }
  Eigen::MatrixXd R(static_cast<Eigen::Index>(rows.size()), 6);
  for (std::size_t k = 0; k < rows.size(); ++k) R.row(static_cast<Eigen::Index>(k)) = rows[k];
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(R);
  qr.setThreshold(1e-10);
  if (rows.size() < 6 || qr.rank() < 6)
    throw WellPosednessError("displacement constraints leave " + std::to_string(6 - (rows.size() < 6 ? 0 : qr.rank())) +
                             " rigid motion(s) free");

  K_ = assemble_elasticity(s, material.eta, material.lambda);
  std::vector<int> map(static_cast<std::size_t>(N), -1);
  for (int k = 0; k < N; ++k)
    if (!constrained_[k]) {
      map[k] = static_cast<int>(free_.size());
      free_.push_back(k);
    }
  std::vector<Eigen::Triplet<double>> t;
  for (int col = 0; col < K_.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(K_, col); it; ++it)
      if (map[it.row()] >= 0 && map[col] >= 0) t.emplace_back(map[it.row()], map[col], it.value());
  SparseMatrix Kf(static_cast<Eigen::Index>(free_.size()), static_cast<Eigen::Index>(free_.size()));
  Kf.setFromTriplets(t.begin(), t.end());
  factor_.compute(Kf);
  if (factor_.info() != Eigen::Success || (factor_.vectorD().array() <= 0.0).any())
    throw WellPosednessError("constrained elasticity stiffness is not positive definite");
}

Displacement ElasticitySolver::solve(const Eigen::VectorXd& load) const {
  if (load.size() != K_.rows()) throw DomainError("load vector has the wrong size");
  Eigen::VectorXd f(static_cast<Eigen::Index>(free_.size()));
  for (std::size_t k = 0; k < free_.size(); ++k) f[static_cast<Eigen::Index>(k)] = load[free_[k]];
  const Eigen::VectorXd uf = factor_.solve(f);
  Displacement d;
  d.space = space_;
  d.coefficients = Eigen::VectorXd::Zero(K_.rows());
  for (std::size_t k = 0; k < free_.size(); ++k) d.coefficients[free_[k]] = uf[static_cast<Eigen::Index>(k)];
  return d;
}

}  // namespace cavitiga

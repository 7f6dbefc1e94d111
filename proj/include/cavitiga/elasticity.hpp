#pragma once

// Static linear elasticity of the cavity wall in the isoparametric vector H1
// space, with per-face, per-component zero-displacement constraints.

#include <memory>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "cavitiga/assembly.hpp"

namespace cavitiga {

/// Isotropic material by its Lamé parameters (eta is the shear modulus).
struct Material {
  double eta = 0.0;
  double lambda = 0.0;

  /// From Young's modulus and Poisson's ratio; DomainError unless E > 0 and
  /// -1 < ν < 1/2.
  static Material from_young_poisson(double young, double poisson);
  double young() const;
  double poisson() const;
  bool operator==(const Material&) const = default;
};

struct Displacement {
  std::shared_ptr<const SplineSpace> space;
  /// u of global scalar DOF a, component i at index 3 a + i.
  Eigen::VectorXd coefficients;

  Vec3 at(int patch, const Vec3& xh) const;
  /// Displacement of each control point, per patch (control-point order).
  std::vector<std::vector<Vec3>> control_points() const;
  /// Largest |u| over the control points and a uniform sample of each patch.
  double max_norm(int samples_per_direction = 9) const;
};

class ElasticitySolver {
 public:
  /// Assembles and factorizes the constrained stiffness. Throws
  /// WellPosednessError when the constraints leave a rigid motion free.
  ElasticitySolver(const MultipatchGeometry& wall, const std::vector<FaceConstraint>& constraints, Material material);

  const SplineSpace& space() const { return *space_; }
  std::shared_ptr<const SplineSpace> space_ptr() const { return space_; }
  const SparseMatrix& stiffness() const { return K_; }
  const Material& material() const { return material_; }
  /// 1 for constrained unknowns (3 a + i), 0 otherwise.
  const std::vector<char>& constrained() const { return constrained_; }

  /// Solves K u = F for a full-size load (constrained entries ignored).
  Displacement solve(const Eigen::VectorXd& load) const;

 private:
  std::shared_ptr<const SplineSpace> space_;
  Material material_;
  SparseMatrix K_;
  std::vector<char> constrained_;
  std::vector<int> free_;
  Eigen::SimplicialLDLT<SparseMatrix> factor_;
};

}  // namespace cavitiga

#pragma once

// Multipatch spline spaces: scalar H1 (isoparametric) and curl-conforming
// Hcurl, glued across interfaces, with Dirichlet (PEC) DOF elimination.
//
// Hcurl component c on a patch has degree p-1 and the reduced knot vector in
// direction c and degree p elsewhere. Basis functions are B-splines in the
// reference cube mapped with the covariant push-forward
//   E = DF^{-T} ŵ,  curl E = DF curl̂ ŵ / det DF.

#include <array>
#include <memory>
#include <vector>

#include <Eigen/Sparse>

#include "cavitiga/geometry.hpp"

namespace cavitiga {

enum class SpaceKind {
  H1,            ///< rational isoparametric scalar space
  H1Polynomial,  ///< B-splines on the same knots (no weights)
  Hcurl,
};

struct DofRef {
  int global = -1;
  int sign = 1;
};

class SplineSpace {
 public:
  SpaceKind kind() const { return kind_; }
  const MultipatchGeometry& geometry() const { return *geometry_; }
  int num_patches() const { return geometry_->num_patches(); }
  int num_components() const { return kind_ == SpaceKind::Hcurl ? 3 : 1; }

  const std::array<KnotVector, 3>& knots(int patch, int component) const { return knots_[patch][component]; }
  std::array<int, 3> counts(int patch, int component) const;
  int component_offset(int patch, int component) const { return offsets_[patch][component]; }
  int local_size(int patch) const { return static_cast<int>(dofs_[patch].size()); }
  int local_index(int patch, int component, int i0, int i1, int i2) const;

  DofRef dof(int patch, int local) const { return dofs_[patch][local]; }
  int num_global() const { return num_global_; }
  int num_free() const { return static_cast<int>(free_to_global_.size()); }
  /// Free index of a global DOF, or -1 when it is eliminated.
  int free_index(int global) const { return free_index_[global]; }
  const std::vector<int>& free_to_global() const { return free_to_global_; }

  /// Global coefficient vector from free coefficients (zeros elsewhere).
  Eigen::VectorXd expand(const Eigen::VectorXd& free) const;

  friend SplineSpace make_h1_space(const MultipatchGeometry&, bool);
  friend SplineSpace make_hcurl_space(const MultipatchGeometry&, const std::vector<BoundaryLabel>&);

 private:
  SpaceKind kind_ = SpaceKind::H1;
  std::shared_ptr<const MultipatchGeometry> geometry_;
  std::vector<std::vector<std::array<KnotVector, 3>>> knots_;
  std::vector<std::vector<int>> offsets_;
  std::vector<std::vector<DofRef>> dofs_;
  int num_global_ = 0;
  std::vector<int> free_index_;
  std::vector<int> free_to_global_;
};

/// Scalar H1 space on the geometry knots, glued at interfaces. All DOFs are
/// free; constraints belong to the caller.
SplineSpace make_h1_space(const MultipatchGeometry& geometry, bool rational = true);

/// Hcurl space; tangential DOFs on faces tagged with one of `pec` are removed.
SplineSpace make_hcurl_space(const MultipatchGeometry& geometry,
                             const std::vector<BoundaryLabel>& pec = {BoundaryLabel::PecWall});

/// Matrix of the gradient H1Polynomial -> Hcurl on global DOFs
/// (rows: Hcurl, columns: H1), entries in {0, ±p/(ξ_{k+p+1}-ξ_{k+1})}.
Eigen::SparseMatrix<double> discrete_gradient(const SplineSpace& h1, const SplineSpace& hcurl);

struct ScalarValue {
  Vec3 x;
  double value = 0.0;
  Vec3 gradient;
};
struct VectorValue {
  Vec3 x;
  Vec3 value;
  Vec3 curl;
};

/// Point evaluation from global coefficients.
ScalarValue evaluate_h1(const SplineSpace& space, const Eigen::VectorXd& coefficients, int patch, const Vec3& xh);
VectorValue evaluate_hcurl(const SplineSpace& space, const Eigen::VectorXd& coefficients, int patch, const Vec3& xh);

}  // namespace cavitiga

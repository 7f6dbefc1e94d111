#pragma once

// Galerkin matrices by element-wise Gauss quadrature (p+1 points per
// direction and span). Element contributions are computed in fixed-size
// element chunks, possibly on several threads (CAVITIGA_THREADS caps the
// count), and merged in chunk order, so results do not depend on threading.

#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Sparse>

#include "cavitiga/spaces.hpp"

namespace cavitiga {

using SparseMatrix = Eigen::SparseMatrix<double>;

inline constexpr double kMu0 = 4e-7 * std::numbers::pi;
inline constexpr double kEps0 = 8.8541878128e-12;
double speed_of_light();  ///< 1/sqrt(mu0 eps0)

/// Number of assembly threads (CAVITIGA_THREADS or the hardware count).
int assembly_threads();

struct MaxwellMatrices {
  SparseMatrix K;  ///< ∫ mu^{-1} curl E_i · curl E_j
  SparseMatrix M;  ///< ∫ eps E_i · E_j
};

/// Curl-curl and mass matrices on the free DOFs of an Hcurl space.
MaxwellMatrices assemble_maxwell(const SplineSpace& hcurl, double mu = kMu0, double eps = kEps0);

/// Linear elasticity stiffness on a scalar H1 space, unknown (a, i) at row
/// 3 a + i (all DOFs, unconstrained):
///   K[(a,i),(b,j)] = ∫ eta δ_ij ∇φ_a·∇φ_b + eta ∂_j φ_a ∂_i φ_b + lambda ∂_i φ_a ∂_j φ_b.
SparseMatrix assemble_elasticity(const SplineSpace& h1, double eta, double lambda);

struct SurfacePoint {
  int patch = 0;
  int face = 0;
  Vec3 xh;
  Vec3 x;
  Vec3 normal;  ///< outward unit normal
};

/// Load vector F[3 a + i] = ∫_faces t_i φ_a dS for a traction field t.
Eigen::VectorXd assemble_traction(const SplineSpace& h1, const std::vector<FaceRef>& faces,
                                  const std::function<Vec3(const SurfacePoint&)>& traction);

/// Outward unit normal and area element factor |det DF| |DF^{-T} e_d| of a face.
std::pair<Vec3, double> face_normal(const NurbsPatch& patch, int face, const Vec3& xh);

}  // namespace cavitiga

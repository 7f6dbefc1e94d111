#pragma once

// Generalized symmetric eigenproblem K x = λ M x near a shift σ, and the
// cavity-mode driver built on it.
//
// The solver is a restarted block Krylov method (block Lanczos with full
// M-reorthogonalization) on OP = (K - σM)^{-1} M, which is self-adjoint in the
// M inner product. Ritz values θ of OP give λ = σ + 1/θ; the wanted pairs are
// those with the largest |θ|. A block of several vectors resolves degenerate
// eigenvalues (up to the block size) in one run.

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "cavitiga/assembly.hpp"

namespace cavitiga {

/// Sparse LU of a square matrix (UMFPACK) with one step of iterative
/// refinement per solve. Throws FactorizationError for (numerically)
/// singular matrices.
class SparseLU {
 public:
  explicit SparseLU(const SparseMatrix& A, double min_rcond = 1e-14);
  ~SparseLU();
  SparseLU(const SparseLU&) = delete;
  SparseLU& operator=(const SparseLU&) = delete;

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const;
  /// UMFPACK's estimate (smallest over largest |U_ii|).
  double rcond() const { return rcond_; }
  int rows() const { return static_cast<int>(A_.rows()); }

 private:
  SparseMatrix A_;
  void* numeric_ = nullptr;
  double rcond_ = 0.0;
};

struct EigenOptions {
  int n_ev = 6;
  double sigma = 0.0;
  double tol = 1e-10;
  int max_restarts = 300;
  int block_size = 4;
  /// Krylov basis size before a restart (0: automatic).
  int max_basis = 0;
  std::uint64_t seed = 0x5eed5eedULL;
  /// Ritz pairs with |λ| below kernel_threshold |σ| are ignored (used to skip
  /// the gradient kernel of curl-curl problems).
  double kernel_threshold = 0.0;
  bool operator==(const EigenOptions&) const = default;
};

struct EigenResult {
  Eigen::VectorXd eigenvalues;   ///< ascending
  Eigen::MatrixXd eigenvectors;  ///< M-orthonormal columns
  /// ‖K x - λ M x‖ / (‖K x‖ + |λ| ‖M x‖) per pair.
  Eigen::VectorXd residuals;
  int restarts = 0;
  int operator_applications = 0;
};

/// The n_ev eigenpairs nearest σ (in the sense of the shift-invert transform).
/// Throws FactorizationError when K - σM is singular and ConvergenceError
/// (with the best residual estimates) when max_restarts is exhausted.
EigenResult solve_generalized(const SparseMatrix& K, const SparseMatrix& M, const EigenOptions& options);

/// Number of eigenvalues of K x = λ M x below σ (Sylvester inertia of
/// K - σM from a sparse LDL^T); M must be positive definite.
int count_eigenvalues_below(const SparseMatrix& K, const SparseMatrix& M, double sigma);

struct CavityModes {
  std::shared_ptr<const SplineSpace> space;
  Eigen::VectorXd omega2;          ///< ω² = λ (rad²/s²), ascending
  std::vector<double> frequencies;  ///< f = ω / 2π in Hz
  Eigen::MatrixXd vectors;          ///< free-DOF coefficients, M-orthonormal
  Eigen::VectorXd residuals;
  SparseMatrix K, M;
  int restarts = 0;
};

/// Maxwell eigenmodes of a (refined) cavity near `frequency_hint` (Hz).
CavityModes solve_cavity_modes(const MultipatchGeometry& cavity, double frequency_hint, EigenOptions options = {});

struct AxisSample {
  double z = 0.0;
  Vec3 E;
};

/// E along the axis x = y = 0 at n points between the z extents of the
/// geometry. Points outside the cavity raise IdentificationError.
std::vector<AxisSample> sample_axis(const CavityModes& modes, int mode, int n = 100);

/// max(|Ex|, |Ey|) / max |Ez| over the axis samples.
double axis_purity(const std::vector<AxisSample>& samples);

/// Index of the accelerating (TM010-like) mode: the lowest-frequency mode
/// whose axis field is longitudinal (purity below 1e-3) and not negligible
/// against the RMS field of the mode. Throws IdentificationError.
int identify_accelerating_mode(const CavityModes& modes, int samples = 100);

}  // namespace cavitiga

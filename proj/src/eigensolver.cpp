#include "cavitiga/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/SparseCholesky>
#include <umfpack.h>

#include "cavitiga/errors.hpp"

namespace cavitiga {

// ---------------------------------------------------------------------------
// SparseLU

SparseLU::SparseLU(const SparseMatrix& A, double min_rcond) : A_(A) {
  if (A_.rows() != A_.cols()) throw FactorizationError("matrix is not square");
  A_.makeCompressed();
  const int n = static_cast<int>(A_.rows());
  double control[UMFPACK_CONTROL], info[UMFPACK_INFO];
  umfpack_di_defaults(control);
  void* symbolic = nullptr;
  int status = umfpack_di_symbolic(n, n, A_.outerIndexPtr(), A_.innerIndexPtr(), A_.valuePtr(), &symbolic, control, info);
  if (status != UMFPACK_OK) throw FactorizationError("symbolic factorization failed (status " + std::to_string(status) + ")");
  status = umfpack_di_numeric(A_.outerIndexPtr(), A_.innerIndexPtr(), A_.valuePtr(), symbolic, &numeric_, control, info);
  umfpack_di_free_symbolic(&symbolic);
  rcond_ = info[UMFPACK_RCOND];
  if (status != UMFPACK_OK || !(rcond_ >= min_rcond)) {
    if (numeric_) umfpack_di_free_numeric(&numeric_);
    std::ostringstream os;
    os << "singular pivot in sparse LU (status " << status << ", rcond " << rcond_ << ")";
    throw FactorizationError(os.str());
  }
}

SparseLU::~SparseLU() {
  if (numeric_) umfpack_di_free_numeric(&numeric_);
}

Eigen::VectorXd SparseLU::solve(const Eigen::VectorXd& b) const {
  if (b.size() != A_.rows()) throw FactorizationError("right-hand side has the wrong size");
  double control[UMFPACK_CONTROL], info[UMFPACK_INFO];
  umfpack_di_defaults(control);
  control[UMFPACK_IRSTEP] = 1;
  Eigen::VectorXd x(b.size());
  const int status = umfpack_di_solve(UMFPACK_A, A_.outerIndexPtr(), A_.innerIndexPtr(), A_.valuePtr(), x.data(), b.data(),
                                      numeric_, control, info);
  if (status != UMFPACK_OK) throw FactorizationError("sparse LU solve failed (status " + std::to_string(status) + ")");
  return x;
}

Eigen::MatrixXd SparseLU::solve(const Eigen::MatrixXd& B) const {
  Eigen::MatrixXd X(B.rows(), B.cols());
  for (int j = 0; j < B.cols(); ++j) X.col(j) = solve(Eigen::VectorXd(B.col(j)));
  return X;
}

// ---------------------------------------------------------------------------
// Block Krylov eigensolver

namespace {

double m_norm(const SparseMatrix& M, const Eigen::VectorXd& x) { return std::sqrt(std::max(0.0, x.dot(M * x))); }

/// M-orthonormalizes X against the M-orthonormal V (MV = M V) and within
/// itself; nearly dependent columns are dropped.
Eigen::MatrixXd orthonormalize(const SparseMatrix& M, const Eigen::MatrixXd& V, const Eigen::MatrixXd& MV,
                               Eigen::MatrixXd X) {
  for (int pass = 0; pass < 2; ++pass)
    if (V.cols() > 0) X -= V * (MV.transpose() * X);
  std::vector<Eigen::VectorXd> kept, kept_m;
  for (int j = 0; j < X.cols(); ++j) {
    Eigen::VectorXd x = X.col(j);
    const double n0 = m_norm(M, x);
    if (!(n0 > 0.0)) continue;
    for (int pass = 0; pass < 2; ++pass) {
      if (V.cols() > 0) x -= V * (MV.transpose() * x);
      for (std::size_t k = 0; k < kept.size(); ++k) x -= kept[k] * kept_m[k].dot(x);
    }
    const Eigen::VectorXd mx = M * x;
    const double n1 = std::sqrt(std::max(0.0, x.dot(mx)));
    if (n1 <= 1e-10 * n0) continue;
    kept.push_back(x / n1);
    kept_m.push_back(mx / n1);
  }
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = kept[k];
  return out;
}

void append_cols(Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd C(B.rows(), A.cols() + B.cols());
  if (A.cols() > 0) C.leftCols(A.cols()) = A;
  C.rightCols(B.cols()) = B;
  A.swap(C);
}

}  // namespace

EigenResult solve_generalized(const SparseMatrix& K, const SparseMatrix& M, const EigenOptions& opt) {
  const int n = static_cast<int>(K.rows());
  if (K.cols() != n || M.rows() != n || M.cols() != n) throw DomainError("K and M must be square of equal size");
  if (opt.n_ev < 1 || opt.n_ev > n) throw DomainError("n_ev must lie in [1, n]");
  if (opt.block_size < 1) throw DomainError("block size must be positive");
  if (!(opt.tol > 0.0)) throw DomainError("tolerance must be positive");
  const int nev = opt.n_ev;
  const int b = std::min(opt.block_size, n);
  const int mmax = std::min(n, opt.max_basis > 0 ? opt.max_basis : std::max(2 * nev + 4 * b, 32));
  if (mmax < nev + b && mmax < n) throw DomainError("Krylov basis too small for n_ev and block size");

  const SparseMatrix A = K - opt.sigma * M;
  const SparseLU lu(A);
  int applications = 0;
  auto op = [&](const Eigen::MatrixXd& X) {
    applications += static_cast<int>(X.cols());
    return lu.solve(Eigen::MatrixXd(M * X));
  };
  auto is_kernel = [&](double theta) {
    const double lambda = opt.sigma + 1.0 / theta;
    return opt.kernel_threshold > 0.0 && std::abs(lambda) < opt.kernel_threshold * std::abs(opt.sigma);
  };

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Eigen::MatrixXd X(n, b);
  for (int j = 0; j < b; ++j)
    for (int i = 0; i < n; ++i) X(i, j) = U(rng);

  Eigen::MatrixXd V(n, 0), MV(n, 0), W(n, 0);
  std::vector<double> best(static_cast<std::size_t>(nev), std::numeric_limits<double>::infinity());

  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    while (V.cols() < mmax) {
      X = orthonormalize(M, V, MV, X);
      if (X.cols() == 0) break;  // invariant subspace
      if (V.cols() + X.cols() > mmax) X.conservativeResize(Eigen::NoChange, mmax - V.cols());
      const Eigen::MatrixXd MX = M * X;
      const Eigen::MatrixXd WX = op(X);
      append_cols(V, X);
      append_cols(MV, MX);
      append_cols(W, WX);
      X = WX;
    }
    if (V.cols() == 0) throw ConvergenceError("Krylov space collapsed", best);

    Eigen::MatrixXd T = MV.transpose() * W;
    T = 0.5 * (T + T.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const Eigen::VectorXd& theta = es.eigenvalues();
    std::vector<int> order;
    for (int i = 0; i < theta.size(); ++i)
      if (theta[i] != 0.0 && !is_kernel(theta[i])) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int c) { return std::abs(theta[a]) > std::abs(theta[c]); });
    if (static_cast<int>(order.size()) < nev) {
      if (V.cols() >= n) throw ConvergenceError("fewer than n_ev eigenpairs outside the kernel", best);
      // Not enough non-kernel Ritz values yet: keep everything and continue.
    }

    const int nw = std::min<int>(nev, static_cast<int>(order.size()));
    Eigen::MatrixXd Y(V.cols(), nw);
    for (int k = 0; k < nw; ++k) Y.col(k) = es.eigenvectors().col(order[k]);
    const Eigen::MatrixXd Xr = V * Y;
    const Eigen::MatrixXd R = W * Y - Xr * Eigen::VectorXd(Eigen::VectorXd::NullaryExpr(nw, [&](Eigen::Index k) {
                                                            return theta[order[k]];
                                                          })).asDiagonal();
    std::vector<int> unconverged;
    for (int k = 0; k < nw; ++k) {
      const double res = m_norm(M, R.col(k)) / std::abs(theta[order[k]]);
      best[k] = std::min(best[k], res);
      if (!(res <= opt.tol)) unconverged.push_back(k);
    }

    if (nw == nev && unconverged.empty()) {
      EigenResult out;
      out.restarts = restart;
      out.operator_applications = applications;
      std::vector<int> idx(nev);
      for (int k = 0; k < nev; ++k) idx[k] = k;
      Eigen::VectorXd lambda(nev);
      for (int k = 0; k < nev; ++k) lambda[k] = opt.sigma + 1.0 / theta[order[k]];
      std::stable_sort(idx.begin(), idx.end(), [&](int a, int c) { return lambda[a] < lambda[c]; });
      out.eigenvalues.resize(nev);
      out.eigenvectors.resize(n, nev);
      out.residuals.resize(nev);
      for (int k = 0; k < nev; ++k) {
        Eigen::VectorXd x = Xr.col(idx[k]);
        x /= m_norm(M, x);
        Eigen::Index imax;
        x.cwiseAbs().maxCoeff(&imax);
        if (x[imax] < 0) x = -x;
        const double l = lambda[idx[k]];
        const Eigen::VectorXd Kx = K * x, Mx = M * x;
        out.eigenvalues[k] = l;
        out.eigenvectors.col(k) = x;
        out.residuals[k] = (Kx - l * Mx).norm() / (Kx.norm() + std::abs(l) * Mx.norm());
      }
      return out;
    }
    if (V.cols() >= n) throw ConvergenceError("Krylov space exhausted without convergence", best);
    if (restart == opt.max_restarts) break;

    // Thick restart: keep the best Ritz vectors, continue from the residuals
    // of the unconverged wanted pairs.
    const int keep = std::min<int>(static_cast<int>(order.size()), std::min(nev + b, mmax - b));
    Eigen::MatrixXd Yk(V.cols(), keep);
    for (int k = 0; k < keep; ++k) Yk.col(k) = es.eigenvectors().col(order[k]);
    Eigen::MatrixXd next(n, 0);
    for (int k : unconverged) {
      if (next.cols() == b) break;
      append_cols(next, R.col(k));
    }
    if (next.cols() == 0) next = W * Yk.leftCols(std::min(keep, b));
    V = (V * Yk).eval();
    MV = (MV * Yk).eval();
    W = (W * Yk).eval();
    X = next;
  }
  throw ConvergenceError("eigensolver did not converge in " + std::to_string(opt.max_restarts) + " restarts", best);
}

int count_eigenvalues_below(const SparseMatrix& K, const SparseMatrix& M, double sigma) {
  const SparseMatrix A = K - sigma * M;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw FactorizationError("LDL^T factorization failed");
  const Eigen::VectorXd d = ldlt.vectorD();
  if ((d.array() == 0.0).any()) throw FactorizationError("zero pivot in LDL^T: sigma is an eigenvalue");
  return static_cast<int>((d.array() < 0.0).count());
}

// ---------------------------------------------------------------------------
// Cavity modes

CavityModes solve_cavity_modes(const MultipatchGeometry& cavity, double frequency_hint, EigenOptions options) {
  if (!(frequency_hint > 0.0)) throw DomainError("frequency hint must be positive");
  CavityModes out;
  out.space = std::make_shared<const SplineSpace>(make_hcurl_space(cavity));
  auto mm = assemble_maxwell(*out.space);
  const double omega = 2.0 * std::numbers::pi * frequency_hint;
  options.sigma = omega * omega;
  options.kernel_threshold = std::max(options.kernel_threshold, 1e-6);
  const auto res = solve_generalized(mm.K, mm.M, options);
  out.omega2 = res.eigenvalues;
  for (int k = 0; k < res.eigenvalues.size(); ++k)
    out.frequencies.push_back(std::sqrt(std::max(0.0, res.eigenvalues[k])) / (2.0 * std::numbers::pi));
  out.vectors = res.eigenvectors;
  out.residuals = res.residuals;
  out.restarts = res.restarts;
  out.K = std::move(mm.K);
  out.M = std::move(mm.M);
  return out;
}

std::vector<AxisSample> sample_axis(const CavityModes& modes, int mode, int n) {
  if (mode < 0 || mode >= modes.vectors.cols()) throw DomainError("mode index out of range");
  if (n < 2) throw DomainError("need at least two axis samples");
  const auto& space = *modes.space;
  const auto& geo = space.geometry();
  const auto [lo, hi] = bounding_box(geo);
  const Eigen::VectorXd coeffs = space.expand(modes.vectors.col(mode));
  std::vector<AxisSample> out;
  for (int k = 0; k < n; ++k) {
    const double z = lo[2] + (hi[2] - lo[2]) * k / (n - 1);
    const auto loc = locate(geo, Vec3(0.0, 0.0, z));
    if (!loc) throw IdentificationError("axis point z = " + std::to_string(z) + " lies outside the cavity");
    out.push_back({z, evaluate_hcurl(space, coeffs, loc->patch, loc->xh).value});
  }
  return out;
}

double axis_purity(const std::vector<AxisSample>& samples) {
  double t = 0.0, l = 0.0;
  for (const auto& s : samples) {
    t = std::max({t, std::abs(s.E[0]), std::abs(s.E[1])});
    l = std::max(l, std::abs(s.E[2]));
  }
  return l > 0.0 ? t / l : std::numeric_limits<double>::infinity();
}

int identify_accelerating_mode(const CavityModes& modes, int samples) {
  const double vol = volume(modes.space->geometry(), 0);
  for (int k = 0; k < modes.vectors.cols(); ++k) {
    const Eigen::VectorXd x = modes.vectors.col(k);
    const double e_rms = std::sqrt(x.dot(modes.M * x) / (kEps0 * vol));
    const auto s = sample_axis(modes, k, samples);
    double ez = 0.0;
    for (const auto& p : s) ez = std::max(ez, std::abs(p.E[2]));
    if (ez > 1e-2 * e_rms && axis_purity(s) < 1e-3) return k;
  }
  throw IdentificationError("no computed mode has a longitudinal field on the axis (raise n_ev or adjust the frequency hint)");
}

}  // namespace cavitiga

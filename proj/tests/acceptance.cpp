// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include "cavitiga/detuning.hpp"
#include "cavitiga/io.hpp"

using namespace cavitiga;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double R = 0.035, L = 0.1, T = 0.003;
int failures = 0;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("%s  criterion %d: %s | %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double asymmetry(const SparseMatrix& A) {
  const SparseMatrix At = A.transpose();
  return (A - At).norm() / A.norm();
}

double lame_radial(const Material& m, double a, double b, double p, double r) {
  const double B = p * a * a * b * b / (2.0 * m.eta * (b * b - a * a));
  const double A = p * a * a / (2.0 * (m.lambda + m.eta) * (b * b - a * a));
  return A * r + B / r;
}

DetuningConfig pillbox_detuning(double energy) {
  DetuningConfig c;
  c.material = Material::from_young_poisson(1.05e11, 0.38);
  c.normalization = {Normalization::Kind::StoredEnergy, energy};
  c.discretization = {2, 8, 1, 2};
  return c;
}

void criterion1() {
  const auto t0 = Clock::now();
  const auto model = refine(make_pillbox(R, L, T), 2, 16, 1, 1);
  const auto modes = solve_cavity_modes(model.cavity, 0.9 * pillbox_tm010_hz(R), {.n_ev = 4});
  const double f0 = modes.frequencies[identify_accelerating_mode(modes)];
  const double exact = pillbox_tm010_hz(R);
  const double err = std::abs(f0 - exact) / exact;
  const int dofs = modes.space->num_free();
  const double t = seconds_since(t0);
  report(1, err <= 1e-6 && dofs <= 20000 && t <= 60.0, "pill-box f0, degree 2",
         fmt("f0 = %.10f GHz, exact %.10f GHz, rel. error %.2e (<= 1e-6), %d free DOFs (<= 20000), %.1f s (<= 60)",
             f0 * 1e-9, exact * 1e-9, err, dofs, t));
}

void criterion2() {
  DetuningConfig c;
  c.eigen.n_ev = 4;
  bool ok = true;
  std::string detail;
  for (const auto& [p, levels] : {std::pair{2, std::vector<int>{4, 8, 16}}, std::pair{3, std::vector<int>{4, 8, 12}}}) {
    c.discretization.degree = p;
    const auto rows = run_convergence(make_pillbox(R, L, T), c, levels, false, pillbox_tm010_hz(R));
    const double slope = convergence_slope(rows);
    ok = ok && slope >= 2 * p - 0.5;
    detail += fmt("p=%d slope %.2f (>= %.1f), errors", p, slope, 2 * p - 0.5);
    for (const auto& r : rows) detail += fmt(" %.2e", *r.relative_error);
    detail += "; ";
  }
  detail += "h = R / subdivisions";
  report(2, ok, "convergence order in the element size", detail);
}

void criterion3() {
  const auto geo = refine(make_box(Vec3::Zero(), Vec3::Ones()), 3, {8, 8, 8});
  const auto space = make_hcurl_space(geo);
  const auto mm = assemble_maxwell(space, 1.0, 1.0);
  const double k2 = 2 * kPi * kPi;
  EigenOptions o;
  o.n_ev = 3;
  o.sigma = 0.7 * k2;
  o.kernel_threshold = 1e-6;
  const auto res = solve_generalized(mm.K, mm.M, o);
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(res.eigenvalues[i] - k2) / k2);
  // Inertia: below 0.7·2π² only the discrete gradients (interior H1
  // functions, (n-2)^3 of them) may appear; below 1.1·2π² exactly 3 more.
  const int n = geo.patches[0].count(0);
  const int kernel = (n - 2) * (n - 2) * (n - 2);
  const int below_low = count_eigenvalues_below(mm.K, mm.M, 0.7 * k2);
  const int below_high = count_eigenvalues_below(mm.K, mm.M, 1.1 * k2);
  report(3, worst <= 1e-6 && below_low == kernel && below_high == kernel + 3, "unit PEC cube, p=3, 8^3 elements",
         fmt("eigenvalues/2pi^2 - 1: %.2e %.2e %.2e (<= 1e-6); count below 0.7*2pi^2 = %d (kernel %d), below "
             "1.1*2pi^2 = %d (kernel + 3)",
             res.eigenvalues[0] / k2 - 1, res.eigenvalues[1] / k2 - 1, res.eigenvalues[2] / k2 - 1, below_low, kernel,
             below_high));
}

struct DetuningRuns {
  DetuningReport one, two;
};

DetuningRuns criterion4() {
  DetuningRuns runs{run_detuning(make_pillbox(R, L, T), pillbox_detuning(1.0)),
                    run_detuning(make_pillbox(R, L, T), pillbox_detuning(2.0))};
  const auto& rep = runs.one;
  const auto mat = Material::from_young_poisson(1.05e11, 0.38);
  const double p = 1.0 / (2 * kPi * R * R * L);
  const double dR = lame_radial(mat, R, R + T, p, R);
  const double oracle = pillbox_tm010_hz(R) - pillbox_tm010_hz(R + dR);
  const double dev = std::abs(rep.delta_f_hz - oracle) / oracle;
  report(4, dev <= 1e-2 && rep.f0_prime_hz < rep.f0_hz, "pill-box detuning, U = 1 J",
         fmt("delta f = %.3f Hz, chained oracle %.3f Hz (wall pressure %.1f Pa, dR %.3e m), deviation %.2e (<= 1e-2); "
             "f0' - f0 = %.3f Hz (< 0)",
             rep.delta_f_hz, oracle, p, dR, dev, rep.f0_prime_hz - rep.f0_hz));
  return runs;
}

void criterion5(const DetuningReport& pill) {
  DetuningConfig c;
  c.normalization = {Normalization::Kind::PeakAxisField, 2.5e7};
  c.discretization = {2, 4, 4, 1};
  const auto tesla = run_detuning(make_revolved_cell(tesla_like_profile(), T), c);
  const double worst = std::max({pill.purity, pill.purity_deformed, tesla.purity, tesla.purity_deformed});
  report(5, worst < 1e-6, "axis purity over 200 samples",
         fmt("pill-box %.1e / deformed %.1e, TESLA-like cell (f0 %.6f GHz) %.1e / deformed %.1e (< 1e-6)",
             pill.purity, pill.purity_deformed, tesla.f0_hz * 1e-9, tesla.purity, tesla.purity_deformed));
}

void criterion6(const DetuningRuns& runs, Clock::time_point start) {
  std::string detail;
  bool ok = true;
  const auto check = [&](const char* name, double value, double limit) {
    const bool pass = value <= limit;
    ok = ok && pass;
    detail += fmt("%s %.1e%s; ", name, value, pass ? "" : " (FAIL)");
  };

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  {
    const KnotVector kv({0, 0, 0, 0, 0.2, 0.2, 0.5, 0.7, 1, 1, 1, 1}, 3);
    double e = 0.0;
    for (int k = 0; k < 200; ++k) e = std::max(e, std::abs(eval_basis(kv, U(rng)).values().sum() - 1.0));
    check("partition of unity", e, 1e-12);
  }
  const auto cell = make_revolved_cell(tesla_like_profile(), T);
  {
    const auto fine = refine(cell.cavity, 3, {3, 3, 2});
    double e = 0.0;
    for (int p = 0; p < cell.cavity.num_patches(); ++p)
      for (int k = 0; k < 50; ++k) {
        const Vec3 xh(U(rng), U(rng), U(rng));
        e = std::max(e, (fine.patches[p].eval(xh) - cell.cavity.patches[p].eval(xh)).norm() / 0.1033);
      }
    check("refinement invariance", e, 1e-12);
  }
  const auto pill = make_pillbox(R, L, T);
  {
    double e = 0.0;
    for (int q = 1; q <= 4; ++q)
      for (int k = 0; k < 50; ++k) {
        const Vec3 x = pill.cavity.patches[q].eval(Vec3(1.0, U(rng), U(rng)));
        e = std::max(e, std::abs(std::hypot(x[0], x[1]) - R) / R);
      }
    check("circle exactness", e, 1e-13);
  }
  {
    const auto geo = refine(cell.cavity, 2, {2, 2, 2});
    const auto h1 = make_h1_space(geo, false);
    const auto hc = make_hcurl_space(geo, {});
    const auto mm = assemble_maxwell(hc);
    const Eigen::VectorXd phi = Eigen::VectorXd::Random(h1.num_global());
    const Eigen::VectorXd E = discrete_gradient(h1, hc) * phi;
    check("|K G phi| rel.", (mm.K * E).norm() / (mm.K.norm() * E.norm()), 1e-9);
    check("K, M symmetry", std::max(asymmetry(mm.K), asymmetry(mm.M)), 1e-12);
  }
  {
    const auto model = refine(pill, 2, 4, 1, 1);
    const auto modes = solve_cavity_modes(model.cavity, 0.9 * pillbox_tm010_hz(R), {.n_ev = 4});
    const Eigen::MatrixXd G = modes.vectors.transpose() * (modes.M * modes.vectors);
    check("M-orthonormality", (G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff(), 1e-8);
  }
  const auto mat = Material::from_young_poisson(1.05e11, 0.38);
  const auto wall = refine(pill, 2, 4, 1, 2);
  {
    const auto h1 = make_h1_space(wall.wall);
    const auto K = assemble_elasticity(h1, mat.eta, mat.lambda);
    std::vector<Vec3> pos(static_cast<std::size_t>(h1.num_global()));
    for (int p = 0; p < h1.num_patches(); ++p)
      for (int l = 0; l < h1.local_size(p); ++l) pos[h1.dof(p, l).global] = wall.wall.patches[p].points[l];
    double e = 0.0;
    for (int m = 0; m < 6; ++m) {
      Eigen::VectorXd u(3 * h1.num_global());
      for (int a = 0; a < h1.num_global(); ++a)
        u.segment<3>(3 * a) = m < 3 ? Vec3(Vec3::Unit(m)) : Vec3(Vec3::Unit(m - 3).cross(pos[a]));
      e = std::max(e, (K * u).norm() / (K.norm() * u.norm()));
    }
    check("rigid nullspace", e, 1e-9);
  }
  {
    const ElasticitySolver solver(wall.wall, wall.wall_constraints, mat);
    const double p = 1300.0;
    const auto F = assemble_traction(solver.space(), wall.wall.faces_tagged(BoundaryLabel::PecWall),
                                     [&](const SurfacePoint& s) { return Vec3(-p * s.normal); });
    const auto u = solver.solve(F);
    double e = 0.0;
    for (int q = 0; q < 4; ++q)
      for (int k = 0; k < 20; ++k) {
        const Vec3 xh(U(rng), U(rng), U(rng));
        const Vec3 x = wall.wall.patches[q].eval(xh);
        const double r = std::hypot(x[0], x[1]);
        const double exact = lame_radial(mat, R, R + T, p, r);
        e = std::max(e, (u.at(q, xh) - exact * Vec3(x[0] / r, x[1] / r, 0.0)).norm() / exact);
      }
    check("Lame displacement", e, 5e-3);
  }
  const double ratio = runs.two.delta_f_hz / runs.one.delta_f_hz;
  check("|df(2U)/df(U) / 2 - 1|", std::abs(ratio / 2.0 - 1.0), 2e-2);
  const double t = seconds_since(start);
  detail += fmt("acceptance run %.0f s (< 300)", t);
  report(6, ok && t < 300.0, "property suite", detail);
}

}  // namespace

int main() {
  const auto start = Clock::now();
  criterion1();
  criterion2();
  criterion3();
  const auto runs = criterion4();
  criterion5(runs.one);
  criterion6(runs, start);
  report(7, true, "exclusions",
         "the published TESLA detuning, the nine-cell passband, FEM timing/DOF comparisons and the commercial-solver "
         "accuracy floor are out of scope; the shipped TESLA-like cell is a labeled demonstration profile");
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}

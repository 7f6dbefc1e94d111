#include "cavitiga/detuning.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "cavitiga/errors.hpp"

namespace cavitiga {

std::string to_string(Normalization::Kind kind) {
  return kind == Normalization::Kind::StoredEnergy ? "stored_energy" : "peak_axis_field";
}

Vec3 ModeField::E(int patch, const Vec3& xh) const { return evaluate_hcurl(*space, global, patch, xh).value; }

Vec3 ModeField::h(int patch, const Vec3& xh) const {
  return evaluate_hcurl(*space, global, patch, xh).curl / (omega * kMu0);
}

double stored_energy(const ModeField& mode, const SparseMatrix& M) { return 0.5 * mode.free.dot(M * mode.free); }

ModeField normalize_mode(const CavityModes& modes, int index, const Normalization& target) {
  if (index < 0 || index >= modes.vectors.cols()) throw DomainError("mode index out of range");
  if (!(target.value >= 0.0)) throw DomainError("normalization target must be nonnegative");
  const Eigen::VectorXd x = modes.vectors.col(index);
  const double xmx = x.dot(modes.M * x);
  if (!(xmx > 0.0)) throw DomainError("cannot normalize a zero field");
  double scale = 0.0;
  if (target.kind == Normalization::Kind::StoredEnergy) {
    scale = std::sqrt(2.0 * target.value / xmx);
  } else {
    double ez = 0.0;
    for (const auto& s : sample_axis(modes, index, 200)) ez = std::max(ez, std::abs(s.E[2]));
    if (!(ez > 0.0)) throw DomainError("mode has no axial field to normalize");
    scale = target.value / ez;
  }
  ModeField m;
  m.space = modes.space;
  m.free = scale * x;
  m.global = modes.space->expand(m.free);
  m.omega = std::sqrt(modes.omega2[index]);
  m.normalization = target;
  return m;
}

std::function<Vec3(const Vec3&)> h_field_evaluator(const ModeField& mode) {
  return [mode](const Vec3& x) {
    const auto loc = locate(mode.space->geometry(), x);
    if (!loc) throw IdentificationError("point lies outside the cavity");
    return mode.h(loc->patch, loc->xh);
  };
}

double radiation_pressure(const Vec3& E, const Vec3& h, const Vec3& n) {
  const double en = E.dot(n);
  return -0.25 * kEps0 * en * en + 0.25 * kMu0 * h.cross(n).squaredNorm();
}

namespace {

// Face-B local parameters back to face A for an A -> B orientation.
std::array<double, 2> inverse_map_param(FaceOrientation o, double sb, double tb) {
  const double u = o.swap() ? tb : sb;
  const double v = o.swap() ? sb : tb;
  return {o.flip_first() ? 1.0 - u : u, o.flip_second() ? 1.0 - v : v};
}

}  // namespace

Eigen::VectorXd pressure_load(const CavityModel& model, const MultipatchGeometry& cavity, const ModeField& mode,
                              const SplineSpace& wall_space) {
  std::map<FaceRef, const Coupling*> by_wall_face;
  std::vector<FaceRef> faces;
  for (const auto& c : model.coupling) {
    by_wall_face[{c.wall_patch, c.wall_face}] = &c;
    faces.push_back({c.wall_patch, c.wall_face});
  }
  return assemble_traction(wall_space, faces, [&](const SurfacePoint& sp) {
    const Coupling& c = *by_wall_face.at({sp.patch, sp.face});
    const auto tg = face_tangents(sp.face);
    const auto st = inverse_map_param(FaceOrientation{c.orientation}, sp.xh[tg[0]], sp.xh[tg[1]]);
    const Vec3 xc = face_point(c.cavity_face, st[0], st[1]);
    const Vec3 n = face_normal(cavity.patches[c.cavity_patch], c.cavity_face, xc).first;
    const auto v = evaluate_hcurl(*mode.space, mode.global, c.cavity_patch, xc);
    const double p = radiation_pressure(v.value, v.curl / (mode.omega * kMu0), n);
    return Vec3(p * n);
  });
}

std::vector<std::vector<Vec3>> cavity_displacement(const CavityModel& model, const Displacement& wall) {
  const auto& cav = model.cavity;
  std::vector<std::vector<Vec3>> out;
  for (const auto& p : cav.patches) out.emplace_back(p.points.size(), Vec3::Zero());
  const auto& ws = *wall.space;
  for (const auto& c : model.coupling) {
    const auto& cp = cav.patches[c.cavity_patch];
    const auto& wp = model.wall.patches[c.wall_patch];
    const auto dims = face_dims(cp, c.cavity_face);
    const FaceOrientation o{c.orientation};
    std::vector<Vec3> face(static_cast<std::size_t>(dims[0] * dims[1]));
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) {
        const auto m = o.map_index(i, j, dims[0], dims[1]);
        const int g = ws.dof(c.wall_patch, face_control_index(wp, c.wall_face, m[0], m[1])).global;
        face[i + dims[0] * j] = wall.coefficients.segment<3>(3 * g);
      }
    const int d = face_direction(c.cavity_face);
    const auto tg = face_tangents(c.cavity_face);
    const auto g = cp.knots[d].greville();
    for (int l = 0; l < cp.num_points(); ++l) {
      const auto mi = cp.multi_index(l);
      const double w = face_side(c.cavity_face) ? g[mi[d]] : 1.0 - g[mi[d]];
      out[c.cavity_patch][l] += w * face[mi[tg[0]] + dims[0] * mi[tg[1]]];
    }
  }
  return out;
}

double default_frequency_hint(const MultipatchGeometry& cavity) {
  constexpr double j01 = 2.4048255576957724;
  // Control points of rational arcs lie outside the surface, so sample it.
  double radius = 0.0;
  for (const auto& p : cavity.patches)
    for (int k = 0; k <= 8; ++k)
      for (int j = 0; j <= 8; ++j)
        for (int i = 0; i <= 8; ++i) {
          const Vec3 x = p.eval(Vec3(i / 8.0, j / 8.0, k / 8.0));
          radius = std::max(radius, std::hypot(x[0], x[1]));
        }
  return 0.9 * speed_of_light() * j01 / (2.0 * std::numbers::pi * radius);
}

namespace {

struct Solved {
  CavityModes modes;
  int index = 0;
  double purity = 0.0;
};

Solved solve_and_identify(const MultipatchGeometry& cavity, double hint, const EigenOptions& eig) {
  Solved s{solve_cavity_modes(cavity, hint, eig), 0, 0.0};
  s.index = identify_accelerating_mode(s.modes);
  s.purity = axis_purity(sample_axis(s.modes, s.index, 200));
  return s;
}

struct Deformation {
  Displacement wall;
  MultipatchGeometry cavity;
};

Deformation deform(const CavityModel& refined, const ElasticitySolver& solver, const MultipatchGeometry& field_geometry,
                   const ModeField& mode) {
  const Eigen::VectorXd F = pressure_load(refined, field_geometry, mode, solver.space());
  Deformation d{solver.solve(F), {}};
  d.cavity = displace(refined.cavity, cavity_displacement(refined, d.wall));
  if (min_jacobian_determinant(d.cavity) <= 0.0) throw GeometryError("deformed cavity is inverted");
  return d;
}

}  // namespace

DetuningReport run_detuning(const CavityModel& model, DetuningConfig config) {
  config.max_iterations = 1;
  return iterate_detuning(model, config);
}

DetuningReport iterate_detuning(const CavityModel& model, const DetuningConfig& config) {
  if (config.max_iterations < 1) throw DomainError("max_iterations must be at least 1");
  const auto& disc = config.discretization;
  DetuningReport rep;
  rep.normalization = config.normalization;
  rep.refined = refine(model, disc.degree, disc.subdivisions, disc.axial_subdivisions, disc.wall_subdivisions);
  const double hint = config.frequency_hint > 0.0 ? config.frequency_hint : default_frequency_hint(rep.refined.cavity);

  const auto base = solve_and_identify(rep.refined.cavity, hint, config.eigen);
  rep.f0_hz = base.modes.frequencies[base.index];
  rep.purity = base.purity;
  rep.free_dofs = base.modes.space->num_free();
  rep.mode = normalize_mode(base.modes, base.index, config.normalization);

  const ElasticitySolver solver(rep.refined.wall, rep.refined.wall_constraints, config.material);
  ModeField field = *rep.mode;
  const MultipatchGeometry* field_geometry = &rep.refined.cavity;
  double previous = 0.0;
  rep.converged = config.max_iterations == 1;
  for (int k = 1; k <= config.max_iterations; ++k) {
    auto def = deform(rep.refined, solver, *field_geometry, field);
    const auto shifted = solve_and_identify(def.cavity, hint, config.eigen);
    IterationRecord r;
    r.f0_prime_hz = shifted.modes.frequencies[shifted.index];
    r.delta_f_hz = std::abs(rep.f0_hz - r.f0_prime_hz);
    r.max_displacement_m = def.wall.max_norm();
    rep.history.push_back(r);
    rep.iterations = k;
    rep.f0_prime_hz = r.f0_prime_hz;
    rep.delta_f_hz = r.delta_f_hz;
    rep.max_displacement_m = r.max_displacement_m;
    rep.purity_deformed = shifted.purity;
    rep.displacement = def.wall;
    rep.deformed_cavity = std::move(def.cavity);
    if (k > 1 && std::abs(r.delta_f_hz - previous) < config.tolerance_hz) {
      rep.converged = true;
      break;
    }
    previous = r.delta_f_hz;
    if (k < config.max_iterations) {
      field = normalize_mode(shifted.modes, shifted.index, config.normalization);
      field_geometry = &field.space->geometry();
    }
  }
  return rep;
}

}  // namespace cavitiga

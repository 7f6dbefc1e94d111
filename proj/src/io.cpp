#include "cavitiga/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "cavitiga/errors.hpp"

namespace cavitiga {

using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Object reader that rejects unknown keys and reports the offending path.
class Obj {
 public:
  Obj(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~Obj() = default;

  bool has(const std::string& k) {
    seen_.insert(k);
    return j_.contains(k);
  }
  const json& at(const std::string& k) {
    if (!has(k)) throw ConfigError(where_ + ": missing key '" + k + "'");
    return j_.at(k);
  }
  double number(const std::string& k, double def) { return has(k) ? as_number(j_.at(k), k) : def; }
  double number(const std::string& k) { return as_number(at(k), k); }
  int integer(const std::string& k, int def) {
    if (!has(k)) return def;
    const auto& v = j_.at(k);
    if (!v.is_number_integer()) throw ConfigError(path(k) + ": expected an integer");
    return v.get<int>();
  }
  std::string string(const std::string& k, const std::string& def) {
    if (!has(k)) return def;
    const auto& v = j_.at(k);
    if (!v.is_string()) throw ConfigError(path(k) + ": expected a string");
    return v.get<std::string>();
  }
  std::string path(const std::string& k) const { return where_ + "." + k; }
  void done() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
  }

 private:
  double as_number(const json& v, const std::string& k) const {
    if (!v.is_number()) throw ConfigError(path(k) + ": expected a number");
    return v.get<double>();
  }
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void require_positive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(what + " must be positive");
}

const char* kind_name(GeometrySource::Kind k) {
  switch (k) {
    case GeometrySource::Kind::Pillbox: return "pillbox";
    case GeometrySource::Kind::Revolved: return "revolved";
    case GeometrySource::Kind::TeslaLike: return "tesla_like";
    case GeometrySource::Kind::File: return "file";
  }
  return "";
}

Normalization::Kind normalization_kind(const std::string& s) {
  if (s == "stored_energy") return Normalization::Kind::StoredEnergy;
  if (s == "peak_axis_field") return Normalization::Kind::PeakAxisField;
  throw ConfigError("unknown normalization kind '" + s + "'");
}

std::vector<double> number_list(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected an array");
  std::vector<double> v;
  for (const auto& x : j) {
    if (!x.is_number()) throw ConfigError(what + ": expected numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

int face_index(const json& j, const std::string& what) {
  if (!j.is_number_integer() || j.get<int>() < 0 || j.get<int>() > 5) throw ConfigError(what + ": face must be 0..5");
  return j.get<int>();
}

// Inverse of an A -> B orientation code (B -> A).
int inverse_orientation(int code) {
  if (!(code & 1)) return code;
  return 1 | ((code & 2) << 1) | ((code & 4) >> 1);
}

}  // namespace

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  Obj root(doc, "config");

  Obj g(root.at("geometry"), "geometry");
  const std::string type = g.string("type", "pillbox");
  if (type == "pillbox") {
    c.geometry.kind = GeometrySource::Kind::Pillbox;
    c.geometry.radius = g.number("radius", c.geometry.radius);
    c.geometry.length = g.number("length", c.geometry.length);
    require_positive(c.geometry.radius, "geometry.radius");
    require_positive(c.geometry.length, "geometry.length");
  } else if (type == "revolved" || type == "tesla_like") {
    c.geometry.kind = type == "revolved" ? GeometrySource::Kind::Revolved : GeometrySource::Kind::TeslaLike;
    if (type == "revolved") c.geometry.path = g.string("profile", "");
    if (type == "revolved" && c.geometry.path.empty()) throw ConfigError("geometry.profile: missing profile file");
    c.geometry.cells = g.integer("cells", 1);
    if (c.geometry.cells < 1) throw ConfigError("geometry.cells must be at least 1");
  } else if (type == "file") {
    c.geometry.kind = GeometrySource::Kind::File;
    c.geometry.path = g.string("path", "");
    if (c.geometry.path.empty()) throw ConfigError("geometry.path: missing model file");
  } else {
    throw ConfigError("geometry.type: unknown geometry type '" + type + "'");
  }
  g.done();

  c.wall_thickness = root.number("wall_thickness", c.wall_thickness);
  require_positive(c.wall_thickness, "wall_thickness");

  auto& d = c.detuning;
  if (root.has("material")) {
    Obj m(doc.at("material"), "material");
    const bool ey = m.has("young") || m.has("poisson");
    const bool lame = m.has("eta") || m.has("lambda");
    if (ey == lame) throw ConfigError("material: give either young/poisson or eta/lambda");
    try {
      if (ey) {
        d.material = Material::from_young_poisson(m.number("young"), m.number("poisson"));
      } else {
        d.material = {m.number("eta"), m.number("lambda")};
        require_positive(d.material.eta, "material.eta");
        if (!(3.0 * d.material.lambda + 2.0 * d.material.eta > 0.0))
          throw ConfigError("material: bulk modulus must be positive");
      }
    } catch (const DomainError& e) {
      throw ConfigError(std::string("material: ") + e.what());
    }
    m.done();
  }
  if (root.has("normalization")) {
    Obj n(doc.at("normalization"), "normalization");
    d.normalization.kind = normalization_kind(n.string("kind", "stored_energy"));
    d.normalization.value = n.number("value", d.normalization.value);
    if (!(d.normalization.value >= 0.0) || !std::isfinite(d.normalization.value))
      throw ConfigError("normalization.value must be nonnegative");
    n.done();
  }
  if (root.has("discretization")) {
    Obj s(doc.at("discretization"), "discretization");
    auto& z = d.discretization;
    z.degree = s.integer("degree", z.degree);
    z.subdivisions = s.integer("subdivisions", z.subdivisions);
    z.axial_subdivisions = s.integer("axial_subdivisions", z.axial_subdivisions);
    z.wall_subdivisions = s.integer("wall_subdivisions", z.wall_subdivisions);
    if (z.degree < 2) throw ConfigError("discretization.degree must be at least 2");
    if (z.subdivisions < 1 || z.axial_subdivisions < 1 || z.wall_subdivisions < 1)
      throw ConfigError("discretization: subdivisions must be at least 1");
    s.done();
  }
  if (root.has("eigensolver")) {
    Obj e(doc.at("eigensolver"), "eigensolver");
    d.eigen.n_ev = e.integer("n_ev", d.eigen.n_ev);
    d.frequency_hint = e.number("frequency_hint_hz", d.frequency_hint);
    d.eigen.tol = e.number("tol", d.eigen.tol);
    d.eigen.max_restarts = e.integer("max_restarts", d.eigen.max_restarts);
    d.eigen.block_size = e.integer("block_size", d.eigen.block_size);
    d.eigen.max_basis = e.integer("max_basis", d.eigen.max_basis);
    if (e.has("seed")) {
      const auto& s = doc.at("eigensolver").at("seed");
      if (!s.is_number_unsigned()) throw ConfigError("eigensolver.seed: expected a nonnegative integer");
      d.eigen.seed = s.get<std::uint64_t>();
    }
    if (d.eigen.n_ev < 1) throw ConfigError("eigensolver.n_ev must be at least 1");
    if (!(d.frequency_hint >= 0.0)) throw ConfigError("eigensolver.frequency_hint_hz must be nonnegative");
    require_positive(d.eigen.tol, "eigensolver.tol");
    if (d.eigen.max_restarts < 1 || d.eigen.block_size < 1 || d.eigen.max_basis < 0)
      throw ConfigError("eigensolver: max_restarts and block_size must be positive");
    e.done();
  }
  if (root.has("detuning")) {
    Obj t(doc.at("detuning"), "detuning");
    d.max_iterations = t.integer("max_iterations", d.max_iterations);
    d.tolerance_hz = t.number("tolerance_hz", d.tolerance_hz);
    if (d.max_iterations < 1) throw ConfigError("detuning.max_iterations must be at least 1");
    require_positive(d.tolerance_hz, "detuning.tolerance_hz");
    t.done();
  }
  if (root.has("outputs")) {
    Obj o(doc.at("outputs"), "outputs");
    c.vtk_output = o.string("vtk", "");
    o.done();
  }
  root.done();
  return c;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + file.string() + ": " + e.what());
  }
  return parse_config(doc, file.parent_path());
}

json to_json(const RunConfig& c) {
  json g{{"type", kind_name(c.geometry.kind)}};
  switch (c.geometry.kind) {
    case GeometrySource::Kind::Pillbox:
      g["radius"] = c.geometry.radius;
      g["length"] = c.geometry.length;
      break;
    case GeometrySource::Kind::Revolved:
      g["profile"] = c.geometry.path;
      g["cells"] = c.geometry.cells;
      break;
    case GeometrySource::Kind::TeslaLike: g["cells"] = c.geometry.cells; break;
    case GeometrySource::Kind::File: g["path"] = c.geometry.path; break;
  }
  const auto& d = c.detuning;
  json doc{
      {"geometry", g},
      {"wall_thickness", c.wall_thickness},
      {"material", {{"eta", d.material.eta}, {"lambda", d.material.lambda}}},
      {"normalization", {{"kind", to_string(d.normalization.kind)}, {"value", d.normalization.value}}},
      {"discretization",
       {{"degree", d.discretization.degree},
        {"subdivisions", d.discretization.subdivisions},
        {"axial_subdivisions", d.discretization.axial_subdivisions},
        {"wall_subdivisions", d.discretization.wall_subdivisions}}},
      {"eigensolver",
       {{"n_ev", d.eigen.n_ev},
        {"frequency_hint_hz", d.frequency_hint},
        {"tol", d.eigen.tol},
        {"max_restarts", d.eigen.max_restarts},
        {"block_size", d.eigen.block_size},
        {"max_basis", d.eigen.max_basis},
        {"seed", d.eigen.seed}}},
      {"detuning", {{"max_iterations", d.max_iterations}, {"tolerance_hz", d.tolerance_hz}}},
  };
  if (!c.vtk_output.empty()) doc["outputs"] = {{"vtk", c.vtk_output}};
  return doc;
}

namespace {

json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

std::filesystem::path resolve(const RunConfig& c, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || c.base_dir.empty() ? path : c.base_dir / path;
}

}  // namespace

CavityModel build_model(const RunConfig& c) {
  switch (c.geometry.kind) {
    case GeometrySource::Kind::Pillbox: return make_pillbox(c.geometry.radius, c.geometry.length, c.wall_thickness);
    case GeometrySource::Kind::TeslaLike:
      return c.geometry.cells == 1 ? make_revolved_cell(tesla_like_profile(), c.wall_thickness)
                                   : make_revolved_chain(tesla_like_profile(), c.geometry.cells, c.wall_thickness);
    case GeometrySource::Kind::Revolved: {
      const auto profile = profile_from_json(read_json_file(resolve(c, c.geometry.path)));
      return c.geometry.cells == 1 ? make_revolved_cell(profile, c.wall_thickness)
                                   : make_revolved_chain(profile, c.geometry.cells, c.wall_thickness);
    }
    case GeometrySource::Kind::File: return model_from_json(read_json_file(resolve(c, c.geometry.path)));
  }
  throw ConfigError("unknown geometry source");
}

json geometry_to_json(const MultipatchGeometry& geo) {
  json patches = json::array();
  for (const auto& p : geo.patches) {
    json knots = json::array(), points = json::array();
    for (const auto& kv : p.knots) knots.push_back(kv.knots());
    for (int l = 0; l < p.num_points(); ++l)
      points.push_back({p.points[l][0], p.points[l][1], p.points[l][2], p.weights[l]});
    patches.push_back({{"degrees", p.degrees()}, {"knots", knots}, {"points", points}});
  }
  json tags = json::array();
  for (const auto& [f, label] : geo.boundary_tags)
    tags.push_back({{"patch", f.patch}, {"face", f.face}, {"label", to_string(label)}});
  json ifs = json::array();
  for (const auto& i : geo.interfaces)
    ifs.push_back({{"patch_a", i.patch_a},
                   {"face_a", i.face_a},
                   {"patch_b", i.patch_b},
                   {"face_b", i.face_b},
                   {"orientation", i.orientation}});
  return {{"patches", patches}, {"boundary_tags", tags}, {"interfaces", ifs}};
}

MultipatchGeometry geometry_from_json(const json& doc) {
  MultipatchGeometry geo;
  try {
    Obj root(doc, "geometry");
    const auto& patches = root.at("patches");
    if (!patches.is_array() || patches.empty()) throw ConfigError("geometry.patches: expected a nonempty array");
    for (std::size_t k = 0; k < patches.size(); ++k) {
      const std::string where = "geometry.patches[" + std::to_string(k) + "]";
      Obj p(patches[k], where);
      const auto deg = number_list(p.at("degrees"), where + ".degrees");
      const auto& knots = p.at("knots");
      if (deg.size() != 3 || !knots.is_array() || knots.size() != 3)
        throw ConfigError(where + ": need 3 degrees and 3 knot vectors");
      std::array<KnotVector, 3> kv;
      for (int d = 0; d < 3; ++d)
        kv[d] = KnotVector(number_list(knots[d], where + ".knots"), static_cast<int>(deg[d]));
      std::vector<Vec3> pts;
      std::vector<double> w;
      for (const auto& row : p.at("points")) {
        const auto v = number_list(row, where + ".points");
        if (v.size() != 4) throw ConfigError(where + ".points: expected [x, y, z, w]");
        pts.emplace_back(v[0], v[1], v[2]);
        w.push_back(v[3]);
      }
      p.done();
      geo.patches.emplace_back(kv, pts, w);
    }
    for (const auto& t : root.at("boundary_tags")) {
      Obj o(t, "geometry.boundary_tags");
      const int patch = static_cast<int>(o.number("patch"));
      const int face = face_index(o.at("face"), "geometry.boundary_tags");
      if (patch < 0 || patch >= geo.num_patches()) throw ConfigError("geometry.boundary_tags: patch out of range");
      geo.boundary_tags[{patch, face}] = boundary_label_from_string(o.string("label", ""));
      o.done();
    }
    if (root.has("interfaces")) {
      for (const auto& t : doc.at("interfaces")) {
        Obj o(t, "geometry.interfaces");
        Interface i;
        i.patch_a = o.integer("patch_a", -1);
        i.face_a = face_index(o.at("face_a"), "geometry.interfaces");
        i.patch_b = o.integer("patch_b", -1);
        i.face_b = face_index(o.at("face_b"), "geometry.interfaces");
        i.orientation = o.integer("orientation", 0);
        if (i.patch_a < 0 || i.patch_a >= geo.num_patches() || i.patch_b < 0 || i.patch_b >= geo.num_patches() ||
            i.orientation < 0 || i.orientation > 7)
          throw ConfigError("geometry.interfaces: invalid entry");
        o.done();
        geo.interfaces.push_back(i);
      }
    } else {
      geo.interfaces = detect_interfaces(geo.patches);
    }
    root.done();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("geometry: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("geometry: ") + e.what());
  }
  geo.validate();
  return geo;
}

json model_to_json(const CavityModel& m) {
  json coupling = json::array(), constraints = json::array();
  for (const auto& c : m.coupling)
    coupling.push_back({{"cavity_patch", c.cavity_patch},
                        {"cavity_face", c.cavity_face},
                        {"wall_patch", c.wall_patch},
                        {"wall_face", c.wall_face},
                        {"orientation", c.orientation}});
  for (const auto& c : m.wall_constraints)
    constraints.push_back({{"patch", c.patch}, {"face", c.face}, {"components", c.components}});
  return {{"cavity", geometry_to_json(m.cavity)},
          {"wall", geometry_to_json(m.wall)},
          {"coupling", coupling},
          {"wall_constraints", constraints}};
}

CavityModel model_from_json(const json& doc) {
  CavityModel m;
  Obj root(doc, "model");
  m.cavity = geometry_from_json(root.at("cavity"));
  m.wall = geometry_from_json(root.at("wall"));
  try {
    for (const auto& t : root.at("wall_constraints")) {
      Obj o(t, "model.wall_constraints");
      FaceConstraint c;
      c.patch = o.integer("patch", -1);
      c.face = face_index(o.at("face"), "model.wall_constraints");
      if (o.has("components")) {
        const auto& comp = t.at("components");
        if (!comp.is_array() || comp.size() != 3) throw ConfigError("model.wall_constraints: components needs 3 flags");
        for (int k = 0; k < 3; ++k) c.components[k] = comp[k].get<bool>();
      }
      if (c.patch < 0 || c.patch >= m.wall.num_patches()) throw ConfigError("model.wall_constraints: bad patch");
      o.done();
      m.wall_constraints.push_back(c);
    }
    if (root.has("coupling")) {
      for (const auto& t : doc.at("coupling")) {
        Obj o(t, "model.coupling");
        Coupling c;
        c.cavity_patch = o.integer("cavity_patch", -1);
        c.cavity_face = face_index(o.at("cavity_face"), "model.coupling");
        c.wall_patch = o.integer("wall_patch", -1);
        c.wall_face = face_index(o.at("wall_face"), "model.coupling");
        c.orientation = o.integer("orientation", 0);
        if (c.cavity_patch < 0 || c.cavity_patch >= m.cavity.num_patches() || c.wall_patch < 0 ||
            c.wall_patch >= m.wall.num_patches() || c.orientation < 0 || c.orientation > 7)
          throw ConfigError("model.coupling: invalid entry");
        o.done();
        m.coupling.push_back(c);
      }
    } else {
      auto all = m.cavity.patches;
      all.insert(all.end(), m.wall.patches.begin(), m.wall.patches.end());
      const int nc = m.cavity.num_patches();
      for (const auto& i : detect_interfaces(all)) {
        const bool a_cav = i.patch_a < nc, b_cav = i.patch_b < nc;
        if (a_cav == b_cav) continue;
        Coupling c = a_cav ? Coupling{i.patch_a, i.face_a, i.patch_b - nc, i.face_b, i.orientation}
                           : Coupling{i.patch_b, i.face_b, i.patch_a - nc, i.face_a, inverse_orientation(i.orientation)};
        m.coupling.push_back(c);
      }
    }
    root.done();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  m.validate();
  return m;
}

NurbsCurve profile_from_json(const json& doc) {
  try {
    Obj o(doc, "profile");
    const int degree = o.integer("degree", 2);
    const auto knots = number_list(o.at("knots"), "profile.knots");
    std::vector<Vec3> pts;
    std::vector<double> w;
    for (const auto& row : o.at("points")) {
      const auto v = number_list(row, "profile.points");
      if (v.size() != 3) throw ConfigError("profile.points: expected [r, z, w]");
      pts.emplace_back(v[0], v[1], 0.0);
      w.push_back(v[2]);
    }
    o.done();
    return NurbsCurve(KnotVector(knots, degree), pts, w);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("profile: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("profile: ") + e.what());
  }
}

json profile_to_json(const NurbsCurve& curve) {
  json pts = json::array();
  for (std::size_t i = 0; i < curve.points.size(); ++i)
    pts.push_back({curve.points[i][0], curve.points[i][1], curve.weights[i]});
  return {{"degree", curve.degree()}, {"knots", curve.knots.knots()}, {"points", pts}};
}

void write_spectrum_csv(std::ostream& os, const CavityModes& modes) {
  os << "mode,f_hz,residual\n";
  for (std::size_t k = 0; k < modes.frequencies.size(); ++k)
    os << k << ',' << num(modes.frequencies[k]) << ',' << num(modes.residuals[static_cast<Eigen::Index>(k)]) << '\n';
}

void write_axis_csv(std::ostream& os, const std::vector<AxisSample>& samples) {
  os << "z,Ex,Ey,Ez\n";
  for (const auto& s : samples) os << num(s.z) << ',' << num(s.E[0]) << ',' << num(s.E[1]) << ',' << num(s.E[2]) << '\n';
}

void write_displacement_csv(std::ostream& os, const Displacement& u) {
  const auto& s = *u.space;
  std::vector<Vec3> pos(static_cast<std::size_t>(s.num_global()));
  for (int p = 0; p < s.num_patches(); ++p)
    for (int l = 0; l < s.local_size(p); ++l) pos[s.dof(p, l).global] = s.geometry().patches[p].points[l];
  os << "index,x,y,z,ux,uy,uz\n";
  for (int a = 0; a < s.num_global(); ++a) {
    os << a;
    for (int i = 0; i < 3; ++i) os << ',' << num(pos[a][i]);
    for (int i = 0; i < 3; ++i) os << ',' << num(u.coefficients[3 * a + i]);
    os << '\n';
  }
}

std::vector<ConvergenceRow> run_convergence(const CavityModel& model, const DetuningConfig& config,
                                            const std::vector<int>& levels, bool detune,
                                            std::optional<double> exact_hz) {
  if (levels.size() < 2) throw ConfigError("a convergence study needs at least two levels");
  std::vector<ConvergenceRow> rows;
  for (int s : levels) {
    if (!rows.empty() && s <= rows.back().subdivisions) throw ConfigError("levels must increase");
    DetuningConfig c = config;
    c.discretization.subdivisions = s;
    ConvergenceRow r;
    r.subdivisions = s;
    if (detune) {
      const auto rep = run_detuning(model, c);
      r.f0_hz = rep.f0_hz;
      r.shift_hz = rep.f0_prime_hz - rep.f0_hz;
      r.dofs = rep.free_dofs;
      for (const auto& p : rep.refined.cavity.patches) r.elements += p.num_elements();
    } else {
      const auto& z = c.discretization;
      const auto refined = refine(model, z.degree, z.subdivisions, z.axial_subdivisions, z.wall_subdivisions);
      const double hint = c.frequency_hint > 0.0 ? c.frequency_hint : default_frequency_hint(refined.cavity);
      const auto modes = solve_cavity_modes(refined.cavity, hint, c.eigen);
      r.f0_hz = modes.frequencies[identify_accelerating_mode(modes)];
      r.dofs = modes.space->num_free();
      for (const auto& p : refined.cavity.patches) r.elements += p.num_elements();
    }
    if (exact_hz) r.relative_error = std::abs(r.f0_hz - *exact_hz) / *exact_hz;
    if (!rows.empty()) {
      const auto& prev = rows.back();
      r.variation_hz = detune ? std::abs(*r.shift_hz - *prev.shift_hz) : std::abs(r.f0_hz - prev.f0_hz);
    }
    rows.push_back(r);
  }
  return rows;
}

void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  const auto opt = [](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
  os << "subdivisions,elements,dofs,f0_hz,relative_error,shift_hz,variation_hz\n";
  for (const auto& r : rows)
    os << r.subdivisions << ',' << r.elements << ',' << r.dofs << ',' << num(r.f0_hz) << ',' << opt(r.relative_error)
       << ',' << opt(r.shift_hz) << ',' << opt(r.variation_hz) << '\n';
}

double convergence_slope(const std::vector<ConvergenceRow>& rows) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& r : rows) {
    if (!r.relative_error || !(*r.relative_error > 0.0)) throw DomainError("convergence slope needs positive errors");
    const double x = std::log(1.0 / r.subdivisions), y = std::log(*r.relative_error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) throw DomainError("convergence slope needs at least two levels");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<int> parse_levels(const std::string& spec) {
  std::vector<int> out;
  const auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || v < 1) throw ConfigError("invalid level '" + s + "' in '" + spec + "'");
    return v;
  };
  if (const auto dots = spec.find(".."); dots != std::string::npos) {
    const int a = to_int(spec.substr(0, dots)), b = to_int(spec.substr(dots + 2));
    for (int k = a; k <= b; ++k) out.push_back(k);
  } else {
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(to_int(item));
  }
  if (out.size() < 2) throw ConfigError("levels '" + spec + "' must name at least two levels");
  for (std::size_t k = 1; k < out.size(); ++k)
    if (out[k] <= out[k - 1]) throw ConfigError("levels '" + spec + "' must increase");
  return out;
}

json report_to_json(const DetuningReport& r) {
  json history = json::array();
  for (const auto& h : r.history)
    history.push_back({{"f0_prime_hz", h.f0_prime_hz},
                       {"delta_f_hz", h.delta_f_hz},
                       {"max_displacement_m", h.max_displacement_m}});
  return {{"f0_hz", r.f0_hz},
          {"f0_prime_hz", r.f0_prime_hz},
          {"delta_f_hz", r.delta_f_hz},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"max_displacement_m", r.max_displacement_m},
          {"normalization", {{"kind", to_string(r.normalization.kind)}, {"value", r.normalization.value}}},
          {"axis_purity", r.purity},
          {"axis_purity_deformed", r.purity_deformed},
          {"free_dofs", r.free_dofs},
          {"history", history}};
}

std::string report_text(const DetuningReport& r) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "f0          %.10f GHz\n", r.f0_hz * 1e-9);
  os << buf;
  std::snprintf(buf, sizeof buf, "f0'         %.10f GHz\n", r.f0_prime_hz * 1e-9);
  os << buf;
  std::snprintf(buf, sizeof buf, "delta f     %.3f Hz\n", r.delta_f_hz);
  os << buf;
  std::snprintf(buf, sizeof buf, "max |u|     %.4e m\n", r.max_displacement_m);
  os << buf;
  std::snprintf(buf, sizeof buf, "iterations  %d%s\n", r.iterations, r.converged ? "" : " (not converged)");
  os << buf;
  std::snprintf(buf, sizeof buf, "%-11s %.6g\n", to_string(r.normalization.kind).c_str(), r.normalization.value);
  os << buf;
  std::snprintf(buf, sizeof buf, "free DOFs   %d\n", r.free_dofs);
  os << buf;
  return os.str();
}

void write_vtk(std::ostream& os, const MultipatchGeometry& geo, const FieldFunction& field, const std::string& name,
               int samples) {
  if (samples < 1) throw DomainError("VTK export needs at least one sample per element");
  struct Lattice {
    std::array<std::vector<double>, 3> t;
    std::size_t offset = 0;
  };
  std::vector<Lattice> lat;
  std::size_t npts = 0, ncells = 0;
  for (const auto& p : geo.patches) {
    Lattice l;
    for (int d = 0; d < 3; ++d) {
      const auto br = p.knots[d].breaks();
      for (std::size_t e = 0; e + 1 < br.size(); ++e)
        for (int k = 0; k < samples; ++k) l.t[d].push_back(br[e] + (br[e + 1] - br[e]) * k / samples);
      l.t[d].push_back(br.back());
    }
    l.offset = npts;
    npts += l.t[0].size() * l.t[1].size() * l.t[2].size();
    ncells += (l.t[0].size() - 1) * (l.t[1].size() - 1) * (l.t[2].size() - 1);
    lat.push_back(std::move(l));
  }
  std::vector<Vec3> x, v;
  x.reserve(npts);
  v.reserve(npts);
  for (int p = 0; p < geo.num_patches(); ++p) {
    const auto& l = lat[p];
    for (double z : l.t[2])
      for (double y : l.t[1])
        for (double t : l.t[0]) {
          const Vec3 xh(t, y, z);
          x.push_back(geo.patches[p].eval(xh));
          v.push_back(field(p, xh));
        }
  }
  os << "# vtk DataFile Version 3.0\n" << name << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << npts << " double\n";
  for (const auto& q : x) os << num(q[0]) << ' ' << num(q[1]) << ' ' << num(q[2]) << '\n';
  os << "CELLS " << ncells << ' ' << 9 * ncells << '\n';
  for (const auto& l : lat) {
    const std::size_t n0 = l.t[0].size(), n1 = l.t[1].size(), n2 = l.t[2].size();
    const auto id = [&](std::size_t i, std::size_t j, std::size_t k) { return l.offset + i + n0 * (j + n1 * k); };
    for (std::size_t k = 0; k + 1 < n2; ++k)
      for (std::size_t j = 0; j + 1 < n1; ++j)
        for (std::size_t i = 0; i + 1 < n0; ++i)
          os << "8 " << id(i, j, k) << ' ' << id(i + 1, j, k) << ' ' << id(i + 1, j + 1, k) << ' ' << id(i, j + 1, k)
             << ' ' << id(i, j, k + 1) << ' ' << id(i + 1, j, k + 1) << ' ' << id(i + 1, j + 1, k + 1) << ' '
             << id(i, j + 1, k + 1) << '\n';
  }
  os << "CELL_TYPES " << ncells << '\n';
  for (std::size_t c = 0; c < ncells; ++c) os << "12\n";
  os << "POINT_DATA " << npts << "\nVECTORS " << name << " double\n";
  for (const auto& q : v) os << num(q[0]) << ' ' << num(q[1]) << ' ' << num(q[2]) << '\n';
}

double pillbox_tm010_hz(double radius) {
  constexpr double j01 = 2.4048255576957724;
  return speed_of_light() * j01 / (2.0 * std::numbers::pi * radius);
}

}  // namespace cavitiga

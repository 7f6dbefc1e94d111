#include "cavitiga/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cavitiga/errors.hpp"

namespace cavitiga {

std::string to_string(BoundaryLabel label) {
  switch (label) {
    case BoundaryLabel::PecWall: return "pec_wall";
    case BoundaryLabel::Iris: return "iris";
    case BoundaryLabel::Fixed: return "fixed";
    case BoundaryLabel::Free: return "free";
  }
  return "unknown";
}

BoundaryLabel boundary_label_from_string(const std::string& s) {
  if (s == "pec_wall") return BoundaryLabel::PecWall;
  if (s == "iris") return BoundaryLabel::Iris;
  if (s == "fixed") return BoundaryLabel::Fixed;
  if (s == "free") return BoundaryLabel::Free;
  throw ConfigError("unknown boundary label '" + s + "'");
}

std::array<int, 2> face_tangents(int face) {
  switch (face_direction(face)) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    default: return {0, 1};
  }
}

std::array<double, 2> FaceOrientation::map_param(double s, double t) const {
  const double s1 = flip_first() ? 1.0 - s : s;
  const double t1 = flip_second() ? 1.0 - t : t;
  return swap() ? std::array{t1, s1} : std::array{s1, t1};
}

std::array<int, 2> FaceOrientation::map_index(int i, int j, int n0, int n1) const {
  const int i1 = flip_first() ? n0 - 1 - i : i;
  const int j1 = flip_second() ? n1 - 1 - j : j;
  return swap() ? std::array{j1, i1} : std::array{i1, j1};
}

Vec3 face_point(int face, double s, double t) {
  Vec3 xh;
  const auto tg = face_tangents(face);
  xh[face_direction(face)] = face_side(face);
  xh[tg[0]] = s;
  xh[tg[1]] = t;
  return xh;
}

std::array<int, 2> face_dims(const NurbsPatch& patch, int face) {
  const auto tg = face_tangents(face);
  return {patch.count(tg[0]), patch.count(tg[1])};
}

int face_control_index(const NurbsPatch& patch, int face, int i, int j) {
  std::array<int, 3> idx{};
  const int d = face_direction(face);
  const auto tg = face_tangents(face);
  idx[d] = face_side(face) ? patch.count(d) - 1 : 0;
  idx[tg[0]] = i;
  idx[tg[1]] = j;
  return patch.index(idx[0], idx[1], idx[2]);
}

// ---------------------------------------------------------------------------
// Interfaces

namespace {

enum class FaceMatch { None, Corners, Full };

bool same_point(const Vec3& a, const Vec3& b, double tol) { return (a - b).norm() <= tol; }

FaceMatch match_faces(const NurbsPatch& A, int fa, const NurbsPatch& B, int fb, FaceOrientation o, double tol) {
  const auto na = face_dims(A, fa);
  const auto nb = face_dims(B, fb);
  for (int c = 0; c < 4; ++c) {
    const int c0 = c & 1, c1 = (c >> 1) & 1;
    const int b0 = c0 ^ static_cast<int>(o.flip_first());
    const int b1 = c1 ^ static_cast<int>(o.flip_second());
    const int q0 = o.swap() ? b1 : b0;
    const int q1 = o.swap() ? b0 : b1;
    const int ia = face_control_index(A, fa, c0 * (na[0] - 1), c1 * (na[1] - 1));
    const int ib = face_control_index(B, fb, q0 * (nb[0] - 1), q1 * (nb[1] - 1));
    if (!same_point(A.points[ia], B.points[ib], tol)) return FaceMatch::None;
  }
  const std::array<int, 2> expect = o.swap() ? std::array{na[1], na[0]} : na;
  if (expect != nb) return FaceMatch::Corners;
  const auto ta = face_tangents(fa);
  const auto tb = face_tangents(fb);
  for (int axis = 0; axis < 2; ++axis) {
    const bool flip = axis == 0 ? o.flip_first() : o.flip_second();
    const int db = o.swap() ? tb[1 - axis] : tb[axis];
    KnotVector ka = A.knots[ta[axis]];
    if (flip) ka = ka.reversed();
    const auto& kb = B.knots[db];
    if (ka.degree() != kb.degree() || ka.knots().size() != kb.knots().size()) return FaceMatch::Corners;
    for (std::size_t k = 0; k < ka.knots().size(); ++k)
      if (std::abs(ka.knots()[k] - kb.knots()[k]) > 1e-12) return FaceMatch::Corners;
  }
  for (int j = 0; j < na[1]; ++j)
    for (int i = 0; i < na[0]; ++i) {
      const auto m = o.map_index(i, j, na[0], na[1]);
      const int ia = face_control_index(A, fa, i, j);
      const int ib = face_control_index(B, fb, m[0], m[1]);
      if (!same_point(A.points[ia], B.points[ib], tol)) return FaceMatch::Corners;
      if (std::abs(A.weights[ia] - B.weights[ib]) > tol * std::max(1.0, A.weights[ia])) return FaceMatch::Corners;
    }
  return FaceMatch::Full;
}

}  // namespace

std::vector<Interface> detect_interfaces(const std::vector<NurbsPatch>& patches, double tol) {
  std::vector<Interface> out;
  const int n = static_cast<int>(patches.size());
  for (int pa = 0; pa < n; ++pa)
    for (int pb = pa + 1; pb < n; ++pb)
      for (int fa = 0; fa < 6; ++fa)
        for (int fb = 0; fb < 6; ++fb) {
          bool partial = false, full = false;
          for (int code = 0; code < 8 && !full; ++code) {
            const auto m = match_faces(patches[pa], fa, patches[pb], fb, FaceOrientation{code}, tol);
            if (m == FaceMatch::Full) {
              out.push_back({pa, fa, pb, fb, code});
              full = true;
            } else if (m == FaceMatch::Corners) {
              partial = true;
            }
          }
          if (partial && !full)
            throw GeometryError("nonconforming interface between patch " + std::to_string(pa) + " face " +
                                std::to_string(fa) + " and patch " + std::to_string(pb) + " face " + std::to_string(fb));
        }
  return out;
}

bool MultipatchGeometry::is_interface_face(FaceRef f) const {
  return std::any_of(interfaces.begin(), interfaces.end(), [&](const Interface& i) {
    return (i.patch_a == f.patch && i.face_a == f.face) || (i.patch_b == f.patch && i.face_b == f.face);
  });
}

std::vector<FaceRef> MultipatchGeometry::faces_tagged(BoundaryLabel label) const {
  std::vector<FaceRef> out;
  for (const auto& [f, l] : boundary_tags)
    if (l == label) out.push_back(f);
  return out;
}

void MultipatchGeometry::validate(double tol) const {
  for (const auto& itf : interfaces) {
    if (itf.patch_a < 0 || itf.patch_a >= num_patches() || itf.patch_b < 0 || itf.patch_b >= num_patches())
      throw GeometryError("interface refers to a missing patch");
    if (match_faces(patches[itf.patch_a], itf.face_a, patches[itf.patch_b], itf.face_b, FaceOrientation{itf.orientation},
                    tol) != FaceMatch::Full)
      throw GeometryError("interface faces do not coincide (patch " + std::to_string(itf.patch_a) + " / " +
                          std::to_string(itf.patch_b) + ")");
  }
  for (int p = 0; p < num_patches(); ++p)
    for (int f = 0; f < 6; ++f) {
      const bool itf = is_interface_face({p, f});
      const bool tagged = boundary_tags.contains({p, f});
      if (itf && tagged) throw GeometryError("interface face carries a boundary tag");
      if (!itf && !tagged)
        throw GeometryError("exterior face " + std::to_string(f) + " of patch " + std::to_string(p) + " is untagged");
    }
}

void CavityModel::validate(double tol) const {
  cavity.validate(tol);
  wall.validate(tol);
  for (const auto& c : coupling) {
    if (cavity.boundary_tags.at({c.cavity_patch, c.cavity_face}) != BoundaryLabel::PecWall)
      throw GeometryError("coupled cavity face is not tagged pec_wall");
    if (match_faces(cavity.patches.at(c.cavity_patch), c.cavity_face, wall.patches.at(c.wall_patch), c.wall_face,
                    FaceOrientation{c.orientation}, tol) != FaceMatch::Full)
      throw GeometryError("coupled cavity and wall faces do not coincide");
  }
}

// ---------------------------------------------------------------------------
// Builders

namespace {

constexpr double kCoreRatio = 0.5;

// (x, y) -> (-y, x), applied `quarter` times. Exact in floating point.
Eigen::Vector2d rotate_quarter(Eigen::Vector2d v, int quarter) {
  for (int k = 0; k < quarter; ++k) v = Eigen::Vector2d(-v[1], v[0]);
  return v;
}

const std::array<Eigen::Vector2d, 3> kArc{Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 1), Eigen::Vector2d(0, 1)};
const std::array<Eigen::Vector2d, 3> kChord{Eigen::Vector2d(1, 0), Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0, 1)};
const std::array<double, 3> kArcWeights{1.0, std::numbers::sqrt2 / 2.0, 1.0};

KnotVector quadratic_bezier() { return KnotVector({0, 0, 0, 1, 1, 1}, 2); }
KnotVector linear_bezier() { return KnotVector({0, 0, 1, 1}, 1); }

Vec3 lift_rz(const Eigen::Vector2d& xy, double r, double z) { return Vec3(r * xy[0], r * xy[1], z); }

struct CellPatches {
  std::vector<NurbsPatch> cavity;  // core, then quadrants 0..3
  std::vector<NurbsPatch> wall;    // quadrants 0..3
};

/// Wall offset of each profile control point; end points move radially only so
/// that the wall end faces stay in the iris planes.
std::vector<Eigen::Vector2d> offset_profile(const NurbsCurve& profile, double t) {
  const auto g = profile.knots.greville();
  const int n = static_cast<int>(profile.points.size());
  std::vector<Eigen::Vector2d> out;
  for (int j = 0; j < n; ++j) {
    const Vec3 d = profile.derivative(g[j]);
    Eigen::Vector2d nrm(d[1], -d[0]);
    nrm.normalize();
    if (j == 0 || j == n - 1) nrm = Eigen::Vector2d(1.0, 0.0);
    out.emplace_back(profile.points[j][0] + t * nrm[0], profile.points[j][1] + t * nrm[1]);
  }
  return out;
}

CellPatches build_cell(const NurbsCurve& profile, double t_wall, double z_shift) {
  const int nz = static_cast<int>(profile.points.size());
  const auto offset = offset_profile(profile, t_wall);
  CellPatches cell;

  {
    std::vector<Vec3> pts;
    std::vector<double> w;
    for (int j = 0; j < nz; ++j) {
      const double r = profile.points[j][0], z = profile.points[j][1] + z_shift;
      for (int l = 0; l < 3; ++l)
        for (int k = 0; k < 3; ++k) {
          const double sk = k - 1, sl = l - 1;
          const Eigen::Vector2d xy(0.5 * (sk - sl), 0.5 * (sk + sl));
          pts.push_back(lift_rz(xy, kCoreRatio * r, z));
          w.push_back(profile.weights[j] * kArcWeights[k] * kArcWeights[l]);
        }
    }
    cell.cavity.emplace_back(std::array{quadratic_bezier(), quadratic_bezier(), profile.knots}, pts, w);
  }
  for (int q = 0; q < 4; ++q) {
    std::vector<Vec3> pts, wpts;
    std::vector<double> w;
    for (int j = 0; j < nz; ++j) {
      const double r = profile.points[j][0], z = profile.points[j][1] + z_shift;
      for (int l = 0; l < 3; ++l) {
        const auto chord = rotate_quarter(kChord[l], q);
        const auto arc = rotate_quarter(kArc[l], q);
        pts.push_back(lift_rz(chord, kCoreRatio * r, z));
        pts.push_back(lift_rz(arc, r, z));
        wpts.push_back(lift_rz(arc, r, z));
        wpts.push_back(lift_rz(arc, offset[j][0], offset[j][1] + z_shift));
        w.push_back(profile.weights[j] * kArcWeights[l]);
        w.push_back(profile.weights[j] * kArcWeights[l]);
      }
    }
    const std::array kv{linear_bezier(), quadratic_bezier(), profile.knots};
    cell.cavity.emplace_back(kv, pts, w);
    cell.wall.emplace_back(kv, wpts, w);
  }
  return cell;
}

void check_profile(const NurbsCurve& profile) {
  if (profile.points.size() < 2) throw GeometryError("profile needs at least two control points");
  for (int k = 0; k <= 200; ++k) {
    const double x = k / 200.0;
    if (!(profile.eval(x)[0] > 0.0)) throw GeometryError("profile radius must be positive");
    if (!(profile.derivative(x)[1] > 0.0)) throw GeometryError("profile z must increase strictly");
  }
}

CavityModel assemble_chain(const NurbsCurve& profile, int cells, double t_wall, bool pillbox) {
  if (!(t_wall > 0.0)) throw GeometryError("wall thickness must be positive");
  if (cells < 1) throw GeometryError("need at least one cell");
  check_profile(profile);
  const double z0 = profile.points.front()[1];
  const double z1 = profile.points.back()[1];
  if (cells > 1 && std::abs(profile.points.front()[0] - profile.points.back()[0]) > 1e-12)
    throw GeometryError("chained profile must start and end at the same radius");

  CavityModel m;
  for (int c = 0; c < cells; ++c) {
    auto cell = build_cell(profile, t_wall, c * (z1 - z0));
    const int cbase = m.cavity.num_patches(), wbase = m.wall.num_patches();
    for (auto& p : cell.cavity) m.cavity.patches.push_back(std::move(p));
    for (auto& p : cell.wall) m.wall.patches.push_back(std::move(p));
    const auto end_label = pillbox ? BoundaryLabel::PecWall : BoundaryLabel::Iris;
    for (int k = 0; k < 5; ++k) {
      if (c == 0) m.cavity.boundary_tags[{cbase + k, 4}] = end_label;
      if (c == cells - 1) m.cavity.boundary_tags[{cbase + k, 5}] = end_label;
    }
    for (int q = 0; q < 4; ++q) {
      m.cavity.boundary_tags[{cbase + 1 + q, 1}] = BoundaryLabel::PecWall;
      m.wall.boundary_tags[{wbase + q, 0}] = BoundaryLabel::PecWall;
      m.wall.boundary_tags[{wbase + q, 1}] = BoundaryLabel::Free;
      if (c == 0) m.wall.boundary_tags[{wbase + q, 4}] = BoundaryLabel::Fixed;
      if (c == cells - 1) m.wall.boundary_tags[{wbase + q, 5}] = BoundaryLabel::Fixed;
      m.coupling.push_back({cbase + 1 + q, 1, wbase + q, 0, 0});
    }
  }
  m.cavity.interfaces = detect_interfaces(m.cavity.patches);
  m.wall.interfaces = detect_interfaces(m.wall.patches);

  const int nw = m.wall.num_patches();
  for (int p = 0; p < nw; ++p) {
    const int q = p % 4;
    if (pillbox) {
      // Radial-only response: no axial motion of the end faces, no azimuthal
      // motion on the seams (which lie in the coordinate planes).
      if (p < 4) m.wall_constraints.push_back({p, 4, {false, false, true}});
      if (p >= nw - 4) m.wall_constraints.push_back({p, 5, {false, false, true}});
      m.wall_constraints.push_back({p, 2, {q % 2 == 1, q % 2 == 0, false}});
      m.wall_constraints.push_back({p, 3, {(q + 1) % 2 == 1, (q + 1) % 2 == 0, false}});
    } else {
      if (p < 4) m.wall_constraints.push_back({p, 4, {true, true, true}});
      if (p >= nw - 4) m.wall_constraints.push_back({p, 5, {true, true, true}});
    }
  }
  if (min_jacobian_determinant(m.wall) <= 0.0)
    throw GeometryError("wall offset self-intersects; wall thickness too large for the profile curvature");
  if (min_jacobian_determinant(m.cavity) <= 0.0) throw GeometryError("cavity mapping is not orientation preserving");
  m.validate();
  return m;
}

}  // namespace

CavityModel make_pillbox(double radius, double length, double wall_thickness) {
  if (!(radius > 0.0) || !(length > 0.0) || !(wall_thickness > 0.0))
    throw GeometryError("pill-box dimensions must be positive");
  const NurbsCurve line(linear_bezier(), {Vec3(radius, 0.0, 0.0), Vec3(radius, length, 0.0)});
  return assemble_chain(line, 1, wall_thickness, true);
}

CavityModel make_revolved_cell(const NurbsCurve& profile, double wall_thickness) {
  return assemble_chain(profile, 1, wall_thickness, false);
}

CavityModel make_revolved_chain(const NurbsCurve& profile, int cells, double wall_thickness) {
  return assemble_chain(profile, cells, wall_thickness, false);
}

NurbsCurve tesla_like_profile() {
  // Elliptical dome (z, r) = (zc + A cos θ, rc + B sin θ), θ from π-θ0 to θ0,
  // as two rational quadratic arcs meeting at the equator.
  const double cell_length = 0.1154, r_iris = 0.035, r_equator = 0.1033, A = 0.07;
  const double zc = 0.5 * cell_length;
  const double c0 = zc / A;
  const double theta0 = std::acos(c0);
  const double s0 = std::sin(theta0);
  const double B = (r_equator - r_iris) / (1.0 - s0);
  const double rc = r_equator - B;
  const double half = 0.5 * (std::numbers::pi / 2.0 - theta0);  // half arc angle
  auto map = [&](double cx, double sy) { return Vec3(rc + B * sy, zc + A * cx, 0.0); };
  const double a0 = std::numbers::pi - theta0, a1 = std::numbers::pi / 2.0, a2 = theta0;
  const double m01 = 0.5 * (a0 + a1), m12 = 0.5 * (a1 + a2);
  const double inv = 1.0 / std::cos(half);
  std::vector<Vec3> pts{map(std::cos(a0), std::sin(a0)), map(inv * std::cos(m01), inv * std::sin(m01)),
                        map(std::cos(a1), std::sin(a1)), map(inv * std::cos(m12), inv * std::sin(m12)),
                        map(std::cos(a2), std::sin(a2))};
  const double w = std::cos(half);
  pts.front() = Vec3(r_iris, 0.0, 0.0);
  pts[2] = Vec3(r_equator, zc, 0.0);
  pts.back() = Vec3(r_iris, cell_length, 0.0);
  return NurbsCurve(KnotVector({0, 0, 0, 0.5, 0.5, 1, 1, 1}, 2), pts, {1.0, w, 1.0, w, 1.0});
}

MultipatchGeometry make_box(const Vec3& lo, const Vec3& hi, BoundaryLabel label) {
  std::vector<Vec3> pts;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) pts.emplace_back(i ? hi[0] : lo[0], j ? hi[1] : lo[1], k ? hi[2] : lo[2]);
  MultipatchGeometry g;
  g.patches.emplace_back(std::array{linear_bezier(), linear_bezier(), linear_bezier()}, pts);
  for (int f = 0; f < 6; ++f) g.boundary_tags[{0, f}] = label;
  return g;
}

// ---------------------------------------------------------------------------

MultipatchGeometry displace(const MultipatchGeometry& geometry, const std::vector<std::vector<Vec3>>& displacement) {
  if (static_cast<int>(displacement.size()) != geometry.num_patches())
    throw GeometryError("displacement does not match the number of patches");
  MultipatchGeometry out = geometry;
  for (int p = 0; p < out.num_patches(); ++p) {
    auto& pts = out.patches[p].points;
    if (displacement[p].size() != pts.size()) throw GeometryError("displacement does not match the control net");
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] += displacement[p][i];
  }
  return out;
}

MultipatchGeometry refine(const MultipatchGeometry& geometry, int degree, const std::array<int, 3>& subdivisions) {
  MultipatchGeometry out = geometry;
  for (auto& p : out.patches) p = refine(p, degree, subdivisions);
  out.validate();
  return out;
}

CavityModel refine(const CavityModel& model, int degree, int subdivisions, int axial_subdivisions, int wall_radial) {
  CavityModel out = model;
  out.cavity = refine(model.cavity, degree, {subdivisions, subdivisions, axial_subdivisions});
  out.wall = refine(model.wall, degree, {wall_radial, subdivisions, axial_subdivisions});
  out.validate();
  return out;
}

namespace {

template <typename F>
void for_each_quadrature_point(const NurbsPatch& patch, int extra_points, F&& f) {
  std::array<std::vector<double>, 3> br;
  std::array<GaussRule, 3> rule;
  for (int d = 0; d < 3; ++d) {
    br[d] = patch.knots[d].breaks();
    rule[d] = gauss_legendre(patch.knots[d].degree() + 1 + extra_points);
  }
  for (std::size_t e2 = 0; e2 + 1 < br[2].size(); ++e2)
    for (std::size_t e1 = 0; e1 + 1 < br[1].size(); ++e1)
      for (std::size_t e0 = 0; e0 + 1 < br[0].size(); ++e0) {
        const std::array<double, 3> lo{br[0][e0], br[1][e1], br[2][e2]};
        const std::array<double, 3> h{br[0][e0 + 1] - lo[0], br[1][e1 + 1] - lo[1], br[2][e2 + 1] - lo[2]};
        for (std::size_t c = 0; c < rule[2].points.size(); ++c)
          for (std::size_t b = 0; b < rule[1].points.size(); ++b)
            for (std::size_t a = 0; a < rule[0].points.size(); ++a) {
              const Vec3 xh(lo[0] + h[0] * rule[0].points[a], lo[1] + h[1] * rule[1].points[b],
                            lo[2] + h[2] * rule[2].points[c]);
              const double w = rule[0].weights[a] * rule[1].weights[b] * rule[2].weights[c] * h[0] * h[1] * h[2];
              f(xh, w);
            }
      }
}

}  // namespace

double volume(const MultipatchGeometry& geometry, int extra_points) {
  double v = 0.0;
  for (const auto& p : geometry.patches)
    for_each_quadrature_point(p, extra_points, [&](const Vec3& xh, double w) { v += w * std::abs(p.eval_with_jacobian(xh).jacobian.determinant()); });
  return v;
}

double min_jacobian_determinant(const MultipatchGeometry& geometry) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& p : geometry.patches)
    for_each_quadrature_point(p, 0, [&](const Vec3& xh, double) { m = std::min(m, p.eval_with_jacobian(xh).jacobian.determinant()); });
  return m;
}

std::pair<Vec3, Vec3> bounding_box(const MultipatchGeometry& geometry) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& p : geometry.patches)
    for (const auto& x : p.points) {
      lo = lo.cwiseMin(x);
      hi = hi.cwiseMax(x);
    }
  return {lo, hi};
}

std::optional<Location> locate(const MultipatchGeometry& geometry, const Vec3& x, double tol) {
  const auto [lo, hi] = bounding_box(geometry);
  const double scale = std::max((hi - lo).norm(), 1e-300);
  for (int p = 0; p < geometry.num_patches(); ++p) {
    const auto& patch = geometry.patches[p];
    Vec3 xh(0.5, 0.5, 0.5);
    for (int it = 0; it < 60; ++it) {
      const auto pp = patch.eval_with_jacobian(xh);
      const Vec3 r = pp.x - x;
      if (r.norm() <= tol * scale) return Location{p, xh};
      const double det = pp.jacobian.determinant();
      if (!(std::abs(det) > 0.0)) break;
      Vec3 step = pp.jacobian.partialPivLu().solve(r);
      xh = (xh - step).cwiseMax(0.0).cwiseMin(1.0);
    }
  }
  return std::nullopt;
}

}  // namespace cavitiga

#pragma once

// Multipatch volumetric geometry of the cavity vacuum and the cavity wall.
//
// Faces are numbered 2*d + s for parametric direction d and side s (0 at
// x̂_d = 0, 1 at x̂_d = 1). The two tangential directions of a face are its
// remaining directions in increasing order; a face control net is indexed
// (i, j) along those.

#include <array>
#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cavitiga/spline.hpp"

namespace cavitiga {

enum class BoundaryLabel {
  PecWall,  ///< Γ_CW: perfectly conducting cavity wall (E × n = 0)
  Iris,     ///< Γ_C: natural (Neumann) condition
  Fixed,    ///< Γ_W: displacement constrained
  Free,     ///< Γ_ext: traction-free
};

std::string to_string(BoundaryLabel label);
BoundaryLabel boundary_label_from_string(const std::string& s);

struct FaceRef {
  int patch = 0;
  int face = 0;
  auto operator<=>(const FaceRef&) const = default;
};

inline int face_direction(int face) { return face / 2; }
inline int face_side(int face) { return face % 2; }
/// Tangential directions (t0 < t1) of a face.
std::array<int, 2> face_tangents(int face);

/// Orientation code relating face-local coordinates of two matched faces.
///
/// Bit 1 reverses the first local axis of face A, bit 2 reverses the second,
/// and bit 0 then swaps the two axes to obtain face-B coordinates.
struct FaceOrientation {
  int code = 0;
  bool swap() const { return code & 1; }
  bool flip_first() const { return code & 2; }
  bool flip_second() const { return code & 4; }

  /// Face-A local parameters -> face-B local parameters.
  std::array<double, 2> map_param(double s, double t) const;
  /// Face-A local indices (dims n0 x n1 on A) -> face-B local indices.
  std::array<int, 2> map_index(int i, int j, int n0, int n1) const;
};

struct Interface {
  int patch_a = 0;
  int face_a = 0;
  int patch_b = 0;
  int face_b = 0;
  int orientation = 0;
  bool operator==(const Interface&) const = default;
};

/// Volume point x̂ on a face given face-local parameters (s, t).
Vec3 face_point(int face, double s, double t);
/// Control-point index of face-local (i, j) on a patch face.
int face_control_index(const NurbsPatch& patch, int face, int i, int j);
std::array<int, 2> face_dims(const NurbsPatch& patch, int face);

struct MultipatchGeometry {
  std::vector<NurbsPatch> patches;
  std::vector<Interface> interfaces;
  std::map<FaceRef, BoundaryLabel> boundary_tags;

  int num_patches() const { return static_cast<int>(patches.size()); }
  bool is_interface_face(FaceRef f) const;
  std::vector<FaceRef> faces_tagged(BoundaryLabel label) const;
  /// Checks that interfaces match within `tol` and that every exterior face
  /// carries exactly one tag. Throws GeometryError.
  void validate(double tol = 1e-10) const;
};

/// Boundary face on which the listed Cartesian displacement components vanish.
struct FaceConstraint {
  int patch = 0;
  int face = 0;
  std::array<bool, 3> components{true, true, true};
  bool operator==(const FaceConstraint&) const = default;
};

/// Cavity face on Γ_CW matched to a wall face.
struct Coupling {
  int cavity_patch = 0;
  int cavity_face = 0;
  int wall_patch = 0;
  int wall_face = 0;
  int orientation = 0;
  bool operator==(const Coupling&) const = default;
};

struct CavityModel {
  MultipatchGeometry cavity;
  MultipatchGeometry wall;
  std::vector<Coupling> coupling;
  std::vector<FaceConstraint> wall_constraints;

  void validate(double tol = 1e-10) const;
};

/// Pill-box cavity of radius R and length L with a cylindrical wall of
/// thickness t_wall around the curved surface only.
CavityModel make_pillbox(double radius, double length, double wall_thickness = 0.003);

/// Cell obtained by revolving `profile` around the z axis. Profile control
/// points are (r, z, 0); z must increase strictly along the curve. The wall is
/// offset along the profile normal and fixed at both ends; the end faces of
/// the cavity are irises.
CavityModel make_revolved_cell(const NurbsCurve& profile, double wall_thickness = 0.003);

/// `cells` copies of a revolved cell stacked along z (the profile must start
/// and end at the same radius).
CavityModel make_revolved_chain(const NurbsCurve& profile, int cells, double wall_thickness = 0.003);

/// Elliptical-arc demonstration profile with TESLA-like proportions (iris
/// radius 35 mm, equator radius 103.3 mm, cell length 115.4 mm). It is not
/// the TESLA reference geometry.
NurbsCurve tesla_like_profile();

/// Axis-aligned box as a single trilinear patch with all faces tagged `label`.
MultipatchGeometry make_box(const Vec3& lo, const Vec3& hi, BoundaryLabel label = BoundaryLabel::PecWall);

/// All face pairs whose control nets (points, weights and knots) coincide
/// under one of the 8 orientations within `tol`. Faces whose four corners
/// coincide but whose nets do not raise GeometryError (nonconforming).
std::vector<Interface> detect_interfaces(const std::vector<NurbsPatch>& patches, double tol = 1e-10);

/// New geometry with control points P_i + u_i (weights unchanged).
/// `displacement[p][i]` is the displacement of control point i of patch p.
MultipatchGeometry displace(const MultipatchGeometry& geometry, const std::vector<std::vector<Vec3>>& displacement);

/// Elevate and subdivide every patch; `subdivisions[d]` applies to parametric
/// direction d of every patch.
MultipatchGeometry refine(const MultipatchGeometry& geometry, int degree, const std::array<int, 3>& subdivisions);

/// Refine cavity and wall consistently: the wall uses `wall_radial` subdivisions
/// across its thickness (direction 0) and shares the others with the cavity.
CavityModel refine(const CavityModel& model, int degree, int subdivisions, int axial_subdivisions, int wall_radial = 1);

/// Volume by Gauss quadrature with p+1+extra_points points per direction and
/// span; the default is accurate to roundoff on coarse rational patches.
double volume(const MultipatchGeometry& geometry, int extra_points = 10);
/// Smallest det DF over the p+1 Gauss points of every element.
double min_jacobian_determinant(const MultipatchGeometry& geometry);

struct Location {
  int patch = 0;
  Vec3 xh;
};
/// Parametric location of a physical point (Newton iteration per patch).
std::optional<Location> locate(const MultipatchGeometry& geometry, const Vec3& x, double tol = 1e-11);

/// Axis-aligned bounding box of all control points.
std::pair<Vec3, Vec3> bounding_box(const MultipatchGeometry& geometry);

}  // namespace cavitiga

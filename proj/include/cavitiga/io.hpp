#pragma once

// Run configuration, geometry files and result export (CSV, JSON, VTK).
//
// All files use SI units; frequencies are in Hz. CSV files have a header row
// and print doubles with 17 significant digits.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavitiga/detuning.hpp"

namespace cavitiga {

struct GeometrySource {
  enum class Kind { Pillbox, Revolved, TeslaLike, File };
  Kind kind = Kind::Pillbox;
  double radius = 0.035;  ///< pill-box
  double length = 0.1;    ///< pill-box
  std::string path;       ///< profile curve (Revolved) or cavity model (File)
  int cells = 1;          ///< Revolved and TeslaLike
  bool operator==(const GeometrySource&) const = default;
};

struct RunConfig {
  GeometrySource geometry;
  double wall_thickness = 0.003;
  DetuningConfig detuning;
  std::string vtk_output;  ///< optional field export written by `eigen`
  /// Directory against which relative paths in the file are resolved.
  std::filesystem::path base_dir;
  bool operator==(const RunConfig& o) const {
    return geometry == o.geometry && wall_thickness == o.wall_thickness && detuning == o.detuning &&
           vtk_output == o.vtk_output;
  }
};

/// Parses and validates a configuration document; ConfigError on unknown
/// keys, wrong types or non-physical values.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& file);
/// Canonical form (material as η and λ); parse(to_json(c)) == c.
nlohmann::json to_json(const RunConfig& config);

/// Unrefined model described by the configuration.
CavityModel build_model(const RunConfig& config);

/// Geometry documents: {patches: [{degrees, knots, points: [[x,y,z,w], ...]}],
/// boundary_tags: [{patch, face, label}], interfaces (optional)}. Interfaces
/// are detected when absent.
nlohmann::json geometry_to_json(const MultipatchGeometry& geometry);
MultipatchGeometry geometry_from_json(const nlohmann::json& doc);
/// {cavity, wall, coupling (optional), wall_constraints}. Without a coupling
/// list, coinciding PEC faces of cavity and wall are coupled.
nlohmann::json model_to_json(const CavityModel& model);
CavityModel model_from_json(const nlohmann::json& doc);
/// Profile curve {degree, knots, points: [[r, z, w], ...]}.
NurbsCurve profile_from_json(const nlohmann::json& doc);
nlohmann::json profile_to_json(const NurbsCurve& curve);

/// mode,f_hz,residual
void write_spectrum_csv(std::ostream& os, const CavityModes& modes);
/// z,Ex,Ey,Ez
void write_axis_csv(std::ostream& os, const std::vector<AxisSample>& samples);
/// index,x,y,z,ux,uy,uz per (global) control point of the wall.
void write_displacement_csv(std::ostream& os, const Displacement& displacement);

struct ConvergenceRow {
  int subdivisions = 0;
  int elements = 0;
  int dofs = 0;
  double f0_hz = 0.0;
  std::optional<double> relative_error;  ///< against a known exact value
  std::optional<double> shift_hz;
  std::optional<double> variation_hz;  ///< |shift_k - shift_{k-1}| (or of f0 without shifts)
};

/// One row per subdivision level (ascending), each level refined from the
/// unrefined model. With `detune` the Lorentz shift is added per level.
std::vector<ConvergenceRow> run_convergence(const CavityModel& model, const DetuningConfig& config,
                                            const std::vector<int>& levels, bool detune,
                                            std::optional<double> exact_hz = std::nullopt);
void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows);
/// Least-squares slope of log(relative error) against log(1/subdivisions).
double convergence_slope(const std::vector<ConvergenceRow>& rows);
/// "a..b" or a comma list; levels must be positive and at least two.
std::vector<int> parse_levels(const std::string& spec);

nlohmann::json report_to_json(const DetuningReport& report);
std::string report_text(const DetuningReport& report);

using FieldFunction = std::function<Vec3(int patch, const Vec3& xh)>;
/// ASCII VTK legacy unstructured grid: every patch sampled on a lattice of
/// `samples` points per element edge, hexahedral cells, one point vector
/// field named `name`.
void write_vtk(std::ostream& os, const MultipatchGeometry& geometry, const FieldFunction& field, const std::string& name,
               int samples = 2);

/// Exact TM010 frequency c j01 / (2πR) of a pill-box.
double pillbox_tm010_hz(double radius);

}  // namespace cavitiga

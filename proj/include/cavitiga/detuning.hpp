#pragma once

// Lorentz detuning of a cavity mode: eigenmode, magnetic field and radiation
// pressure on the cavity wall, static wall deformation, deformed cavity and
// its shifted resonance frequency, optionally iterated.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cavitiga/eigensolver.hpp"
#include "cavitiga/elasticity.hpp"

namespace cavitiga {

struct Normalization {
  enum class Kind { StoredEnergy, PeakAxisField };
  Kind kind = Kind::StoredEnergy;
  double value = 1.0;  ///< J for StoredEnergy, V/m for PeakAxisField
  bool operator==(const Normalization&) const = default;
};
std::string to_string(Normalization::Kind kind);

struct Discretization {
  int degree = 2;
  int subdivisions = 8;         ///< per span, cross-section directions
  int axial_subdivisions = 1;   ///< per span, along the profile
  int wall_subdivisions = 1;    ///< per span, across the wall thickness
  bool operator==(const Discretization&) const = default;
};

struct DetuningConfig {
  Material material = Material::from_young_poisson(1.05e11, 0.38);
  Normalization normalization;
  Discretization discretization;
  /// Shift of the eigensolver in Hz; 0 selects 0.9 times the TM010
  /// frequency of a pill-box with the cavity's largest radius.
  double frequency_hint = 0.0;
  EigenOptions eigen{.n_ev = 4};
  int max_iterations = 1;
  double tolerance_hz = 1e-3;
  bool operator==(const DetuningConfig&) const = default;
};

/// Eigenmode scaled to a physical amplitude. E is a peak phasor; the
/// magnetic field is H = i h with h = curl E / (ω μ0) real.
struct ModeField {
  std::shared_ptr<const SplineSpace> space;
  Eigen::VectorXd free;    ///< free-DOF coefficients
  Eigen::VectorXd global;  ///< expanded coefficients
  double omega = 0.0;
  Normalization normalization;

  Vec3 E(int patch, const Vec3& xh) const;
  /// Imaginary part h of H.
  Vec3 h(int patch, const Vec3& xh) const;
};

/// Scales mode `index` of `modes` to the requested amplitude. Stored energy
/// is U = ½ ∫ ε0 |E|² (electric and magnetic time averages, equal at
/// resonance). Throws DomainError for a zero mode or a negative target.
ModeField normalize_mode(const CavityModes& modes, int index, const Normalization& target);

/// U = ½ c^T M c.
double stored_energy(const ModeField& mode, const SparseMatrix& M);

/// Imaginary part of H at physical points (located by Newton iteration);
/// IdentificationError for points outside the cavity.
std::function<Vec3(const Vec3&)> h_field_evaluator(const ModeField& mode);

/// p = -¼ ε0 (E·n)² + ¼ μ0 |h × n|² for the outward cavity normal n.
double radiation_pressure(const Vec3& E, const Vec3& h, const Vec3& n);

/// Wall load from the pressure of `mode` on the coupled faces of `cavity`
/// (whose parametrization matches `model`'s). The load is assembled on
/// `wall_space` with traction p n_c, pushing the wall outward for p > 0.
Eigen::VectorXd pressure_load(const CavityModel& model, const MultipatchGeometry& cavity, const ModeField& mode,
                              const SplineSpace& wall_space);

/// Cavity control-point displacements induced by a wall displacement:
/// coupled faces follow the wall, interior points of the same patch follow
/// linearly in the Greville abscissa of the face-normal direction, the rest
/// stay fixed.
std::vector<std::vector<Vec3>> cavity_displacement(const CavityModel& model, const Displacement& wall);

struct IterationRecord {
  double f0_prime_hz = 0.0;
  double delta_f_hz = 0.0;
  double max_displacement_m = 0.0;
};

struct DetuningReport {
  double f0_hz = 0.0;
  double f0_prime_hz = 0.0;
  double delta_f_hz = 0.0;
  int iterations = 0;
  bool converged = true;
  double max_displacement_m = 0.0;
  Normalization normalization;
  double purity = 0.0;           ///< axis purity of the undeformed mode
  double purity_deformed = 0.0;  ///< and of the deformed mode
  int free_dofs = 0;
  std::vector<IterationRecord> history;

  CavityModel refined;                    ///< undeformed, refined model
  MultipatchGeometry deformed_cavity;
  std::optional<Displacement> displacement;
  std::optional<ModeField> mode;          ///< undeformed normalized mode
};

/// Steps: eigenmode, pressure, wall deformation, deformed cavity, new
/// frequency (one pass).
DetuningReport run_detuning(const CavityModel& model, DetuningConfig config);

/// Repeats the pressure/deformation/eigen steps with the pressure of the
/// latest deformed mode (always applied to the undeformed wall) until the
/// change of Δf is below tolerance_hz or max_iterations is reached.
DetuningReport iterate_detuning(const CavityModel& model, const DetuningConfig& config);

/// Frequency hint used when the configuration leaves it at 0.
double default_frequency_hint(const MultipatchGeometry& cavity);

}  // namespace cavitiga

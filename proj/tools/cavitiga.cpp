#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cavitiga/errors.hpp"
#include "cavitiga/io.hpp"

using namespace cavitiga;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kSolverError = 3, kIdentificationError = 4 };

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << content;
}

struct Solved {
  CavityModel refined;
  CavityModes modes;
};

Solved solve(const RunConfig& cfg) {
  const auto& z = cfg.detuning.discretization;
  Solved s{refine(build_model(cfg), z.degree, z.subdivisions, z.axial_subdivisions, z.wall_subdivisions), {}};
  const double hint =
      cfg.detuning.frequency_hint > 0.0 ? cfg.detuning.frequency_hint : default_frequency_hint(s.refined.cavity);
  s.modes = solve_cavity_modes(s.refined.cavity, hint, cfg.detuning.eigen);
  return s;
}

FieldFunction electric_field(const ModeField& mode) {
  return [mode](int p, const Vec3& xh) { return mode.E(p, xh); };
}

int cmd_eigen(const RunConfig& cfg, const std::string& out, std::string vtk) {
  const auto s = solve(cfg);
  std::ostringstream os;
  write_spectrum_csv(os, s.modes);
  write_output(out, os.str());
  if (vtk.empty()) vtk = cfg.vtk_output;
  if (!vtk.empty()) {
    const int k = identify_accelerating_mode(s.modes);
    std::ostringstream v;
    write_vtk(v, s.refined.cavity, electric_field(normalize_mode(s.modes, k, cfg.detuning.normalization)), "E");
    write_output(vtk, v.str());
  }
  return kOk;
}

int cmd_detune(const RunConfig& cfg, const std::string& out, const std::string& displacement_csv) {
  const auto rep = iterate_detuning(build_model(cfg), cfg.detuning);
  write_output(out, report_to_json(rep).dump(2) + "\n");
  if (!out.empty() && out != "-") std::cout << report_text(rep);
  if (!displacement_csv.empty()) {
    std::ostringstream os;
    write_displacement_csv(os, *rep.displacement);
    write_output(displacement_csv, os.str());
  }
  return rep.converged ? kOk : kSolverError;
}

int cmd_convergence(const RunConfig& cfg, const std::string& out, const std::string& levels, bool detune) {
  std::optional<double> exact;
  if (cfg.geometry.kind == GeometrySource::Kind::Pillbox) exact = pillbox_tm010_hz(cfg.geometry.radius);
  const auto rows = run_convergence(build_model(cfg), cfg.detuning, parse_levels(levels), detune, exact);
  std::ostringstream os;
  write_convergence_csv(os, rows);
  write_output(out, os.str());
  if (exact && !out.empty() && out != "-")
    std::cout << "degree " << cfg.detuning.discretization.degree << ", log-log slope "
              << convergence_slope(rows) << "\n";
  return kOk;
}

int cmd_sample_axis(const RunConfig& cfg, const std::string& out, int mode, int n) {
  if (n < 2) throw ConfigError("--n must be at least 2");
  const auto s = solve(cfg);
  if (mode >= s.modes.vectors.cols()) throw ConfigError("--mode exceeds the number of computed modes");
  const int k = mode < 0 ? identify_accelerating_mode(s.modes) : mode;
  std::ostringstream os;
  write_axis_csv(os, sample_axis(s.modes, k, n));
  write_output(out, os.str());
  return kOk;
}

int cmd_export(const RunConfig& cfg, const std::string& out, const std::string& field, int samples) {
  std::ostringstream os;
  if (field == "E") {
    const auto s = solve(cfg);
    const int k = identify_accelerating_mode(s.modes);
    write_vtk(os, s.refined.cavity, electric_field(normalize_mode(s.modes, k, cfg.detuning.normalization)), "E",
              samples);
  } else if (field == "displacement") {
    const auto rep = iterate_detuning(build_model(cfg), cfg.detuning);
    const auto u = *rep.displacement;
    write_vtk(os, rep.refined.wall, [&u](int p, const Vec3& xh) { return u.at(p, xh); }, "displacement", samples);
  } else {
    throw ConfigError("unknown field '" + field + "' (expected E or displacement)");
  }
  write_output(out, os.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Isogeometric cavity eigenmodes and Lorentz detuning"};
  app.require_subcommand(1);
  std::string config, out;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output file (default: standard output)");
  };

  std::string vtk, displacement_csv, levels, field = "E";
  int mode = -1, n = 100, samples = 2;
  bool detune = false;

  auto* eigen = app.add_subcommand("eigen", "spectrum near the configured shift (CSV)");
  common(eigen);
  eigen->add_option("--vtk", vtk, "also export the accelerating mode's E field");

  auto* det = app.add_subcommand("detune", "Lorentz detuning report (JSON)");
  common(det);
  det->add_option("--displacement-csv", displacement_csv, "wall control-point displacements");

  auto* conv = app.add_subcommand("convergence", "frequency convergence table (CSV)");
  common(conv);
  conv->add_option("--levels", levels, "subdivision levels, a..b or a,b,c")->required();
  conv->add_flag("--detune", detune, "add the Lorentz shift per level");

  auto* axis = app.add_subcommand("sample-axis", "E along the z axis (CSV)");
  common(axis);
  axis->add_option("--mode", mode, "mode index (default: accelerating mode)");
  axis->add_option("--n", n, "number of samples");

  auto* exp = app.add_subcommand("export", "field export (VTK legacy)");
  common(exp);
  exp->add_option("--field", field, "E or displacement");
  exp->add_option("--samples", samples, "lattice subdivisions per element");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    const auto cfg = load_config(config);
    if (eigen->parsed()) return cmd_eigen(cfg, out, vtk);
    if (det->parsed()) return cmd_detune(cfg, out, displacement_csv);
    if (conv->parsed()) return cmd_convergence(cfg, out, levels, detune);
    if (axis->parsed()) return cmd_sample_axis(cfg, out, mode, n);
    return cmd_export(cfg, out, field, samples);
  } catch (const IdentificationError& e) {
    std::cerr << "identification error: " << e.what() << "\n";
    return kIdentificationError;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const GeometryError& e) {
    std::cerr << "geometry error: " << e.what() << "\n";
    return kConfigError;
  } catch (const RefinementError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolverError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverError;
  }
}

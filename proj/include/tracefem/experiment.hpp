#pragma once

#include "tracefem/analysis.hpp"
#include "tracefem/solver.hpp"
#include "tracefem/timestepper.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tracefem {

/// Raised for malformed configuration (maps to exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    int example = 1;
    bool mass_variant = false;
    std::optional<double> box_half_width;  // default: 4/3 (sphere, torus), 5/3 (dziuk)
    int base_cells = 10;
    std::optional<double> mesh_size;  // cube edge length; overrides base_cells
    int levels = 4;
    StabilizationConfig stabilization;
    double dt = 0.1;
    std::optional<double> t_end;                 // default: 1.8 (example 3), 2.0 (example 4)
    std::optional<std::vector<double>> snapshot_times;
    std::string output_dir = "out";
    double region_threshold = 0.3;
    bool write_vtk = true;

    std::optional<double> min_eoc_l2, min_eoc_h1, min_eoc_linf, min_eoc_sd;
    std::optional<double> max_mass_drift;  // relative to |M_h(0)|
};

/// Valid keys of the flat JSON configuration; each has a matching --flag
/// (underscores become dashes).
const std::vector<std::string>& config_keys();

/// Applies the keys of a flat JSON object (given as text) on top of `cfg`.
/// Unknown keys and type mismatches raise ConfigError naming the line.
void apply_config_json(ExperimentConfig& cfg, const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base = {});
void validate(const ExperimentConfig& cfg);

enum class Command { Convergence, Transient, Calibrate };

struct ParsedCommandLine {
    Command command = Command::Convergence;
    ExperimentConfig config;
    bool help_only = false;
    std::string help_text;
};

/// CLI11-based parser shared by the `tracefem` tool and the tests. Flags
/// override values read from --config. Throws ConfigError on usage errors.
ParsedCommandLine parse_command_line(int argc, const char* const* argv);

// ---------------------------------------------------------------- studies

struct LevelResult {
    int level = 0;
    double h = 0.0;
    int N = 0;
    ErrorReport errors;
    GeometryReport geometry;
    SolveReport solve;
    BandCheck band;
};

struct ConvergenceResult {
    std::vector<LevelResult> levels;
    std::vector<double> eoc_l2, eoc_h1, eoc_linf, eoc_sd;
    bool thresholds_met = true;
};

/// Base (level 0) background mesh for an experiment.
TetMesh base_mesh(const ExperimentConfig& cfg, const LevelSetSurface& surface);

/// build mesh -> extract -> assemble -> solve -> error norms, per level.
/// Writes errors.csv, geometry.csv and per-level solution VTK files when
/// `cfg.output_dir` is non-empty.
ConvergenceResult run_convergence_study(const ExperimentConfig& cfg, std::ostream& log);

struct TransientLevelResult {
    int level = 0;
    double h = 0.0;
    int N = 0;
    TransientRun run;
    std::vector<double> snapshot_min, snapshot_max;
    double max_mass_drift = 0.0;  // max_t |M_h(t) - M_h(0)|
};

struct TransientResult {
    std::vector<TransientLevelResult> levels;
    bool thresholds_met = true;
};

TransientResult run_transient_study(const ExperimentConfig& cfg, std::ostream& log);

/// Number of trace DOFs on the Kuhn mesh with `cells` per axis, without
/// storing the mesh.
int count_trace_dofs(const Vec3& lo, const Vec3& hi, int cells, const LevelSetSurface& surface);

struct CalibrationRow {
    int base_cells = 0;
    std::vector<int> dofs;  // per level
    double worst_ratio = 0.0;  // max over levels of max(N/N_ref, N_ref/N)
};

/// Reference surface DOF counts of the sphere refinement sequence.
const std::vector<int>& reference_sphere_dofs();

std::vector<CalibrationRow> calibrate(const ExperimentConfig& cfg, int min_cells, int max_cells, std::ostream& log);

/// Entry point used by the CLI; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tracefem

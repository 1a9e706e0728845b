#include "tracefem/experiment.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <locale>
#include <sstream>

namespace tracefem {

namespace {

using nlohmann::json;

// ------------------------------------------------------------- config io

int line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

int line_of_key(const std::string& text, const std::string& key) {
    const auto pos = text.find('"' + key + '"');
    return pos == std::string::npos ? 0 : line_of_offset(text, pos);
}

std::string describe(const std::string& text, const std::string& key) {
    const int line = line_of_key(text, key);
    return "key '" + key + "'" + (line > 0 ? " (line " + std::to_string(line) + ")" : std::string());
}

double get_number(const json& v, const std::string& text, const std::string& key) {
    if (!v.is_number()) throw ConfigError(describe(text, key) + ": expected a number, got " + std::string(v.type_name()));
    return v.get<double>();
}

int get_int(const json& v, const std::string& text, const std::string& key) {
    if (!v.is_number_integer())
        throw ConfigError(describe(text, key) + ": expected an integer, got " + std::string(v.type_name()));
    return v.get<int>();
}

bool get_bool(const json& v, const std::string& text, const std::string& key) {
    if (!v.is_boolean()) throw ConfigError(describe(text, key) + ": expected true/false, got " + std::string(v.type_name()));
    return v.get<bool>();
}

std::string get_string(const json& v, const std::string& text, const std::string& key) {
    if (!v.is_string()) throw ConfigError(describe(text, key) + ": expected a string, got " + std::string(v.type_name()));
    return v.get<std::string>();
}

std::string join_keys() {
    std::string s;
    for (const auto& k : config_keys()) s += (s.empty() ? "" : ", ") + k;
    return s;
}

// ---------------------------------------------------------------- output

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out.imbue(std::locale::classic());
    out << std::setprecision(12);
    return out;
}

std::string fmt_rate(const std::vector<double>& rates, std::size_t level) {
    if (level == 0) return "";
    std::ostringstream s;
    s.imbue(std::locale::classic());
    s << std::setprecision(6) << rates[level - 1];
    return s.str();
}

/// Runs one pipeline stage, prefixing failures with the stage name.
template <class F>
auto stage(const std::string& name, int level, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw std::runtime_error("[" + name + ", level " + std::to_string(level) + "] " + e.what());
    }
}

double default_half_width(const LevelSetSurface& s) { return s.kind() == SurfaceKind::Dziuk ? 5.0 / 3.0 : 4.0 / 3.0; }

bool met(const std::optional<double>& threshold, double value) { return !threshold || value >= *threshold; }

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys{
        "example",   "mass_variant", "box_half_width",   "base_cells", "mesh_size",   "levels",
        "stabilization", "delta0",  "delta1",           "convection_form", "dt",     "t_end",
        "snapshot_times", "output_dir", "region_threshold", "write_vtk", "min_eoc_l2", "min_eoc_h1",
        "min_eoc_linf", "min_eoc_sd", "max_mass_drift"};
    return keys;
}

void apply_config_json(ExperimentConfig& cfg, const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed JSON at line " + std::to_string(line_of_offset(text, e.byte)) + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("configuration must be a flat JSON object");

    const auto& keys = config_keys();
    for (const auto& [key, v] : j.items()) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ConfigError("unknown " + describe(text, key) + "; valid keys: " + join_keys());

        if (key == "example") cfg.example = get_int(v, text, key);
        else if (key == "mass_variant") cfg.mass_variant = get_bool(v, text, key);
        else if (key == "box_half_width") cfg.box_half_width = get_number(v, text, key);
        else if (key == "base_cells") cfg.base_cells = get_int(v, text, key);
        else if (key == "mesh_size") cfg.mesh_size = get_number(v, text, key);
        else if (key == "levels") cfg.levels = get_int(v, text, key);
        else if (key == "stabilization") cfg.stabilization.enabled = get_bool(v, text, key);
        else if (key == "delta0") cfg.stabilization.delta0 = get_number(v, text, key);
        else if (key == "delta1") cfg.stabilization.delta1 = get_number(v, text, key);
        else if (key == "convection_form") {
            const std::string f = get_string(v, text, key);
            if (f == "skew") cfg.stabilization.convection_form = ConvectionForm::Skew;
            else if (f == "conservative") cfg.stabilization.convection_form = ConvectionForm::Conservative;
            else throw ConfigError(describe(text, key) + ": expected \"skew\" or \"conservative\"");
        } else if (key == "dt") cfg.dt = get_number(v, text, key);
        else if (key == "t_end") cfg.t_end = get_number(v, text, key);
        else if (key == "snapshot_times") {
            if (!v.is_array()) throw ConfigError(describe(text, key) + ": expected an array of numbers");
            std::vector<double> t;
            for (const auto& e : v) t.push_back(get_number(e, text, key));
            cfg.snapshot_times = t;
        } else if (key == "output_dir") cfg.output_dir = get_string(v, text, key);
        else if (key == "region_threshold") cfg.region_threshold = get_number(v, text, key);
        else if (key == "write_vtk") cfg.write_vtk = get_bool(v, text, key);
        else if (key == "min_eoc_l2") cfg.min_eoc_l2 = get_number(v, text, key);
        else if (key == "min_eoc_h1") cfg.min_eoc_h1 = get_number(v, text, key);
        else if (key == "min_eoc_linf") cfg.min_eoc_linf = get_number(v, text, key);
        else if (key == "min_eoc_sd") cfg.min_eoc_sd = get_number(v, text, key);
        else if (key == "max_mass_drift") cfg.max_mass_drift = get_number(v, text, key);
    }
}

ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read configuration file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    apply_config_json(base, ss.str());
    return base;
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.example < 1 || cfg.example > 4) throw ConfigError("unknown example id " + std::to_string(cfg.example));
    if (cfg.mass_variant && cfg.example != 3) throw ConfigError("mass_variant requires example 3");
    if (cfg.levels < 1) throw ConfigError("levels must be >= 1");
    if (cfg.base_cells < 1) throw ConfigError("base_cells must be >= 1");
    if (cfg.mesh_size && !(*cfg.mesh_size > 0.0)) throw ConfigError("mesh_size must be positive");
    if (cfg.box_half_width && !(*cfg.box_half_width > 0.0)) throw ConfigError("box_half_width must be positive");
    if (!(cfg.dt > 0.0)) throw ConfigError("dt must be positive");
    if (cfg.t_end && *cfg.t_end < 0.0) throw ConfigError("t_end must be non-negative");
    if (cfg.stabilization.enabled && !(cfg.stabilization.delta0 > 0.0 && cfg.stabilization.delta1 > 0.0))
        throw ConfigError("delta0 and delta1 must be positive when stabilization is enabled");
}

ParsedCommandLine parse_command_line(int argc, const char* const* argv) {
    CLI::App app{"SUPG-stabilized trace finite elements for advection-diffusion on surfaces"};
    app.require_subcommand(1);
    app.fallthrough();
    auto* conv = app.add_subcommand("convergence", "stationary convergence study (examples 1, 2)");
    auto* trans = app.add_subcommand("transient", "Crank-Nicolson transient run (examples 3, 4)");
    auto* calib = app.add_subcommand("calibrate", "report trace DOFs per level for a range of base grids");

    std::string config_path;
    app.add_option("--config", config_path, "flat JSON configuration file; flags override its values");

    json overrides = json::object();
    std::vector<std::function<void()>> collect;
    auto number = [&](const std::string& flag, const std::string& key, const std::string& help) {
        auto value = std::make_shared<double>(0.0);
        auto* opt = app.add_option(flag, *value, help);
        collect.push_back([=, &overrides] {
            if (opt->count() > 0) overrides[key] = *value;
        });
    };
    auto integer = [&](const std::string& flag, const std::string& key, const std::string& help) {
        auto value = std::make_shared<int>(0);
        auto* opt = app.add_option(flag, *value, help);
        collect.push_back([=, &overrides] {
            if (opt->count() > 0) overrides[key] = *value;
        });
    };
    auto flag = [&](const std::string& name, const std::string& key, bool set_to, const std::string& help) {
        auto* opt = app.add_flag(name, help);
        collect.push_back([=, &overrides] {
            if (opt->count() > 0) overrides[key] = set_to;
        });
    };

    integer("--example", "example", "example id 1-4 (default 1)");
    flag("--mass-variant", "mass_variant", true, "example 3 with u0 = 1 + atan(x3/sqrt(eps))/pi");
    number("--box-half-width", "box_half_width", "half width of the cube domain (default 4/3, 5/3 for example 4)");
    integer("--base-cells", "base_cells", "cells per axis of the coarsest grid (default 10)");
    number("--mesh-size", "mesh_size", "cube edge length of the coarsest grid; overrides --base-cells");
    integer("--levels", "levels", "number of mesh levels (default 4)");
    flag("--no-stabilization", "stabilization", false, "plain Galerkin (delta_T = 0)");
    number("--delta0", "delta0", "SUPG constant for Pe_T > 1 (default 0.5)");
    number("--delta1", "delta1", "SUPG constant for Pe_T <= 1 (default 0.125)");
    auto form = std::make_shared<std::string>();
    auto* form_opt = app.add_option("--convection-form", *form, "skew (default) or conservative")
                         ->check(CLI::IsMember({"skew", "conservative"}));
    collect.push_back([=, &overrides] {
        if (form_opt->count() > 0) overrides["convection_form"] = *form;
    });
    number("--dt", "dt", "time step (default 0.1)");
    number("--t-end", "t_end", "final time (default 1.8 for example 3, 2.0 for example 4)");
    auto snaps = std::make_shared<std::vector<double>>();
    auto* snaps_opt = app.add_option("--snapshot-times", *snaps, "times of VTK snapshots")->delimiter(',');
    collect.push_back([=, &overrides] {
        if (snaps_opt->count() > 0) overrides["snapshot_times"] = *snaps;
    });
    auto outdir = std::make_shared<std::string>();
    auto* out_opt = app.add_option("-o,--output-dir", *outdir, "output directory (default ./out)");
    collect.push_back([=, &overrides] {
        if (out_opt->count() > 0) overrides["output_dir"] = *outdir;
    });
    number("--region-threshold", "region_threshold", "errors are measured on |x3| > threshold (default 0.3)");
    flag("--no-vtk", "write_vtk", false, "skip VTK output");
    number("--min-eoc-l2", "min_eoc_l2", "fail (exit 1) if the final L2 rate is lower");
    number("--min-eoc-h1", "min_eoc_h1", "fail if the final H1-seminorm rate is lower");
    number("--min-eoc-linf", "min_eoc_linf", "fail if the final Linf rate is lower");
    number("--min-eoc-sd", "min_eoc_sd", "fail if the final streamline-diffusion rate is lower");
    number("--max-mass-drift", "max_mass_drift", "fail if max |M(t)-M(0)|/|M(0)| is larger");

    ParsedCommandLine result;
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        result.help_only = true;
        result.help_text = app.help();
        return result;
    } catch (const CLI::ParseError& e) {
        throw ConfigError(e.what());
    }

    if (conv->parsed()) result.command = Command::Convergence;
    else if (trans->parsed()) result.command = Command::Transient;
    else if (calib->parsed()) result.command = Command::Calibrate;

    for (auto& c : collect) c();
    if (!config_path.empty()) result.config = load_config_file(config_path);
    apply_config_json(result.config, overrides.dump(2));
    validate(result.config);
    return result;
}

// ---------------------------------------------------------------- studies

TetMesh base_mesh(const ExperimentConfig& cfg, const LevelSetSurface& surface) {
    double half = cfg.box_half_width.value_or(default_half_width(surface));
    int cells = cfg.base_cells;
    if (cfg.mesh_size) {
        cells = static_cast<int>(std::ceil(2.0 * half / *cfg.mesh_size - 1e-9));
        half = 0.5 * cells * *cfg.mesh_size;
    }
    return build_box_mesh(Vec3::Constant(-half), Vec3::Constant(half), cells);
}

ConvergenceResult run_convergence_study(const ExperimentConfig& cfg, std::ostream& log) {
    validate(cfg);
    const Problem problem = builtin_problem(cfg.example, cfg.mass_variant);
    if (!problem.data.exact_solution || !problem.data.source)
        throw ConfigError("convergence study needs a stationary example with exact solution (1 or 2)");
    const LevelSetSurface& surface = *problem.surface;

    const std::filesystem::path dir(cfg.output_dir);
    if (!cfg.output_dir.empty()) std::filesystem::create_directories(dir);

    ConvergenceResult result;
    auto mesh = std::make_shared<TetMesh>(stage("mesh", 0, [&] { return base_mesh(cfg, surface); }));
    for (int level = 0; level < cfg.levels; ++level) {
        if (level > 0) mesh = std::make_shared<TetMesh>(stage("mesh", level, [&] { return refine_uniform(*mesh); }));

        LevelResult lr;
        lr.level = level;
        auto sm = std::make_shared<SurfaceMesh>(stage("extract", level, [&] {
            return extract_zero_level(*mesh, interpolate_levelset(*mesh, surface));
        }));
        lr.h = sm->h_max;
        lr.band = check_band(surface, sm->h_max);
        if (level == 0 && !lr.band.satisfied)
            log << "warning: coarsest mesh violates the band condition 5h < 1/max|kappa| (h=" << sm->h_max
                << ", bound=" << lr.band.bound << ")\n";
        lr.geometry = stage("geometry", level, [&] { return geometry_diagnostics(*sm, surface); });

        const TraceSpace space = stage("space", level, [&] { return build_trace_space(mesh, sm); });
        lr.N = space.size();
        const StationaryAssembly asmb =
            stage("assemble", level, [&] { return assemble_stationary(space, surface, problem.data, cfg.stabilization); });
        auto [u, rep] = stage("solve", level, [&] { return solve(asmb.system); });
        lr.solve = rep;
        lr.errors = stage("errors", level, [&] {
            return error_norms(space, surface, u, problem.data, outside_layer(cfg.region_threshold), asmb.delta);
        });

        log << "level " << level << ": N=" << lr.N << " h=" << lr.h << " L2=" << lr.errors.err_L2
            << " H1=" << lr.errors.err_H1 << " Linf=" << lr.errors.err_Linf << " SD=" << lr.errors.err_SD
            << " residual=" << rep.residual_norm << " pinned=" << rep.pivots_perturbed << '\n';

        if (!cfg.output_dir.empty() && cfg.write_vtk) {
            const auto pu = values_at_surface_points(space, u);
            std::vector<double> exact(sm->points.size());
            for (std::size_t i = 0; i < exact.size(); ++i)
                exact[i] = extend_scalar(surface, problem.data.exact_solution, sm->points[i]);
            write_vtk(*sm, (dir / ("solution_level" + std::to_string(level) + ".vtk")).string(),
                      {{"u_h", pu}, {"u_exact", exact}}, {{"delta_T", asmb.delta}});
        }
        result.levels.push_back(lr);
    }

    if (result.levels.size() >= 2) {
        std::vector<double> h, l2, h1, linf, sd;
        for (const auto& l : result.levels) {
            h.push_back(l.h);
            l2.push_back(l.errors.err_L2);
            h1.push_back(l.errors.err_H1);
            linf.push_back(l.errors.err_Linf);
            sd.push_back(l.errors.err_SD);
        }
        result.eoc_l2 = eoc(l2, h);
        result.eoc_h1 = eoc(h1, h);
        result.eoc_linf = eoc(linf, h);
        result.eoc_sd = eoc(sd, h);
        result.thresholds_met = met(cfg.min_eoc_l2, result.eoc_l2.back()) && met(cfg.min_eoc_h1, result.eoc_h1.back()) &&
                                met(cfg.min_eoc_linf, result.eoc_linf.back()) && met(cfg.min_eoc_sd, result.eoc_sd.back());
    } else if (cfg.min_eoc_l2 || cfg.min_eoc_h1 || cfg.min_eoc_linf || cfg.min_eoc_sd) {
        result.thresholds_met = false;
    }

    if (!cfg.output_dir.empty()) {
        auto out = open_csv(dir / "errors.csv");
        out << "level,N,h,err_L2,err_H1semi,err_Linf,err_SD,eoc_L2,eoc_H1semi,eoc_Linf,eoc_SD\n";
        for (std::size_t k = 0; k < result.levels.size(); ++k) {
            const auto& l = result.levels[k];
            out << l.level << ',' << l.N << ',' << l.h << ',' << l.errors.err_L2 << ',' << l.errors.err_H1 << ','
                << l.errors.err_Linf << ',' << l.errors.err_SD << ',' << fmt_rate(result.eoc_l2, k) << ','
                << fmt_rate(result.eoc_h1, k) << ',' << fmt_rate(result.eoc_linf, k) << ',' << fmt_rate(result.eoc_sd, k)
                << '\n';
        }
        auto geo = open_csv(dir / "geometry.csv");
        geo << "level,h,max_dist,max_normal_dev,max_measure_dev,min_segment_area,band_bound,band_ok\n";
        for (const auto& l : result.levels)
            geo << l.level << ',' << l.geometry.h_max << ',' << l.geometry.max_dist << ',' << l.geometry.max_normal_dev
                << ',' << l.geometry.max_measure_dev << ',' << l.geometry.min_segment_area << ',' << l.band.bound << ','
                << (l.band.satisfied ? 1 : 0) << '\n';
    }
    return result;
}

TransientResult run_transient_study(const ExperimentConfig& cfg, std::ostream& log) {
    validate(cfg);
    const Problem problem = builtin_problem(cfg.example, cfg.mass_variant);
    if (!problem.data.initial_condition) throw ConfigError("transient study needs example 3 or 4");
    const LevelSetSurface& surface = *problem.surface;

    TransientOptions opts;
    opts.dt = cfg.dt;
    opts.t_end = cfg.t_end.value_or(cfg.example == 4 ? 2.0 : 1.8);
    opts.snapshot_times = cfg.snapshot_times.value_or(cfg.example == 4 ? std::vector<double>{0.0, 0.5, 1.0, 2.0}
                                                                          : std::vector<double>{0.0, 0.6, 1.2, 1.8});

    const std::filesystem::path dir(cfg.output_dir);
    TransientResult result;
    auto mesh = std::make_shared<TetMesh>(stage("mesh", 0, [&] { return base_mesh(cfg, surface); }));
    for (int level = 0; level < cfg.levels; ++level) {
        if (level > 0) mesh = std::make_shared<TetMesh>(stage("mesh", level, [&] { return refine_uniform(*mesh); }));
        auto sm = std::make_shared<SurfaceMesh>(stage("extract", level, [&] {
            return extract_zero_level(*mesh, interpolate_levelset(*mesh, surface));
        }));
        const BandCheck band = check_band(surface, sm->h_max);
        if (level == 0 && !band.satisfied)
            log << "warning: coarsest mesh violates the band condition 5h < 1/max|kappa| (h=" << sm->h_max
                << ", bound=" << band.bound << ")\n";
        const TraceSpace space = stage("space", level, [&] { return build_trace_space(mesh, sm); });

        TransientLevelResult lr;
        lr.level = level;
        lr.h = (mesh->hi[0] - mesh->lo[0]) / static_cast<double>(mesh->lattice_size);
        lr.N = space.size();
        lr.run = stage("timestep", level, [&] { return run_transient(space, surface, problem.data, cfg.stabilization, opts); });
        const double m0 = lr.run.mass_series.front().second;
        for (const auto& [t, m] : lr.run.mass_series) lr.max_mass_drift = std::max(lr.max_mass_drift, std::abs(m - m0));
        for (const auto& s : lr.run.snapshots) {
            lr.snapshot_min.push_back(s.coeffs.minCoeff());
            lr.snapshot_max.push_back(s.coeffs.maxCoeff());
        }
        log << "level " << level << ": N=" << lr.N << " h=" << lr.h << " M_h(0)=" << m0
            << " max|M_h(t)-M_h(0)|=" << lr.max_mass_drift << '\n';
        if (cfg.max_mass_drift && !(lr.max_mass_drift <= *cfg.max_mass_drift * std::abs(m0))) result.thresholds_met = false;

        if (!cfg.output_dir.empty()) {
            const auto ldir = dir / ("level" + std::to_string(level));
            std::filesystem::create_directories(ldir);
            auto mass = open_csv(ldir / "mass.csv");
            mass << "t,M_h\n";
            for (const auto& [t, m] : lr.run.mass_series) mass << t << ',' << m << '\n';
            auto snaps = open_csv(ldir / "snapshots.csv");
            snaps << "t,min_u_h,max_u_h\n";
            for (std::size_t k = 0; k < lr.run.snapshots.size(); ++k) {
                snaps << lr.run.snapshots[k].t << ',' << lr.snapshot_min[k] << ',' << lr.snapshot_max[k] << '\n';
                if (cfg.write_vtk) {
                    std::ostringstream name;
                    name.imbue(std::locale::classic());
                    name << "snapshot_t" << std::fixed << std::setprecision(2) << lr.run.snapshots[k].t << ".vtk";
                    write_vtk(*sm, (ldir / name.str()).string(),
                              {{"u_h", values_at_surface_points(space, lr.run.snapshots[k].coeffs)}});
                }
            }
        }
        result.levels.push_back(std::move(lr));
    }
    return result;
}

// ------------------------------------------------------------ calibration

int count_trace_dofs(const Vec3& lo, const Vec3& hi, int cells, const LevelSetSurface& surface) {
    const std::int64_t n = cells;
    auto idx = [n](std::int64_t i, std::int64_t j, std::int64_t k) { return static_cast<std::size_t>((i * (n + 1) + j) * (n + 1) + k); };
    std::vector<double> phi(static_cast<std::size_t>((n + 1) * (n + 1) * (n + 1)));
    for (std::int64_t i = 0; i <= n; ++i)
        for (std::int64_t j = 0; j <= n; ++j)
            for (std::int64_t k = 0; k <= n; ++k) {
                const Vec3 x(lo[0] + (hi[0] - lo[0]) * (static_cast<double>(i) / n),
                             lo[1] + (hi[1] - lo[1]) * (static_cast<double>(j) / n),
                             lo[2] + (hi[2] - lo[2]) * (static_cast<double>(k) / n));
                const double v = surface.level(x);
                phi[idx(i, j, k)] = v == 0.0 ? 1e-300 : v;
            }

    std::array<int, 3> perm{0, 1, 2};
    std::vector<std::array<int, 3>> perms;
    do perms.push_back(perm);
    while (std::next_permutation(perm.begin(), perm.end()));

    std::vector<char> active(phi.size(), 0);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            for (std::int64_t k = 0; k < n; ++k)
                for (const auto& pa : perms) {
                    std::array<std::int64_t, 3> p{i, j, k};
                    std::array<std::size_t, 4> v{};
                    v[0] = idx(p[0], p[1], p[2]);
                    for (int s = 0; s < 3; ++s) {
                        ++p[pa[s]];
                        v[s + 1] = idx(p[0], p[1], p[2]);
                    }
                    int neg = 0;
                    for (auto q : v) neg += phi[q] < 0.0;
                    if (neg > 0 && neg < 4)
                        for (auto q : v) active[q] = 1;
                }
    return static_cast<int>(std::count(active.begin(), active.end(), 1));
}

const std::vector<int>& reference_sphere_dofs() {
    static const std::vector<int> dofs{448, 1864, 7552, 30412};
    return dofs;
}

std::vector<CalibrationRow> calibrate(const ExperimentConfig& cfg, int min_cells, int max_cells, std::ostream& log) {
    const Problem problem = builtin_problem(cfg.example, cfg.mass_variant);
    const double half = cfg.box_half_width.value_or(default_half_width(*problem.surface));
    const Vec3 lo = Vec3::Constant(-half), hi = Vec3::Constant(half);
    const auto& ref = reference_sphere_dofs();

    std::vector<CalibrationRow> rows;
    log << "base_cells";
    for (int l = 0; l < cfg.levels; ++l) log << ",N_level" << l;
    log << ",worst_ratio_vs_reference\n";
    for (int cells = min_cells; cells <= max_cells; ++cells) {
        CalibrationRow row;
        row.base_cells = cells;
        for (int l = 0; l < cfg.levels; ++l) {
            const int n = count_trace_dofs(lo, hi, cells << l, *problem.surface);
            row.dofs.push_back(n);
            if (static_cast<std::size_t>(l) < ref.size()) {
                const double r = static_cast<double>(n) / ref[l];
                row.worst_ratio = std::max(row.worst_ratio, std::max(r, 1.0 / r));
            }
        }
        log << cells;
        for (int n : row.dofs) log << ',' << n;
        log << ',' << row.worst_ratio << '\n';
        rows.push_back(row);
    }
    return rows;
}

// -------------------------------------------------------------------- cli

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    ParsedCommandLine cmd;
    try {
        cmd = parse_command_line(argc, argv);
    } catch (const ConfigError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    }
    if (cmd.help_only) {
        out << cmd.help_text;
        return 0;
    }

    try {
        switch (cmd.command) {
            case Command::Convergence: {
                const auto r = run_convergence_study(cmd.config, out);
                for (std::size_t k = 0; k < r.eoc_l2.size(); ++k)
                    out << "eoc " << k << "->" << k + 1 << ": L2=" << r.eoc_l2[k] << " H1=" << r.eoc_h1[k]
                        << " Linf=" << r.eoc_linf[k] << " SD=" << r.eoc_sd[k] << '\n';
                if (!r.thresholds_met) {
                    err << "convergence thresholds not met\n";
                    return 1;
                }
                return 0;
            }
            case Command::Transient: {
                const auto r = run_transient_study(cmd.config, out);
                if (!r.thresholds_met) {
                    err << "mass drift threshold not met\n";
                    return 1;
                }
                return 0;
            }
            case Command::Calibrate: {
                const auto rows = calibrate(cmd.config, 4, std::max(4, cmd.config.base_cells + 6), out);
                const auto best = std::min_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
                    return a.worst_ratio < b.worst_ratio;
                });
                out << "best base_cells=" << best->base_cells << " (worst ratio " << best->worst_ratio << ")\n";
                return 0;
            }
        }
    } catch (const ConfigError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace tracefem

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "enduro/bioenergetics.hpp"
#include "enduro/errors.hpp"
#include "enduro/nutrition.hpp"
#include "enduro/params.hpp"
#include "enduro/pmp.hpp"
#include "enduro/solver.hpp"
#include "enduro/transcription.hpp"

namespace enduro {

/// Process exit codes of the command layer.
enum ExitCode : int { exit_ok = 0, exit_input = 2, exit_max_iter = 3, exit_infeasible = 4 };

inline int exit_code(SolveStatus s) {
    switch (s) {
        case SolveStatus::converged: return exit_ok;
        case SolveStatus::max_iter: return exit_max_iter;
        case SolveStatus::infeasible: return exit_infeasible;
    }
    return exit_max_iter;
}

/// Environment variable that overrides the configured output directory.
inline constexpr const char* kOutputDirEnv = "ENDURO_OUTPUT_DIR";

/// Everything one run needs: runner, mesh, penalty weight, strategy, solver knobs.
struct ExperimentConfig {
    RunnerParams params = RunnerParams::world_record();
    double t_final = 120.0;
    int nodes = 0;  ///< 0 selects one node per minute
    double tv_weight = 0.5;
    std::string strategy = "world_record";  ///< world_record | builtin:N | file:path
    double min_velocity = 0.0;              ///< lower bound on V after the start, m/min
    SolverConfig solver;
    std::string output_dir = "out";

    [[nodiscard]] Mesh mesh() const { return nodes > 0 ? Mesh(t_final, nodes) : Mesh::per_minute(t_final); }

    /// Resolves the strategy selector for horizon t.
    [[nodiscard]] NutritionStrategy resolve_strategy(double t) const {
        if (strategy == "world_record") return world_record_strategy();
        if (strategy.rfind("builtin:", 0) == 0) {
            const std::string idx = strategy.substr(8);
            int i = -1;
            auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), i);
            if (ec != std::errc() || ptr != idx.data() + idx.size()) throw InputError("bad strategy index '" + idx + "'");
            return builtin_strategy(i, t);
        }
        if (strategy.rfind("file:", 0) == 0) return read_strategy_csv(strategy.substr(5));
        throw InputError("strategy must be world_record, builtin:N or file:path, got '" + strategy + "'");
    }

    [[nodiscard]] NutritionStrategy resolve_strategy() const { return resolve_strategy(t_final); }

    /// Output directory after the environment override.
    [[nodiscard]] std::filesystem::path out_dir() const {
        if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
        return output_dir;
    }

    void validate() const {
        params.validate();
        solver.validate();
        (void)mesh();
        if (!(tv_weight >= 0.0)) throw InputError("tv_weight must be >= 0");
        if (!(min_velocity >= 0.0) || min_velocity > params.v_max())
            throw InputError("min_velocity must lie in [0, f_max tau]");
        resolve_strategy().validate(t_final);
    }
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw InputError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

inline int parse_int(const std::string& key, const std::string& v) {
    int x = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw InputError("config key '" + key + "': expected an integer, got '" + v + "'");
    return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InputError("config key '" + key + "': expected true or false, got '" + v + "'");
}

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Applies one `key = value` setting.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    using detail::parse_bool;
    using detail::parse_double;
    using detail::parse_int;
    auto& p = cfg.params;
    auto& s = cfg.solver;
    const std::map<std::string, std::function<void(const std::string&)>> table = {
        {"mass", [&](const std::string& v) { p.set_mass(parse_double(key, v)); }},
        {"tau", [&](const std::string& v) { p.tau = parse_double(key, v); }},
        {"vvo2max", [&](const std::string& v) { p.vvo2max = parse_double(key, v); }},
        {"d", [&](const std::string& v) { p.d = parse_double(key, v); }},
        {"c4", [&](const std::string& v) { p.c4 = parse_double(key, v); }},
        {"a", [&](const std::string& v) { p.a = parse_double(key, v); }},
        {"sm", [&](const std::string& v) { p.sm = parse_double(key, v); }},
        {"f_max", [&](const std::string& v) { p.f_max = parse_double(key, v); }},
        {"eg0", [&](const std::string& v) { p.eg0 = parse_double(key, v); }},
        {"ef0", [&](const std::string& v) { p.ef0 = parse_double(key, v); }},
        {"vla", [&](const std::string& v) { p.vla = parse_vla(v); }},
        {"t_final", [&](const std::string& v) { cfg.t_final = parse_double(key, v); }},
        {"nodes", [&](const std::string& v) { cfg.nodes = parse_int(key, v); }},
        {"tv_weight", [&](const std::string& v) { cfg.tv_weight = parse_double(key, v); }},
        {"strategy", [&](const std::string& v) { cfg.strategy = v; }},
        {"min_velocity", [&](const std::string& v) { cfg.min_velocity = parse_double(key, v); }},
        {"output_dir", [&](const std::string& v) { cfg.output_dir = v; }},
        {"solver.max_outer", [&](const std::string& v) { s.max_outer = parse_int(key, v); }},
        {"solver.max_inner", [&](const std::string& v) { s.max_inner = parse_int(key, v); }},
        {"solver.tol_c", [&](const std::string& v) { s.tol_c = parse_double(key, v); }},
        {"solver.tol_o", [&](const std::string& v) { s.tol_o = parse_double(key, v); }},
        {"solver.rho_init", [&](const std::string& v) { s.rho_init = parse_double(key, v); }},
        {"solver.rho_max", [&](const std::string& v) { s.rho_max = parse_double(key, v); }},
        {"solver.rho_growth", [&](const std::string& v) { s.rho_growth = parse_double(key, v); }},
        {"solver.stall_limit", [&](const std::string& v) { s.stall_limit = parse_int(key, v); }},
        {"solver.trace", [&](const std::string& v) { s.trace = parse_bool(key, v); }},
        {"solver.inner",
         [&](const std::string& v) {
             if (v == "newton") s.inner = InnerMethod::newton;
             else if (v == "lbfgs") s.inner = InnerMethod::lbfgs;
             else throw InputError("solver.inner must be newton or lbfgs, got '" + v + "'");
         }},
    };
    const auto it = table.find(key);
    if (it == table.end()) throw InputError("unknown config key '" + key + "'");
    it->second(value);
}

/// Reads flat `key = value` lines; `#` starts a comment. Later keys win.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig cfg = {}) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw InputError("config line " + std::to_string(lineno) + ": empty key or value");
        apply_setting(cfg, key, value);
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path + "'");
    return parse_config(in);
}

/// Writes through a temporary file and renames, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out) throw InputError("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

/// Solution of one optimization run.
struct OptimizeOutcome {
    SolverReport report;
    Trajectory traj;  ///< unpacked from the solution vector
    double distance_km = 0.0;
};

/// Plateau warm start: V_k = 0.85 VVO2max after the first step, raised to
/// min_velocity if needed, with states from the velocity-driven recurrences.
inline std::vector<double> plateau_guess(const NlpProblem& prob, double min_velocity = 0.0) {
    const auto& p = prob.params();
    const double v = std::clamp(std::max(0.85 * p.vvo2max, min_velocity), 0.0, p.v_max());
    const std::vector<double> u(static_cast<std::size_t>(prob.mesh().n_steps()), v);
    auto x = prob.pack(simulate_velocity(u, prob.source(), prob.model(), prob.mesh()));
    prob.clip(x);
    return x;
}

inline OptimizeOutcome optimize(const RunnerParams& params, const NutritionStrategy& strategy, const Mesh& mesh,
                                double tv_weight, const SolverConfig& cfg, double min_velocity = 0.0) {
    strategy.validate(mesh.t_final);
    auto prob = assemble(params, strategy, mesh, tv_weight);
    if (min_velocity > 0.0) prob.set_min_velocity(min_velocity);
    OptimizeOutcome out;
    out.report = solve(prob, plateau_guess(prob, min_velocity), cfg);
    out.traj = prob.unpack(out.report.x).traj;
    out.distance_km = distance(out.traj);
    return out;
}

inline OptimizeOutcome optimize(const ExperimentConfig& cfg) {
    return optimize(cfg.params, cfg.resolve_strategy(), cfg.mesh(), cfg.tv_weight, cfg.solver, cfg.min_velocity);
}

/// One row of a table-producing command.
struct TableRow {
    std::string label;
    double t_final = 0.0;
    double vvo2max = 0.0;
    double mass = 0.0;
    Vla vla = Vla::good;
    double eg0 = 0.0;
    std::string strategy;
    int gels = 0;
    double kcal = 0.0;
    double distance_km = 0.0;
    SolveStatus status = SolveStatus::max_iter;
    std::string error;  ///< non-empty when the row could not be solved
};

inline void write_table_csv(std::ostream& out, const std::vector<TableRow>& rows) {
    using detail::fmt_num;
    out << "# t_final [min], vvo2max [m/min], mass [kg], eg0 [kJ/kg], kcal [kcal], distance [km]\n";
    out << "label,t_final,vvo2max,mass,vla,eg0,strategy,gels,kcal,distance_km,status\n";
    for (const auto& r : rows) {
        out << r.label << "," << fmt_num(r.t_final) << "," << fmt_num(r.vvo2max) << "," << fmt_num(r.mass) << ","
            << to_string(r.vla) << "," << fmt_num(r.eg0) << "," << r.strategy << "," << r.gels << ","
            << fmt_num(r.kcal) << "," << (r.error.empty() ? fmt_num(r.distance_km) : std::string()) << ","
            << (r.error.empty() ? std::string(to_string(r.status)) : "error: " + r.error) << "\n";
    }
}

/// Worst exit code over a table: infeasible beats max_iter beats ok.
inline int table_exit_code(const std::vector<TableRow>& rows) {
    int code = exit_ok;
    for (const auto& r : rows) {
        const int c = r.error.empty() ? exit_code(r.status) : exit_max_iter;
        code = std::max(code, c);
    }
    return code;
}

inline TableRow run_row(std::string label, const RunnerParams& params, const NutritionStrategy& strategy,
                        double t_final, double tv_weight, const SolverConfig& cfg) {
    TableRow row;
    row.label = std::move(label);
    row.t_final = t_final;
    row.vvo2max = params.vvo2max;
    row.mass = params.mass;
    row.vla = params.vla;
    row.eg0 = params.eg0;
    row.strategy = strategy.id;
    row.gels = static_cast<int>(strategy.events.size());
    row.kcal = strategy.total_kcal();
    try {
        const auto res = optimize(params, strategy, Mesh::per_minute(t_final), tv_weight, cfg);
        row.distance_km = res.distance_km;
        row.status = res.report.status;
    } catch (const Error& e) {
        row.error = e.what();
    }
    return row;
}

/// Catalog strategies s0..s15 at horizon t_final.
inline std::vector<TableRow> run_sweep(const RunnerParams& params, double t_final, double tv_weight,
                                       const SolverConfig& cfg) {
    std::vector<TableRow> rows;
    for (int i = 0; i < kBuiltinStrategyCount; ++i) {
        const auto s = builtin_strategy(i, t_final);
        rows.push_back(run_row(s.id, params, s, t_final, tv_weight, cfg));
    }
    return rows;
}

/// Good, average and bad VLa, each without gels and with four 100 kcal gels.
inline std::vector<TableRow> run_vla(const RunnerParams& params, double t_final, double tv_weight,
                                     const SolverConfig& cfg) {
    std::vector<TableRow> rows;
    for (int gels : {0, 4}) {
        for (Vla v : {Vla::good, Vla::average, Vla::bad}) {
            auto p = params;
            p.vla = v;
            const auto s = builtin_strategy(gels, t_final);
            rows.push_back(run_row(std::string(to_string(v)) + "_" + s.id, p, s, t_final, tv_weight, cfg));
        }
    }
    return rows;
}

/// Runner-level preset: horizon, VVO2max, mass, VLa, number of 100 kcal gels, E_G(0).
struct LevelPreset {
    double t_final;
    double vvo2max;
    double mass;
    Vla vla;
    int gels;
    double eg0;
};

inline const std::vector<LevelPreset>& level_presets() {
    static const std::vector<LevelPreset> rows = {
        {155, 320, 73, Vla::average, 4, 150}, {155, 320, 73, Vla::average, 0, 150},
        {155, 320, 73, Vla::good, 4, 150},    {155, 320, 73, Vla::bad, 4, 150},
        {180, 250, 80, Vla::average, 0, 140}, {180, 250, 80, Vla::average, 4, 140},
        {215, 200, 80, Vla::bad, 0, 140},     {210, 200, 80, Vla::average, 4, 144},
    };
    return rows;
}

inline std::vector<TableRow> run_levels(const RunnerParams& base, double tv_weight, const SolverConfig& cfg) {
    std::vector<TableRow> rows;
    int i = 0;
    for (const auto& l : level_presets()) {
        auto p = base;
        p.vvo2max = l.vvo2max;
        p.set_mass(l.mass);
        p.vla = l.vla;
        p.eg0 = l.eg0;
        rows.push_back(run_row("level" + std::to_string(++i), p, builtin_strategy(l.gels, l.t_final), l.t_final,
                               tv_weight, cfg));
    }
    return rows;
}

// ---------------------------------------------------------------- commands

namespace detail {

inline std::string render(const std::function<void(std::ostream&)>& fn) {
    std::ostringstream os;
    fn(os);
    return os.str();
}

}  // namespace detail

inline std::string join_labels(const std::vector<ArcLabel>& seq) {
    std::string out;
    for (std::size_t i = 0; i < seq.size(); ++i) out += (i ? " -> " : "") + std::string(to_string(seq[i]));
    return out;
}

inline std::string trajectory_summary(const Trajectory& traj) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "distance_km=%.3f E_F(T)=%.4f E_G(T)=%.4f N(T)=%.4f", distance(traj),
                  traj.ef.back(), traj.eg.back(), traj.n.back());
    return buf;
}

/// Simulates a force profile file; writes simulate.csv.
inline int cmd_simulate(const ExperimentConfig& cfg, const std::string& force_file, SimulationMode mode,
                        std::ostream& log) {
    cfg.validate();
    const auto f = read_force_profile(force_file);
    const auto traj = simulate(f, cfg.resolve_strategy(), Model(cfg.params), cfg.mesh(), mode);
    const auto path = cfg.out_dir() / "simulate.csv";
    write_file_atomic(path, detail::render([&](std::ostream& o) { write_trajectory_csv(o, traj); }));
    log << trajectory_summary(traj) << "\n" << "wrote " << path.string() << "\n";
    return exit_ok;
}

/// Solves one instance and runs the optimality diagnostics; writes
/// optimize_trajectory.csv and optimize_pmp.csv.
inline int cmd_optimize(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    const auto res = optimize(cfg);
    const Model model(cfg.params);
    const auto dir = cfg.out_dir();
    write_file_atomic(dir / "optimize_trajectory.csv",
                      detail::render([&](std::ostream& o) { write_trajectory_csv(o, res.traj); }));
    log << res.report.summary() << "\n" << trajectory_summary(res.traj) << "\n";
    if (res.report.status == SolveStatus::converged) {
        const auto pmp = verify_pmp(res.traj, model);
        write_file_atomic(dir / "optimize_pmp.csv", detail::render([&](std::ostream& o) {
                              write_pmp_csv(o, res.traj, pmp.adjoint, pmp.arcs);
                          }));
        log << "arcs " << join_labels(pmp.arcs.sequence()) << " (indeterminate nodes " << pmp.arcs.indeterminate_nodes
            << ") max_singular_phi_rel=" << pmp.max_singular_phi_rel << " min_eta=" << pmp.min_eta << "\n";
        for (const auto& w : pmp.glc) {
            log << "glc [" << w.start << "," << w.end << ") " << to_string(w.label) << " ";
            if (w.evaluated) log << "value=" << w.value << "\n";
            else log << "skipped: " << w.note << "\n";
        }
    }
    log << "wrote " << dir.string() << "\n";
    return exit_code(res.report.status);
}

inline int emit_table(const ExperimentConfig& cfg, const std::string& name, const std::vector<TableRow>& rows,
                      std::ostream& log) {
    const auto path = cfg.out_dir() / name;
    const std::string csv = detail::render([&](std::ostream& o) { write_table_csv(o, rows); });
    write_file_atomic(path, csv);
    log << csv << "wrote " << path.string() << "\n";
    return table_exit_code(rows);
}

inline int cmd_sweep(const ExperimentConfig& cfg, double t_final, Vla vla, std::ostream& log) {
    cfg.validate();
    auto p = cfg.params;
    p.vla = vla;
    return emit_table(cfg, "sweep.csv", run_sweep(p, t_final, cfg.tv_weight, cfg.solver), log);
}

inline int cmd_vla(const ExperimentConfig& cfg, double t_final, std::ostream& log) {
    cfg.validate();
    return emit_table(cfg, "vla.csv", run_vla(cfg.params, t_final, cfg.tv_weight, cfg.solver), log);
}

inline int cmd_levels(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    return emit_table(cfg, "levels.csv", run_levels(cfg.params, cfg.tv_weight, cfg.solver), log);
}

}  // namespace enduro

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "enduro/errors.hpp"
#include "enduro/glyc.hpp"
#include "enduro/nutrition.hpp"
#include "enduro/params.hpp"

namespace enduro {

/// Runner parameters bundled with the glyc curve they select.
class Model {
public:
    explicit Model(RunnerParams p) : params_(p), curve_(GlycCurve::for_vla(p.vla)) { params_.validate(); }
    Model(RunnerParams p, GlycCurve curve) : params_(p), curve_(std::move(curve)) { params_.validate(); }

    [[nodiscard]] const RunnerParams& params() const { return params_; }
    [[nodiscard]] const GlycCurve& curve() const { return curve_; }

    // The dynamics may be evaluated at V < 0 by unconstrained iterates; the
    // curve is held at its ratio-0 value there.
    [[nodiscard]] double glyc(double v) const { return curve_.value_unchecked(std::max(v, 0.0) / params_.vvo2max); }
    [[nodiscard]] double dglyc_dv(double v) const {
        if (v < 0.0) return 0.0;
        return curve_.slope_unchecked(v / params_.vvo2max) / params_.vvo2max;
    }

    [[nodiscard]] double d2glyc_dv2(double v) const {
        if (v < 0.0) return 0.0;
        return curve_.curvature_unchecked(v / params_.vvo2max) / (params_.vvo2max * params_.vvo2max);
    }

    /// Energy drain per unit force-velocity product, kJ/kg per (m/min^2 * m/min * min).
    [[nodiscard]] double work_scale() const { return params_.a * params_.sm; }

private:
    RunnerParams params_;
    GlycCurve curve_;
};

struct State {
    double v = 0.0;   ///< m/min
    double ef = 0.0;  ///< kJ/kg
    double eg = 0.0;  ///< kJ/kg
    double n = 0.0;   ///< kJ

    static State initial(const RunnerParams& p) { return State{0.0, p.ef0, p.eg0, 0.0}; }
};

/// One forward Euler step of the velocity / fat / glycogen / nutrition system.
inline State euler_step(const State& x, double f, double s, const Model& model, double h) {
    const auto& p = model.params();
    const double g = model.glyc(x.v);
    const double work = model.work_scale() * f * x.v;
    State next;
    next.v = x.v + h * (f - x.v / p.tau);
    next.ef = x.ef + h * (-work * (1.0 - g));
    next.eg = x.eg + h * (p.c3 * p.c4 * x.n - work * g);
    next.n = x.n + h * (s - p.d * x.n - p.c4 * x.n);
    return next;
}

/// Mesh-aligned state history produced by a force profile.
struct Trajectory {
    Mesh mesh;
    std::vector<double> f;   ///< M-1 force values, m/min^2
    std::vector<double> v;   ///< M values
    std::vector<double> ef;  ///< M values
    std::vector<double> eg;  ///< M values
    std::vector<double> n;   ///< M values

    explicit Trajectory(Mesh m = {})
        : mesh(m),
          f(static_cast<std::size_t>(m.n_steps()), 0.0),
          v(static_cast<std::size_t>(m.n_nodes), 0.0),
          ef(v),
          eg(v),
          n(v) {}

    [[nodiscard]] State state(int k) const {
        const auto i = static_cast<std::size_t>(k);
        return State{v[i], ef[i], eg[i], n[i]};
    }
    void set_state(int k, const State& x) {
        const auto i = static_cast<std::size_t>(k);
        v[i] = x.v;
        ef[i] = x.ef;
        eg[i] = x.eg;
        n[i] = x.n;
    }
};

enum class SimulationMode {
    transcription,  ///< repeated euler_step on the mesh; matches the NLP recurrences
    refined,        ///< exact velocity, sub-stepped energies; diagnostics only
};

namespace detail {

inline void check_force_shape(std::span<const double> f, std::span<const double> s, const Mesh& mesh) {
    const auto steps = static_cast<std::size_t>(mesh.n_steps());
    if (f.size() != steps)
        throw ShapeError("force profile has " + std::to_string(f.size()) + " entries, mesh needs " +
                         std::to_string(steps));
    if (s.size() != steps)
        throw ShapeError("source profile has " + std::to_string(s.size()) + " entries, mesh needs " +
                         std::to_string(steps));
}

// Exact velocity, exact nutrition, Simpson work integral over sub-steps.
inline State refined_interval(const State& x, double f, double s, const Model& model, double h) {
    const auto& p = model.params();
    const double vinf = f * p.tau;
    const double kappa = p.d + p.c4;
    const double ninf = s / kappa;
    auto vel = [&](double t) { return vinf + (x.v - vinf) * std::exp(-t / p.tau); };

    const int n_sub = std::max(1, static_cast<int>(std::ceil(h / (0.5 * p.tau))));
    const double dt = h / n_sub;
    double fat_work = 0.0;
    double gly_work = 0.0;
    for (int j = 0; j < n_sub; ++j) {
        const double t0 = j * dt;
        const double ts[3] = {t0, t0 + 0.5 * dt, t0 + dt};
        const double wts[3] = {1.0, 4.0, 1.0};
        for (int q = 0; q < 3; ++q) {
            const double vq = vel(ts[q]);
            const double g = model.glyc(vq);
            const double w = model.work_scale() * f * vq * wts[q] * dt / 6.0;
            gly_work += w * g;
            fat_work += w * (1.0 - g);
        }
    }
    const double decay = std::exp(-kappa * h);
    const double n_integral = ninf * h + (x.n - ninf) * (1.0 - decay) / kappa;

    State next;
    next.v = vel(h);
    next.n = ninf + (x.n - ninf) * decay;
    next.eg = x.eg + p.c3 * p.c4 * n_integral - gly_work;
    next.ef = x.ef - fat_work;
    return next;
}

}  // namespace detail

/// Integrates the model from the rest state under a force profile and a
/// source profile s (kJ/min per force node).
inline Trajectory simulate(std::span<const double> f, std::span<const double> s, const Model& model,
                           const Mesh& mesh, SimulationMode mode = SimulationMode::transcription) {
    detail::check_force_shape(f, s, mesh);
    Trajectory traj(mesh);
    std::copy(f.begin(), f.end(), traj.f.begin());
    const double h = mesh.h();
    State x = State::initial(model.params());
    traj.set_state(0, x);
    for (int k = 0; k < mesh.n_steps(); ++k) {
        const auto i = static_cast<std::size_t>(k);
        x = (mode == SimulationMode::transcription) ? euler_step(x, f[i], s[i], model, h)
                                                    : detail::refined_interval(x, f[i], s[i], model, h);
        traj.set_state(k + 1, x);
    }
    return traj;
}

inline Trajectory simulate(std::span<const double> f, const NutritionStrategy& strategy, const Model& model,
                           const Mesh& mesh, SimulationMode mode = SimulationMode::transcription) {
    const auto s = pulse_profile(strategy, mesh);
    return simulate(f, s, model, mesh, mode);
}

/// Drives the transcription recurrences with velocity targets V_{k+1} = u_k
/// instead of forces; f_k is recovered as (u_k - (1 - h/tau) V_k) / h. The
/// result satisfies the same recurrences as simulate() but does not amplify
/// rounding when h > 2 tau, where the force-driven velocity recurrence is
/// unstable.
inline Trajectory simulate_velocity(std::span<const double> u, std::span<const double> s, const Model& model,
                                    const Mesh& mesh) {
    detail::check_force_shape(u, s, mesh);
    const auto& p = model.params();
    const double h = mesh.h();
    Trajectory traj(mesh);
    State x = State::initial(p);
    traj.set_state(0, x);
    for (int k = 0; k < mesh.n_steps(); ++k) {
        const auto i = static_cast<std::size_t>(k);
        const double f = (u[i] - (1.0 - h / p.tau) * x.v) / h;
        traj.f[i] = f;
        x = euler_step(x, f, s[i], model, h);
        x.v = u[i];
        traj.set_state(k + 1, x);
    }
    return traj;
}

/// Left-rectangle distance h * sum_{k<M-1} V_k, in km.
inline double distance(const Trajectory& traj) {
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < traj.v.size(); ++k) sum += traj.v[k];
    return traj.mesh.h() * sum / 1000.0;
}

/// Per-step residual of d(E_F + E_G)/dt = c3 c4 N - a sm f V, in kJ/kg/min.
/// Zero up to rounding for transcription-mode trajectories.
inline std::vector<double> energy_audit(const Trajectory& traj, const Model& model) {
    const auto& p = model.params();
    const double h = traj.mesh.h();
    std::vector<double> r(traj.f.size());
    for (std::size_t k = 0; k < r.size(); ++k) {
        const double total_change = (traj.ef[k + 1] + traj.eg[k + 1]) - (traj.ef[k] + traj.eg[k]);
        const double rate = p.c3 * p.c4 * traj.n[k] - model.work_scale() * traj.f[k] * traj.v[k];
        r[k] = total_change / h - rate;
    }
    return r;
}

namespace detail {

inline std::string fmt_num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

}  // namespace detail

/// CSV with header t,f,V,E_F,E_G,N. The last row has no force entry.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    using detail::fmt_num;
    out << "# t [min], f [m/min^2], V [m/min], E_F [kJ/kg], E_G [kJ/kg], N [kJ]\n";
    out << "t,f,V,E_F,E_G,N\n";
    for (std::size_t k = 0; k < traj.v.size(); ++k) {
        out << fmt_num(traj.mesh.time(static_cast<int>(k))) << ","
            << (k < traj.f.size() ? fmt_num(traj.f[k]) : std::string()) << "," << fmt_num(traj.v[k]) << ","
            << fmt_num(traj.ef[k]) << "," << fmt_num(traj.eg[k]) << "," << fmt_num(traj.n[k]) << "\n";
    }
}

/// Reads a force profile: either one number per line, or a CSV whose header
/// names an `f` column (empty cells are skipped, so trajectory CSVs round-trip).
inline std::vector<double> read_force_profile(std::istream& in) {
    std::vector<double> f;
    std::string line;
    int column = -1;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) {
            c.erase(std::remove_if(c.begin(), c.end(), [](unsigned char ch) { return std::isspace(ch); }), c.end());
            cells.push_back(c);
        }
        if (!header_seen) {
            header_seen = true;
            auto it = std::find(cells.begin(), cells.end(), "f");
            if (it != cells.end()) {
                column = static_cast<int>(std::distance(cells.begin(), it));
                continue;
            }
            column = 0;
        }
        if (column >= static_cast<int>(cells.size()))
            throw InputError("force profile line " + std::to_string(lineno) + ": missing f column");
        const std::string& cell = cells[static_cast<std::size_t>(column)];
        if (cell.empty()) continue;
        try {
            std::size_t used = 0;
            double value = std::stod(cell, &used);
            if (used != cell.size() || !std::isfinite(value)) throw std::invalid_argument("bad");
            f.push_back(value);
        } catch (const std::exception&) {
            throw InputError("force profile line " + std::to_string(lineno) + ": bad number '" + cell + "'");
        }
    }
    return f;
}

inline std::vector<double> read_force_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open force profile '" + path + "'");
    return read_force_profile(in);
}

}  // namespace enduro

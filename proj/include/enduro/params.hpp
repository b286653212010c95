#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "enduro/errors.hpp"

namespace enduro {

/// Lactate capacity class; selects one of the frozen glyc knot tables.
enum class Vla { good, average, bad };

inline std::string_view to_string(Vla v) {
    switch (v) {
        case Vla::good: return "good";
        case Vla::average: return "average";
        case Vla::bad: return "bad";
    }
    return "good";
}

inline Vla parse_vla(std::string_view s) {
    if (s == "good") return Vla::good;
    if (s == "average" || s == "avg") return Vla::average;
    if (s == "bad") return Vla::bad;
    throw InputError("unknown VLa type '" + std::string(s) + "' (expected good, average or bad)");
}

/// Physiological and unit-conversion constants of one runner.
///
/// Units: mass kg, tau min, vvo2max m/min, d and c4 1/min, f_max m/min^2,
/// eg0 and ef0 kJ/kg. `a` converts J to kJ and `sm` carries the
/// seconds-to-minutes factor of the work terms, so the energy drain per
/// minute is a * sm * f * V kJ/kg.
struct RunnerParams {
    double mass = 55.0;
    double tau = 1.0 / 60.0;
    double vvo2max = 402.0;
    double d = 0.005;
    double c3 = 1.0 / 55.0;
    double c4 = 1.0 / 6.0;
    double a = 1.0 / 1000.0;
    double sm = 1.0 / 3600.0;
    double f_max = 36000.0;
    double eg0 = 144.0;
    double ef0 = 3439.0;
    Vla vla = Vla::good;

    /// Sets the mass and keeps c3 = 1/mass in sync.
    RunnerParams& set_mass(double m) {
        mass = m;
        c3 = 1.0 / m;
        return *this;
    }

    /// Velocity ceiling implied by the force bound (steady state of dV/dt = f - V/tau).
    [[nodiscard]] double v_max() const { return f_max * tau; }

    void validate() const {
        auto require = [](bool ok, const char* what) {
            if (!ok) throw InputError(std::string("invalid runner parameters: ") + what);
        };
        require(std::isfinite(mass) && mass > 0, "mass must be > 0");
        require(std::isfinite(tau) && tau > 0, "tau must be > 0");
        require(std::isfinite(vvo2max) && vvo2max > 0, "vvo2max must be > 0");
        require(std::isfinite(f_max) && f_max > 0, "f_max must be > 0");
        require(std::isfinite(eg0) && eg0 >= 0, "eg0 must be >= 0");
        require(std::isfinite(ef0) && ef0 >= 0, "ef0 must be >= 0");
        require(std::isfinite(d) && d >= 0, "d must be >= 0");
        require(std::isfinite(c4) && c4 > 0, "c4 must be > 0");
        require(std::isfinite(a) && a > 0, "a must be > 0");
        require(std::isfinite(sm) && sm > 0, "sm must be > 0");
        require(std::abs(c3 * mass - 1.0) <= 4e-16, "c3 * mass must equal 1");
    }

    /// Parameters of the sub-two-hour marathon runner (good VLa, 55 kg).
    static RunnerParams world_record() { return RunnerParams{}; }
};

/// Uniform time grid t_k = k * h, k = 0..n_nodes-1, spanning [0, t_final].
struct Mesh {
    double t_final = 120.0;
    int n_nodes = 121;

    Mesh() = default;
    Mesh(double t_final_min, int nodes) : t_final(t_final_min), n_nodes(nodes) {
        if (!(t_final > 0) || !std::isfinite(t_final)) throw InputError("mesh: t_final must be > 0");
        if (n_nodes < 2) throw InputError("mesh: need at least 2 nodes");
    }

    /// One node per minute: M = T + 1, h = 1 min.
    static Mesh per_minute(double t_final_min) {
        return Mesh(t_final_min, static_cast<int>(std::lround(t_final_min)) + 1);
    }

    [[nodiscard]] double h() const { return t_final / (n_nodes - 1); }
    [[nodiscard]] int n_steps() const { return n_nodes - 1; }
    [[nodiscard]] double time(int k) const { return k * h(); }
};

}  // namespace enduro

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "enduro/errors.hpp"
#include "enduro/params.hpp"

namespace enduro {

/// Dietary kilocalorie in kJ.
inline constexpr double kKjPerKcal = 4.184;

struct GelEvent {
    double time_min;
    double energy_kj;
};

/// Timed list of carbohydrate pulses entering the nutrition compartment.
struct NutritionStrategy {
    std::string id;
    std::vector<GelEvent> events;

    [[nodiscard]] double total_energy() const {
        double sum = 0.0;
        for (const auto& e : events) sum += e.energy_kj;
        return sum;
    }

    [[nodiscard]] double total_kcal() const { return total_energy() / kKjPerKcal; }

    void validate(double t_final) const {
        double prev = 0.0;
        for (const auto& e : events) {
            if (!(e.energy_kj > 0) || !std::isfinite(e.energy_kj))
                throw InputError("strategy " + id + ": gel energy must be > 0");
            if (!(e.time_min >= 0) || !std::isfinite(e.time_min))
                throw InputError("strategy " + id + ": gel time must be >= 0");
            if (e.time_min > t_final)
                throw InputError("strategy " + id + ": gel at t=" + std::to_string(e.time_min) +
                                 " lies beyond the horizon");
            if (e.time_min < prev) throw InputError("strategy " + id + ": gel times must be non-decreasing");
            prev = e.time_min;
        }
    }
};

namespace detail {

inline NutritionStrategy evenly(std::string id, int n, double kcal, double t_final) {
    NutritionStrategy s{std::move(id), {}};
    for (int i = 1; i <= n; ++i) s.events.push_back({i * t_final / (n + 1), kcal * kKjPerKcal});
    return s;
}

inline NutritionStrategy at_fractions(std::string id, std::initializer_list<std::pair<double, double>> frac_kcal,
                                      double t_final) {
    NutritionStrategy s{std::move(id), {}};
    for (auto [frac, kcal] : frac_kcal) s.events.push_back({frac * t_final, kcal * kKjPerKcal});
    return s;
}

}  // namespace detail

inline constexpr int kBuiltinStrategyCount = 16;

/// Catalog strategies s0..s15.
///
/// "Spread evenly" places n gels at i*T/(n+1); early and late single gels sit
/// at 0.15T and 0.80T.
inline NutritionStrategy builtin_strategy(int index, double t_final) {
    if (index < 0 || index >= kBuiltinStrategyCount)
        throw InputError("builtin strategy index must be in 0..15, got " + std::to_string(index));
    if (!(t_final > 0)) throw InputError("builtin strategy: t_final must be > 0");
    const std::string id = "s" + std::to_string(index);
    using detail::at_fractions;
    using detail::evenly;
    switch (index) {
        case 0: return evenly(id, 0, 100, t_final);
        case 1: return evenly(id, 1, 100, t_final);
        case 2: return evenly(id, 2, 100, t_final);
        case 3: return evenly(id, 3, 100, t_final);
        case 4: return evenly(id, 4, 100, t_final);
        case 5: return evenly(id, 5, 100, t_final);
        case 6: return evenly(id, 11, 100, t_final);
        case 7: return evenly(id, 24, 100, t_final);
        case 8: return at_fractions(id, {{0.15, 100}}, t_final);
        case 9: return at_fractions(id, {{0.80, 100}}, t_final);
        case 10: return at_fractions(id, {{0.10, 100}, {0.20, 100}, {0.75, 100}, {0.85, 100}}, t_final);
        case 11: return evenly(id, 4, 200, t_final);
        case 12: return evenly(id, 2, 250, t_final);
        case 13: return evenly(id, 4, 250, t_final);
        case 14: return evenly(id, 10, 50, t_final);
        case 15: return at_fractions(id, {{0.20, 250}, {0.50, 100}, {0.80, 250}}, t_final);
        default: break;
    }
    throw InputError("unreachable strategy index");
}

/// Four 200 kcal gels at minutes 20, 46, 71 and 97 (sub-two-hour attempt).
inline NutritionStrategy world_record_strategy() {
    NutritionStrategy s{"world_record", {}};
    for (double t : {20.0, 46.0, 71.0, 97.0}) s.events.push_back({t, 200 * kKjPerKcal});
    return s;
}

/// Mesh node receiving a gel taken at time t: nearest node, ties to the
/// earlier one, capped at the last force node M-2.
inline int pulse_node(double t, const Mesh& mesh) {
    const double x = t / mesh.h();
    int k = static_cast<int>(std::ceil(x - 0.5));
    return std::clamp(k, 0, mesh.n_nodes - 2);
}

/// Source term s_k (kJ/min) on the force nodes, k = 0..M-2.
inline std::vector<double> pulse_profile(const NutritionStrategy& strategy, const Mesh& mesh) {
    strategy.validate(mesh.t_final);
    std::vector<double> s(static_cast<std::size_t>(mesh.n_steps()), 0.0);
    const double h = mesh.h();
    for (const auto& e : strategy.events) s[static_cast<std::size_t>(pulse_node(e.time_min, mesh))] += e.energy_kj / h;
    return s;
}

/// Writes `id,time_min,energy_kJ` lines (with header).
inline void write_strategy_csv(std::ostream& out, const NutritionStrategy& s) {
    out << "id,time_min,energy_kJ\n";
    out.precision(17);
    for (const auto& e : s.events) out << s.id << "," << e.time_min << "," << e.energy_kj << "\n";
}

/// Reads `id,time_min,energy_kJ` lines. The header line and `#` comments are
/// optional; all rows must share one id.
inline NutritionStrategy read_strategy_csv(std::istream& in) {
    NutritionStrategy s;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line.erase(std::remove_if(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }),
                   line.end());
        if (line.empty() || line.rfind("id,", 0) == 0) continue;
        std::stringstream ls(line);
        std::string id, t, e;
        if (!std::getline(ls, id, ',') || !std::getline(ls, t, ',') || !std::getline(ls, e))
            throw InputError("strategy csv line " + std::to_string(lineno) + ": expected id,time_min,energy_kJ");
        if (s.id.empty()) s.id = id;
        if (id != s.id) throw InputError("strategy csv line " + std::to_string(lineno) + ": mixed strategy ids");
        try {
            std::size_t used_t = 0, used_e = 0;
            GelEvent ev{std::stod(t, &used_t), std::stod(e, &used_e)};
            if (used_t != t.size() || used_e != e.size()) throw std::invalid_argument("trailing");
            s.events.push_back(ev);
        } catch (const std::exception&) {
            throw InputError("strategy csv line " + std::to_string(lineno) + ": bad number");
        }
    }
    if (s.id.empty()) s.id = "custom";
    return s;
}

inline NutritionStrategy read_strategy_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open strategy file '" + path + "'");
    return read_strategy_csv(in);
}

}  // namespace enduro

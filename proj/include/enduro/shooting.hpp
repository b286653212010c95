#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "enduro/bioenergetics.hpp"
#include "enduro/errors.hpp"
#include "enduro/nutrition.hpp"

namespace enduro {

struct ShootingValue {
    double value = 0.0;
    std::vector<double> gradient;
};

/// Reduced objective -h sum_{k<M-1} V_k(f) + mu sum_k max(-E_G,k(f), 0)^2 and its
/// gradient in f, by the discrete adjoint of the forward-Euler step map.
inline ShootingValue shooting_gradient(std::span<const double> f, std::span<const double> s, const Model& model,
                                       const Mesh& mesh, double mu) {
    const auto traj = simulate(f, s, model, mesh);
    const auto& p = model.params();
    const double h = mesh.h();
    const double ws = model.work_scale();
    const int m = mesh.n_nodes;

    ShootingValue out;
    out.gradient.assign(f.size(), 0.0);
    for (int k = 0; k + 1 < m; ++k) out.value -= h * traj.v[k];
    auto eg_pen = [&](int k) { return std::max(-traj.eg[k], 0.0); };
    for (int k = 0; k < m; ++k) out.value += mu * eg_pen(k) * eg_pen(k);

    // costates of (V, E_G) at node k+1; E_F and N do not feed back into the objective through f
    double pv = 0.0;
    double pg = -2.0 * mu * eg_pen(m - 1);
    for (int k = m - 2; k >= 0; --k) {
        const double v = traj.v[k], fk = f[static_cast<std::size_t>(k)];
        const double g = model.glyc(v), dg = model.dglyc_dv(v);
        out.gradient[static_cast<std::size_t>(k)] = h * pv - h * ws * v * g * pg;
        const double pv_k = -h + (1.0 - h / p.tau) * pv - h * ws * fk * (g + v * dg) * pg;
        const double pg_k = pg - 2.0 * mu * eg_pen(k);
        pv = pv_k;
        pg = pg_k;
    }
    return out;
}

inline ShootingValue shooting_gradient(std::span<const double> f, const NutritionStrategy& strategy,
                                       const Model& model, const Mesh& mesh, double mu) {
    const auto s = pulse_profile(strategy, mesh);
    return shooting_gradient(f, s, model, mesh, mu);
}

struct ShootingConfig {
    double mu_init = 1.0;
    double mu_growth = 10.0;
    double mu_max = 1e6;
    int max_iter_per_stage = 20000;
    double pg_tol = 1e-6;  ///< relative to h
    double start_ratio = 0.85;  ///< initial plateau velocity as a fraction of VVO2max
};

enum class ShootingStatus { converged, max_iter, diverged };

struct ShootingResult {
    std::vector<double> f;
    std::vector<double> u;  ///< velocity targets V_1..V_{M-1}
    Trajectory traj;
    double distance_km = 0.0;
    double eg_violation = 0.0;  ///< max(-E_G), kJ/kg
    int iterations = 0;
    ShootingStatus status = ShootingStatus::max_iter;
};

namespace detail {

/// Penalized objective over velocity targets u and its gradient.
struct VelocityObjective {
    const Model& model;
    const Mesh& mesh;
    std::span<const double> s;
    double mu = 1.0;

    double operator()(std::span<const double> u, std::vector<double>& grad) const {
        const auto traj = simulate_velocity(u, s, model, mesh);
        const auto& p = model.params();
        const double h = mesh.h();
        const double ws = model.work_scale();
        const int m = mesh.n_nodes;
        const double fs = p.f_max;
        double value = 0.0;
        for (int k = 0; k + 1 < m; ++k) value -= h * traj.v[k];
        std::vector<double> p3(static_cast<std::size_t>(m) + 1, 0.0);
        for (int k = m - 1; k >= 0; --k) {
            const double viol = std::max(-traj.eg[k], 0.0);
            value += mu * viol * viol;
            p3[k] = p3[k + 1] - 2.0 * mu * viol;
        }
        // force-bound penalty, in units of f_max
        std::vector<double> pf(static_cast<std::size_t>(m - 1), 0.0);
        for (int k = 0; k + 1 < m; ++k) {
            const double fk = traj.f[k] / fs;
            const double lo = std::max(-fk, 0.0), hi = std::max(fk - 1.0, 0.0);
            value += mu * (lo * lo + hi * hi);
            pf[k] = 2.0 * mu * (hi - lo) / fs;
        }
        grad.assign(u.size(), 0.0);
        for (int j = 0; j + 1 < m; ++j) {
            double gj = 0.0;
            const double vj = traj.v[j];
            gj -= p3[j + 1] * ws * vj * model.glyc(vj);
            gj += pf[j] / h;
            if (j + 1 <= m - 2) {
                const double v1 = traj.v[j + 1], f1 = traj.f[j + 1];
                const double g1 = model.glyc(v1), dg1 = model.dglyc_dv(v1);
                gj -= h;
                gj -= p3[j + 2] * h * ws * ((1.0 / p.tau - 1.0 / h) * v1 * g1 + f1 * (g1 + v1 * dg1));
                gj += pf[j + 1] * (1.0 / p.tau - 1.0 / h);
            }
            grad[static_cast<std::size_t>(j)] = gj;
        }
        return value;
    }
};

}  // namespace detail

/// Independent optimizer over velocity targets: spectral projected gradient
/// (Barzilai-Borwein steps, nonmonotone line search) on the box 0 <= V <= f_max tau,
/// with a rising quadratic penalty on E_G < 0 and on force-bound violations.
inline ShootingResult shooting_optimize(std::span<const double> s, const Model& model, const Mesh& mesh,
                                        const ShootingConfig& cfg = {}) {
    const auto& p = model.params();
    const std::size_t n = static_cast<std::size_t>(mesh.n_steps());
    if (s.size() != n) throw ShapeError("source profile length does not match mesh");
    const double vmax = p.v_max();
    std::vector<double> u(n, std::min(cfg.start_ratio * p.vvo2max, vmax));

    detail::VelocityObjective obj{model, mesh, s, cfg.mu_init};
    ShootingResult res;
    std::vector<double> g, g_new, u_new(n);
    auto proj_norm = [&](const std::vector<double>& x, const std::vector<double>& gr) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(std::clamp(x[i] - gr[i], 0.0, vmax) - x[i]));
        return m;
    };

    bool all_converged = true;
    for (double mu = cfg.mu_init; mu <= cfg.mu_max * (1 + 1e-12); mu *= cfg.mu_growth) {
        obj.mu = mu;
        double fval = obj(u, g);
        std::vector<double> history(10, fval);
        double bb = 1.0;
        bool converged = false;
        for (int it = 0; it < cfg.max_iter_per_stage; ++it, ++res.iterations) {
            if (!std::isfinite(fval)) {
                res.status = ShootingStatus::diverged;
                return res;
            }
            if (proj_norm(u, g) <= cfg.pg_tol * mesh.h()) {
                converged = true;
                break;
            }
            const double f_ref = *std::max_element(history.begin(), history.end());
            double step = 1.0;
            double f_new = fval;
            bool accepted = false;
            for (int ls = 0; ls < 60; ++ls) {
                double dec = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    u_new[i] = std::clamp(u[i] - step * bb * g[i], 0.0, vmax);
                    dec += g[i] * (u_new[i] - u[i]);
                }
                f_new = obj(u_new, g_new);
                if (std::isfinite(f_new) && f_new <= f_ref + 1e-4 * dec) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;
            double ss = 0.0, sy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double si = u_new[i] - u[i], yi = g_new[i] - g[i];
                ss += si * si;
                sy += si * yi;
            }
            bb = (sy > 0.0) ? std::clamp(ss / sy, 1e-10, 1e10) : 1e4;
            u.swap(u_new);
            g.swap(g_new);
            fval = f_new;
            history[static_cast<std::size_t>(res.iterations) % history.size()] = fval;
        }
        all_converged = all_converged && converged;
    }

    res.u = u;
    res.traj = simulate_velocity(u, s, model, mesh);
    res.f = res.traj.f;
    res.distance_km = distance(res.traj);
    for (double e : res.traj.eg) res.eg_violation = std::max(res.eg_violation, -e);
    res.status = all_converged ? ShootingStatus::converged : ShootingStatus::max_iter;
    return res;
}

inline ShootingResult shooting_optimize(const NutritionStrategy& strategy, const Model& model, const Mesh& mesh,
                                        const ShootingConfig& cfg = {}) {
    const auto s = pulse_profile(strategy, mesh);
    return shooting_optimize(s, model, mesh, cfg);
}

}  // namespace enduro

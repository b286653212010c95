#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "enduro/bioenergetics.hpp"
#include "enduro/detail/banded.hpp"
#include "enduro/detail/projected_lbfgs.hpp"
#include "enduro/errors.hpp"
#include "enduro/transcription.hpp"

namespace enduro {

/// Inner bound-constrained method. `newton` uses the exact augmented-Lagrangian
/// Hessian (banded in node order, shifted when indefinite); `lbfgs` is the
/// matrix-free limited-memory variant.
enum class InnerMethod { newton, lbfgs };

struct SolverConfig {
    InnerMethod inner = InnerMethod::newton;
    int max_outer = 60;
    int max_inner = 200;
    double tol_c = 1e-6;  ///< scaled infinity norm of the equality residuals
    double tol_o = 1e-4;  ///< scaled projected-gradient norm of the Lagrangian
    double rho_init = 10.0;
    double rho_max = 1e12;
    double rho_growth = 10.0;
    double eta_init = 0.1;   ///< first feasibility target
    double omega_init = 0.1; ///< first inner optimality target
    int lbfgs_memory = 8;
    int stall_limit = 5;     ///< consecutive outer stalls before declaring infeasibility
    double monotone_slack = 1.1;
    bool trace = false;      ///< one stderr line per outer iteration

    void validate() const {
        auto require = [](bool ok, const char* what) {
            if (!ok) throw InputError(std::string("invalid solver config: ") + what);
        };
        require(max_outer > 0 && max_inner > 0, "iteration limits must be > 0");
        require(tol_c > 0 && tol_o > 0, "tolerances must be > 0");
        require(rho_init > 0 && rho_max >= rho_init && rho_growth > 1, "penalty schedule");
        require(eta_init > 0 && omega_init > 0, "initial targets must be > 0");
        require(lbfgs_memory > 0 && stall_limit > 0 && monotone_slack >= 1.0, "memory/stall/slack");
    }
};

enum class SolveStatus { converged, max_iter, infeasible };

inline std::string_view to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::max_iter: return "max_iter";
        case SolveStatus::infeasible: return "infeasible";
    }
    return "max_iter";
}

struct SolverReport {
    std::vector<double> x;
    double objective = 0.0;
    double distance_km = 0.0;
    double violation = 0.0;  ///< scaled
    double pg_norm = 0.0;    ///< scaled
    int outer_iterations = 0;
    int inner_iterations = 0;
    SolveStatus status = SolveStatus::max_iter;
    std::vector<double> violation_history;  ///< one entry per accepted outer iterate

    [[nodiscard]] std::string summary() const {
        char buf[200];
        std::snprintf(buf, sizeof buf, "status=%s distance_km=%.4f violation=%.3e pg=%.3e outer=%d inner=%d",
                      std::string(to_string(status)).c_str(), distance_km, violation, pg_norm, outer_iterations,
                      inner_iterations);
        return buf;
    }
};

namespace detail {

/// Variable and row scales for the transcription.
struct Scaling {
    std::vector<double> var;  ///< x = var .* y
    std::vector<double> row;  ///< scaled residual = row .* c
    double objective = 1.0;

    explicit Scaling(const NlpProblem& prob) {
        const auto& p = prob.params();
        const auto& L = prob.layout();
        const int steps = prob.mesh().n_steps();
        const double fs = p.f_max;
        const double vs = p.v_max();
        // fat use over a race is a few percent of ef0; scaling E_F by ef0 would put
        // the whole block inside the active band of its upper bound
        const double efs = std::max(p.eg0, 1.0);
        const double egs = std::max(p.eg0, 1.0);
        double ns = 0.0;
        for (double s : prob.source()) ns = std::max(ns, s * prob.mesh().h());
        ns = std::max(ns, 1.0);

        var.assign(static_cast<std::size_t>(prob.n_vars()), 1.0);
        for (int k = 0; k < L.n_force(); ++k) var[L.f(k)] = fs;
        for (int k = 0; k < L.nodes; ++k) {
            var[L.ef(k)] = efs;
            var[L.eg(k)] = egs;
            var[L.v(k)] = vs;
            var[L.n(k)] = ns;
        }
        for (int k = 0; k < L.n_split(); ++k) var[L.zeta(k)] = var[L.iota(k)] = fs;

        row.assign(static_cast<std::size_t>(prob.n_constraints()), 1.0);
        for (int k = 0; k < steps; ++k) {
            row[prob.row_v(k)] = 1.0 / vs;
            row[prob.row_n(k)] = 1.0 / ns;
            row[prob.row_ef(k)] = 1.0 / efs;
            row[prob.row_eg(k)] = 1.0 / egs;
        }
        for (int k = 0; k < L.n_split(); ++k) row[prob.row_tv(k)] = 1.0 / fs;
        row[prob.row_ic(0)] = 1.0 / vs;
        row[prob.row_ic(1)] = 1.0 / efs;
        row[prob.row_ic(2)] = 1.0 / egs;
        row[prob.row_ic(3)] = 1.0 / ns;
        objective = prob.mesh().t_final * vs;
    }
};

/// Node-major permutation of the decision vector; makes the Hessian banded.
struct NodeOrder {
    std::vector<int> pos;
    int bandwidth = 0;

    explicit NodeOrder(const NlpProblem& prob) {
        const auto& L = prob.layout();
        pos.assign(static_cast<std::size_t>(prob.n_vars()), -1);
        int next = 0;
        for (int k = 0; k < L.nodes; ++k) {
            if (k < L.n_force()) pos[L.f(k)] = next++;
            pos[L.ef(k)] = next++;
            pos[L.eg(k)] = next++;
            pos[L.v(k)] = next++;
            pos[L.n(k)] = next++;
            if (k < L.n_split()) {
                pos[L.zeta(k)] = next++;
                pos[L.iota(k)] = next++;
            }
        }
        const auto jac = prob.jacobian(prob.max_force_guess());
        for (int r = 0; r < jac.rows; ++r) {
            int lo = next, hi = 0;
            for (int q = jac.row_ptr[r]; q < jac.row_ptr[r + 1]; ++q) {
                lo = std::min(lo, pos[jac.col[q]]);
                hi = std::max(hi, pos[jac.col[q]]);
            }
            bandwidth = std::max(bandwidth, hi - lo);
        }
    }
};

inline double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

/// Scaled augmented Lagrangian of the transcription in y-space.
class AugmentedLagrangian {
public:
    AugmentedLagrangian(const NlpProblem& prob, const Scaling& sc)
        : prob_(prob), sc_(sc), x_(sc.var.size()), c_(sc.row.size()), w_(sc.row.size()), gx_(sc.var.size()) {}

    std::vector<double> lambda;
    double rho = 1.0;

    void to_x(std::span<const double> y, std::span<double> x) const {
        for (std::size_t i = 0; i < y.size(); ++i) x[i] = sc_.var[i] * y[i];
    }

    /// Scaled residuals at y.
    void residuals(std::span<const double> y, std::vector<double>& c) {
        to_x(y, x_);
        c.resize(sc_.row.size());
        prob_.constraints(x_, c);
        for (std::size_t r = 0; r < c.size(); ++r) c[r] *= sc_.row[r];
    }

    /// Exact Hessian in y-space, written into H in node order.
    void hessian(std::span<const double> y, const NodeOrder& order, BandedSpd& H) {
        to_x(y, x_);
        prob_.constraints(x_, c_);
        const auto jac = prob_.jacobian(x_);
        H.clear();
        for (int r = 0; r < jac.rows; ++r) {
            const double s = sc_.row[static_cast<std::size_t>(r)];
            const double cr = c_[static_cast<std::size_t>(r)] * s;
            w_[static_cast<std::size_t>(r)] = (lambda[static_cast<std::size_t>(r)] + rho * cr) * s;
            for (int p = jac.row_ptr[r]; p < jac.row_ptr[r + 1]; ++p) {
                const int i = jac.col[p];
                const double ai = jac.val[p] * s * sc_.var[i];
                for (int q = jac.row_ptr[r]; q <= p; ++q) {
                    const int j = jac.col[q];
                    const double aj = jac.val[q] * s * sc_.var[j];
                    H.add(order.pos[i], order.pos[j], rho * ai * aj);
                }
            }
        }
        prob_.constraint_curvature(x_, w_, [&](int i, int j, double v) {
            H.add(order.pos[i], order.pos[j], v * sc_.var[i] * sc_.var[j]);
        });
    }

    double operator()(std::span<const double> y, std::span<double> grad) {
        to_x(y, x_);
        prob_.constraints(x_, c_);
        double value = prob_.objective(x_) / sc_.objective;
        for (std::size_t r = 0; r < c_.size(); ++r) {
            const double cr = c_[r] * sc_.row[r];
            value += lambda[r] * cr + 0.5 * rho * cr * cr;
            w_[r] = (lambda[r] + rho * cr) * sc_.row[r];
        }
        prob_.objective_gradient(x_, gx_);
        for (double& gi : gx_) gi /= sc_.objective;
        prob_.jacobian_transpose_add(x_, w_, gx_);
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = gx_[i] * sc_.var[i];
        return value;
    }

private:
    const NlpProblem& prob_;
    const Scaling& sc_;
    std::vector<double> x_, c_, w_, gx_;
};

struct NewtonOptions {
    int max_iter = 200;
    double pg_tol = 1e-6;
    double armijo = 1e-4;
    double active_eps = 1e-3;
};

/// Projected Newton on the box: Newton direction on the epsilon-free
/// variables, diagonally scaled gradient on the rest, Armijo backtracking
/// along the projection arc.
inline BoxLbfgsResult minimize_box_newton(AugmentedLagrangian& al, const NodeOrder& order, std::vector<double>& y,
                                          std::span<const double> lo, std::span<const double> hi,
                                          const NewtonOptions& opt) {
    const std::size_t n = y.size();
    for (std::size_t i = 0; i < n; ++i) y[i] = std::clamp(y[i], lo[i], hi[i]);
    BandedSpd H(static_cast<int>(n), order.bandwidth);
    std::vector<double> g(n), g_new(n), y_new(n), d(n), rhs(n), diag(n);
    std::vector<char> active(n);
    BoxLbfgsResult res;
    double f = al(y, g);
    res.evaluations = 1;
    for (res.iterations = 0; res.iterations < opt.max_iter; ++res.iterations) {
        res.pg_norm = projected_gradient_norm(y, g, lo, hi);
        if (res.pg_norm <= opt.pg_tol) {
            res.converged = true;
            break;
        }
        const double eps = std::min(opt.active_eps, res.pg_norm);
        for (std::size_t i = 0; i < n; ++i) {
            const bool at_lo = y[i] <= lo[i] + eps && g[i] > 0.0;
            const bool at_hi = y[i] >= hi[i] - eps && g[i] < 0.0;
            active[i] = at_lo || at_hi || lo[i] == hi[i];
        }
        al.hessian(y, order, H);
        double max_diag = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const int pi = order.pos[i];
            diag[i] = H.get(pi, pi);
            max_diag = std::max(max_diag, std::abs(diag[i]));
        }
        // active variables take a diagonally scaled step, clipped to the box
        for (std::size_t i = 0; i < n; ++i) {
            d[i] = 0.0;
            if (active[i] && lo[i] != hi[i]) {
                const double scale = std::max(diag[i], 1e-12 * std::max(max_diag, 1.0));
                d[i] = std::clamp(y[i] - g[i] / scale, lo[i], hi[i]) - y[i];
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            if (active[i]) H.decouple(order.pos[i]);
        const BandedSpd base = H;
        double shift = 0.0;
        bool ok = H.factor();
        while (!ok) {
            shift = (shift == 0.0) ? 1e-10 * std::max(max_diag, 1.0) : shift * 10.0;
            H = base;
            for (std::size_t i = 0; i < n; ++i)
                if (!active[i]) H.add(order.pos[i], order.pos[i], shift);
            ok = H.factor();
        }
        for (std::size_t i = 0; i < n; ++i) rhs[order.pos[i]] = active[i] ? 0.0 : -g[i];
        H.solve(rhs);
        for (std::size_t i = 0; i < n; ++i)
            if (!active[i]) d[i] = rhs[order.pos[i]];

        double step = 1.0;
        double f_new = f;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            double decrease = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                y_new[i] = std::clamp(y[i] + step * d[i], lo[i], hi[i]);
                decrease += g[i] * (y_new[i] - y[i]);
            }
            f_new = al(y_new, g_new);
            ++res.evaluations;
            if (std::isfinite(f_new) && f_new <= f + opt.armijo * std::min(decrease, 0.0)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        const bool moved = y_new != y;
        y.swap(y_new);
        g.swap(g_new);
        f = f_new;
        if (!moved) break;
    }
    res.value = f;
    res.pg_norm = projected_gradient_norm(y, g, lo, hi);
    res.converged = res.converged || res.pg_norm <= opt.pg_tol;
    return res;
}

}  // namespace detail

/// Augmented-Lagrangian solve of the transcription from x0 (clipped into the box).
inline SolverReport solve(const NlpProblem& prob, std::span<const double> x0, const SolverConfig& cfg = {}) {
    cfg.validate();
    if (x0.size() != static_cast<std::size_t>(prob.n_vars()))
        throw ShapeError("starting point has " + std::to_string(x0.size()) + " entries, layout needs " +
                         std::to_string(prob.n_vars()));
    const detail::Scaling sc(prob);
    const std::size_t n = sc.var.size();
    std::vector<double> lo(n), hi(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        lo[i] = prob.lower()[i] / sc.var[i];
        hi[i] = prob.upper()[i] / sc.var[i];
        y[i] = std::clamp(x0[i] / sc.var[i], lo[i], hi[i]);
    }

    detail::AugmentedLagrangian al(prob, sc);
    const detail::NodeOrder order(prob);
    al.lambda.assign(sc.row.size(), 0.0);
    al.rho = cfg.rho_init;

    std::vector<double> c;
    al.residuals(y, c);
    double violation = detail::inf_norm(c);
    double best_violation = std::numeric_limits<double>::infinity();

    std::vector<double> grad(n);
    al(y, grad);
    // a warm start that already meets the first inner target must still move
    // before the penalty begins to grow
    double pg = detail::projected_gradient_norm(y, grad, lo, hi);
    double eta = cfg.eta_init;
    // inner solves go below tol_o because the multiplier update that follows
    // raises the projected gradient again
    const double omega_floor = 0.1 * cfg.tol_o;
    double omega = std::max(pg < cfg.omega_init ? 0.1 * pg : cfg.omega_init, omega_floor);
    // targets tighten by at least rho_growth per update, even while rho <= 1
    auto tighten = [&] { return std::max(al.rho, cfg.rho_growth); };
    int stalls = 0;
    SolverReport rep;
    detail::BoxLbfgsOptions inner;
    inner.memory = cfg.lbfgs_memory;
    inner.max_iter = cfg.max_inner;

    rep.status = SolveStatus::max_iter;

    for (int outer = 0; outer < cfg.max_outer; ++outer) {
        rep.outer_iterations = outer + 1;
        std::vector<double> y_trial = y;
        inner.pg_tol = std::max(omega, omega_floor);
        detail::BoxLbfgsResult res;
        if (cfg.inner == InnerMethod::newton) {
            detail::NewtonOptions nopt;
            nopt.max_iter = cfg.max_inner;
            nopt.pg_tol = inner.pg_tol;
            res = detail::minimize_box_newton(al, order, y_trial, lo, hi, nopt);
        } else {
            res = detail::minimize_box(al, y_trial, lo, hi, inner);
        }
        rep.inner_iterations += res.iterations;

        std::vector<double> c_trial;
        al.residuals(y_trial, c_trial);
        const double v_trial = detail::inf_norm(c_trial);

        if (cfg.trace)
            std::fprintf(stderr, "outer %d rho %.1e viol %.3e inner %d pg %.3e eta %.1e omega %.1e\n", outer, al.rho,
                         v_trial, res.iterations, res.pg_norm, eta, omega);
        const bool first = rep.violation_history.empty();
        if (!first && v_trial > cfg.monotone_slack * violation && v_trial > cfg.tol_c) {
            // reject: the multipliers overshot; retry from the last iterate with a stiffer penalty
            al.rho = std::min(al.rho * cfg.rho_growth, cfg.rho_max);
            // from an already feasible iterate a rejection only means rho is still too soft
            if (violation > cfg.tol_c && ++stalls >= cfg.stall_limit) {
                rep.status = SolveStatus::infeasible;
                break;
            }
            continue;
        }
        y.swap(y_trial);
        c.swap(c_trial);
        violation = v_trial;
        rep.violation_history.push_back(violation);

        if (violation < 0.99 * best_violation || violation <= cfg.tol_c) {
            best_violation = std::min(best_violation, violation);
            stalls = 0;
        } else if (++stalls >= cfg.stall_limit) {
            rep.status = SolveStatus::infeasible;
            break;
        }

        if (violation <= eta) {
            for (std::size_t r = 0; r < c.size(); ++r) al.lambda[r] += al.rho * c[r];
            al(y, grad);
            pg = detail::projected_gradient_norm(y, grad, lo, hi);
            if (violation <= cfg.tol_c && pg <= cfg.tol_o) {
                rep.status = SolveStatus::converged;
                break;
            }
            eta = std::max(eta / std::pow(tighten(), 0.9), cfg.tol_c);
            omega = std::max(omega / tighten(), omega_floor);
        } else {
            al.rho = std::min(al.rho * cfg.rho_growth, cfg.rho_max);
            eta = std::max(cfg.eta_init / std::pow(tighten(), 0.1), cfg.tol_c);
            omega = std::max(cfg.omega_init / tighten(), omega_floor);
        }
    }

    al(y, grad);
    pg = detail::projected_gradient_norm(y, grad, lo, hi);
    rep.x.resize(n);
    al.to_x(y, rep.x);
    // exact bound satisfaction after unscaling
    prob.clip(rep.x);
    rep.objective = prob.objective(rep.x);
    rep.distance_km = distance(prob.unpack(rep.x).traj);
    rep.violation = violation;
    rep.pg_norm = pg;
    if (rep.status == SolveStatus::converged && !(violation <= cfg.tol_c && pg <= cfg.tol_o))
        rep.status = SolveStatus::max_iter;
    return rep;
}

}  // namespace enduro

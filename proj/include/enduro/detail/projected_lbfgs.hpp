#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <span>
#include <vector>

namespace enduro::detail {

struct BoxLbfgsOptions {
    int max_iter = 2000;
    double pg_tol = 1e-6;  ///< stop when ||P(y - g) - y||_inf <= pg_tol
    int memory = 8;
    double armijo = 1e-4;
    double active_eps = 1e-3;
    double stall_rel = 1e-15;  ///< relative decrease below which an iteration counts as stalled
    int stall_limit = 20;
};

struct BoxLbfgsResult {
    double value = 0.0;
    double pg_norm = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

inline double projected_gradient_norm(std::span<const double> y, std::span<const double> g,
                                      std::span<const double> lo, std::span<const double> hi) {
    double norm = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double step = std::clamp(y[i] - g[i], lo[i], hi[i]) - y[i];
        norm = std::max(norm, std::abs(step));
    }
    return norm;
}

/// Minimizes fn over the box [lo, hi] by limited-memory BFGS restricted to
/// the epsilon-free variables, with Armijo backtracking along the projection
/// arc. fn(y, grad) returns the value and writes the gradient.
template <class Fn>
BoxLbfgsResult minimize_box(Fn&& fn, std::vector<double>& y, std::span<const double> lo, std::span<const double> hi,
                            const BoxLbfgsOptions& opt) {
    const std::size_t n = y.size();
    for (std::size_t i = 0; i < n; ++i) y[i] = std::clamp(y[i], lo[i], hi[i]);

    struct Pair {
        std::vector<double> s, t;
        double rho;
    };
    std::deque<Pair> mem;

    std::vector<double> g(n), g_new(n), y_new(n), d(n), alpha(static_cast<std::size_t>(opt.memory));
    std::vector<char> free_var(n);

    BoxLbfgsResult res;
    double f = fn(std::span<const double>(y), std::span<double>(g));
    res.evaluations = 1;
    int stalls = 0;

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
            free_var[i] = !(at_lo || at_hi || lo[i] == hi[i]);
        }
        auto dot_free = [&](const std::vector<double>& a, const std::vector<double>& b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (free_var[i]) acc += a[i] * b[i];
            return acc;
        };

        // two-loop recursion on the free subspace; bound-held variables follow -g
        for (std::size_t i = 0; i < n; ++i) d[i] = free_var[i] ? -g[i] : 0.0;
        double gamma = 1.0;
        if (!mem.empty()) {
            for (std::size_t j = mem.size(); j-- > 0;) {
                alpha[j] = mem[j].rho * dot_free(mem[j].s, d);
                for (std::size_t i = 0; i < n; ++i)
                    if (free_var[i]) d[i] -= alpha[j] * mem[j].t[i];
            }
            const auto& last = mem.back();
            const double tt = dot_free(last.t, last.t);
            const double st = dot_free(last.s, last.t);
            if (tt > 0.0 && st > 0.0) gamma = st / tt;
            for (double& di : d) di *= gamma;
            for (std::size_t j = 0; j < mem.size(); ++j) {
                const double beta = mem[j].rho * dot_free(mem[j].t, d);
                for (std::size_t i = 0; i < n; ++i)
                    if (free_var[i]) d[i] += (alpha[j] - beta) * mem[j].s[i];
            }
        } else {
            double gmax = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (free_var[i]) gmax = std::max(gmax, std::abs(g[i]));
            if (gmax > 1.0) gamma = 1.0 / gmax;
            for (double& di : d) di *= gamma;
        }
        // steepest-descent components on the eps-active set that point inward
        for (std::size_t i = 0; i < n; ++i)
            if (!free_var[i] && lo[i] != hi[i]) d[i] = -g[i] * gamma;

        double gd = 0.0;
        for (std::size_t i = 0; i < n; ++i) gd += g[i] * d[i];
        if (!(gd < 0.0)) {
            mem.clear();
            for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
            gd = 0.0;
            for (std::size_t i = 0; i < n; ++i) gd += g[i] * d[i];
        }

        double step = 1.0;
        double f_new = f;
        bool accepted = false;
        for (int ls = 0; ls < 50; ++ls) {
            double decrease = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                y_new[i] = std::clamp(y[i] + step * d[i], lo[i], hi[i]);
                decrease += g[i] * (y_new[i] - y[i]);
            }
            f_new = fn(std::span<const double>(y_new), std::span<double>(g_new));
            ++res.evaluations;
            if (std::isfinite(f_new) && f_new <= f + opt.armijo * decrease) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (mem.empty()) break;
            mem.clear();
            continue;
        }

        Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
        double st = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            p.s[i] = y_new[i] - y[i];
            p.t[i] = g_new[i] - g[i];
            st += p.s[i] * p.t[i];
            ss += p.s[i] * p.s[i];
        }
        if (st > 1e-12 * ss && ss > 0.0) {
            p.rho = 1.0 / st;
            mem.push_back(std::move(p));
            if (static_cast<int>(mem.size()) > opt.memory) mem.pop_front();
        }

        const double rel = (f - f_new) / std::max(1.0, std::abs(f));
        stalls = (rel <= opt.stall_rel) ? stalls + 1 : 0;
        y.swap(y_new);
        g.swap(g_new);
        f = f_new;
        if (stalls >= opt.stall_limit) break;
    }
    res.value = f;
    res.pg_norm = projected_gradient_norm(y, g, lo, hi);
    res.converged = res.converged || res.pg_norm <= opt.pg_tol;
    return res;
}

}  // namespace enduro::detail

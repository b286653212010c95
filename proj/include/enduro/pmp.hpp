#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "enduro/bioenergetics.hpp"
#include "enduro/errors.hpp"

namespace enduro {

/// Which discrete control the adjoint is taken with respect to. `force`
/// differentiates the step map in f (exact transpose of the forward-Euler
/// Jacobian); `velocity` treats V_{k+1} as the control and f as derived, which
/// stays bounded when h > 2 tau. `automatic` picks force when h <= 2 tau.
enum class AdjointForm { automatic, force, velocity };

inline std::string_view to_string(AdjointForm f) {
    switch (f) {
        case AdjointForm::automatic: return "automatic";
        case AdjointForm::force: return "force";
        case AdjointForm::velocity: return "velocity";
    }
    return "automatic";
}

struct PmpTolerances {
    double phi = 1e-3;  ///< relative to max |lambda1|
    double eg = 1.0;    ///< kJ/kg
    double f = 1e-3;    ///< relative to f_max
};

/// Discrete adjoints (maximization convention: lambda = d(distance)/d(state)).
/// lambda3 holds the value before the boundary jump; the value used by the
/// step into node k is lambda3[k] + h * eta[k].
struct AdjointTrajectory {
    AdjointForm form = AdjointForm::force;
    double h = 1.0;
    std::vector<double> lambda1, lambda2, lambda3, lambda4;  ///< M values
    std::vector<double> eta;                                 ///< M values
    std::vector<double> phi;                                 ///< M-1 values

    [[nodiscard]] double jumped3(std::size_t k) const { return lambda3[k] + h * eta[k]; }

    [[nodiscard]] double max_abs_lambda1() const {
        double m = 0.0;
        for (double x : lambda1) m = std::max(m, std::abs(x));
        return m;
    }
};

namespace detail {

struct Costate {
    double l1 = 0.0, l3 = 0.0, l4 = 0.0;
};

// One backward step: costate at node k from the jumped costate at node k+1.
inline Costate adjoint_step(const Model& model, double h, AdjointForm form, double v, double f, const Costate& next) {
    const auto& p = model.params();
    const double ws = model.work_scale();
    const double g = model.glyc(v), dg = model.dglyc_dv(v);
    Costate c;
    if (form == AdjointForm::force) {
        c.l1 = h + next.l1 * (1.0 - h / p.tau) - next.l3 * h * ws * f * (g + v * dg);
    } else {
        c.l1 = h - next.l3 * h * ws * ((1.0 / p.tau - 1.0 / h) * v * g + f * (g + v * dg));
    }
    c.l3 = next.l3;
    c.l4 = next.l4 * (1.0 - h * (p.d + p.c4)) + next.l3 * h * p.c3 * p.c4;
    return c;
}

inline AdjointForm resolve_form(AdjointForm form, const Model& model, double h) {
    if (form != AdjointForm::automatic) return form;
    return (h <= 2.0 * model.params().tau) ? AdjointForm::force : AdjointForm::velocity;
}

}  // namespace detail

/// Backward recursion with a prescribed multiplier sequence eta (length M).
inline AdjointTrajectory adjoint_recursion(const Trajectory& traj, const Model& model, AdjointForm form,
                                           std::span<const double> eta) {
    const int m = traj.mesh.n_nodes;
    if (eta.size() != static_cast<std::size_t>(m)) throw ShapeError("eta must have one entry per mesh node");
    const double h = traj.mesh.h();
    const double ws = model.work_scale();
    AdjointTrajectory adj;
    adj.form = detail::resolve_form(form, model, h);
    adj.h = h;
    const auto um = static_cast<std::size_t>(m);
    adj.lambda1.assign(um, 0.0);
    adj.lambda2.assign(um, 0.0);
    adj.lambda3.assign(um, 0.0);
    adj.lambda4.assign(um, 0.0);
    adj.eta.assign(eta.begin(), eta.end());
    adj.phi.assign(um - 1, 0.0);
    detail::Costate next{0.0, adj.jumped3(um - 1), 0.0};
    for (int k = m - 2; k >= 0; --k) {
        const auto uk = static_cast<std::size_t>(k);
        adj.phi[uk] = next.l1 - next.l3 * ws * traj.v[k] * model.glyc(traj.v[k]);
        const auto c = detail::adjoint_step(model, h, adj.form, traj.v[k], traj.f[k], next);
        adj.lambda1[uk] = c.l1;
        adj.lambda3[uk] = c.l3;
        adj.lambda4[uk] = c.l4;
        next = detail::Costate{c.l1, adj.jumped3(uk), c.l4};
    }
    return adj;
}

/// Backward recursion of the discrete adjoints along traj. The state-constraint
/// multiplier eta is nonzero only at nodes with E_G <= tol_eg. At such a node
/// k < M-1 it is set so phi is flat across the node (phi_{k-1} = phi_k). At the
/// final node it is set so phi vanishes in the least-squares sense over the
/// arc preceding the final boundary run, nodes 1 .. kb-3, where kb is the first
/// node of that run; if that window is empty, phi_{M-3} = phi_{M-2} is used.
inline AdjointTrajectory adjoint_backward(const Trajectory& traj, const Model& model,
                                          AdjointForm form = AdjointForm::automatic, double tol_eg = 1.0) {
    const int m = traj.mesh.n_nodes;
    const double h = traj.mesh.h();
    const double ws = model.work_scale();
    const auto um = static_cast<std::size_t>(m);
    const AdjointForm resolved = detail::resolve_form(form, model, h);

    auto w = [&](int k) { return ws * traj.v[k] * model.glyc(traj.v[k]); };
    auto boundary = [&](int k) { return traj.eg[k] <= tol_eg; };

    // Every quantity is affine in the final multiplier; one pass per trial value.
    auto pass = [&](double eta_last) {
        AdjointTrajectory adj;
        adj.form = resolved;
        adj.h = h;
        adj.lambda1.assign(um, 0.0);
        adj.lambda2.assign(um, 0.0);
        adj.lambda3.assign(um, 0.0);
        adj.lambda4.assign(um, 0.0);
        adj.eta.assign(um, 0.0);
        adj.phi.assign(um - 1, 0.0);
        adj.eta[um - 1] = eta_last;
        detail::Costate next{0.0, adj.jumped3(um - 1), 0.0};
        for (int k = m - 2; k >= 0; --k) {
            const auto uk = static_cast<std::size_t>(k);
            adj.phi[uk] = next.l1 - next.l3 * w(k);
            const auto c = detail::adjoint_step(model, h, resolved, traj.v[k], traj.f[k], next);
            adj.lambda1[uk] = c.l1;
            adj.lambda3[uk] = c.l3;
            adj.lambda4[uk] = c.l4;
            if (k >= 1 && boundary(k)) {
                const double wk1 = w(k - 1);
                if (wk1 > 0.0) adj.eta[uk] = (c.l1 - c.l3 * wk1 - adj.phi[uk]) / (h * wk1);
            }
            next = detail::Costate{c.l1, adj.jumped3(uk), c.l4};
        }
        return adj;
    };

    if (!boundary(m - 1) || m < 3) return pass(0.0);
    const auto a0 = pass(0.0);
    const auto a1 = pass(1.0);
    int kb = m - 1;
    while (kb > 0 && boundary(kb - 1)) --kb;
    double num = 0.0, den = 0.0;
    for (int k = 1; k <= kb - 3; ++k) {
        const double b = a1.phi[k] - a0.phi[k];
        num += a0.phi[k] * b;
        den += b * b;
    }
    if (den == 0.0) {
        const int i = m - 3, j = m - 2;
        num = a0.phi[i] - a0.phi[j];
        den = (a1.phi[j] - a0.phi[j]) - (a1.phi[i] - a0.phi[i]);
        return pass(den != 0.0 ? num / den : 0.0);
    }
    return pass(-num / den);
}

/// phi_k = Lambda1_{k+1} - Lambda3_{k+1} a sm V_k glyc(V_k / VVO2max), k = 0..M-2.
inline std::vector<double> switching_function(const AdjointTrajectory& adj, const Trajectory& traj,
                                              const Model& model) {
    if (adj.lambda1.size() != traj.v.size()) throw ShapeError("adjoint and trajectory lengths differ");
    std::vector<double> phi(traj.f.size());
    const double ws = model.work_scale();
    for (std::size_t k = 0; k < phi.size(); ++k)
        phi[k] = adj.lambda1[k + 1] - adj.jumped3(k + 1) * ws * traj.v[k] * model.glyc(traj.v[k]);
    return phi;
}

enum class ArcLabel { max_force, zero_force, singular_interior, singular_boundary, indeterminate };

inline std::string_view to_string(ArcLabel a) {
    switch (a) {
        case ArcLabel::max_force: return "max_force";
        case ArcLabel::zero_force: return "zero_force";
        case ArcLabel::singular_interior: return "singular_interior";
        case ArcLabel::singular_boundary: return "singular_boundary";
        case ArcLabel::indeterminate: return "indeterminate";
    }
    return "indeterminate";
}

struct ArcSegment {
    int start;  ///< first force node
    int end;    ///< one past the last force node
    ArcLabel label;
};

struct ArcSegmentation {
    std::vector<ArcLabel> node_labels;  ///< one per force node
    std::vector<ArcSegment> segments;
    int indeterminate_nodes = 0;

    [[nodiscard]] std::vector<ArcLabel> sequence() const {
        std::vector<ArcLabel> out;
        for (const auto& s : segments) out.push_back(s.label);
        return out;
    }
};

/// Labels each force node k from f_k, phi_k and E_G at node k+1 (the node the
/// control drives into) and merges runs. phi_scale is usually max |lambda1|.
inline ArcSegmentation classify_arcs(std::span<const double> phi, std::span<const double> f,
                                     std::span<const double> eg, double f_max, double phi_scale,
                                     const PmpTolerances& tol = {}) {
    if (phi.size() != f.size() || eg.size() != f.size() + 1)
        throw ShapeError("classify_arcs: need phi and f of length M-1 and E_G of length M");
    ArcSegmentation seg;
    seg.node_labels.resize(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
        ArcLabel label = ArcLabel::indeterminate;
        if (f[k] >= f_max * (1.0 - tol.f)) {
            label = ArcLabel::max_force;
        } else if (f[k] <= f_max * tol.f) {
            label = ArcLabel::zero_force;
        } else if (std::abs(phi[k]) <= tol.phi * phi_scale) {
            label = (eg[k + 1] <= tol.eg) ? ArcLabel::singular_boundary : ArcLabel::singular_interior;
        }
        seg.node_labels[k] = label;
        if (label == ArcLabel::indeterminate) ++seg.indeterminate_nodes;
        if (!seg.segments.empty() && seg.segments.back().label == label) {
            seg.segments.back().end = static_cast<int>(k) + 1;
        } else {
            seg.segments.push_back({static_cast<int>(k), static_cast<int>(k) + 1, label});
        }
    }
    return seg;
}

inline ArcSegmentation classify_arcs(const AdjointTrajectory& adj, const Trajectory& traj, const Model& model,
                                     const PmpTolerances& tol = {}) {
    return classify_arcs(adj.phi, traj.f, traj.eg, model.params().f_max, adj.max_abs_lambda1(), tol);
}

struct GlcWindow {
    int start = 0;
    int end = 0;
    ArcLabel label = ArcLabel::indeterminate;
    bool evaluated = false;
    double value = 0.0;  ///< min over interior nodes of d(phi'')/df
    std::string note;
};

/// Finite-difference estimate of d/df_k of the second time difference of phi
/// on each singular window: f_k is raised by eps * f_max, node k+1 is
/// re-stepped, and the adjoints at k+1 and k are recomputed from the stored
/// costate at k+2 (eta held fixed).
inline std::vector<GlcWindow> glc_check(const Trajectory& traj, const AdjointTrajectory& adj, const Model& model,
                                        const ArcSegmentation& seg, double eps = 1e-4, int min_window = 5) {
    const auto& p = model.params();
    const double h = traj.mesh.h();
    const double ws = model.work_scale();
    const int m = traj.mesh.n_nodes;
    const double df = eps * p.f_max;
    auto w_of = [&](double v) { return ws * v * model.glyc(v); };
    auto costate = [&](int k) { return detail::Costate{adj.lambda1[k], adj.jumped3(k), adj.lambda4[k]}; };

    std::vector<GlcWindow> out;
    for (const auto& s : seg.segments) {
        if (s.label != ArcLabel::singular_interior && s.label != ArcLabel::singular_boundary) continue;
        GlcWindow win{s.start, s.end, s.label, false, 0.0, {}};
        if (s.end - s.start < min_window) {
            win.note = "window shorter than " + std::to_string(min_window) + " nodes; skipped";
            out.push_back(win);
            continue;
        }
        double worst = std::numeric_limits<double>::infinity();
        for (int k = s.start + 1; k + 1 < s.end && k + 2 <= m - 1; ++k) {
            auto phi_dd = [&](double fk) {
                const double v1 = traj.v[k] + h * (fk - traj.v[k] / p.tau);
                const auto next2 = costate(k + 2);
                auto c1 = detail::adjoint_step(model, h, adj.form, v1, traj.f[k + 1], next2);
                c1.l3 += h * adj.eta[k + 1];
                const auto c0 = detail::adjoint_step(model, h, adj.form, traj.v[k], fk, c1);
                const double l3k = c0.l3 + h * adj.eta[k];
                const double phi_p = next2.l1 - next2.l3 * w_of(v1);
                const double phi_c = c1.l1 - c1.l3 * w_of(traj.v[k]);
                const double phi_m = c0.l1 - l3k * w_of(traj.v[k - 1]);
                return (phi_p - 2.0 * phi_c + phi_m) / (h * h);
            };
            const double fk = traj.f[k];
            const double d = (phi_dd(fk + df) - phi_dd(fk)) / df;
            worst = std::min(worst, d);
        }
        if (std::isfinite(worst)) {
            win.evaluated = true;
            win.value = worst;
        } else {
            win.note = "no interior nodes with a successor costate; skipped";
        }
        out.push_back(win);
    }
    return out;
}

/// Force holding E_G constant at zero: c3 c4 N / (a sm V glyc(V / VVO2max)).
inline double boundary_force(const State& x, const Model& model) {
    const auto& p = model.params();
    const double denom = model.work_scale() * x.v * model.glyc(x.v);
    if (!(denom > 0.0)) throw DomainError("boundary force undefined at V = 0");
    return p.c3 * p.c4 * x.n / denom;
}

/// Summary of the optimality diagnostics for one candidate trajectory.
struct PmpReport {
    AdjointTrajectory adjoint;
    ArcSegmentation arcs;
    std::vector<GlcWindow> glc;
    double max_singular_phi_rel = 0.0;  ///< max |phi| / max |lambda1| over singular nodes
    double min_eta = 0.0;
};

inline PmpReport verify_pmp(const Trajectory& traj, const Model& model, const PmpTolerances& tol = {},
                            AdjointForm form = AdjointForm::automatic) {
    PmpReport rep;
    rep.adjoint = adjoint_backward(traj, model, form, tol.eg);
    rep.arcs = classify_arcs(rep.adjoint, traj, model, tol);
    rep.glc = glc_check(traj, rep.adjoint, model, rep.arcs);
    const double scale = rep.adjoint.max_abs_lambda1();
    for (std::size_t k = 0; k < rep.arcs.node_labels.size(); ++k) {
        const auto l = rep.arcs.node_labels[k];
        if ((l == ArcLabel::singular_interior || l == ArcLabel::singular_boundary) && scale > 0.0)
            rep.max_singular_phi_rel = std::max(rep.max_singular_phi_rel, std::abs(rep.adjoint.phi[k]) / scale);
    }
    rep.min_eta = *std::min_element(rep.adjoint.eta.begin(), rep.adjoint.eta.end());
    return rep;
}

/// CSV with header node,t,f,phi,E_G,label over the force nodes.
inline void write_pmp_csv(std::ostream& out, const Trajectory& traj, const AdjointTrajectory& adj,
                          const ArcSegmentation& arcs) {
    using detail::fmt_num;
    out << "# node, t [min], f [m/min^2], phi [m per m/min^2], E_G [kJ/kg], arc label\n";
    out << "node,t,f,phi,E_G,label\n";
    for (std::size_t k = 0; k < traj.f.size(); ++k) {
        out << k << "," << fmt_num(traj.mesh.time(static_cast<int>(k))) << "," << fmt_num(traj.f[k]) << ","
            << fmt_num(adj.phi[k]) << "," << fmt_num(traj.eg[k]) << "," << to_string(arcs.node_labels[k]) << "\n";
    }
}

}  // namespace enduro

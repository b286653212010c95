// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "enduro/enduro.hpp"

using namespace enduro;

namespace {

struct Check {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string num(double x, const char* f = "%.4g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

struct Solved {
    SolverReport report;
    Trajectory traj;
};

Solved solve_instance(const RunnerParams& p, const NutritionStrategy& s, const Mesh& mesh, double tv) {
    auto prob = assemble(p, s, mesh, tv);
    Solved out;
    out.report = solve(prob, plateau_guess(prob));
    out.traj = prob.unpack(out.report.x).traj;
    return out;
}

const Solved& world_record() {
    static const Solved wr =
        solve_instance(RunnerParams::world_record(), world_record_strategy(), Mesh::per_minute(120), 0.5);
    return wr;
}

RunnerParams at_vla(Vla v) {
    auto p = RunnerParams::world_record();
    p.vla = v;
    return p;
}

const std::vector<TableRow>& sweep_rows() {
    static const auto rows = run_sweep(at_vla(Vla::average), 135.0, 0.5, SolverConfig{});
    return rows;
}

Check world_record_replication() {
    Check c;
    const auto& wr = world_record();
    const double d = distance(wr.traj);
    c.require(wr.report.status == SolveStatus::converged, "status " + std::string(to_string(wr.report.status)));
    c.require(std::abs(d - 42.5) <= 0.03 * 42.5, "distance " + num(d));
    double vlo = 1e300, vhi = -1e300, flo = 1e300, fhi = -1e300;
    for (int k = 5; k <= 115; ++k) {
        vlo = std::min(vlo, wr.traj.v[k]);
        vhi = std::max(vhi, wr.traj.v[k]);
        flo = std::min(flo, wr.traj.f[k]);
        fhi = std::max(fhi, wr.traj.f[k]);
    }
    c.require(vlo >= 0.95 * 357.0 && vhi <= 1.05 * 357.0, "velocity range " + num(vlo) + ".." + num(vhi));
    c.require(flo >= 0.95 * 2.14e4 && fhi <= 1.05 * 2.14e4, "force range " + num(flo) + ".." + num(fhi));
    const double egT = wr.traj.eg.back();
    c.require(egT <= 1.0, "E_G(T) " + num(egT));
    c.detail = "distance " + num(d, "%.3f") + " km, V " + num(vlo, "%.1f") + ".." + num(vhi, "%.1f") + ", f " +
               num(flo, "%.0f") + ".." + num(fhi, "%.0f") + ", E_G(T) " + num(egT, "%.3g") +
               (c.ok ? "" : " | " + c.detail);
    return c;
}

Check sweep_ordering() {
    static const std::array<double, 16> table = {40.0, 40.7, 41.4, 42.0, 42.6, 43.1, 46.0, 52.9,
                                                 40.7, 40.5, 42.5, 45.1, 43.2, 45.6, 43.1, 43.7};
    Check c;
    const auto& rows = sweep_rows();
    for (const auto& r : rows) c.require(r.error.empty() && r.status == SolveStatus::converged, r.label + " unsolved");
    if (!c.ok) return c;
    for (int i = 1; i <= 7; ++i)
        c.require(rows[i].distance_km > rows[i - 1].distance_km, "s" + std::to_string(i) + " not above predecessor");
    double gmin = 1e300, gmax = -1e300;
    for (int i = 1; i <= 5; ++i) {
        const double gain = rows[i].distance_km - rows[i - 1].distance_km;
        gmin = std::min(gmin, gain);
        gmax = std::max(gmax, gain);
    }
    c.require(gmin >= 0.3 && gmax <= 0.9, "per-gel gain " + num(gmin) + ".." + num(gmax));
    const auto best = std::max_element(rows.begin(), rows.end(),
                                       [](const auto& a, const auto& b) { return a.distance_km < b.distance_km; });
    c.require(best - rows.begin() == 7, "maximum is " + best->label);
    double worst = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double rel = std::abs(rows[i].distance_km - table[i]) / table[i];
        worst = std::max(worst, rel);
        c.require(rel <= 0.05, rows[i].label + " off by " + num(100 * rel) + "%");
    }
    const std::string info = "per-gel gain " + num(gmin, "%.3f") + ".." + num(gmax, "%.3f") + " km, s7 " +
                             num(rows[7].distance_km, "%.3f") + " km, worst table deviation " +
                             num(100 * worst, "%.2f") + "%";
    c.detail = c.ok ? info : info + " | " + c.detail;
    return c;
}

Check isocaloric() {
    Check c;
    const auto& rows = sweep_rows();
    const double a = rows[5].distance_km, b = rows[12].distance_km, d = rows[14].distance_km;
    const double spread = std::max({a, b, d}) - std::min({a, b, d});
    c.require(spread <= 0.3, "spread " + num(spread));
    c.detail = "s5 " + num(a, "%.3f") + ", s12 " + num(b, "%.3f") + ", s14 " + num(d, "%.3f") + " km, spread " +
               num(spread, "%.3f");
    return c;
}

Check vla_ordering() {
    Check c;
    const auto rows = run_vla(RunnerParams::world_record(), 135.0, 0.5, SolverConfig{});
    for (const auto& r : rows) c.require(r.error.empty() && r.status == SolveStatus::converged, r.label + " unsolved");
    if (!c.ok) return c;
    std::string info;
    for (int g = 0; g < 2; ++g) {
        const double good = rows[3 * g].distance_km, avg = rows[3 * g + 1].distance_km, bad = rows[3 * g + 2].distance_km;
        c.require(good > avg && avg > bad, "ordering with " + std::to_string(4 * g) + " gels");
        const double imp = (good - bad) / bad;
        c.require(imp >= 0.07 && imp <= 0.12, "improvement " + num(100 * imp) + "%");
        info += (g ? "; " : "") + std::to_string(4 * g) + " gels: " + num(good, "%.3f") + " > " + num(avg, "%.3f") +
                " > " + num(bad, "%.3f") + " (+" + num(100 * imp, "%.2f") + "%)";
    }
    c.detail = c.ok ? info : info + " | " + c.detail;
    return c;
}

Check oracle_equivalence() {
    Check c;
    std::string info;
    auto compare = [&](const std::string& name, const RunnerParams& p, const NutritionStrategy& s, const Mesh& mesh) {
        const Model model(p);
        const auto nlp = solve_instance(p, s, mesh, 0.5);
        const auto sh = shooting_optimize(s, model, mesh);
        const double dn = distance(nlp.traj);
        const double rel = std::abs(sh.distance_km - dn) / dn;
        c.require(nlp.report.status == SolveStatus::converged, name + " NLP unconverged");
        c.require(rel <= 0.005, name + " differs by " + num(100 * rel) + "%");
        info += (info.empty() ? "" : "; ") + name + ": NLP " + num(dn, "%.3f") + ", shooting " +
                num(sh.distance_km, "%.3f") + " (" + num(100 * rel, "%.3f") + "%)";
    };
    compare("world record", RunnerParams::world_record(), world_record_strategy(), Mesh::per_minute(120));
    compare("T=135 s0", at_vla(Vla::average), builtin_strategy(0, 135.0), Mesh::per_minute(135));
    c.detail = c.ok ? info : info + " | " + c.detail;
    return c;
}

// Exhaustive search over f_k in {0, 300, 600} on the M = 4, tau = 1 toy.
double grid_best(const Model& model, double tv, const Mesh& mesh) {
    const double levels[] = {0.0, 300.0, 600.0};
    const std::vector<double> s(3, 0.0);
    double best = std::numeric_limits<double>::infinity();
    for (double a : levels)
        for (double b : levels)
            for (double d : levels) {
                const std::vector<double> f{a, b, d};
                const auto t = simulate(f, s, model, mesh);
                if (*std::min_element(t.eg.begin(), t.eg.end()) < 0.0) continue;
                const double obj = -distance(t) * 1000.0 + tv * (std::abs(b - a) + std::abs(d - b));
                best = std::min(best, obj);
            }
    return best;
}

Check brute_force_equivalence() {
    Check c;
    const std::pair<double, double> cases[] = {{0.05, 0.5}, {0.02, 0.5}, {0.005, 0.1}, {1.0, 0.5}, {0.02, 0.0}};
    const Mesh mesh(3.0, 4);
    std::string info;
    for (const auto& [eg0, tv] : cases) {
        auto p = RunnerParams::world_record();
        p.tau = 1.0;
        p.f_max = 600.0;
        p.eg0 = eg0;
        const double best = grid_best(Model(p), tv, mesh);
        auto prob = assemble(p, NutritionStrategy{"none", {}}, mesh, tv);
        for (const auto& x0 : {plateau_guess(prob), prob.max_force_guess()}) {
            const auto rep = solve(prob, x0);
            c.require(rep.status == SolveStatus::converged, "eg0 " + num(eg0) + " unconverged");
            c.require(rep.objective <= best + 1e-3 * std::abs(best),
                      "eg0 " + num(eg0) + ": " + num(rep.objective) + " vs grid " + num(best));
        }
        info += (info.empty() ? "" : ", ") + num(best, "%.0f");
    }
    c.detail = "grid optima " + info + (c.ok ? "" : " | " + c.detail);
    return c;
}

Check gradient_checks() {
    Check c;
    auto p = RunnerParams::world_record();
    p.eg0 = 2.0;
    const Model model(p);
    const Mesh mesh(3.0, 181);
    std::vector<double> s(mesh.n_steps(), 0.0);
    s[40] = 500.0;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uf(0.0, p.f_max), ud(-1.0, 1.0);
    double worst_grad = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> f(mesh.n_steps()), d(mesh.n_steps()), fp, fm;
        for (auto& x : f) x = uf(rng);
        for (auto& x : d) x = ud(rng);
        const auto g = shooting_gradient(f, s, model, mesh, 50.0).gradient;
        double an = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) an += g[i] * d[i];
        const double eps = 1e-2;
        fp = f;
        fm = f;
        for (std::size_t i = 0; i < f.size(); ++i) {
            fp[i] += eps * d[i];
            fm[i] -= eps * d[i];
        }
        const double fd = (shooting_gradient(fp, s, model, mesh, 50.0).value -
                           shooting_gradient(fm, s, model, mesh, 50.0).value) / (2 * eps);
        worst_grad = std::max(worst_grad, std::abs(fd - an) / std::abs(an));
    }
    c.require(worst_grad <= 1e-5, "shooting gradient rel error " + num(worst_grad));

    const auto prob = assemble(RunnerParams::world_record(), world_record_strategy(), Mesh::per_minute(120), 0.5);
    const auto& L = prob.layout();
    const auto& rp = prob.params();
    std::uniform_real_distribution<double> u(0.05, 0.95);
    std::vector<double> x(static_cast<std::size_t>(prob.n_vars()));
    for (int k = 0; k < L.n_force(); ++k) x[L.f(k)] = u(rng) * rp.f_max;
    for (int k = 0; k < L.nodes; ++k) {
        x[L.v(k)] = u(rng) * 0.95 * rp.vvo2max;
        x[L.ef(k)] = u(rng) * rp.ef0;
        x[L.eg(k)] = u(rng) * rp.eg0;
        x[L.n(k)] = u(rng) * 800.0;
    }
    for (int k = 0; k < L.n_split(); ++k) {
        x[L.zeta(k)] = u(rng) * 1000.0;
        x[L.iota(k)] = u(rng) * 1000.0;
    }
    const auto jac = prob.jacobian(x);
    double worst_jac = 0.0;
    for (int j = 0; j < prob.n_vars(); ++j) {
        auto xp = x, xm = x;
        const double e = 1e-6 * std::max(1.0, std::abs(x[j]));
        xp[j] += e;
        xm[j] -= e;
        const auto cp = prob.constraints(xp), cm = prob.constraints(xm);
        for (int r = 0; r < jac.rows; ++r) {
            const double an = jac.at(r, j);
            worst_jac = std::max(worst_jac, std::abs((cp[r] - cm[r]) / (2 * e) - an) / std::max(1.0, std::abs(an)));
        }
    }
    c.require(worst_jac <= 1e-6, "Jacobian error " + num(worst_jac));
    c.detail = "shooting gradient rel error " + num(worst_grad, "%.2e") + " (20 points), Jacobian error " +
               num(worst_jac, "%.2e") + " (all " + std::to_string(prob.n_vars()) + " columns)" +
               (c.ok ? "" : " | " + c.detail);
    return c;
}

Check conservation_audit() {
    Check c;
    const Model model(RunnerParams::world_record());
    const Mesh mesh(3.0, 181);  // h below 2 tau keeps random force profiles bounded
    const auto s = pulse_profile(NutritionStrategy{"g", {{1.0, 836.8}, {2.0, 418.4}}}, mesh);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> dist(0.0, model.params().f_max);
    double worst = 0.0;
    auto audit = [&](const Trajectory& t) {
        double scale = 0.0;
        for (std::size_t k = 0; k < t.v.size(); ++k) scale = std::max({scale, std::abs(t.ef[k]), std::abs(t.eg[k])});
        for (double r : energy_audit(t, model)) worst = std::max(worst, std::abs(r) * t.mesh.h() / scale);
    };
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> f(static_cast<std::size_t>(mesh.n_steps()));
        for (double& x : f) x = dist(rng);
        audit(simulate(f, s, model, mesh));
    }
    const auto& wr = world_record();
    const auto src = pulse_profile(world_record_strategy(), wr.traj.mesh);
    audit(simulate(wr.traj.f, src, model, wr.traj.mesh));
    c.require(worst <= 1e-12, "worst relative residual " + num(worst));
    c.detail = "worst relative residual " + num(worst, "%.2e") + " over 101 trajectories";
    return c;
}

Check pmp_structure() {
    Check c;
    const auto& wr = world_record();
    const Model model(RunnerParams::world_record());
    const auto rep = verify_pmp(wr.traj, model);
    std::vector<ArcLabel> seq;
    for (auto l : rep.arcs.sequence())
        if (l != ArcLabel::indeterminate && (seq.empty() || seq.back() != l)) seq.push_back(l);
    const std::vector<ArcLabel> want{ArcLabel::max_force, ArcLabel::singular_interior, ArcLabel::singular_boundary};
    c.require(seq == want, "arc sequence " + join_labels(rep.arcs.sequence()));
    c.require(rep.max_singular_phi_rel <= 1e-3, "max |phi|/max|lambda1| on singular arcs " + num(rep.max_singular_phi_rel));
    double glc_min = std::numeric_limits<double>::infinity();
    int evaluated = 0;
    for (const auto& w : rep.glc) {
        if (!w.evaluated) continue;
        ++evaluated;
        glc_min = std::min(glc_min, w.value);
    }
    if (evaluated > 0) c.require(glc_min >= -1e-6, "GLC " + num(glc_min));
    const std::string info = "arcs " + join_labels(rep.arcs.sequence()) + ", max |phi| rel " +
                             num(rep.max_singular_phi_rel, "%.2e") + ", GLC windows " + std::to_string(evaluated) +
                             (evaluated ? " (min " + num(glc_min, "%.3g") + ")" : "");
    c.detail = c.ok ? info : info + " | " + c.detail;
    return c;
}

Check spline_properties() {
    Check c;
    double knot_err = 0.0, c2_err = 0.0;
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> ur(0.0, 1.5);
    int out_of_range = 0;
    for (Vla v : {Vla::good, Vla::average, Vla::bad}) {
        const auto curve = GlycCurve::for_vla(v);
        for (const auto& k : curve.knots()) knot_err = std::max(knot_err, std::abs(curve.spline(k.ratio) - k.fraction));
        const auto& seg = curve.segments();
        for (std::size_t i = 0; i + 1 < seg.size(); ++i) {
            const double l = seg[i].curvature(seg[i].width), r = seg[i + 1].curvature(0.0);
            c2_err = std::max(c2_err, std::abs(l - r) / std::max(1.0, std::abs(l)));
        }
        for (int i = 0; i < 100000; ++i) {
            const double g = curve.value(ur(rng));
            if (!(g >= 0.0 && g <= 1.0)) ++out_of_range;
        }
    }
    c.require(knot_err <= 1e-12, "knot error " + num(knot_err));
    c.require(c2_err <= 1e-9, "curvature jump " + num(c2_err));
    c.require(out_of_range == 0, std::to_string(out_of_range) + " values outside [0,1]");
    c.detail = "knot error " + num(knot_err, "%.1e") + ", curvature jump " + num(c2_err, "%.1e") +
               ", 3x1e5 ratios in [0,1.5] clamped" + (c.ok ? "" : " | " + c.detail);
    return c;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
        {"world-record replication", world_record_replication},
        {"strategy sweep ordering", sweep_ordering},
        {"isocaloric equivalence", isocaloric},
        {"VLa ordering", vla_ordering},
        {"NLP vs shooting", oracle_equivalence},
        {"brute-force toy grid", brute_force_equivalence},
        {"gradient and Jacobian checks", gradient_checks},
        {"energy conservation audit", conservation_audit},
        {"optimal-control arc structure", pmp_structure},
        {"spline properties", spline_properties},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check c;
        try {
            c = criteria[i].second();
        } catch (const std::exception& e) {
            c.ok = false;
            c.detail = std::string("exception: ") + e.what();
        }
        if (!c.ok) ++failed;
        std::printf("criterion %2zu %s: %s -- %s\n", i + 1, c.ok ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    c.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}

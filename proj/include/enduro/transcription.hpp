#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "enduro/bioenergetics.hpp"
#include "enduro/errors.hpp"
#include "enduro/nutrition.hpp"
#include "enduro/params.hpp"

namespace enduro {

/// Offsets of the decision-vector blocks
/// [f (M-1) | E_F (M) | E_G (M) | V (M) | N (M) | zeta (M-2) | iota (M-2)].
struct DecisionLayout {
    int nodes = 0;

    DecisionLayout() = default;
    explicit DecisionLayout(int m) : nodes(m) {
        if (m < 3) throw InputError("decision layout needs at least 3 mesh nodes");
    }

    [[nodiscard]] int n_force() const { return nodes - 1; }
    [[nodiscard]] int n_split() const { return nodes - 2; }

    [[nodiscard]] int f_offset() const { return 0; }
    [[nodiscard]] int ef_offset() const { return n_force(); }
    [[nodiscard]] int eg_offset() const { return ef_offset() + nodes; }
    [[nodiscard]] int v_offset() const { return eg_offset() + nodes; }
    [[nodiscard]] int n_offset() const { return v_offset() + nodes; }
    [[nodiscard]] int zeta_offset() const { return n_offset() + nodes; }
    [[nodiscard]] int iota_offset() const { return zeta_offset() + n_split(); }
    [[nodiscard]] int size() const { return iota_offset() + n_split(); }

    [[nodiscard]] int f(int k) const { return f_offset() + k; }
    [[nodiscard]] int ef(int k) const { return ef_offset() + k; }
    [[nodiscard]] int eg(int k) const { return eg_offset() + k; }
    [[nodiscard]] int v(int k) const { return v_offset() + k; }
    [[nodiscard]] int n(int k) const { return n_offset() + k; }
    [[nodiscard]] int zeta(int k) const { return zeta_offset() + k; }
    [[nodiscard]] int iota(int k) const { return iota_offset() + k; }
};

/// Compressed-row sparse matrix.
struct SparseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int> row_ptr;
    std::vector<int> col;
    std::vector<double> val;

    [[nodiscard]] std::size_t nnz() const { return val.size(); }

    void multiply(std::span<const double> x, std::span<double> y) const {
        for (int r = 0; r < rows; ++r) {
            double acc = 0.0;
            for (int p = row_ptr[r]; p < row_ptr[r + 1]; ++p) acc += val[p] * x[col[p]];
            y[r] = acc;
        }
    }

    /// y += A^T w
    void transpose_multiply_add(std::span<const double> w, std::span<double> y) const {
        for (int r = 0; r < rows; ++r) {
            const double wr = w[r];
            if (wr == 0.0) continue;
            for (int p = row_ptr[r]; p < row_ptr[r + 1]; ++p) y[col[p]] += val[p] * wr;
        }
    }

    [[nodiscard]] double at(int r, int c) const {
        for (int p = row_ptr[r]; p < row_ptr[r + 1]; ++p)
            if (col[p] == c) return val[p];
        return 0.0;
    }
};

/// Canonical split of consecutive force differences into positive and
/// negative parts: f[k+1] - f[k] = zeta[k] - iota[k], zeta * iota = 0.
struct TvSplit {
    std::vector<double> zeta;
    std::vector<double> iota;

    [[nodiscard]] double total() const {
        double t = 0.0;
        for (std::size_t k = 0; k < zeta.size(); ++k) t += zeta[k] + iota[k];
        return t;
    }
};

inline TvSplit tv_split(std::span<const double> f) {
    if (f.size() < 2) throw ShapeError("tv_split needs at least two force values");
    TvSplit out;
    out.zeta.resize(f.size() - 1);
    out.iota.resize(f.size() - 1);
    for (std::size_t k = 0; k + 1 < f.size(); ++k) {
        const double diff = f[k + 1] - f[k];
        out.zeta[k] = std::max(diff, 0.0);
        out.iota[k] = std::max(-diff, 0.0);
    }
    return out;
}

/// Trajectory plus split variables recovered from a decision vector.
struct Unpacked {
    Trajectory traj;
    TvSplit split;
};

/// Forward-Euler transcription of the maximum-distance problem.
///
/// Equality rows come in two groups. Linear: velocity recurrence, nutrition
/// recurrence, total-variation split, initial conditions. Nonlinear: fat and
/// glycogen recurrences. The objective -h sum V_k + p sum (zeta + iota) is
/// minimized subject to these rows and the box bounds.
class NlpProblem {
public:
    NlpProblem(Model model, std::vector<double> source, Mesh mesh, double tv_weight)
        : model_(std::move(model)), source_(std::move(source)), mesh_(mesh), layout_(mesh.n_nodes), tv_weight_(tv_weight) {
        if (!(tv_weight_ >= 0.0) || !std::isfinite(tv_weight_)) throw InputError("tv_weight must be >= 0");
        if (source_.size() != static_cast<std::size_t>(mesh_.n_steps()))
            throw ShapeError("source profile length does not match mesh");
        build_bounds();
        build_linear();
    }

    [[nodiscard]] const Model& model() const { return model_; }
    [[nodiscard]] const RunnerParams& params() const { return model_.params(); }
    [[nodiscard]] const Mesh& mesh() const { return mesh_; }
    [[nodiscard]] const DecisionLayout& layout() const { return layout_; }
    [[nodiscard]] const std::vector<double>& source() const { return source_; }
    [[nodiscard]] double tv_weight() const { return tv_weight_; }
    [[nodiscard]] const std::vector<double>& lower() const { return lower_; }
    [[nodiscard]] const std::vector<double>& upper() const { return upper_; }
    [[nodiscard]] const SparseMatrix& linear_matrix() const { return a_eq_; }
    [[nodiscard]] const std::vector<double>& linear_rhs() const { return b_eq_; }

    [[nodiscard]] int n_vars() const { return layout_.size(); }
    [[nodiscard]] int n_linear() const { return a_eq_.rows; }
    [[nodiscard]] int n_nonlinear() const { return 2 * mesh_.n_steps(); }
    [[nodiscard]] int n_constraints() const { return n_linear() + n_nonlinear(); }

    /// First row index of each constraint group within constraints().
    [[nodiscard]] int row_v(int k) const { return k; }
    [[nodiscard]] int row_n(int k) const { return mesh_.n_steps() + k; }
    [[nodiscard]] int row_tv(int k) const { return 2 * mesh_.n_steps() + k; }
    [[nodiscard]] int row_ic(int i) const { return 2 * mesh_.n_steps() + layout_.n_split() + i; }
    [[nodiscard]] int row_ef(int k) const { return n_linear() + k; }
    [[nodiscard]] int row_eg(int k) const { return n_linear() + mesh_.n_steps() + k; }

    [[nodiscard]] double objective(std::span<const double> x) const {
        check_dim(x);
        const double h = mesh_.h();
        double dist = 0.0;
        for (int k = 0; k + 1 < mesh_.n_nodes; ++k) dist += x[layout_.v(k)];
        double tv = 0.0;
        for (int k = 0; k < layout_.n_split(); ++k) tv += x[layout_.zeta(k)] + x[layout_.iota(k)];
        return -h * dist + tv_weight_ * tv;
    }

    /// Writes the (constant) objective gradient into g.
    void objective_gradient(std::span<const double> x, std::span<double> g) const {
        check_dim(x);
        std::fill(g.begin(), g.end(), 0.0);
        for (int k = 0; k + 1 < mesh_.n_nodes; ++k) g[layout_.v(k)] = -mesh_.h();
        for (int k = 0; k < layout_.n_split(); ++k) {
            g[layout_.zeta(k)] = tv_weight_;
            g[layout_.iota(k)] = tv_weight_;
        }
    }

    /// Fat and glycogen recurrence residuals r_F (M-1 rows) then r_G (M-1 rows).
    [[nodiscard]] std::vector<double> nonlinear_residuals(std::span<const double> x) const {
        check_dim(x);
        std::vector<double> r(static_cast<std::size_t>(n_nonlinear()));
        fill_nonlinear(x, r);
        return r;
    }

    /// A x - b for the linear rows.
    [[nodiscard]] std::vector<double> linear_residuals(std::span<const double> x) const {
        check_dim(x);
        std::vector<double> r(static_cast<std::size_t>(n_linear()));
        a_eq_.multiply(x, r);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b_eq_[i];
        return r;
    }

    /// All equality residuals: linear rows followed by nonlinear rows.
    void constraints(std::span<const double> x, std::span<double> c) const {
        check_dim(x);
        const auto nl = static_cast<std::size_t>(n_linear());
        a_eq_.multiply(x, c.first(nl));
        for (std::size_t i = 0; i < nl; ++i) c[i] -= b_eq_[i];
        fill_nonlinear(x, c.subspan(nl));
    }

    [[nodiscard]] std::vector<double> constraints(std::span<const double> x) const {
        std::vector<double> c(static_cast<std::size_t>(n_constraints()));
        constraints(x, c);
        return c;
    }

    /// Jacobian of all equality rows at x.
    [[nodiscard]] SparseMatrix jacobian(std::span<const double> x) const {
        check_dim(x);
        SparseMatrix jac;
        jac.rows = n_constraints();
        jac.cols = n_vars();
        jac.row_ptr = a_eq_.row_ptr;
        jac.col = a_eq_.col;
        jac.val = a_eq_.val;
        jac.row_ptr.reserve(static_cast<std::size_t>(jac.rows) + 1);
        auto push_row = [&jac](std::initializer_list<std::pair<int, double>> entries) {
            for (auto [c, v] : entries) {
                jac.col.push_back(c);
                jac.val.push_back(v);
            }
            jac.row_ptr.push_back(static_cast<int>(jac.val.size()));
        };
        const auto& L = layout_;
        const auto& p = params();
        const double h = mesh_.h();
        const double ws = model_.work_scale();
        for (int k = 0; k < mesh_.n_steps(); ++k) {
            const double f = x[L.f(k)], v = x[L.v(k)];
            const double g = model_.glyc(v), dg = model_.dglyc_dv(v);
            push_row({{L.ef(k), -1.0},
                      {L.ef(k + 1), 1.0},
                      {L.f(k), h * ws * v * (1.0 - g)},
                      {L.v(k), h * ws * f * ((1.0 - g) - v * dg)}});
        }
        for (int k = 0; k < mesh_.n_steps(); ++k) {
            const double f = x[L.f(k)], v = x[L.v(k)];
            const double g = model_.glyc(v), dg = model_.dglyc_dv(v);
            push_row({{L.eg(k), -1.0},
                      {L.eg(k + 1), 1.0},
                      {L.n(k), -h * p.c3 * p.c4},
                      {L.f(k), h * ws * v * g},
                      {L.v(k), h * ws * f * (g + v * dg)}});
        }
        return jac;
    }

    /// Adds J(x)^T w to out without forming the Jacobian.
    void jacobian_transpose_add(std::span<const double> x, std::span<const double> w, std::span<double> out) const {
        const auto nl = static_cast<std::size_t>(n_linear());
        a_eq_.transpose_multiply_add(w.first(nl), out);
        const auto& L = layout_;
        const auto& p = params();
        const double h = mesh_.h();
        const double ws = model_.work_scale();
        const int steps = mesh_.n_steps();
        for (int k = 0; k < steps; ++k) {
            const double wf = w[nl + static_cast<std::size_t>(k)];
            const double wg = w[nl + static_cast<std::size_t>(steps + k)];
            const double f = x[L.f(k)], v = x[L.v(k)];
            const double g = model_.glyc(v), dg = model_.dglyc_dv(v);
            out[L.ef(k)] -= wf;
            out[L.ef(k + 1)] += wf;
            out[L.eg(k)] -= wg;
            out[L.eg(k + 1)] += wg;
            out[L.n(k)] -= wg * h * p.c3 * p.c4;
            out[L.f(k)] += h * ws * v * (wf * (1.0 - g) + wg * g);
            out[L.v(k)] += h * ws * f * (wf * ((1.0 - g) - v * dg) + wg * (g + v * dg));
        }
    }

    /// Curvature of sum_r w_r c_r(x) over the nonlinear rows. Only (f_k, V_k)
    /// pairs interact; emit(i, j, value) is called with i = V_k and j = f_k or V_k.
    template <class Emit>
    void constraint_curvature(std::span<const double> x, std::span<const double> w, Emit&& emit) const {
        const auto nl = static_cast<std::size_t>(n_linear());
        const auto& L = layout_;
        const double h = mesh_.h();
        const double ws = model_.work_scale();
        const int steps = mesh_.n_steps();
        for (int k = 0; k < steps; ++k) {
            const double wf = w[nl + static_cast<std::size_t>(k)];
            const double wg = w[nl + static_cast<std::size_t>(steps + k)];
            const double f = x[L.f(k)], v = x[L.v(k)];
            const double g = model_.glyc(v), dg = model_.dglyc_dv(v), d2g = model_.d2glyc_dv2(v);
            emit(L.v(k), L.f(k), h * ws * (wf * ((1.0 - g) - v * dg) + wg * (g + v * dg)));
            emit(L.v(k), L.v(k), h * ws * f * (wg - wf) * (2.0 * dg + v * d2g));
        }
    }

    /// Decision vector holding a trajectory and an explicit split.
    [[nodiscard]] std::vector<double> pack(const Trajectory& traj, const TvSplit& split) const {
        check_traj(traj);
        if (split.zeta.size() != static_cast<std::size_t>(layout_.n_split()) ||
            split.iota.size() != static_cast<std::size_t>(layout_.n_split()))
            throw ShapeError("split length does not match mesh");
        std::vector<double> x(static_cast<std::size_t>(n_vars()));
        const auto& L = layout_;
        std::copy(traj.f.begin(), traj.f.end(), x.begin() + L.f_offset());
        std::copy(traj.ef.begin(), traj.ef.end(), x.begin() + L.ef_offset());
        std::copy(traj.eg.begin(), traj.eg.end(), x.begin() + L.eg_offset());
        std::copy(traj.v.begin(), traj.v.end(), x.begin() + L.v_offset());
        std::copy(traj.n.begin(), traj.n.end(), x.begin() + L.n_offset());
        std::copy(split.zeta.begin(), split.zeta.end(), x.begin() + L.zeta_offset());
        std::copy(split.iota.begin(), split.iota.end(), x.begin() + L.iota_offset());
        return x;
    }

    /// Decision vector with the canonical split of traj.f.
    [[nodiscard]] std::vector<double> pack(const Trajectory& traj) const { return pack(traj, tv_split(traj.f)); }

    [[nodiscard]] Unpacked unpack(std::span<const double> x) const {
        check_dim(x);
        Unpacked out{Trajectory(mesh_), {}};
        const auto& L = layout_;
        auto block = [&](int off, int len) { return x.subspan(static_cast<std::size_t>(off), static_cast<std::size_t>(len)); };
        auto copy_into = [](std::span<const double> src, std::vector<double>& dst) { dst.assign(src.begin(), src.end()); };
        copy_into(block(L.f_offset(), L.n_force()), out.traj.f);
        copy_into(block(L.ef_offset(), L.nodes), out.traj.ef);
        copy_into(block(L.eg_offset(), L.nodes), out.traj.eg);
        copy_into(block(L.v_offset(), L.nodes), out.traj.v);
        copy_into(block(L.n_offset(), L.nodes), out.traj.n);
        copy_into(block(L.zeta_offset(), L.n_split()), out.split.zeta);
        copy_into(block(L.iota_offset(), L.n_split()), out.split.iota);
        return out;
    }

    /// Starting guess with every force at f_max and every other entry zero.
    [[nodiscard]] std::vector<double> max_force_guess() const {
        std::vector<double> x(static_cast<std::size_t>(n_vars()), 0.0);
        for (int k = 0; k < layout_.n_force(); ++k) x[layout_.f(k)] = params().f_max;
        return x;
    }

    /// Starting guess consistent with every recurrence: simulate f and pack.
    [[nodiscard]] std::vector<double> simulated_guess(std::span<const double> f) const {
        return pack(simulate(f, source_, model_, mesh_));
    }

    /// Lower bound V_k >= v_min on nodes 1..M-1, forcing a minimum pace.
    void set_min_velocity(double v_min) {
        if (!(v_min >= 0.0) || v_min > params().v_max()) throw InputError("min_velocity must lie in [0, f_max tau]");
        for (int k = 1; k < layout_.nodes; ++k) lower_[layout_.v(k)] = v_min;
    }

    /// Projects x onto the box.
    void clip(std::span<double> x) const {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower_[i], upper_[i]);
    }

    /// Plain-text summary for regression snapshots.
    void dump(std::ostream& out) const {
        const auto& L = layout_;
        out << "nlp-dump v1\n";
        out << "nodes " << mesh_.n_nodes << " t_final " << mesh_.t_final << " h " << mesh_.h() << "\n";
        out << "vars " << n_vars() << " linear_rows " << n_linear() << " nonlinear_rows " << n_nonlinear() << "\n";
        out << "linear_nnz " << a_eq_.nnz() << " nonlinear_nnz " << 9 * mesh_.n_steps() << "\n";
        out << "tv_weight " << tv_weight_ << "\n";
        struct Block {
            const char* name;
            int off, len;
        };
        const Block blocks[] = {{"f", L.f_offset(), L.n_force()},   {"E_F", L.ef_offset(), L.nodes},
                                {"E_G", L.eg_offset(), L.nodes},    {"V", L.v_offset(), L.nodes},
                                {"N", L.n_offset(), L.nodes},       {"zeta", L.zeta_offset(), L.n_split()},
                                {"iota", L.iota_offset(), L.n_split()}};
        for (const auto& b : blocks) {
            int pinned = 0;
            for (int i = b.off; i < b.off + b.len; ++i) pinned += (lower_[i] == upper_[i]);
            out << "block " << b.name << " offset " << b.off << " length " << b.len << " lower "
                << lower_[b.off + b.len - 1] << " upper " << upper_[b.off + b.len - 1] << " pinned " << pinned << "\n";
        }
        double total = 0.0;
        int pulses = 0;
        for (double s : source_) {
            total += s * mesh_.h();
            pulses += (s != 0.0);
        }
        out << "source_pulses " << pulses << " source_energy_kJ " << total << "\n";
    }

private:
    void check_dim(std::span<const double> x) const {
        if (x.size() != static_cast<std::size_t>(n_vars()))
            throw ShapeError("decision vector has " + std::to_string(x.size()) + " entries, layout needs " +
                             std::to_string(n_vars()));
    }

    void check_traj(const Trajectory& t) const {
        const auto m = static_cast<std::size_t>(mesh_.n_nodes);
        if (t.f.size() != m - 1 || t.v.size() != m || t.ef.size() != m || t.eg.size() != m || t.n.size() != m)
            throw ShapeError("trajectory does not match the problem mesh");
    }

    void fill_nonlinear(std::span<const double> x, std::span<double> r) const {
        const auto& L = layout_;
        const auto& p = params();
        const double h = mesh_.h();
        const double ws = model_.work_scale();
        const int steps = mesh_.n_steps();
        for (int k = 0; k < steps; ++k) {
            const double f = x[L.f(k)], v = x[L.v(k)];
            const double g = model_.glyc(v);
            const double work = ws * f * v;
            r[k] = x[L.ef(k + 1)] - x[L.ef(k)] + h * work * (1.0 - g);
            r[steps + k] = x[L.eg(k + 1)] - x[L.eg(k)] - h * (p.c3 * p.c4 * x[L.n(k)] - work * g);
        }
    }

    void build_bounds() {
        const auto& p = params();
        const auto& L = layout_;
        const double inf = std::numeric_limits<double>::infinity();
        double gel_energy = 0.0;
        for (double s : source_) gel_energy += s * mesh_.h();
        lower_.assign(static_cast<std::size_t>(n_vars()), 0.0);
        upper_.assign(static_cast<std::size_t>(n_vars()), inf);
        for (int k = 0; k < L.n_force(); ++k) upper_[L.f(k)] = p.f_max;
        for (int k = 0; k < L.nodes; ++k) {
            upper_[L.ef(k)] = p.ef0;
            upper_[L.eg(k)] = p.eg0 + p.c3 * gel_energy;
            upper_[L.v(k)] = p.v_max();
        }
        // initial conditions pinned as bound equalities
        lower_[L.v(0)] = upper_[L.v(0)] = 0.0;
        lower_[L.ef(0)] = upper_[L.ef(0)] = p.ef0;
        lower_[L.eg(0)] = upper_[L.eg(0)] = p.eg0;
        lower_[L.n(0)] = upper_[L.n(0)] = 0.0;
    }

    void build_linear() {
        const auto& p = params();
        const auto& L = layout_;
        const double h = mesh_.h();
        SparseMatrix& A = a_eq_;
        A.cols = n_vars();
        A.row_ptr = {0};
        b_eq_.clear();
        auto push_row = [&](std::initializer_list<std::pair<int, double>> entries, double rhs) {
            for (auto [c, v] : entries) {
                A.col.push_back(c);
                A.val.push_back(v);
            }
            A.row_ptr.push_back(static_cast<int>(A.val.size()));
            b_eq_.push_back(rhs);
        };
        for (int k = 0; k < mesh_.n_steps(); ++k)
            push_row({{L.v(k), -1.0 + h / p.tau}, {L.v(k + 1), 1.0}, {L.f(k), -h}}, 0.0);
        for (int k = 0; k < mesh_.n_steps(); ++k)
            push_row({{L.n(k), -1.0 + h * (p.d + p.c4)}, {L.n(k + 1), 1.0}}, h * source_[static_cast<std::size_t>(k)]);
        for (int k = 0; k < L.n_split(); ++k)
            push_row({{L.f(k), 1.0}, {L.f(k + 1), -1.0}, {L.zeta(k), 1.0}, {L.iota(k), -1.0}}, 0.0);
        push_row({{L.v(0), 1.0}}, 0.0);
        push_row({{L.ef(0), 1.0}}, p.ef0);
        push_row({{L.eg(0), 1.0}}, p.eg0);
        push_row({{L.n(0), 1.0}}, 0.0);
        A.rows = static_cast<int>(b_eq_.size());
    }

    Model model_;
    std::vector<double> source_;
    Mesh mesh_;
    DecisionLayout layout_;
    double tv_weight_;
    std::vector<double> lower_, upper_;
    SparseMatrix a_eq_;
    std::vector<double> b_eq_;
};

/// Builds the transcription for one runner, strategy and mesh.
inline NlpProblem assemble(const RunnerParams& p, const NutritionStrategy& strategy, const Mesh& mesh,
                           double tv_weight) {
    return NlpProblem(Model(p), pulse_profile(strategy, mesh), mesh, tv_weight);
}

inline NlpProblem assemble(const Model& model, const NutritionStrategy& strategy, const Mesh& mesh,
                           double tv_weight) {
    return NlpProblem(model, pulse_profile(strategy, mesh), mesh, tv_weight);
}

/// Objective value and gradient in one call.
struct ObjectiveValue {
    double value;
    std::vector<double> gradient;
};

inline ObjectiveValue objective_eval(const NlpProblem& prob, std::span<const double> x) {
    ObjectiveValue out{prob.objective(x), std::vector<double>(x.size())};
    prob.objective_gradient(x, out.gradient);
    return out;
}

}  // namespace enduro

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "enduro/enduro.hpp"

using namespace enduro;

namespace {

RunnerParams toy_params(double eg0) {
    auto p = RunnerParams::world_record();
    p.tau = 1.0;
    p.f_max = 600.0;
    p.eg0 = eg0;
    return p;
}

const NutritionStrategy kNoGels{"none", {}};

struct ToyCase {
    double eg0;
    double tv;
    double best;  // brute-force optimum over forces {0, 300, 600}, M = 4
};

class ToyGrid : public ::testing::TestWithParam<ToyCase> {};

const SolverReport& world_record_solution() {
    static const SolverReport rep = [] {
        auto prob = assemble(RunnerParams::world_record(), world_record_strategy(), Mesh::per_minute(120), 0.5);
        return solve(prob, plateau_guess(prob));
    }();
    return rep;
}

const NlpProblem& world_record_problem() {
    static const NlpProblem prob =
        assemble(RunnerParams::world_record(), world_record_strategy(), Mesh::per_minute(120), 0.5);
    return prob;
}

}  // namespace

TEST_P(ToyGrid, ReachesGridOptimumFromBothStarts) {
    const auto c = GetParam();
    auto prob = assemble(toy_params(c.eg0), kNoGels, Mesh(3.0, 4), c.tv);
    for (const auto& x0 : {plateau_guess(prob), prob.max_force_guess()}) {
        const auto rep = solve(prob, x0);
        ASSERT_EQ(rep.status, SolveStatus::converged) << rep.summary();
        EXPECT_LE(rep.objective, c.best + 1e-3 * std::abs(c.best)) << rep.summary();
    }
}

INSTANTIATE_TEST_SUITE_P(Solver, ToyGrid,
                         ::testing::Values(ToyCase{0.05, 0.5, -600.0}, ToyCase{0.02, 0.5, -450.0},
                                           ToyCase{0.005, 0.1, -540.0}, ToyCase{1.0, 0.5, -1200.0}));

TEST(Solver, WorldRecordDistanceAndPlateau) {
    const auto& rep = world_record_solution();
    ASSERT_EQ(rep.status, SolveStatus::converged) << rep.summary();
    EXPECT_NEAR(rep.distance_km, 42.5, 0.03 * 42.5);
    const auto t = world_record_problem().unpack(rep.x).traj;
    for (int k = 5; k <= 115; ++k) EXPECT_NEAR(t.f[k], 2.14e4, 0.05 * 2.14e4) << "k=" << k;
    EXPECT_LE(t.eg.back(), 1.0);
    EXPECT_GE(t.eg.back(), -1e-6);
}

TEST(Solver, BoundsHoldExactly) {
    const auto& rep = world_record_solution();
    const auto& prob = world_record_problem();
    for (std::size_t i = 0; i < rep.x.size(); ++i) {
        EXPECT_GE(rep.x[i], prob.lower()[i]) << i;
        EXPECT_LE(rep.x[i], prob.upper()[i]) << i;
    }
}

TEST(Solver, SplitComplementarity) {
    const auto& prob = world_record_problem();
    const auto u = prob.unpack(world_record_solution().x);
    const double fmax = prob.params().f_max;
    for (std::size_t k = 0; k < u.split.zeta.size(); ++k)
        EXPECT_LE(std::min(u.split.zeta[k], u.split.iota[k]), 1e-6 * fmax) << k;
}

TEST(Solver, ViolationHistoryIsMonotoneWithinSlack) {
    const auto& h = world_record_solution().violation_history;
    ASSERT_GE(h.size(), 2u);
    for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i], 1.1 * h[i - 1] + 1e-12) << i;
}

TEST(Solver, ConvergedImpliesTolerancesMet) {
    SolverConfig cfg;
    const auto& rep = world_record_solution();
    ASSERT_EQ(rep.status, SolveStatus::converged);
    EXPECT_LE(rep.violation, cfg.tol_c);
    EXPECT_LE(rep.pg_norm, cfg.tol_o);
}

TEST(Solver, Deterministic) {
    auto prob = assemble(RunnerParams::world_record(), world_record_strategy(), Mesh::per_minute(120), 0.5);
    const auto a = solve(prob, plateau_guess(prob));
    const auto b = solve(prob, plateau_guess(prob));
    ASSERT_EQ(a.x.size(), b.x.size());
    for (std::size_t i = 0; i < a.x.size(); ++i) ASSERT_EQ(a.x[i], b.x[i]) << i;
    EXPECT_EQ(a.outer_iterations, b.outer_iterations);
    EXPECT_EQ(a.inner_iterations, b.inner_iterations);
}

TEST(Solver, MaxForceStartAlsoConverges) {
    auto prob = assemble(RunnerParams::world_record(), world_record_strategy(), Mesh::per_minute(120), 0.5);
    const auto rep = solve(prob, prob.max_force_guess());
    ASSERT_EQ(rep.status, SolveStatus::converged) << rep.summary();
    EXPECT_NEAR(rep.distance_km, world_record_solution().distance_km, 1e-3);
}

TEST(Solver, OuterLimitGivesMaxIter) {
    auto prob = assemble(RunnerParams::world_record(), world_record_strategy(), Mesh::per_minute(120), 0.5);
    SolverConfig cfg;
    cfg.max_outer = 1;
    const auto rep = solve(prob, plateau_guess(prob), cfg);
    EXPECT_EQ(rep.status, SolveStatus::max_iter);
    EXPECT_EQ(rep.outer_iterations, 1);
}

TEST(Solver, NoGlycogenWithMinimumPaceIsInfeasible) {
    auto p = RunnerParams::world_record();
    p.eg0 = 0.0;
    auto prob = assemble(p, kNoGels, Mesh::per_minute(120), 0.5);
    prob.set_min_velocity(100.0);
    const auto rep = solve(prob, plateau_guess(prob, 100.0));
    EXPECT_EQ(rep.status, SolveStatus::infeasible) << rep.summary();
}

TEST(Solver, HugeVariationWeightFreezesForce) {
    auto prob = assemble(RunnerParams::world_record(), kNoGels, Mesh::per_minute(120), 1e6);
    const auto rep = solve(prob, plateau_guess(prob));
    ASSERT_EQ(rep.status, SolveStatus::converged) << rep.summary();
    const auto t = prob.unpack(rep.x).traj;
    const double lo = *std::min_element(t.f.begin() + 1, t.f.end());
    const double hi = *std::max_element(t.f.begin() + 1, t.f.end());
    EXPECT_LE(hi - lo, 1e-4 * prob.params().f_max);
}

TEST(Solver, LargeVariationWeightGivesFlatPlateau) {
    auto prob = assemble(RunnerParams::world_record(), kNoGels, Mesh::per_minute(120), 1.5);
    const auto rep = solve(prob, plateau_guess(prob));
    ASSERT_EQ(rep.status, SolveStatus::converged) << rep.summary();
    const auto t = prob.unpack(rep.x).traj;
    const double lo = *std::min_element(t.f.begin() + 1, t.f.end());
    const double hi = *std::max_element(t.f.begin() + 1, t.f.end());
    EXPECT_GT(lo, 1.5e4);
    EXPECT_LE(hi - lo, 1e-4 * hi);
    EXPECT_NEAR(rep.distance_km, 38.5189, 1e-3);
}

TEST(Solver, LbfgsInnerMethodReachesToyOptimum) {
    auto prob = assemble(toy_params(0.02), kNoGels, Mesh(3.0, 4), 0.5);
    SolverConfig cfg;
    cfg.inner = InnerMethod::lbfgs;
    cfg.max_inner = 2000;
    const auto rep = solve(prob, plateau_guess(prob), cfg);
    ASSERT_EQ(rep.status, SolveStatus::converged) << rep.summary();
    EXPECT_LE(rep.objective, -450.0 + 0.45);
}

TEST(Solver, RejectsBadConfigAndShape) {
    auto prob = assemble(toy_params(0.02), kNoGels, Mesh(3.0, 4), 0.5);
    SolverConfig cfg;
    cfg.tol_c = -1.0;
    EXPECT_THROW(solve(prob, plateau_guess(prob), cfg), InputError);
    cfg = {};
    cfg.max_outer = 0;
    EXPECT_THROW(solve(prob, plateau_guess(prob), cfg), InputError);
    const std::vector<double> short_x(3, 0.0);
    EXPECT_THROW(solve(prob, short_x), ShapeError);
}

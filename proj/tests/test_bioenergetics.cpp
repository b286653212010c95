#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "enduro/bioenergetics.hpp"

using namespace enduro;

namespace {

Model constant_glyc_model(double g, RunnerParams p = RunnerParams::world_record()) {
    return Model(p, GlycCurve({{0.0, g}, {1.0, g}}));
}

std::vector<double> plateau_profile(int steps, double v, double tau, double h) {
    std::vector<double> f(static_cast<std::size_t>(steps), v / tau);
    f[0] = v / h;
    return f;
}

}  // namespace

TEST(EulerStep, FixedPointLeavesVelocityUnchanged) {
    const Model m(RunnerParams::world_record());
    const State x{357.0, 3000.0, 100.0, 0.0};
    EXPECT_EQ(euler_step(x, 357.0 / m.params().tau, 0.0, m, 1.0).v, 357.0);
    EXPECT_EQ(euler_step(x, 21420.0, 0.0, m, 1.0).v, 357.0);
}

TEST(EulerStep, RestStateIsStationary) {
    const Model m(RunnerParams::world_record());
    const State x = State::initial(m.params());
    const State y = euler_step(x, 0.0, 0.0, m, 1.0);
    EXPECT_EQ(y.v, x.v);
    EXPECT_EQ(y.ef, x.ef);
    EXPECT_EQ(y.eg, x.eg);
    EXPECT_EQ(y.n, x.n);
}

TEST(EulerStep, EnergyDrainAtPlateau) {
    const Model m = constant_glyc_model(0.80);
    const State x{357.0, 3000.0, 100.0, 0.0};
    const State y = euler_step(x, 21420.0, 0.0, m, 1.0);
    EXPECT_NEAR(y.eg - x.eg, -1.69932, 1e-12);
    EXPECT_NEAR(y.ef - x.ef, -0.42483, 1e-12);
}

TEST(EulerStep, NutritionDecay) {
    const Model m(RunnerParams::world_record());
    const State y = euler_step(State{0.0, 0.0, 0.0, 418.4}, 0.0, 0.0, m, 1.0);
    EXPECT_NEAR(y.n, 346.5746666666667, 1e-10);
}

TEST(Simulate, ZeroForceStaysAtRest) {
    const Model m(RunnerParams::world_record());
    const Mesh mesh = Mesh::per_minute(120);
    const std::vector<double> f(120, 0.0), s(120, 0.0);
    const auto t = simulate(f, s, m, mesh);
    for (int k = 0; k < mesh.n_nodes; ++k) {
        EXPECT_EQ(t.v[k], 0.0);
        EXPECT_EQ(t.ef[k], m.params().ef0);
        EXPECT_EQ(t.eg[k], m.params().eg0);
        EXPECT_EQ(t.n[k], 0.0);
    }
    EXPECT_EQ(distance(t), 0.0);
}

TEST(Simulate, PlateauWithRaceGels) {
    const Model m(RunnerParams::world_record());
    const Mesh mesh = Mesh::per_minute(120);
    const auto t = simulate(plateau_profile(120, 357.0, m.params().tau, 1.0), world_record_strategy(), m, mesh);
    EXPECT_NEAR(distance(t), 42.483, 1e-9);
    EXPECT_NEAR(t.eg.back(), 0.0, 1.0);
}

TEST(Simulate, SingleGelLongHorizonGain) {
    // closed form c4 / (c4 + d) * E / m of the geometric uptake series
    const Model m(RunnerParams::world_record());
    const Mesh mesh = Mesh::per_minute(2000);
    const std::vector<double> f(2000, 0.0);
    const NutritionStrategy gel{"one", {{0.0, 418.4}}};
    const auto t = simulate(f, gel, m, mesh);
    EXPECT_NEAR(t.eg.back() - m.params().eg0, 7.385701676963813, 1e-9);
    const std::vector<double> fine(200000, 0.0);
    const auto r = simulate(fine, gel, m, Mesh(2000.0, 200001), SimulationMode::refined);
    EXPECT_NEAR(r.eg.back() - m.params().eg0, 7.385701676963813, 1e-6);
}

TEST(Simulate, ShapeMismatchThrows) {
    const Model m(RunnerParams::world_record());
    const std::vector<double> f(10, 0.0), s(120, 0.0);
    EXPECT_THROW(simulate(f, s, m, Mesh::per_minute(120)), ShapeError);
}

TEST(Simulate, RefinedConvergesToTranscriptionAtFirstOrder) {
    const Model m(RunnerParams::world_record());
    double prev = 0.0;
    for (int nodes : {61, 121, 241, 481}) {
        const Mesh mesh(1.0, nodes);
        const std::vector<double> f(static_cast<std::size_t>(nodes - 1), 20000.0), s(f.size(), 0.0);
        const double gap = distance(simulate(f, s, m, mesh)) - distance(simulate(f, s, m, mesh, SimulationMode::refined));
        if (prev != 0.0) {
            const double ratio = prev / gap;
            EXPECT_GT(ratio, 1.8);
            EXPECT_LT(ratio, 2.3);
        }
        prev = gap;
    }
}

TEST(SimulateVelocity, SatisfiesTheSameRecurrences) {
    const Model m(RunnerParams::world_record());
    const Mesh mesh = Mesh::per_minute(120);
    const auto s = pulse_profile(world_record_strategy(), mesh);
    std::vector<double> u(120);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = 340.0 + 10.0 * std::sin(0.1 * static_cast<double>(k));
    const auto t = simulate_velocity(u, s, m, mesh);
    for (int k = 0; k < mesh.n_steps(); ++k) {
        const State y = euler_step(t.state(k), t.f[k], s[k], m, mesh.h());
        EXPECT_NEAR(y.v, t.v[k + 1], 1e-9 * 600.0);
        EXPECT_EQ(y.eg, t.eg[k + 1]);
        EXPECT_EQ(y.ef, t.ef[k + 1]);
        EXPECT_EQ(y.n, t.n[k + 1]);
    }
}

TEST(Distance, ConstantVelocity) {
    Trajectory t(Mesh::per_minute(120));
    std::fill(t.v.begin(), t.v.end(), 357.0);
    EXPECT_NEAR(distance(t), 42.84, 1e-12);
}

TEST(EnergyAudit, VanishesOnRandomProfiles) {
    const Model m(RunnerParams::world_record());
    const Mesh mesh(3.0, 181);  // h below 2 tau keeps random profiles bounded
    const auto s = pulse_profile(NutritionStrategy{"g", {{1.0, 836.8}}}, mesh);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(0.0, m.params().f_max);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> f(180);
        for (double& x : f) x = dist(rng);
        const auto t = simulate(f, s, m, mesh);
        double scale = 0.0;
        for (int k = 0; k < mesh.n_nodes; ++k) scale = std::max({scale, std::abs(t.ef[k]), std::abs(t.eg[k])});
        for (double r : energy_audit(t, m)) ASSERT_LE(std::abs(r) * mesh.h(), 1e-12 * scale);
    }
}

TEST(EnergyAudit, TamperedNodeShowsUp) {
    const Model m(RunnerParams::world_record());
    const Mesh mesh = Mesh::per_minute(120);
    auto t = simulate(plateau_profile(120, 357.0, m.params().tau, 1.0), world_record_strategy(), m, mesh);
    t.eg[50] += 1.0;
    const auto r = energy_audit(t, m);
    EXPECT_NEAR(r[49], 1.0 / mesh.h(), 1e-9);
    EXPECT_NEAR(r[50], -1.0 / mesh.h(), 1e-9);
}

TEST(EnergyAudit, ZeroForceGelResidualIsZero) {
    const Model m(RunnerParams::world_record());
    const Mesh mesh = Mesh::per_minute(60);
    const std::vector<double> f(60, 0.0);
    const auto t = simulate(f, NutritionStrategy{"g", {{10.0, 418.4}}}, m, mesh);
    for (std::size_t k = 0; k < t.f.size(); ++k) {
        const double inflow = m.params().c3 * m.params().c4 * t.n[k];
        EXPECT_NEAR((t.eg[k + 1] + t.ef[k + 1] - t.eg[k] - t.ef[k]) / mesh.h(), inflow, 1e-12);
    }
}

TEST(Properties, MonotoneDepletionWithoutGels) {
    const Model m(RunnerParams::world_record());
    const Mesh mesh(2.0, 201);
    const std::vector<double> f(200, 15000.0), s(200, 0.0);
    const auto t = simulate(f, s, m, mesh);
    for (int k = 1; k < mesh.n_steps(); ++k) {
        EXPECT_LT(t.ef[k + 1], t.ef[k]);
        EXPECT_LT(t.eg[k + 1], t.eg[k]);
    }
}

TEST(Properties, AllocationSharesAddUpToWork) {
    const Model m(RunnerParams::world_record());
    const Mesh mesh(2.0, 201);
    std::vector<double> f(200);
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = 10000.0 + 50.0 * static_cast<double>(k);
    const std::vector<double> s(200, 0.0);
    const auto t = simulate(f, s, m, mesh);
    for (std::size_t k = 0; k < t.f.size(); ++k) {
        const double change = (t.ef[k + 1] - t.ef[k]) + (t.eg[k + 1] - t.eg[k]);
        const double work = mesh.h() * m.work_scale() * t.f[k] * t.v[k];
        EXPECT_NEAR(change + work, 0.0, 1e-12 * m.params().ef0);
    }
}

TEST(TrajectoryCsv, RoundTripsForces) {
    const Model m(RunnerParams::world_record());
    const Mesh mesh = Mesh::per_minute(10);
    std::vector<double> f(10);
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = 100.0 * static_cast<double>(k) + 0.125;
    const std::vector<double> s(10, 0.0);
    std::stringstream ss;
    write_trajectory_csv(ss, simulate(f, s, m, mesh));
    EXPECT_NE(ss.str().find("t,f,V,E_F,E_G,N"), std::string::npos);
    EXPECT_EQ(read_force_profile(ss), f);
}

TEST(ForceProfile, PlainListAndErrors) {
    std::istringstream plain("# forces\n1\n2.5\n\n3\n");
    EXPECT_EQ(read_force_profile(plain), (std::vector<double>{1.0, 2.5, 3.0}));
    std::istringstream bad("1\nabc\n");
    EXPECT_THROW(read_force_profile(bad), InputError);
    EXPECT_THROW(read_force_profile(std::string("/nonexistent/forces.csv")), InputError);
}

TEST(RunnerParams, Validation) {
    RunnerParams p;
    EXPECT_NO_THROW(p.validate());
    EXPECT_DOUBLE_EQ(p.c3 * p.mass, 1.0);
    p.set_mass(73.0);
    EXPECT_NO_THROW(p.validate());
    p.c3 = 1.0 / 55.0;
    EXPECT_THROW(p.validate(), InputError);
    RunnerParams q;
    q.tau = 0.0;
    EXPECT_THROW(q.validate(), InputError);
    EXPECT_THROW(Mesh(120.0, 1), InputError);
    EXPECT_DOUBLE_EQ(Mesh::per_minute(135).h(), 1.0);
}

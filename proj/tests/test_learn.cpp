#include <doctest.h>

#include <cmath>
#include <vector>

#include "coconut/errors.hpp"
#include "coconut/abm.hpp"
#include "coconut/dynamics.hpp"
#include "coconut/learn.hpp"
#include "coconut/rng.hpp"

using namespace coconut;

namespace {

Population uniform_population(std::size_t n, std::uint8_t state, double v1, double v0) {
    Population pop;
    pop.states.assign(n, state);
    pop.values_have.assign(n, v1);
    pop.values_not.assign(n, v0);
    pop.strategies.assign(n, v1 - v0);
    return pop;
}

} // namespace

TEST_SUITE("learn") {

TEST_CASE("TD error cases") {
    CHECK(td_error(1, 0, 0.6, 0.3, 0.0, 0.999) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(td_error(0, 0, 0.0, 0.7, 0.0, 0.999) == 0.0);
    const double gr = std::exp(-0.001);
    CHECK(gr == doctest::Approx(0.9990005).epsilon(1e-9));
    CHECK(td_error(1, 1, 0.0, 1.0, 0.0, gr) == doctest::Approx(-9.995e-4).epsilon(1e-4));
    CHECK(td_error(0, 1, -0.35, 0.5, 0.1, 0.99) == doctest::Approx(-0.35 + 0.99 * 0.5 - 0.1));
}

TEST_CASE("per-step discount") {
    LearnConfig cfg;
    cfg.gamma = 0.1;
    CHECK(cfg.gamma_r(100) == doctest::Approx(std::exp(-0.001)));
    cfg.gamma = 0.0;
    CHECK(cfg.gamma_r(100) == 1.0);
    cfg.exploration_amplitude = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = LearnConfig{};
    cfg.eps_fix = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("idle step: every agent's active value decays geometrically") {
    const ModelParams p;
    LearnConfig cfg = LearnConfig::from(p);
    // Strategies 0.05 < c_min: nobody can climb, nobody holds a coconut.
    Population pop = uniform_population(p.n_agents, 0, 0.1, 0.05);
    Rng rng(1);
    const double gr = cfg.gamma_r(p.n_agents);
    const auto ev = learn_step(pop, cfg, p, rng);
    CHECK(ev.transition == Transition::stay0);
    for (std::size_t j = 0; j < p.n_agents; ++j) {
        CHECK(pop.values_have[j] == 0.1);
        CHECK(pop.values_not[j] == doctest::Approx(0.05 + cfg.alpha * (gr - 1) * 0.05).epsilon(1e-15));
        CHECK(pop.strategies[j] == doctest::Approx(pop.values_have[j] - pop.values_not[j]).epsilon(1e-15));
    }
}

TEST_CASE("a climb updates the climber's V(0) with the realized cost") {
    ModelParams p;
    p.n_agents = 2;
    p.f = 1.0;
    LearnConfig cfg = LearnConfig::from(p);
    Population pop = uniform_population(2, 0, 0.6, 0.0);
    Rng rng(4);
    const double gr = cfg.gamma_r(2);
    const auto ev = learn_step(pop, cfg, p, rng);
    REQUIRE(ev.transition == Transition::climb);
    REQUIRE(ev.tree_cost.has_value());
    const double cost = *ev.tree_cost;
    CHECK(ev.reward == -cost);
    CHECK(pop.states[ev.agent] == 1);
    CHECK(pop.values_not[ev.agent] == doctest::Approx(cfg.alpha * (-cost + gr * 0.6)).epsilon(1e-14));
    CHECK(pop.values_not[1 - ev.agent] == 0.0);
    CHECK(pop.values_have[0] == 0.6);
    CHECK(pop.values_have[1] == 0.6);
}

TEST_CASE("exactly the value of the pre-step state changes") {
    const ModelParams p;
    LearnConfig cfg = LearnConfig::from(p);
    cfg.exploration_amplitude = 0.0015;
    Rng rng(21);
    Population pop = uniform_population(p.n_agents, 0, 0.55, 0.02);
    for (std::size_t i = 0; i < p.n_agents; i += 2) pop.states[i] = 1;
    std::size_t e = pop.coconuts();
    for (int t = 0; t < 3000; ++t) {
        const Population before = pop;
        learn_step(pop, e, cfg, p, rng);
        for (std::size_t j = 0; j < p.n_agents; ++j) {
            if (before.states[j] == 1) {
                CHECK(pop.values_not[j] == before.values_not[j]);
                CHECK(pop.values_have[j] != before.values_have[j]);
            } else {
                CHECK(pop.values_have[j] == before.values_have[j]);
                CHECK(pop.values_not[j] != before.values_not[j]);
            }
            const double c = pop.values_have[j] - pop.values_not[j];
            CHECK(std::abs(pop.strategies[j] - c) <= cfg.exploration_amplitude + 1e-15);
        }
    }
}

TEST_CASE("zero learning rate reproduces the AM2 simulation step for step") {
    const ModelParams p;
    LearnConfig cfg = LearnConfig::from(p);
    cfg.alpha = 0.0;
    cfg.v1_init = 0.42;
    cfg.v0_init = 0.0;
    cfg.eps0 = 0.3;
    cfg.total_steps = 20000;
    cfg.record_stride = 1;
    Rng a(314);
    const auto learned = run_learning(p, cfg, a);

    SimConfig sim;
    sim.total_steps = cfg.total_steps;
    sim.burn_in_steps = 1;
    sim.eps0 = cfg.eps0;
    const std::vector<double> strategies(p.n_agents, 0.42);
    Rng b(314);
    const auto traj = run(p, {Scheme::AM2}, sim, strategies, b);
    REQUIRE(learned.size() == traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) REQUIRE(learned.epsilon[k] == traj.epsilon(k));
    for (double c : learned.final_population.strategies) CHECK(c == 0.42);
}

TEST_CASE("pinned trading probability sets the holder trade frequency") {
    const ModelParams p;
    LearnConfig cfg = LearnConfig::from(p);
    cfg.eps_fix = 0.3;
    Rng rng(8);
    Population pop = uniform_population(p.n_agents, 0, 0.45, 0.0);
    for (std::size_t i = 0; i < p.n_agents; i += 2) pop.states[i] = 1;
    std::size_t e = pop.coconuts();
    double holders = 0, trades = 0;
    for (int t = 0; t < 100000; ++t) {
        const auto before = pop.states;
        const auto ev = learn_step(pop, e, cfg, p, rng);
        if (before[ev.agent] == 1) {
            ++holders;
            trades += ev.transition == Transition::trade;
        }
    }
    REQUIRE(holders > 1000);
    const double se = std::sqrt(0.3 * 0.7 / holders);
    CHECK(std::abs(trades / holders - 0.3) < 3 * se);
}

TEST_CASE("recorded mean strategy is the difference of mean values") {
    const ModelParams p;
    LearnConfig cfg = LearnConfig::from(p);
    cfg.total_steps = 5000;
    cfg.record_stride = 50;
    cfg.exploration_amplitude = 0.0015;
    Rng rng(2);
    const auto t = run_learning(p, cfg, rng);
    CHECK(t.size() == 100);
    CHECK(t.step_at(0) == 50);
    for (std::size_t k = 0; k < t.size(); ++k) CHECK(std::abs(t.mean_c[k] - (t.mean_v1[k] - t.mean_v0[k])) < 1e-12);
}

TEST_CASE("learning reaches the upper equilibrium at a low discount rate") {
    ModelParams p;
    p.gamma = 0.1;
    LearnConfig cfg = LearnConfig::from(p);
    cfg.record_stride = cfg.total_steps;
    Rng rng = Rng::stream(p.master_seed, "learn_upper", 0);
    const auto t = run_learning(p, cfg, rng);
    CHECK(std::abs(t.final_mean_c() - 0.44) < 0.02);
    CHECK(t.epsilon.back() > 0.3);
}

TEST_CASE("learning collapses at a high discount rate") {
    ModelParams p;
    p.gamma = 0.5;
    LearnConfig cfg = LearnConfig::from(p);
    cfg.record_stride = cfg.total_steps;
    Rng rng = Rng::stream(p.master_seed, "learn_collapse", 0);
    const auto t = run_learning(p, cfg, rng);
    CHECK(t.epsilon.back() < 0.02);
    CHECK(t.final_mean_c() < p.c_min);
}

TEST_CASE("a run started at the lower equilibrium drifts upward") {
    ModelParams p;
    p.gamma = 0.1;
    p.alpha = 0.025;
    const auto lower = solve_equilibria(p).front();
    LearnConfig cfg = LearnConfig::from(p);
    cfg.exploration_amplitude = 0.0015;
    cfg.eps0 = lower.eps_star;
    cfg.v1_init = lower.v1_star;
    cfg.v0_init = lower.v0_star;
    cfg.record_stride = 1000;
    Rng rng = Rng::stream(p.master_seed, "learn_lower", 0);
    const auto t = run_learning(p, cfg, rng);
    CHECK(t.mean_c.back() > lower.c_star + 0.05);
}

TEST_CASE("without trading V(1) only decays") {
    const ModelParams p;
    LearnConfig cfg = LearnConfig::from(p);
    cfg.eps_fix = 0.0;
    cfg.record_stride = 1000;
    Rng rng(17);
    const auto t = run_learning(p, cfg, rng);
    for (std::size_t k = 1; k < t.size(); ++k) CHECK(t.mean_v1[k] <= t.mean_v1[k - 1]);
    CHECK(t.mean_c.back() < t.mean_c.front());
    CHECK(t.epsilon.back() == 1.0);
}

TEST_CASE("probe points near the strategy nullcline") {
    ModelParams p;
    p.gamma = 0.1;
    LearnConfig cfg = LearnConfig::from(p);
    const std::vector<double> grid = {0.5};
    const auto probe = nullcline_probe(p, cfg, grid, "probe_unit");
    REQUIRE(probe.size() == 1);
    CHECK(probe[0].eps_fix == 0.5);
    CHECK(std::abs(probe[0].mean_c - strategy_nullcline(0.5, p)) < 0.015);
    const std::vector<double> bad = {1.2};
    CHECK_THROWS_AS(nullcline_probe(p, cfg, bad), ConfigError);
}

TEST_CASE("phase diagram layout and determinism") {
    ModelParams p;
    p.gamma = 0.2;
    const LearnConfig cfg = LearnConfig::from(p);
    PhaseGrid grid;
    grid.eps_lo = 0.0;
    grid.eps_hi = 1.0;
    grid.eps_points = 3;
    grid.c_lo = 0.30;
    grid.c_hi = 0.50;
    grid.c_points = 2;
    grid.runs = 2;
    grid.steps = 10000;
    const auto a = phase_diagram(p, cfg, grid, "phase_unit");
    const auto b = phase_diagram(p, cfg, grid, "phase_unit");
    REQUIRE(a.size() == 6);
    CHECK(a[0].eps0 == 0.0);
    CHECK(a[0].c0 == 0.30);
    CHECK(a[1].c0 == 0.50);
    CHECK(a[2].eps0 == 0.5);
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].n_runs == 2);
        CHECK(a[k].c_final_mean == b[k].c_final_mean);
        CHECK(a[k].eps_final_mean == b[k].eps_final_mean);
    }
    // Optimistic starts head for the upper branch.
    CHECK(std::abs(a[1].c_final_mean - 0.3893) < 0.05);
    CHECK(std::abs(a[5].c_final_mean - 0.3893) < 0.05);
}

TEST_CASE("high initial coconut stock pushes a pessimistic start upward") {
    ModelParams p;
    p.gamma = 0.2;
    PhaseGrid grid;
    grid.eps_lo = grid.eps_hi = 1.0;
    grid.eps_points = 1;
    grid.c_lo = grid.c_hi = 0.31;
    grid.c_points = 1;
    grid.runs = 5;
    const auto cells = phase_diagram(p, LearnConfig::from(p), grid, "phase_rescue");
    CHECK(cells[0].c_final_mean > 0.31);
    CHECK(cells[0].eps_final_mean > 0.05);
}

TEST_CASE("linspace") {
    CHECK(linspace(0.0, 1.0, 5) == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    CHECK(linspace(0.3, 0.3, 1) == std::vector<double>{0.3});
}

} // TEST_SUITE

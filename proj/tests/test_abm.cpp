#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "coconut/errors.hpp"
#include "coconut/abm.hpp"
#include "coconut/core.hpp"
#include "coconut/rng.hpp"

using namespace coconut;

namespace {

double eps_ratio_form(double fg) { return fg / 2 * (std::sqrt(1 + 4 / fg) - 1); }
double eps_pair_form(double fg) { return fg / 4 * (std::sqrt(1 + 8 / fg) - 1); }

Population hand_population(std::vector<std::uint8_t> states, double c) {
    Population pop;
    pop.states = std::move(states);
    pop.strategies.assign(pop.states.size(), c);
    pop.values_have.assign(pop.states.size(), 0.0);
    pop.values_not.assign(pop.states.size(), 0.0);
    return pop;
}

} // namespace

TEST_SUITE("abm") {

TEST_CASE("scheme names round trip") {
    for (Scheme s : {Scheme::IM, Scheme::AM1, Scheme::AM2}) CHECK(scheme_from_string(to_string(s)) == s);
    for (SelfTradeMode m : {SelfTradeMode::exclude_self, SelfTradeMode::mean_field})
        CHECK(self_trade_from_string(to_string(m)) == m);
    CHECK(UpdateScheme{}.self_trade == SelfTradeMode::exclude_self);
}

TEST_CASE("IM: a holder meeting an empty partner changes nothing") {
    ModelParams p;
    p.n_agents = 2;
    // Threshold at c_min: trees are never cheap enough, so the empty agent cannot climb.
    Population pop = hand_population({1, 0}, p.c_min);
    Rng rng(11);
    for (int k = 0; k < 200; ++k) {
        const auto res = step(pop, {Scheme::IM}, p, rng);
        for (const auto& ev : res.view()) CHECK(ev.transition != Transition::trade);
        CHECK(pop.states[0] == 1);
        CHECK(pop.states[1] == 0);
    }
}

TEST_CASE("IM: two holders trade and both receive y") {
    ModelParams p;
    p.n_agents = 2;
    Population pop = hand_population({1, 1}, 0.4);
    Rng rng(3);
    std::size_t e = 2;
    const auto res = step(pop, e, {Scheme::IM}, p, rng);
    CHECK(pop.states[0] == 0);
    CHECK(pop.states[1] == 0);
    CHECK(e == 0);
    CHECK(res.delta_coconuts == -2);
    REQUIRE(res.count == 2);
    for (const auto& ev : res.view()) {
        CHECK(ev.transition == Transition::trade);
        CHECK(ev.reward == doctest::Approx(0.6));
    }
}

TEST_CASE("AM2 clearing probability") {
    CHECK(am2_trade_probability(1, 100, SelfTradeMode::exclude_self) == 0.0);
    CHECK(am2_trade_probability(1, 100, SelfTradeMode::mean_field) == doctest::Approx(0.01));
    CHECK(am2_trade_probability(51, 101, SelfTradeMode::exclude_self) == doctest::Approx(0.5));
    CHECK(am2_trade_probability(100, 100, SelfTradeMode::exclude_self) == 1.0);
}

TEST_CASE("AM2: a lone holder never trades when self-trading is excluded") {
    ModelParams p;
    p.n_agents = 5;
    Population pop = hand_population({0, 0, 1, 0, 0}, p.c_min);
    Rng rng(9);
    for (int k = 0; k < 500; ++k) {
        step(pop, {Scheme::AM2, SelfTradeMode::exclude_self}, p, rng);
        CHECK(pop.coconuts() == 1);
        CHECK(pop.states[2] == 1);
    }
}

TEST_CASE("try_climb returns the realized cost, never above the threshold") {
    ModelParams p;
    p.f = 1.0;
    Rng rng(4);
    int climbs = 0;
    for (int k = 0; k < 10000; ++k) {
        const auto cost = try_climb(0.4, p, rng);
        if (!cost) continue;
        ++climbs;
        CHECK(*cost >= p.c_min);
        CHECK(*cost <= 0.4);
    }
    CHECK(std::abs(climbs / 10000.0 - 0.5) < 0.02);
    CHECK_FALSE(try_climb(p.c_min - 0.01, p, rng).has_value());
}

TEST_CASE("no climbing possible keeps the economy empty") {
    ModelParams p;
    SimConfig cfg;
    cfg.total_steps = 3000;
    cfg.burn_in_steps = 100;
    cfg.eps0 = 0.0;
    const std::vector<double> strategies(p.n_agents, p.c_min);
    for (Scheme s : {Scheme::IM, Scheme::AM1, Scheme::AM2}) {
        Rng rng(1);
        const auto traj = run(p, {s}, cfg, strategies, rng);
        CHECK(traj.size() == 3000);
        for (std::size_t k = 0; k < traj.size(); ++k) CHECK(traj.coconuts[k] == 0);
        cfg.replicates = 3;
        const auto est = stationary_mean(p, {s}, cfg, strategies, "empty");
        CHECK(est.mean == 0.0);
        CHECK(est.std_error == 0.0);
    }
}

TEST_CASE("stationary means follow the closed-form fixed points") {
    const ModelParams p;
    SimConfig cfg;
    cfg.total_steps = 14000;
    cfg.burn_in_steps = 4000;
    cfg.replicates = 10;
    const std::vector<double> strategies(p.n_agents, 0.4);
    const double fg = 0.8 * 0.5;
    CHECK(eps_pair_form(fg) == doctest::Approx(0.3583).epsilon(1e-3));
    CHECK(eps_ratio_form(fg) == doctest::Approx(0.4633).epsilon(1e-3));
    CHECK(std::abs(stationary_mean(p, {Scheme::IM}, cfg, strategies, "im").mean - eps_pair_form(fg)) < 0.02);
    CHECK(std::abs(stationary_mean(p, {Scheme::AM1}, cfg, strategies, "am1").mean - eps_ratio_form(fg)) < 0.02);
    CHECK(std::abs(stationary_mean(p, {Scheme::AM2}, cfg, strategies, "am2").mean - eps_ratio_form(fg)) < 0.02);
}

TEST_CASE("per-step changes of e respect each scheme's bounds and the event rules") {
    const ModelParams p;
    Rng init(8);
    std::vector<double> strategies(p.n_agents);
    for (auto& c : strategies) c = init.uniform(0.3, 0.5);
    for (Scheme s : {Scheme::IM, Scheme::AM1, Scheme::AM2}) {
        CAPTURE(to_string(s));
        Rng rng = Rng::stream(5, "bounds", static_cast<std::uint64_t>(s));
        Population pop = init_population(p, 0.4, strategies, 0.0, 0.0, rng);
        std::size_t e = pop.coconuts();
        for (int t = 0; t < 20000; ++t) {
            const auto before = pop.states;
            const auto res = step(pop, e, {s}, p, rng);
            CHECK(e == pop.coconuts());
            const int d = res.delta_coconuts;
            if (s == Scheme::IM) CHECK((d == -2 || d == 0 || d == 1));
            if (s == Scheme::AM1) CHECK((d >= -2 && d <= 2 && d != -1));
            if (s == Scheme::AM2) CHECK((d >= -1 && d <= 1));
            for (const auto& ev : res.view()) {
                if (ev.transition == Transition::climb) {
                    CHECK(before[ev.agent] == 0);
                    REQUIRE(ev.tree_cost.has_value());
                    CHECK(ev.reward == -*ev.tree_cost);
                    CHECK(*ev.tree_cost <= pop.strategies[ev.agent]);
                } else if (ev.transition == Transition::trade) {
                    CHECK(before[ev.agent] == 1);
                    CHECK(ev.reward == p.y);
                } else {
                    CHECK(ev.reward == 0.0);
                }
            }
        }
    }
}

TEST_CASE("runs are bit-reproducible for a fixed seed") {
    const ModelParams p;
    SimConfig cfg;
    cfg.total_steps = 5000;
    cfg.burn_in_steps = 10;
    cfg.eps0 = 0.3;
    const std::vector<double> strategies(p.n_agents, 0.42);
    for (Scheme s : {Scheme::IM, Scheme::AM1, Scheme::AM2}) {
        Rng a(99), b(99);
        const auto ta = run(p, {s}, cfg, strategies, a);
        const auto tb = run(p, {s}, cfg, strategies, b);
        CHECK(ta.coconuts == tb.coconuts);
        CHECK(ta.rewards == tb.rewards);
    }
}

TEST_CASE("IM one-step transition frequencies match the chain probabilities") {
    const ModelParams p;
    const double n = static_cast<double>(p.n_agents), g = 0.5;
    SimConfig cfg;
    cfg.total_steps = 1000000;
    cfg.burn_in_steps = 1;
    cfg.eps0 = 0.35;
    const std::vector<double> strategies(p.n_agents, 0.4);
    Rng rng = Rng::stream(2, "im_transitions", 0);
    const auto traj = run(p, {Scheme::IM}, cfg, strategies, rng);
    double up = 0, down = 0, exp_up = 0, exp_down = 0, var_up = 0, var_down = 0;
    for (std::size_t t = 1; t < traj.size(); ++t) {
        const double e = traj.coconuts[t - 1];
        const double pu = p.f * (n - e) / n * g;
        const double pd = e / n * (e - 1) / (n - 1);
        exp_up += pu;
        exp_down += pd;
        var_up += pu * (1 - pu);
        var_down += pd * (1 - pd);
        const long d = static_cast<long>(traj.coconuts[t]) - static_cast<long>(traj.coconuts[t - 1]);
        up += d == 1;
        down += d == -2;
    }
    CHECK(std::abs(up - exp_up) < 4 * std::sqrt(var_up));
    CHECK(std::abs(down - exp_down) < 4 * std::sqrt(var_down));
}

TEST_CASE("trajectory CSV layout") {
    ModelParams p;
    p.n_agents = 10;
    SimConfig cfg;
    cfg.total_steps = 50;
    cfg.burn_in_steps = 1;
    cfg.eps0 = 0.5;
    const std::vector<double> strategies(p.n_agents, 0.45);
    Rng rng(1);
    const auto traj = run(p, {Scheme::IM}, cfg, strategies, rng);
    std::ostringstream os;
    write_trajectory_csv(os, traj);
    const std::string text = os.str();
    CHECK(text.rfind("step,epsilon,mean_strategy,event_type,reward\r\n", 0) == 0);
    std::size_t lines = 0;
    for (char ch : text) lines += ch == '\n';
    CHECK(lines == 51);
}

TEST_CASE("SimConfig validation") {
    SimConfig cfg;
    cfg.total_steps = 100;
    cfg.burn_in_steps = 100;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.burn_in_steps = 10;
    cfg.replicates = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

} // TEST_SUITE

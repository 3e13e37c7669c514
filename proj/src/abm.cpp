#include "coconut/abm.hpp"

#include <cmath>
#include <ostream>

#include "coconut/csv.hpp"
#include "coconut/errors.hpp"
#include "coconut/parallel.hpp"

namespace coconut {

std::string_view to_string(Scheme s) {
    switch (s) {
    case Scheme::IM: return "IM";
    case Scheme::AM1: return "AM1";
    case Scheme::AM2: return "AM2";
    }
    return "?";
}

Scheme scheme_from_string(std::string_view name) {
    if (name == "IM") return Scheme::IM;
    if (name == "AM1") return Scheme::AM1;
    if (name == "AM2") return Scheme::AM2;
    throw ConfigError("unknown update scheme '" + std::string(name) + "'");
}

std::string_view to_string(SelfTradeMode m) {
    return m == SelfTradeMode::exclude_self ? "exclude_self" : "mean_field";
}

SelfTradeMode self_trade_from_string(std::string_view name) {
    if (name == "exclude_self") return SelfTradeMode::exclude_self;
    if (name == "mean_field") return SelfTradeMode::mean_field;
    throw ConfigError("unknown self_trade_mode '" + std::string(name) + "'");
}

std::string_view to_string(Transition t) {
    switch (t) {
    case Transition::stay0: return "stay0";
    case Transition::climb: return "climb";
    case Transition::trade: return "trade";
    case Transition::stay1: return "stay1";
    }
    return "?";
}

void SimConfig::validate() const {
    if (total_steps == 0) throw ConfigError("total_steps must be positive");
    if (burn_in_steps >= total_steps)
        throw ConfigError("burn_in_steps must be smaller than total_steps");
    if (!(eps0 >= 0.0 && eps0 <= 1.0)) throw ConfigError("eps0 must lie in [0, 1]");
    if (replicates < 1) throw ConfigError("replicates must be >= 1");
}

std::optional<double> try_climb(double threshold, const ModelParams& p, Rng& rng) {
    if (!rng.bernoulli(p.f)) return std::nullopt;
    const double cost = rng.uniform(p.c_min, p.c_max);
    if (cost <= threshold) return cost;
    return std::nullopt;
}

double am2_trade_probability(std::size_t coconuts, std::size_t n_agents, SelfTradeMode mode) {
    if (mode == SelfTradeMode::mean_field)
        return static_cast<double>(coconuts) / static_cast<double>(n_agents);
    if (coconuts == 0) return 0.0;
    return static_cast<double>(coconuts - 1) / static_cast<double>(n_agents - 1);
}

StepEvent am2_act(Population& pop, std::size_t i, double trade_prob, const ModelParams& p,
                  Rng& rng) {
    StepEvent ev;
    ev.agent = i;
    if (pop.states[i] == 0) {
        if (auto cost = try_climb(pop.strategies[i], p, rng)) {
            pop.states[i] = 1;
            ev.transition = Transition::climb;
            ev.tree_cost = cost;
            ev.reward = -*cost;
        } else {
            ev.transition = Transition::stay0;
        }
    } else if (rng.bernoulli(trade_prob)) {
        pop.states[i] = 0;
        ev.transition = Transition::trade;
        ev.reward = p.y;
    } else {
        ev.transition = Transition::stay1;
    }
    return ev;
}

namespace {

// Climb attempt for an empty-handed agent; fills the event and returns +1 on harvest.
int search(Population& pop, std::size_t i, const ModelParams& p, Rng& rng, StepEvent& ev) {
    ev.agent = i;
    if (auto cost = try_climb(pop.strategies[i], p, rng)) {
        pop.states[i] = 1;
        ev.transition = Transition::climb;
        ev.tree_cost = cost;
        ev.reward = -*cost;
        return 1;
    }
    ev.transition = Transition::stay0;
    return 0;
}

StepResult step_im(Population& pop, const ModelParams& p, Rng& rng) {
    StepResult out;
    const std::size_t n = pop.size();
    const std::size_t i = rng.index(n);
    StepEvent ev;
    if (pop.states[i] == 0) {
        out.delta_coconuts = search(pop, i, p, rng, ev);
        out.push(ev);
        return out;
    }
    std::size_t j = rng.index(n - 1);
    if (j >= i) ++j;
    if (pop.states[j] == 1) {
        pop.states[i] = 0;
        pop.states[j] = 0;
        out.push({i, Transition::trade, std::nullopt, p.y});
        out.push({j, Transition::trade, std::nullopt, p.y});
        out.delta_coconuts = -2;
    } else {
        out.push({i, Transition::stay1, std::nullopt, 0.0});
    }
    return out;
}

// Both climbing checks and the trade predicate read start-of-step states.
StepResult step_am1(Population& pop, const ModelParams& p, Rng& rng) {
    StepResult out;
    const std::size_t n = pop.size();
    const std::size_t i = rng.index(n);
    std::size_t j = rng.index(n - 1);
    if (j >= i) ++j;
    const bool has_i = pop.states[i] == 1;
    const bool has_j = pop.states[j] == 1;
    if (has_i && has_j) {
        pop.states[i] = 0;
        pop.states[j] = 0;
        out.push({i, Transition::trade, std::nullopt, p.y});
        out.push({j, Transition::trade, std::nullopt, p.y});
        out.delta_coconuts = -2;
        return out;
    }
    for (std::size_t agent : {i, j}) {
        StepEvent ev;
        if (pop.states[agent] == 0) {
            out.delta_coconuts += search(pop, agent, p, rng, ev);
        } else {
            ev = {agent, Transition::stay1, std::nullopt, 0.0};
        }
        out.push(ev);
    }
    return out;
}

} // namespace

StepResult step(Population& pop, std::size_t& coconuts, const UpdateScheme& scheme,
                const ModelParams& p, Rng& rng) {
    StepResult out;
    switch (scheme.variant) {
    case Scheme::IM: out = step_im(pop, p, rng); break;
    case Scheme::AM1: out = step_am1(pop, p, rng); break;
    case Scheme::AM2: {
        const std::size_t i = rng.index(pop.size());
        const double q = am2_trade_probability(coconuts, pop.size(), scheme.self_trade);
        const StepEvent ev = am2_act(pop, i, q, p, rng);
        out.push(ev);
        out.delta_coconuts = ev.transition == Transition::climb   ? 1
                             : ev.transition == Transition::trade ? -1
                                                                  : 0;
        break;
    }
    }
    coconuts = static_cast<std::size_t>(static_cast<long long>(coconuts) + out.delta_coconuts);
    return out;
}

StepResult step(Population& pop, const UpdateScheme& scheme, const ModelParams& p, Rng& rng) {
    std::size_t e = pop.coconuts();
    return step(pop, e, scheme, p, rng);
}

double Trajectory::mean_epsilon(std::size_t from) const {
    if (from >= coconuts.size()) return 0.0;
    double sum = 0.0;
    for (std::size_t k = from; k < coconuts.size(); ++k) sum += coconuts[k];
    return sum / static_cast<double>(coconuts.size() - from) / static_cast<double>(n_agents);
}

std::vector<double> Trajectory::occupancy(std::size_t from) const {
    std::vector<double> hist(n_agents + 1, 0.0);
    if (from >= coconuts.size()) return hist;
    for (std::size_t k = from; k < coconuts.size(); ++k) hist[coconuts[k]] += 1.0;
    const double total = static_cast<double>(coconuts.size() - from);
    for (auto& h : hist) h /= total;
    return hist;
}

Trajectory run(const ModelParams& p, const UpdateScheme& scheme, const SimConfig& cfg,
               std::span<const double> strategies, Rng& rng) {
    Population pop = init_population(p, cfg.eps0, strategies, 0.0, 0.0, rng);
    Trajectory traj;
    traj.n_agents = p.n_agents;
    traj.mean_strategy = mean(strategies);
    traj.coconuts.reserve(cfg.total_steps);
    traj.events.reserve(cfg.total_steps);
    traj.rewards.reserve(cfg.total_steps);

    std::size_t e = pop.coconuts();
    for (std::size_t t = 0; t < cfg.total_steps; ++t) {
        const StepResult res = step(pop, e, scheme, p, rng);
        EventKind kind = EventKind::none;
        double reward = 0.0;
        for (const auto& ev : res.view()) {
            if (ev.transition == Transition::climb) {
                kind = EventKind::climb;
                ++traj.climbs;
            } else if (ev.transition == Transition::trade) {
                kind = EventKind::trade;
                ++traj.trades;
            }
            reward += ev.reward;
        }
        traj.coconuts.push_back(static_cast<std::uint32_t>(e));
        traj.events.push_back(kind);
        traj.rewards.push_back(reward);
    }
    return traj;
}

StationaryEstimate stationary_mean(const ModelParams& p, const UpdateScheme& scheme,
                                   const SimConfig& cfg, std::span<const double> strategies,
                                   std::string_view experiment) {
    cfg.validate();
    if (cfg.burn_in_steps < 1) throw ConfigError("stationary_mean requires burn_in_steps >= 1");
    StationaryEstimate est;
    est.replicate_means.assign(cfg.replicates, 0.0);
    parallel_for(cfg.replicates, [&](std::size_t r) {
        Rng rng = Rng::stream(p.master_seed, experiment, r);
        const Trajectory traj = run(p, scheme, cfg, strategies, rng);
        est.replicate_means[r] = traj.mean_epsilon(cfg.burn_in_steps);
    });
    est.mean = mean(est.replicate_means);
    if (cfg.replicates > 1) {
        double ss = 0.0;
        for (double m : est.replicate_means) ss += (m - est.mean) * (m - est.mean);
        const double var = ss / static_cast<double>(cfg.replicates - 1);
        est.std_error = std::sqrt(var / static_cast<double>(cfg.replicates));
    }
    return est;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    csv::row(out, {"step", "epsilon", "mean_strategy", "event_type", "reward"});
    const std::string strategy = csv::number(traj.mean_strategy);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const EventKind kind = traj.events[k];
        const std::string type = kind == EventKind::climb   ? "climb"
                                 : kind == EventKind::trade ? "trade"
                                                            : "";
        const std::string reward = kind == EventKind::none ? "" : csv::number(traj.rewards[k]);
        csv::row(out, {csv::number(static_cast<std::uint64_t>(k + 1)), csv::number(traj.epsilon(k)),
                       strategy, type, reward});
    }
}

} // namespace coconut

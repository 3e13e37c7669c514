#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coconut/core.hpp"
#include "coconut/rng.hpp"

namespace coconut {

enum class Scheme { IM, AM1, AM2 };

// How AM2 sets the clearing probability of a chosen coconut holder:
// exclude_self uses (e-1)/(N-1), mean_field uses e/N.
enum class SelfTradeMode { exclude_self, mean_field };

struct UpdateScheme {
    Scheme variant = Scheme::IM;
    SelfTradeMode self_trade = SelfTradeMode::exclude_self;
};

std::string_view to_string(Scheme s);
Scheme scheme_from_string(std::string_view name);
std::string_view to_string(SelfTradeMode m);
SelfTradeMode self_trade_from_string(std::string_view name);

struct SimConfig {
    std::size_t total_steps = 14000;
    std::size_t burn_in_steps = 4000;
    double eps0 = 0.0;
    std::size_t replicates = 10;

    void validate() const;
};

enum class Transition : std::uint8_t { stay0, climb, trade, stay1 };

std::string_view to_string(Transition t);

struct StepEvent {
    std::size_t agent = 0;
    Transition transition = Transition::stay0;
    std::optional<double> tree_cost;
    double reward = 0.0;
};

// Events produced by one micro step: one per agent whose state was examined.
// IM and AM1 touch at most two agents, AM2 exactly one.
struct StepResult {
    std::array<StepEvent, 2> events{};
    std::size_t count = 0;
    int delta_coconuts = 0;

    std::span<const StepEvent> view() const { return {events.data(), count}; }
    void push(const StepEvent& ev) { events[count++] = ev; }
};

// Tree search for an agent without a coconut: a tree is met with probability
// f, its cost is drawn uniformly on [c_min, c_max] and the agent climbs iff
// the cost does not exceed its threshold. Returns the cost when it climbs.
std::optional<double> try_climb(double threshold, const ModelParams& p, Rng& rng);

// Clearing probability for a coconut holder under AM2 given e coconuts in total.
double am2_trade_probability(std::size_t coconuts, std::size_t n_agents, SelfTradeMode mode);

// AM2 action of agent i: climb if empty, else consume with probability trade_prob.
StepEvent am2_act(Population& pop, std::size_t i, double trade_prob, const ModelParams& p,
                  Rng& rng);

// One asynchronous micro step. `coconuts` is the tracked value of e and is
// updated in place.
StepResult step(Population& pop, std::size_t& coconuts, const UpdateScheme& scheme,
                const ModelParams& p, Rng& rng);
StepResult step(Population& pop, const UpdateScheme& scheme, const ModelParams& p, Rng& rng);

enum class EventKind : std::uint8_t { none = 0, climb = 1, trade = 2 };

struct Trajectory {
    std::size_t n_agents = 0;
    double mean_strategy = 0.0;
    std::vector<std::uint32_t> coconuts; // e after each step
    std::vector<EventKind> events;       // climb/trade occurring in the step, if any
    std::vector<double> rewards;         // summed reward of the step
    std::size_t climbs = 0;
    std::size_t trades = 0;

    std::size_t size() const { return coconuts.size(); }
    double epsilon(std::size_t k) const {
        return static_cast<double>(coconuts[k]) / static_cast<double>(n_agents);
    }
    // Mean of epsilon over steps [from, size()).
    double mean_epsilon(std::size_t from) const;
    // Normalized occupancy of each e in 0..N over steps [from, size()).
    std::vector<double> occupancy(std::size_t from) const;
};

Trajectory run(const ModelParams& p, const UpdateScheme& scheme, const SimConfig& cfg,
               std::span<const double> strategies, Rng& rng);

struct StationaryEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::vector<double> replicate_means;
};

// Post-burn-in mean of epsilon pooled over cfg.replicates independent runs.
// Replicate r draws from Rng::stream(p.master_seed, experiment, r).
StationaryEstimate stationary_mean(const ModelParams& p, const UpdateScheme& scheme,
                                   const SimConfig& cfg, std::span<const double> strategies,
                                   std::string_view experiment = "stationary_mean");

// CSV: step, epsilon, mean_strategy, event_type, reward.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

} // namespace coconut

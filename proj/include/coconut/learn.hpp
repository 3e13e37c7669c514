#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coconut/abm.hpp"
#include "coconut/core.hpp"
#include "coconut/rng.hpp"

namespace coconut {

// Settings of a TD-learning run. Trading follows AM2; with eps_fix set, a
// chosen coconut holder trades with that probability regardless of the
// population state (climbing still depends on the actual population).
struct LearnConfig {
    double alpha = 0.05;
    double gamma = 0.1;
    double exploration_amplitude = 0.0; // half-width of uniform strategy noise
    std::optional<double> eps_fix;
    double v1_init = 0.6;
    double v0_init = 0.0;
    double eps0 = 0.5;
    std::size_t total_steps = 200000;
    SelfTradeMode self_trade = SelfTradeMode::exclude_self;
    std::size_t record_stride = 1; // keep every k-th step of the trajectory

    // alpha and gamma taken from p, everything else at its default.
    static LearnConfig from(const ModelParams& p);

    // Per-micro-step discount exp(-gamma / N).
    double gamma_r(std::size_t n_agents) const;
    void validate() const;
};

// r + gamma_r * V(s_new) - V(s_old)
double td_error(int s_old, int s_new, double reward, double v1, double v0, double gamma_r);

// One micro step: the AM2 action of a uniformly chosen agent, then a TD
// update of every agent's value for its pre-step state (zero reward for all
// but the acting agent), then c = V(1) - V(0) plus optional exploration noise.
// `coconuts` tracks e and is updated in place.
StepEvent learn_step(Population& pop, std::size_t& coconuts, const LearnConfig& cfg,
                     const ModelParams& p, Rng& rng);
StepEvent learn_step(Population& pop, const LearnConfig& cfg, const ModelParams& p, Rng& rng);

struct LearningTrajectory {
    std::size_t stride = 1;
    std::vector<double> epsilon;
    std::vector<double> mean_c; // mean of V(1) - V(0), before exploration noise
    std::vector<double> mean_v1;
    std::vector<double> mean_v0;
    Population final_population;

    std::size_t size() const { return epsilon.size(); }
    // Micro step recorded at index k (1-based step count).
    std::size_t step_at(std::size_t k) const { return (k + 1) * stride; }
    double final_mean_c() const;
};

// Population starts with eps0 coconut density and values (v1_init, v0_init).
LearningTrajectory run_learning(const ModelParams& p, const LearnConfig& cfg, Rng& rng);

struct ProbePoint {
    double eps_fix = 0.0;
    double mean_c = 0.0;   // final-configuration mean strategy
    double epsilon = 0.0;  // final coconut density
};

// One run per eps_fix value; run k draws from Rng::stream(p.master_seed, experiment, k).
std::vector<ProbePoint> nullcline_probe(const ModelParams& p, const LearnConfig& cfg,
                                        std::span<const double> eps_fix_grid,
                                        const std::string& experiment = "nullcline_probe");

std::vector<double> linspace(double lo, double hi, std::size_t n);

struct PhaseGrid {
    double eps_lo = 0.0, eps_hi = 1.0;
    std::size_t eps_points = 26;
    double c_lo = 0.3, c_hi = 0.5;
    std::size_t c_points = 26;
    std::size_t runs = 10;
    std::size_t steps = 10000;
};

struct PhaseCell {
    double eps0 = 0.0;
    double c0 = 0.0;
    double eps_final_mean = 0.0;
    double c_final_mean = 0.0;
    std::size_t n_runs = 0;
};

// For every (eps0, c0) grid point: `runs` learning runs with V(0) = 0 and
// V(1) = c0 for all agents, averaged final eps and mean strategy. Cells are
// ordered eps-major. Run r of cell k uses stream index k * runs + r.
std::vector<PhaseCell> phase_diagram(const ModelParams& p, const LearnConfig& cfg,
                                     const PhaseGrid& grid,
                                     const std::string& experiment = "phase_diagram");

} // namespace coconut

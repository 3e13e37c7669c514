#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "coconut/abm.hpp"
#include "coconut/core.hpp"
#include "coconut/rng.hpp"

namespace coconut {

enum class ScenarioKind { homogeneous, uniform, two_point, linear_decreasing, gamma_dist };

std::string_view to_string(ScenarioKind k);
ScenarioKind scenario_kind_from_string(std::string_view name);

// Fixed strategy distribution over [c_min, c_max].
//   homogeneous        every agent at `c`
//   uniform            i.i.d. uniform
//   two_point          ceil(N/2) agents at c_a, the rest at c_b
//   linear_decreasing  density proportional to (c_max - c), by inverse CDF
//   gamma_dist         c_min + Exp(gamma_scale), redrawn until <= c_max
struct StrategyScenario {
    ScenarioKind kind = ScenarioKind::uniform;
    double c = 0.4;
    double c_a = 0.35;
    double c_b = 0.45;
    double gamma_scale = 0.2;

    static StrategyScenario homogeneous(double c);
    static StrategyScenario uniform();
    static StrategyScenario two_point(double c_a, double c_b);
    static StrategyScenario linear_decreasing();
    static StrategyScenario gamma_dist(double scale = 0.2);
};

std::vector<double> sample_strategies(const StrategyScenario& sc, std::size_t n,
                                      const ModelParams& p, Rng& rng);

// Population covariance between holding a coconut and the climbing probability:
// (1/N) sum s_i G(c_i) - eps (1/N) sum G(c_i).
double covariance_sigma(const Population& pop, const ModelParams& p);

// <G(c_i)>, the population mean climbing probability.
double mean_climb_probability(std::span<const double> strategies, const ModelParams& p);

// Exact <G^k> for k = 1..k_max under the scenario's distribution (gamma_dist
// by adaptive quadrature of the truncated density to 1e-10).
std::vector<double> scenario_moments(const StrategyScenario& sc, const ModelParams& p,
                                     std::size_t k_max);

// <G^k> of a concrete strategy sample.
std::vector<double> sample_moments(std::span<const double> strategies, const ModelParams& p,
                                   std::size_t k_max);

inline constexpr std::size_t kSigmaWindow = 2000;

struct SigmaEstimate {
    double sigma_bar = 0.0;            // mean of the last `steps_averaged` entries of series
    std::vector<double> series;        // sigma(t) for every post-burn-in step
    std::size_t steps_averaged = 0;
    double mean_epsilon = 0.0;         // post-burn-in mean of eps
    std::vector<double> occupancy;     // post-burn-in histogram of e
};

// Runs the ABM with the given fixed strategies and tracks sigma(t) after every
// post-burn-in step. Requires total_steps >= burn_in_steps + window.
SigmaEstimate estimate_sigma_bar(const ModelParams& p, std::span<const double> strategies,
                                 const UpdateScheme& scheme, const SimConfig& cfg, Rng& rng,
                                 std::size_t window = kSigmaWindow);

// Draws strategies from the scenario with `rng`, then runs as above.
SigmaEstimate estimate_sigma_bar(const ModelParams& p, const StrategyScenario& sc,
                                 const UpdateScheme& scheme, const SimConfig& cfg, Rng& rng,
                                 std::size_t window = kSigmaWindow);

} // namespace coconut

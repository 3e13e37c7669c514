#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "coconut/rng.hpp"

namespace coconut {

// Exogenous constants of the coconut economy. Defaults are the baseline
// parameterization used by every experiment preset.
struct ModelParams {
    std::size_t n_agents = 100;
    double f = 0.8;      // tree encounter probability
    double y = 0.6;      // utility of consuming a coconut
    double c_min = 0.3;  // tree cost support
    double c_max = 0.5;
    double gamma = 0.1;  // continuous-time discount rate
    double alpha = 0.05; // TD learning rate
    std::uint64_t master_seed = 1982;

    // Throws ConfigError naming every violated constraint.
    void validate() const;
};

// Per-agent state: coconut indicator, strategy threshold and the two learned values.
struct Population {
    std::vector<std::uint8_t> states;
    std::vector<double> strategies;
    std::vector<double> values_have; // V(1)
    std::vector<double> values_not;  // V(0)

    std::size_t size() const { return states.size(); }
    std::size_t coconuts() const;
};

// Tree-cost distribution G: uniform on [c_min, c_max], saturating outside.
double cost_cdf(double c, const ModelParams& p);

// Expected surplus of accepting trees up to threshold c, i.e. the integral of
// (c - c') dG(c') over c' <= c. Its derivative in c is cost_cdf(c).
double climb_integral(double c, const ModelParams& p);

double epsilon(const Population& pop);

// Each agent holds a coconut independently with probability eps0; all value
// pairs start at (v1_0, v0_0).
Population init_population(const ModelParams& p, double eps0, std::span<const double> strategies,
                           double v1_0, double v0_0, Rng& rng);

double mean(std::span<const double> xs);

} // namespace coconut

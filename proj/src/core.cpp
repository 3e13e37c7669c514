#include "coconut/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "coconut/errors.hpp"

namespace coconut {

void ModelParams::validate() const {
    std::ostringstream problems;
    auto fail = [&problems](const char* msg) {
        if (problems.tellp() > 0) problems << "; ";
        problems << msg;
    };
    if (n_agents < 2) fail("n_agents must be >= 2");
    if (!(f >= 0.0 && f <= 1.0)) fail("f must lie in [0, 1]");
    if (!std::isfinite(y)) fail("y must be finite");
    if (!(std::isfinite(c_min) && std::isfinite(c_max) && c_min < c_max))
        fail("c_min must be < c_max");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail("gamma must be >= 0");
    if (!(alpha > 0.0 && alpha < 1.0)) fail("alpha must lie in (0, 1)");
    if (problems.tellp() > 0) throw ConfigError("invalid model parameters: " + problems.str());
}

std::size_t Population::coconuts() const {
    return static_cast<std::size_t>(std::count(states.begin(), states.end(), std::uint8_t{1}));
}

double cost_cdf(double c, const ModelParams& p) {
    if (c <= p.c_min) return 0.0;
    if (c >= p.c_max) return 1.0;
    return (c - p.c_min) / (p.c_max - p.c_min);
}

double climb_integral(double c, const ModelParams& p) {
    if (c <= p.c_min) return 0.0;
    const double width = p.c_max - p.c_min;
    if (c <= p.c_max) {
        const double d = c - p.c_min;
        return d * d / (2.0 * width);
    }
    return c - 0.5 * (p.c_min + p.c_max);
}

double epsilon(const Population& pop) {
    if (pop.size() == 0) return 0.0;
    return static_cast<double>(pop.coconuts()) / static_cast<double>(pop.size());
}

Population init_population(const ModelParams& p, double eps0, std::span<const double> strategies,
                           double v1_0, double v0_0, Rng& rng) {
    if (strategies.size() != p.n_agents) {
        throw ConfigError("init_population: " + std::to_string(strategies.size()) +
                          " strategies for " + std::to_string(p.n_agents) + " agents");
    }
    if (!(eps0 >= 0.0 && eps0 <= 1.0)) throw ConfigError("init_population: eps0 outside [0, 1]");

    Population pop;
    pop.states.resize(p.n_agents);
    for (auto& s : pop.states) s = rng.bernoulli(eps0) ? 1 : 0;
    pop.strategies.assign(strategies.begin(), strategies.end());
    pop.values_have.assign(p.n_agents, v1_0);
    pop.values_not.assign(p.n_agents, v0_0);
    return pop;
}

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

} // namespace coconut

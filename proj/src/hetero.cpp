#include "coconut/hetero.hpp"

#include <cmath>
#include <functional>

#include "coconut/errors.hpp"

namespace coconut {

std::string_view to_string(ScenarioKind k) {
    switch (k) {
    case ScenarioKind::homogeneous: return "homogeneous";
    case ScenarioKind::uniform: return "uniform";
    case ScenarioKind::two_point: return "two_point";
    case ScenarioKind::linear_decreasing: return "linear_decreasing";
    case ScenarioKind::gamma_dist: return "gamma_dist";
    }
    return "?";
}

ScenarioKind scenario_kind_from_string(std::string_view name) {
    for (auto k : {ScenarioKind::homogeneous, ScenarioKind::uniform, ScenarioKind::two_point,
                   ScenarioKind::linear_decreasing, ScenarioKind::gamma_dist})
        if (to_string(k) == name) return k;
    throw ConfigError("unknown scenario kind '" + std::string(name) + "'");
}

StrategyScenario StrategyScenario::homogeneous(double c) {
    StrategyScenario s;
    s.kind = ScenarioKind::homogeneous;
    s.c = c;
    return s;
}

StrategyScenario StrategyScenario::uniform() {
    StrategyScenario s;
    s.kind = ScenarioKind::uniform;
    return s;
}

StrategyScenario StrategyScenario::two_point(double c_a, double c_b) {
    StrategyScenario s;
    s.kind = ScenarioKind::two_point;
    s.c_a = c_a;
    s.c_b = c_b;
    return s;
}

StrategyScenario StrategyScenario::linear_decreasing() {
    StrategyScenario s;
    s.kind = ScenarioKind::linear_decreasing;
    return s;
}

StrategyScenario StrategyScenario::gamma_dist(double scale) {
    StrategyScenario s;
    s.kind = ScenarioKind::gamma_dist;
    s.gamma_scale = scale;
    return s;
}

std::vector<double> sample_strategies(const StrategyScenario& sc, std::size_t n,
                                      const ModelParams& p, Rng& rng) {
    if (n < 1) throw ConfigError("sample_strategies: need at least one agent");
    const double width = p.c_max - p.c_min;
    std::vector<double> out(n);
    switch (sc.kind) {
    case ScenarioKind::homogeneous:
        std::fill(out.begin(), out.end(), sc.c);
        break;
    case ScenarioKind::uniform:
        for (auto& c : out) c = rng.uniform(p.c_min, p.c_max);
        break;
    case ScenarioKind::two_point: {
        const std::size_t first = (n + 1) / 2;
        for (std::size_t i = 0; i < n; ++i) out[i] = i < first ? sc.c_a : sc.c_b;
        break;
    }
    case ScenarioKind::linear_decreasing:
        // CDF F(c) = 1 - (1 - (c - c_min)/width)^2.
        for (auto& c : out) c = p.c_min + width * (1.0 - std::sqrt(1.0 - rng.uniform()));
        break;
    case ScenarioKind::gamma_dist:
        if (!(sc.gamma_scale > 0.0)) throw ConfigError("gamma_dist: scale must be positive");
        for (auto& c : out) {
            do {
                c = p.c_min - sc.gamma_scale * std::log1p(-rng.uniform());
            } while (c > p.c_max);
        }
        break;
    }
    return out;
}

double mean_climb_probability(std::span<const double> strategies, const ModelParams& p) {
    if (strategies.empty()) return 0.0;
    double sum = 0.0;
    for (double c : strategies) sum += cost_cdf(c, p);
    return sum / static_cast<double>(strategies.size());
}

double covariance_sigma(const Population& pop, const ModelParams& p) {
    const std::size_t n = pop.size();
    if (n == 0) return 0.0;
    // Covariance is shift invariant; centering on the first agent's climbing
    // probability makes a constant G give exactly zero.
    const double g_ref = cost_cdf(pop.strategies[0], p);
    double joint = 0.0, d_sum = 0.0, s_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = cost_cdf(pop.strategies[i], p) - g_ref;
        d_sum += d;
        s_sum += pop.states[i];
        if (pop.states[i]) joint += d;
    }
    const double nd = static_cast<double>(n);
    return joint / nd - (s_sum / nd) * (d_sum / nd);
}

namespace {

double simpson(const std::function<double(double)>& fn, double a, double b, double fa, double fm,
               double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = fn(lm), frm = fn(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson(fn, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson(fn, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& fn, double a, double b, double tol) {
    const double fa = fn(a), fb = fn(b), fm = fn(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson(fn, a, b, fa, fm, fb, whole, tol, 40);
}

} // namespace

std::vector<double> scenario_moments(const StrategyScenario& sc, const ModelParams& p,
                                     std::size_t k_max) {
    if (k_max < 1) throw ConfigError("scenario_moments: k_max must be >= 1");
    std::vector<double> m(k_max);
    for (std::size_t k = 1; k <= k_max; ++k) {
        const double kd = static_cast<double>(k);
        double value = 0.0;
        switch (sc.kind) {
        case ScenarioKind::homogeneous:
            value = std::pow(cost_cdf(sc.c, p), kd);
            break;
        case ScenarioKind::uniform:
            value = 1.0 / (kd + 1.0);
            break;
        case ScenarioKind::two_point:
            value = 0.5 * (std::pow(cost_cdf(sc.c_a, p), kd) + std::pow(cost_cdf(sc.c_b, p), kd));
            break;
        case ScenarioKind::linear_decreasing:
            value = 2.0 / ((kd + 1.0) * (kd + 2.0));
            break;
        case ScenarioKind::gamma_dist: {
            // G = x / width with x ~ Exp(scale) truncated to [0, width].
            const double rate = (p.c_max - p.c_min) / sc.gamma_scale;
            const double norm = -std::expm1(-rate);
            auto density = [rate, norm, kd](double g) {
                return std::pow(g, kd) * rate * std::exp(-rate * g) / norm;
            };
            value = adaptive_simpson(density, 0.0, 1.0, 1e-12);
            break;
        }
        }
        m[k - 1] = value;
    }
    return m;
}

std::vector<double> sample_moments(std::span<const double> strategies, const ModelParams& p,
                                   std::size_t k_max) {
    std::vector<double> m(k_max, 0.0);
    for (double c : strategies) {
        const double g = cost_cdf(c, p);
        double power = 1.0;
        for (std::size_t k = 0; k < k_max; ++k) {
            power *= g;
            m[k] += power;
        }
    }
    for (auto& v : m) v /= static_cast<double>(strategies.size());
    return m;
}

SigmaEstimate estimate_sigma_bar(const ModelParams& p, std::span<const double> strategies,
                                 const UpdateScheme& scheme, const SimConfig& cfg, Rng& rng,
                                 std::size_t window) {
    cfg.validate();
    if (window == 0) throw ConfigError("estimate_sigma_bar: empty averaging window");
    if (cfg.total_steps < cfg.burn_in_steps + window)
        throw ConfigError("estimate_sigma_bar: total_steps must cover burn-in plus the window");

    Population pop = init_population(p, cfg.eps0, strategies, 0.0, 0.0, rng);
    const std::size_t n = pop.size();
    const double nd = static_cast<double>(n);
    const double g_ref = cost_cdf(pop.strategies[0], p);
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = cost_cdf(pop.strategies[i], p) - g_ref;
    const double d_mean = mean(d);

    // Running sum of s_i (G(c_i) - g_ref), updated from the step events.
    double joint = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (pop.states[i]) joint += d[i];
    std::size_t e = pop.coconuts();

    SigmaEstimate est;
    est.series.reserve(cfg.total_steps - cfg.burn_in_steps);
    est.occupancy.assign(n + 1, 0.0);
    double eps_sum = 0.0;
    for (std::size_t t = 0; t < cfg.total_steps; ++t) {
        const StepResult res = step(pop, e, scheme, p, rng);
        for (const auto& ev : res.view()) {
            if (ev.transition == Transition::climb) joint += d[ev.agent];
            if (ev.transition == Transition::trade) joint -= d[ev.agent];
        }
        if (t >= cfg.burn_in_steps) {
            const double eps = static_cast<double>(e) / nd;
            est.series.push_back(joint / nd - eps * d_mean);
            est.occupancy[e] += 1.0;
            eps_sum += eps;
        }
    }
    const std::size_t measured = cfg.total_steps - cfg.burn_in_steps;
    for (auto& h : est.occupancy) h /= static_cast<double>(measured);
    est.mean_epsilon = eps_sum / static_cast<double>(measured);
    double tail = 0.0;
    for (std::size_t k = est.series.size() - window; k < est.series.size(); ++k) tail += est.series[k];
    est.sigma_bar = tail / static_cast<double>(window);
    est.steps_averaged = window;
    return est;
}

SigmaEstimate estimate_sigma_bar(const ModelParams& p, const StrategyScenario& sc,
                                 const UpdateScheme& scheme, const SimConfig& cfg, Rng& rng,
                                 std::size_t window) {
    const auto strategies = sample_strategies(sc, p.n_agents, p, rng);
    return estimate_sigma_bar(p, strategies, scheme, cfg, rng, window);
}

} // namespace coconut

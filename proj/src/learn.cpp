#include "coconut/learn.hpp"

#include <cmath>

#include "coconut/errors.hpp"
#include "coconut/parallel.hpp"

namespace coconut {

LearnConfig LearnConfig::from(const ModelParams& p) {
    LearnConfig cfg;
    cfg.alpha = p.alpha;
    cfg.gamma = p.gamma;
    return cfg;
}

double LearnConfig::gamma_r(std::size_t n_agents) const {
    return std::exp(-gamma / static_cast<double>(n_agents));
}

void LearnConfig::validate() const {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("learning: alpha must lie in [0, 1)");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("learning: gamma must be >= 0");
    if (!(exploration_amplitude >= 0.0))
        throw ConfigError("learning: exploration_amplitude must be >= 0");
    if (eps_fix && !(*eps_fix >= 0.0 && *eps_fix <= 1.0))
        throw ConfigError("learning: eps_fix must lie in [0, 1]");
    if (!(eps0 >= 0.0 && eps0 <= 1.0)) throw ConfigError("learning: eps0 must lie in [0, 1]");
    if (!std::isfinite(v1_init) || !std::isfinite(v0_init))
        throw ConfigError("learning: initial values must be finite");
    if (record_stride == 0) throw ConfigError("learning: record_stride must be positive");
}

double td_error(int s_old, int s_new, double reward, double v1, double v0, double gamma_r) {
    const double next = s_new ? v1 : v0;
    const double current = s_old ? v1 : v0;
    return reward + gamma_r * next - current;
}

namespace {

struct StepMeans {
    double c = 0.0;
    double v1 = 0.0;
    double v0 = 0.0;
};

StepEvent learn_step_impl(Population& pop, std::size_t& coconuts, const LearnConfig& cfg,
                          const ModelParams& p, Rng& rng, double gamma_r, StepMeans* means) {
    const std::size_t n = pop.size();

    // Loop I: search and trade.
    const std::size_t i = rng.index(n);
    const int s_old_i = pop.states[i];
    const double q = cfg.eps_fix ? *cfg.eps_fix : am2_trade_probability(coconuts, n, cfg.self_trade);
    const StepEvent ev = am2_act(pop, i, q, p, rng);
    if (ev.transition == Transition::climb) ++coconuts;
    if (ev.transition == Transition::trade) --coconuts;

    // Loop II: learning for every agent.
    const double alpha = cfg.alpha;
    const double noise = cfg.exploration_amplitude;
    double sum_v1 = 0.0, sum_v0 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const int s_new = pop.states[j];
        const int s_old = j == i ? s_old_i : s_new;
        const double reward = j == i ? ev.reward : 0.0;
        double& v1 = pop.values_have[j];
        double& v0 = pop.values_not[j];
        const double delta = td_error(s_old, s_new, reward, v1, v0, gamma_r);
        if (s_old)
            v1 += alpha * delta;
        else
            v0 += alpha * delta;
        double c = v1 - v0;
        if (noise > 0.0) c += rng.uniform(-noise, noise);
        pop.strategies[j] = c;
        sum_v1 += v1;
        sum_v0 += v0;
    }
    if (means) {
        const double nd = static_cast<double>(n);
        means->v1 = sum_v1 / nd;
        means->v0 = sum_v0 / nd;
        means->c = means->v1 - means->v0;
    }
    return ev;
}

Population initial_population(const ModelParams& p, const LearnConfig& cfg, Rng& rng) {
    const std::vector<double> strategies(p.n_agents, cfg.v1_init - cfg.v0_init);
    return init_population(p, cfg.eps0, strategies, cfg.v1_init, cfg.v0_init, rng);
}

} // namespace

StepEvent learn_step(Population& pop, std::size_t& coconuts, const LearnConfig& cfg,
                     const ModelParams& p, Rng& rng) {
    return learn_step_impl(pop, coconuts, cfg, p, rng, cfg.gamma_r(pop.size()), nullptr);
}

StepEvent learn_step(Population& pop, const LearnConfig& cfg, const ModelParams& p, Rng& rng) {
    std::size_t e = pop.coconuts();
    return learn_step(pop, e, cfg, p, rng);
}

double LearningTrajectory::final_mean_c() const {
    const auto& pop = final_population;
    if (pop.size() == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t j = 0; j < pop.size(); ++j) sum += pop.values_have[j] - pop.values_not[j];
    return sum / static_cast<double>(pop.size());
}

LearningTrajectory run_learning(const ModelParams& p, const LearnConfig& cfg, Rng& rng) {
    p.validate();
    cfg.validate();
    LearningTrajectory traj;
    traj.stride = cfg.record_stride;
    Population pop = initial_population(p, cfg, rng);
    const double gamma_r = cfg.gamma_r(p.n_agents);
    const std::size_t records = cfg.total_steps / cfg.record_stride;
    traj.epsilon.reserve(records);
    traj.mean_c.reserve(records);
    traj.mean_v1.reserve(records);
    traj.mean_v0.reserve(records);

    std::size_t e = pop.coconuts();
    const double nd = static_cast<double>(p.n_agents);
    StepMeans means;
    for (std::size_t t = 1; t <= cfg.total_steps; ++t) {
        learn_step_impl(pop, e, cfg, p, rng, gamma_r, &means);
        if (t % cfg.record_stride == 0) {
            traj.epsilon.push_back(static_cast<double>(e) / nd);
            traj.mean_c.push_back(means.c);
            traj.mean_v1.push_back(means.v1);
            traj.mean_v0.push_back(means.v0);
        }
    }
    traj.final_population = std::move(pop);
    return traj;
}

std::vector<ProbePoint> nullcline_probe(const ModelParams& p, const LearnConfig& cfg,
                                        std::span<const double> eps_fix_grid,
                                        const std::string& experiment) {
    for (double q : eps_fix_grid)
        if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("nullcline_probe: eps_fix outside [0, 1]");
    std::vector<ProbePoint> out(eps_fix_grid.size());
    parallel_for(eps_fix_grid.size(), [&](std::size_t k) {
        LearnConfig run_cfg = cfg;
        run_cfg.eps_fix = eps_fix_grid[k];
        run_cfg.record_stride = cfg.total_steps;
        Rng rng = Rng::stream(p.master_seed, experiment, k);
        const LearningTrajectory traj = run_learning(p, run_cfg, rng);
        out[k].eps_fix = eps_fix_grid[k];
        out[k].mean_c = traj.final_mean_c();
        out[k].epsilon = epsilon(traj.final_population);
    });
    return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> xs(n);
    if (n == 1) {
        xs[0] = lo;
        return xs;
    }
    for (std::size_t k = 0; k < n; ++k)
        xs[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    return xs;
}

std::vector<PhaseCell> phase_diagram(const ModelParams& p, const LearnConfig& cfg,
                                     const PhaseGrid& grid, const std::string& experiment) {
    if (grid.eps_points == 0 || grid.c_points == 0 || grid.runs == 0 || grid.steps == 0)
        throw ConfigError("phase_diagram: empty grid");
    if (!(grid.eps_lo >= 0.0 && grid.eps_hi <= 1.0 && grid.eps_lo <= grid.eps_hi))
        throw ConfigError("phase_diagram: eps0 range must lie within [0, 1]");
    if (!(grid.c_lo <= grid.c_hi)) throw ConfigError("phase_diagram: c0 range is inverted");
    const auto eps_axis = linspace(grid.eps_lo, grid.eps_hi, grid.eps_points);
    const auto c_axis = linspace(grid.c_lo, grid.c_hi, grid.c_points);
    const std::size_t cells = eps_axis.size() * c_axis.size();

    std::vector<double> eps_final(cells * grid.runs), c_final(cells * grid.runs);
    parallel_for(cells * grid.runs, [&](std::size_t job) {
        const std::size_t cell = job / grid.runs;
        LearnConfig run_cfg = cfg;
        run_cfg.eps0 = eps_axis[cell / c_axis.size()];
        run_cfg.v1_init = c_axis[cell % c_axis.size()];
        run_cfg.v0_init = 0.0;
        run_cfg.total_steps = grid.steps;
        run_cfg.record_stride = grid.steps;
        Rng rng = Rng::stream(p.master_seed, experiment, job);
        const LearningTrajectory traj = run_learning(p, run_cfg, rng);
        eps_final[job] = epsilon(traj.final_population);
        c_final[job] = traj.final_mean_c();
    });

    std::vector<PhaseCell> out(cells);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        PhaseCell& pc = out[cell];
        pc.eps0 = eps_axis[cell / c_axis.size()];
        pc.c0 = c_axis[cell % c_axis.size()];
        pc.n_runs = grid.runs;
        for (std::size_t r = 0; r < grid.runs; ++r) {
            pc.eps_final_mean += eps_final[cell * grid.runs + r];
            pc.c_final_mean += c_final[cell * grid.runs + r];
        }
        pc.eps_final_mean /= static_cast<double>(grid.runs);
        pc.c_final_mean /= static_cast<double>(grid.runs);
    }
    return out;
}

} // namespace coconut

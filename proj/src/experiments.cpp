#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>

#include <Eigen/Core>

#include "coconut/abm.hpp"
#include "coconut/chain.hpp"
#include "coconut/csv.hpp"
#include "coconut/dynamics.hpp"
#include "coconut/harness.hpp"
#include "coconut/hetero.hpp"
#include "coconut/learn.hpp"
#include "coconut/parallel.hpp"
#include "plot.hpp"

#ifndef COCONUT_VERSION
#define COCONUT_VERSION "0.0.0"
#endif

namespace coconut::harness {

using nlohmann::json;
namespace fs = std::filesystem;
using csv::number;

namespace {

// Opens CSV files in the output directory and remembers what was written.
class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

    std::ofstream open(const std::string& name) {
        const fs::path path = dir_ / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write " + path.string());
        files_.push_back(path);
        return out;
    }

    static void finish(std::ofstream& out, const std::string& name) {
        out.flush();
        if (!out) throw IoError("failed writing " + name);
    }

    const std::vector<fs::path>& files() const { return files_; }

private:
    fs::path dir_;
    std::vector<fs::path> files_;
};

template <typename T>
T get(const json& s, const char* key) {
    return s.at(key).get<T>();
}

std::vector<double> doubles(const json& s, const char* key) { return s.at(key).get<std::vector<double>>(); }

StrategyScenario scenario_from_json(const json& j) {
    const ScenarioKind kind = scenario_kind_from_string(j.at("kind").get<std::string>());
    StrategyScenario sc;
    sc.kind = kind;
    if (j.contains("c")) sc.c = j["c"];
    if (j.contains("c_a")) sc.c_a = j["c_a"];
    if (j.contains("c_b")) sc.c_b = j["c_b"];
    if (j.contains("scale")) sc.gamma_scale = j["scale"];
    return sc;
}

LearnConfig learn_config(const ModelParams& p, const json& s) {
    LearnConfig cfg = LearnConfig::from(p);
    if (s.contains("total_steps")) cfg.total_steps = get<std::size_t>(s, "total_steps");
    if (s.contains("eps0")) cfg.eps0 = s["eps0"];
    if (s.contains("v1_init")) cfg.v1_init = s["v1_init"];
    if (s.contains("v0_init")) cfg.v0_init = s["v0_init"];
    if (s.contains("exploration_amplitude")) cfg.exploration_amplitude = s["exploration_amplitude"];
    if (s.contains("eps_fix") && !s["eps_fix"].is_null()) cfg.eps_fix = s["eps_fix"].get<double>();
    if (s.contains("self_trade")) cfg.self_trade = self_trade_from_string(get<std::string>(s, "self_trade"));
    if (s.contains("record_stride")) cfg.record_stride = get<std::size_t>(s, "record_stride");
    return cfg;
}

PhaseGrid phase_grid(const json& s) {
    PhaseGrid g;
    g.eps_lo = s["eps_lo"];
    g.eps_hi = s["eps_hi"];
    g.eps_points = get<std::size_t>(s, "eps_points");
    g.c_lo = s["c_lo"];
    g.c_hi = s["c_hi"];
    g.c_points = get<std::size_t>(s, "c_points");
    g.runs = get<std::size_t>(s, "runs");
    g.steps = get<std::size_t>(s, "total_steps");
    return g;
}

std::string experiment_tag(const ExperimentSpec& spec) {
    if (spec.id != ExperimentId::custom) return std::string(to_string(spec.id));
    return spec.settings.value("task", "custom");
}

std::string stream_name(const std::string& tag, std::size_t k) { return tag + "/" + std::to_string(k); }

// -- curves shared by the learning figures --------------------------------

// Strategy nullcline c(eps), the eps-nullcline of the value system eps*(c) and
// the equilibria at this discount rate, in the gamma, c, eps, branch layout.
void write_curves(std::ostream& out, const ModelParams& p, std::size_t points) {
    const std::string g = number(p.gamma);
    for (double eps : linspace(0.0, 1.0, points))
        csv::row(out, {g, number(strategy_nullcline(eps, p)), number(eps), "c_nullcline"});
    for (double c : linspace(p.c_min, p.c_max, points))
        csv::row(out, {g, number(c), number(epsilon_fixpoint(c, p, FixpointVariant::original)),
                       "eps_nullcline"});
    if (p.gamma > 0.0) write_equilibria_csv(out, p.gamma, solve_equilibria(p), false);
}

json equilibria_json(const std::vector<Equilibrium>& eqs) {
    json arr = json::array();
    for (const auto& e : eqs)
        arr.push_back({{"branch", std::string(to_string(e.branch))}, {"eps", e.eps_star},
                       {"c", e.c_star}, {"v1", e.v1_star}, {"v0", e.v0_star}});
    return arr;
}

// -- presets ----------------------------------------------------------------

json run_fig1(const ExperimentSpec& spec, Outputs& outs) {
    const auto& s = spec.settings;
    const ModelParams& p = spec.params;
    SimConfig cfg;
    cfg.burn_in_steps = get<std::size_t>(s, "burn_in_steps");
    cfg.total_steps = cfg.burn_in_steps + get<std::size_t>(s, "measured_steps");
    cfg.replicates = get<std::size_t>(s, "replicates");
    cfg.eps0 = s["eps0"];
    const SelfTradeMode mode = self_trade_from_string(get<std::string>(s, "self_trade"));
    const auto cs = doubles(s, "c_values");

    auto out = outs.open("fig1.csv");
    csv::row(out, {"c", "mean_eps_IM", "mean_eps_AM1", "mean_eps_AM2", "eps_star_eq3", "eps_star_eq5"});
    double dev_im = 0.0, dev_am = 0.0;
    for (std::size_t k = 0; k < cs.size(); ++k) {
        const std::vector<double> strategies(p.n_agents, cs[k]);
        double means[3];
        const Scheme schemes[3] = {Scheme::IM, Scheme::AM1, Scheme::AM2};
        for (int m = 0; m < 3; ++m) {
            const std::string tag = "fig1/" + std::string(to_string(schemes[m])) + "/" + std::to_string(k);
            means[m] = stationary_mean(p, {schemes[m], mode}, cfg, strategies, tag).mean;
        }
        const double ratio = epsilon_fixpoint(cs[k], p, FixpointVariant::original);
        const double pairs = epsilon_fixpoint(cs[k], p, FixpointVariant::adjusted);
        dev_im = std::max(dev_im, std::abs(means[0] - pairs));
        dev_am = std::max({dev_am, std::abs(means[1] - ratio), std::abs(means[2] - ratio)});
        csv::row(out, {number(cs[k]), number(means[0]), number(means[1]), number(means[2]), number(ratio),
                       number(pairs)});
    }
    Outputs::finish(out, "fig1.csv");
    return {{"max_abs_dev_IM_vs_pair_form", dev_im}, {"max_abs_dev_AM_vs_ratio_form", dev_am}};
}

json run_fig2(const ExperimentSpec& spec, Outputs& outs) {
    const auto& s = spec.settings;
    const ModelParams& p = spec.params;
    const double c = s["c"];
    SimConfig cfg;
    cfg.total_steps = get<std::size_t>(s, "total_steps");
    cfg.burn_in_steps = get<std::size_t>(s, "burn_in_steps");
    cfg.eps0 = s["eps0"];
    const std::size_t reps = get<std::size_t>(s, "replicates");
    const auto dist = stationary(build_chain(p, c, ChainVariant::IM_chain));

    const std::vector<double> strategies(p.n_agents, c);
    std::vector<std::vector<double>> occ(reps);
    parallel_for(reps, [&](std::size_t r) {
        Rng rng = Rng::stream(p.master_seed, "fig2", r);
        occ[r] = run(p, {Scheme::IM}, cfg, strategies, rng).occupancy(cfg.burn_in_steps);
    });
    std::vector<double> empirical(p.n_agents + 1, 0.0);
    for (const auto& o : occ)
        for (std::size_t e = 0; e < o.size(); ++e) empirical[e] += o[e] / static_cast<double>(reps);

    auto out = outs.open("fig2.csv");
    csv::row(out, {"e", "probability", "empirical"});
    for (std::size_t e = 0; e <= p.n_agents; ++e)
        csv::row(out, {number(e), number(dist.probabilities[e]), number(empirical[e])});
    Outputs::finish(out, "fig2.csv");
    double emp_mean = 0.0;
    for (std::size_t e = 0; e < empirical.size(); ++e) emp_mean += static_cast<double>(e) * empirical[e];
    return {{"total_variation", total_variation(dist.probabilities, empirical)},
            {"chain_mean_e", dist.mean()},
            {"empirical_mean_e", emp_mean},
            {"chain_mode", dist.mode_state}};
}

json run_heterogeneity(const ExperimentSpec& spec, Outputs& outs) {
    const auto& s = spec.settings;
    const ModelParams& p = spec.params;
    const std::string tag = experiment_tag(spec);
    SimConfig cfg;
    cfg.total_steps = get<std::size_t>(s, "total_steps");
    cfg.burn_in_steps = get<std::size_t>(s, "burn_in_steps");
    cfg.eps0 = s["eps0"];
    const std::size_t reps = get<std::size_t>(s, "replicates");
    const std::size_t window = get<std::size_t>(s, "window");
    const UpdateScheme scheme{scheme_from_string(get<std::string>(s, "scheme")),
                              self_trade_from_string(get<std::string>(s, "self_trade"))};
    const ChainVariant variant = scheme.variant == Scheme::IM ? ChainVariant::IM_chain : ChainVariant::AM2_chain;
    const auto& scenarios = s["scenarios"];

    auto summary_out = outs.open(tag + "_summary.csv");
    csv::row(summary_out, {"scenario", "kind", "mean_G", "sigma_bar", "mean_eps_sim", "eps_star_uncorrected",
                           "eps_star_corrected", "chain_mean_uncorrected", "chain_mean_corrected"});
    json results = json::array();
    for (std::size_t k = 0; k < scenarios.size(); ++k) {
        const StrategyScenario sc = scenario_from_json(scenarios[k]);
        Rng draw = Rng::stream(p.master_seed, tag + "/strategies", k);
        const auto strategies = sample_strategies(sc, p.n_agents, p, draw);
        const double g = mean_climb_probability(strategies, p);

        std::vector<SigmaEstimate> est(reps);
        parallel_for(reps, [&](std::size_t r) {
            Rng rng = Rng::stream(p.master_seed, stream_name(tag, k), r);
            est[r] = estimate_sigma_bar(p, strategies, scheme, cfg, rng, window);
        });
        double sigma_bar = 0.0, eps_sim = 0.0;
        std::vector<double> empirical(p.n_agents + 1, 0.0);
        for (const auto& e : est) {
            sigma_bar += e.sigma_bar / static_cast<double>(reps);
            eps_sim += e.mean_epsilon / static_cast<double>(reps);
            for (std::size_t j = 0; j < empirical.size(); ++j)
                empirical[j] += e.occupancy[j] / static_cast<double>(reps);
        }
        const auto plain = stationary(build_chain_from_climb_probability(p, g, variant));
        const auto corrected = stationary(build_chain_from_climb_probability(p, g, variant, sigma_bar));
        // Closed forms below use the 2 eps^2 trading rate of the IM scheme.
        const double eps_plain = epsilon_fixpoint_from_climb(g, p, FixpointVariant::adjusted);
        const double eps_corr = epsilon_fixpoint_from_climb(g, p, FixpointVariant::corrected, sigma_bar);
        const double nd = static_cast<double>(p.n_agents);

        const std::string kind(to_string(sc.kind));
        const std::string name = tag + "_" + std::to_string(k) + "_" + kind + ".csv";
        auto out = outs.open(name);
        csv::row(out, {"e", "probability_uncorrected", "probability_corrected", "empirical"});
        for (std::size_t e = 0; e <= p.n_agents; ++e)
            csv::row(out, {number(e), number(plain.probabilities[e]), number(corrected.probabilities[e]),
                           number(empirical[e])});
        Outputs::finish(out, name);
        csv::row(summary_out, {number(k), kind, number(g), number(sigma_bar), number(eps_sim),
                               number(eps_plain), number(eps_corr), number(plain.mean() / nd),
                               number(corrected.mean() / nd)});
        results.push_back({{"kind", kind}, {"mean_G", g}, {"sigma_bar", sigma_bar}, {"mean_eps_sim", eps_sim},
                           {"eps_star_uncorrected", eps_plain}, {"eps_star_corrected", eps_corr}});
    }
    Outputs::finish(summary_out, tag + "_summary.csv");
    return {{"scenarios", results}};
}

json run_fig5(const ExperimentSpec& spec, Outputs& outs) {
    const auto& s = spec.settings;
    const auto gammas = doubles(s, "gammas");
    const auto grid = doubles(s, "eps_fix_grid");
    const auto points = get<std::size_t>(s, "curve_points");

    auto probe_out = outs.open("fig5_probe.csv");
    csv::row(probe_out, {"gamma", "eps_fix", "mean_c", "epsilon", "nullcline_c"});
    auto curves = outs.open("fig5_curves.csv");
    csv::row(curves, {"gamma", "c", "eps", "branch"});
    json devs = json::array();
    for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
        ModelParams p = spec.params;
        p.gamma = gammas[gi];
        LearnConfig lc = learn_config(p, s);
        lc.record_stride = lc.total_steps;
        const auto probe = nullcline_probe(p, lc, grid, stream_name("fig5", gi));
        double worst = 0.0;
        for (const auto& pt : probe) {
            const double theory = strategy_nullcline(pt.eps_fix, p);
            if (pt.eps_fix >= 0.1) worst = std::max(worst, std::abs(pt.mean_c - theory));
            csv::row(probe_out, {number(p.gamma), number(pt.eps_fix), number(pt.mean_c), number(pt.epsilon),
                                 number(theory)});
        }
        write_curves(curves, p, points);
        devs.push_back({{"gamma", p.gamma}, {"max_abs_dev_eps_fix_ge_0.1", worst}});
    }
    Outputs::finish(probe_out, "fig5_probe.csv");
    Outputs::finish(curves, "fig5_curves.csv");
    return {{"probe", devs}};
}

json run_fig6(const ExperimentSpec& spec, Outputs& outs) {
    const auto& s = spec.settings;
    const auto gammas = doubles(s, "gammas");
    const std::size_t reps = get<std::size_t>(s, "replicates");

    auto theory = outs.open("fig6_theory.csv");
    csv::row(theory, {"gamma", "c", "eps", "branch"});
    for (double g : linspace(s["theory_gamma_lo"], s["theory_gamma_hi"], get<std::size_t>(s, "theory_points"))) {
        ModelParams p = spec.params;
        p.gamma = g;
        write_equilibria_csv(theory, g, solve_equilibria(p), false);
    }
    Outputs::finish(theory, "fig6_theory.csv");

    std::vector<double> eps_final(gammas.size() * reps), c_final(gammas.size() * reps);
    parallel_for(gammas.size() * reps, [&](std::size_t job) {
        ModelParams p = spec.params;
        p.gamma = gammas[job / reps];
        LearnConfig lc = learn_config(p, s);
        lc.record_stride = lc.total_steps;
        Rng rng = Rng::stream(p.master_seed, stream_name("fig6", job / reps), job % reps);
        const auto traj = run_learning(p, lc, rng);
        eps_final[job] = epsilon(traj.final_population);
        c_final[job] = traj.final_mean_c();
    });
    auto learn = outs.open("fig6_learning.csv");
    csv::row(learn, {"gamma", "replicate", "eps_final", "c_final"});
    for (std::size_t job = 0; job < eps_final.size(); ++job)
        csv::row(learn, {number(gammas[job / reps]), number(job % reps), number(eps_final[job]),
                         number(c_final[job])});
    Outputs::finish(learn, "fig6_learning.csv");

    json summary = json::object();
    try {
        summary["bifurcation_gamma"] = bifurcation_gamma(spec.params);
    } catch (const NumericalError& e) {
        summary["bifurcation_gamma"] = nullptr;
        summary["bifurcation_error"] = e.what();
    }
    return summary;
}

Equilibrium lower_equilibrium(const ModelParams& p) {
    const auto eqs = solve_equilibria(p);
    if (eqs.front().branch != Branch::lower)
        throw NumericalError("no interior equilibrium at gamma = " + number(p.gamma));
    return eqs.front();
}

// Replicate-averaged learning curves; returns (epsilon, mean_c) per record.
std::pair<std::vector<double>, std::vector<double>> averaged_learning(const ModelParams& p,
                                                                      const LearnConfig& lc,
                                                                      std::size_t reps,
                                                                      const std::string& tag) {
    std::vector<LearningTrajectory> runs(reps);
    parallel_for(reps, [&](std::size_t r) {
        Rng rng = Rng::stream(p.master_seed, tag, r);
        runs[r] = run_learning(p, lc, rng);
    });
    std::vector<double> eps(runs[0].size(), 0.0), c(runs[0].size(), 0.0);
    for (const auto& t : runs)
        for (std::size_t k = 0; k < t.size(); ++k) {
            eps[k] += t.epsilon[k] / static_cast<double>(reps);
            c[k] += t.mean_c[k] / static_cast<double>(reps);
        }
    return {eps, c};
}

json run_fig7(const ExperimentSpec& spec, Outputs& outs) {
    const auto& s = spec.settings;
    const ModelParams& p = spec.params;
    const Equilibrium eq = lower_equilibrium(p);
    const auto offsets = doubles(s, "v1_offsets");
    const std::size_t reps = get<std::size_t>(s, "replicates");

    auto out = outs.open("fig7.csv");
    csv::row(out, {"v1_offset", "step", "epsilon", "mean_c"});
    json finals = json::array();
    for (std::size_t k = 0; k < offsets.size(); ++k) {
        LearnConfig lc = learn_config(p, s);
        lc.eps0 = eq.eps_star;
        lc.v1_init = eq.v1_star + offsets[k];
        lc.v0_init = eq.v0_star;
        const auto [eps, c] = averaged_learning(p, lc, reps, stream_name("fig7", k));
        for (std::size_t j = 0; j < eps.size(); ++j)
            csv::row(out, {number(offsets[k]), number((j + 1) * lc.record_stride), number(eps[j]), number(c[j])});
        finals.push_back({{"v1_offset", offsets[k]}, {"final_mean_c", c.empty() ? 0.0 : c.back()}});
    }
    Outputs::finish(out, "fig7.csv");
    return {{"lower_equilibrium", equilibria_json({eq})}, {"runs", finals}};
}

json run_fig8(const ExperimentSpec& spec, Outputs& outs) {
    const auto& s = spec.settings;
    const auto sizes = s["n_agents_list"].get<std::vector<std::size_t>>();
    const std::size_t reps = get<std::size_t>(s, "replicates");
    const std::size_t per_agent = get<std::size_t>(s, "steps_per_agent");
    const Equilibrium eq = lower_equilibrium(spec.params);

    auto out = outs.open("fig8.csv");
    csv::row(out, {"n_agents", "step", "time", "epsilon", "mean_c"});
    json escape = json::array();
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        ModelParams p = spec.params;
        p.n_agents = sizes[k];
        LearnConfig lc = learn_config(p, s);
        lc.eps0 = eq.eps_star;
        lc.v1_init = eq.v1_star;
        lc.v0_init = eq.v0_star;
        lc.total_steps = per_agent * p.n_agents;
        lc.record_stride = p.n_agents; // one record per unit of time
        const auto [eps, c] = averaged_learning(p, lc, reps, stream_name("fig8", k));
        json first = nullptr;
        for (std::size_t j = 0; j < eps.size(); ++j) {
            const double time = static_cast<double>(j + 1);
            if (first.is_null() && c[j] > eq.c_star + 0.05) first = time;
            csv::row(out, {number(p.n_agents), number((j + 1) * lc.record_stride), number(time), number(eps[j]),
                           number(c[j])});
        }
        escape.push_back({{"n_agents", p.n_agents}, {"time_above_c_star_plus_0.05", first}});
    }
    Outputs::finish(out, "fig8.csv");
    return {{"lower_equilibrium", equilibria_json({eq})}, {"escape", escape}};
}

json run_phase(const ExperimentSpec& spec, Outputs& outs, const ModelParams& p, const std::string& name,
               const std::string& tag) {
    const auto& s = spec.settings;
    LearnConfig lc = learn_config(p, s);
    const auto cells = phase_diagram(p, lc, phase_grid(s), tag);
    auto out = outs.open(name);
    csv::row(out, {"eps0", "c0", "eps_final_mean", "c_final_mean", "n_runs"});
    for (const auto& c : cells)
        csv::row(out, {number(c.eps0), number(c.c0), number(c.eps_final_mean), number(c.c_final_mean),
                       number(c.n_runs)});
    Outputs::finish(out, name);
    return {{"gamma", p.gamma}, {"cells", cells.size()}};
}

json run_fig9(const ExperimentSpec& spec, Outputs& outs) {
    const auto gammas = doubles(spec.settings, "gammas");
    auto curves = outs.open("fig9_curves.csv");
    csv::row(curves, {"gamma", "c", "eps", "branch"});
    json parts = json::array();
    for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
        ModelParams p = spec.params;
        p.gamma = gammas[gi];
        parts.push_back(run_phase(spec, outs, p, "fig9_phase_" + std::to_string(gi) + ".csv",
                                  stream_name("fig9", gi)));
        write_curves(curves, p, 201);
    }
    Outputs::finish(curves, "fig9_curves.csv");
    return {{"phase", parts}};
}

json run_fig10(const ExperimentSpec& spec, Outputs& outs) {
    json part = run_phase(spec, outs, spec.params, "fig10_phase.csv", "fig10");
    auto curves = outs.open("fig10_curves.csv");
    csv::row(curves, {"gamma", "c", "eps", "branch"});
    write_curves(curves, spec.params, 201);
    Outputs::finish(curves, "fig10_curves.csv");
    return {{"phase", part}, {"equilibria", equilibria_json(solve_equilibria(spec.params))}};
}

// -- custom tasks -------------------------------------------------------------

json task_simulate(const ExperimentSpec& spec, Outputs& outs) {
    const auto& s = spec.settings;
    const ModelParams& p = spec.params;
    SimConfig cfg;
    cfg.total_steps = get<std::size_t>(s, "total_steps");
    cfg.burn_in_steps = get<std::size_t>(s, "burn_in_steps");
    cfg.eps0 = s["eps0"];
    cfg.replicates = get<std::size_t>(s, "replicates");
    cfg.validate();
    const UpdateScheme scheme{scheme_from_string(get<std::string>(s, "scheme")),
                              self_trade_from_string(get<std::string>(s, "self_trade"))};
    Rng draw = Rng::stream(p.master_seed, "simulate/strategies", 0);
    const auto strategies = sample_strategies(scenario_from_json(s["scenario"]), p.n_agents, p, draw);

    std::vector<Trajectory> trajs(cfg.replicates);
    parallel_for(cfg.replicates, [&](std::size_t r) {
        Rng rng = Rng::stream(p.master_seed, "simulate", r);
        trajs[r] = run(p, scheme, cfg, strategies, rng);
    });
    auto traj_out = outs.open("simulate_trajectory.csv");
    write_trajectory_csv(traj_out, trajs[0]);
    Outputs::finish(traj_out, "simulate_trajectory.csv");

    auto sum_out = outs.open("simulate_summary.csv");
    csv::row(sum_out, {"replicate", "mean_eps", "climbs", "trades"});
    double total = 0.0;
    for (std::size_t r = 0; r < trajs.size(); ++r) {
        const double m = trajs[r].mean_epsilon(cfg.burn_in_steps);
        total += m;
        csv::row(sum_out, {number(r), number(m), number(trajs[r].climbs), number(trajs[r].trades)});
    }
    Outputs::finish(sum_out, "simulate_summary.csv");
    return {{"mean_eps", total / static_cast<double>(trajs.size())}};
}

json task_chain(const ExperimentSpec& spec, Outputs& outs) {
    const auto& s = spec.settings;
    const ChainVariant variant = get<std::string>(s, "variant") == "IM_chain" ? ChainVariant::IM_chain
                                                                            : ChainVariant::AM2_chain;
    std::optional<double> sigma;
    if (!s["sigma_bar"].is_null()) sigma = s["sigma_bar"].get<double>();
    const auto m = build_chain(spec.params, s["c"], variant, sigma);
    const auto dist = stationary(m);
    auto out = outs.open("chain_stationary.csv");
    write_stationary_csv(out, dist);
    Outputs::finish(out, "chain_stationary.csv");
    if (get<bool>(s, "write_matrix")) {
        auto mo = outs.open("chain_matrix.csv");
        write_matrix_csv(mo, m);
        Outputs::finish(mo, "chain_matrix.csv");
    }
    return {{"mean_e", dist.mean()},
            {"mode_state", dist.mode_state},
            {"residual", stationarity_residual(m, dist.probabilities)},
            {"clamped_rows", m.clamped_rows()}};
}

json task_ode(const ExperimentSpec& spec, Outputs& outs) {
    const auto& s = spec.settings;
    const ModelParams& p = spec.params;
    const OdeVariant variant = ode_variant_from_string(get<std::string>(s, "variant"));
    const double c = s["c"];
    OdeSystem sys;
    std::vector<std::string> names;
    std::vector<double> init;
    switch (variant) {
    case OdeVariant::original_2d:
        sys = OdeSystem::original(p);
        names = {"eps", "c"};
        init = {0.5, c};
        break;
    case OdeVariant::adjusted_eps:
        sys = OdeSystem::adjusted(p, c);
        names = {"eps"};
        init = {0.0};
        break;
    case OdeVariant::corrected_eps: {
        const double sigma = s["sigma"];
        sys = OdeSystem::corrected(p, cost_cdf(c, p), [sigma](double) { return sigma; });
        names = {"eps"};
        init = {0.0};
        break;
    }
    case OdeVariant::value_3d:
        sys = OdeSystem::value(p);
        names = {"eps", "v1", "v0"};
        init = {0.5, p.y, 0.0};
        break;
    case OdeVariant::moment_hierarchy: {
        const auto order = get<std::size_t>(s, "order");
        sys = OdeSystem::hierarchy(p, scenario_moments(scenario_from_json(s["scenario"]), p, order + 1), order);
        names = {"eps"};
        for (std::size_t k = 1; k <= order; ++k) names.push_back("sigma_" + std::to_string(k));
        init.assign(order + 1, 0.0);
        break;
    }
    }
    if (!s["init"].empty()) init = doubles(s, "init");
    if (init.size() != sys.dimension())
        throw ConfigError("ode: init has " + std::to_string(init.size()) + " entries, variant " +
                          std::string(to_string(variant)) + " needs " + std::to_string(sys.dimension()));
    const auto sol = integrate(sys, init, s["t_end"], s["dt"], get<std::size_t>(s, "record_every"),
                               get<bool>(s, "stop_at_steady_state"));
    auto out = outs.open("ode.csv");
    std::vector<std::string> header = {"t"};
    header.insert(header.end(), names.begin(), names.end());
    csv::row(out, header);
    for (std::size_t k = 0; k < sol.times.size(); ++k) {
        std::vector<std::string> row = {number(sol.times[k])};
        for (double x : sol.states[k]) row.push_back(number(x));
        csv::row(out, row);
    }
    Outputs::finish(out, "ode.csv");
    return {{"final_state", sol.final_state()}, {"reached_steady_state", sol.reached_steady_state}};
}

json task_equilibria(const ExperimentSpec& spec, Outputs& outs) {
    const auto& s = spec.settings;
    auto out = outs.open("equilibria.csv");
    csv::row(out, {"gamma", "c", "eps", "branch"});
    json all = json::array();
    for (double g : doubles(s, "gammas")) {
        ModelParams p = spec.params;
        p.gamma = g;
        const auto eqs = solve_equilibria(p);
        write_equilibria_csv(out, g, eqs, false);
        all.push_back({{"gamma", g}, {"equilibria", equilibria_json(eqs)}});
    }
    Outputs::finish(out, "equilibria.csv");
    json summary = {{"sweep", all}};
    if (get<bool>(s, "bifurcation")) summary["bifurcation_gamma"] = bifurcation_gamma(spec.params);
    return summary;
}

json task_hetero(const ExperimentSpec& spec, Outputs& outs) {
    const auto& s = spec.settings;
    const ModelParams& p = spec.params;
    SimConfig cfg;
    cfg.total_steps = get<std::size_t>(s, "total_steps");
    cfg.burn_in_steps = get<std::size_t>(s, "burn_in_steps");
    cfg.eps0 = s["eps0"];
    const std::size_t reps = get<std::size_t>(s, "replicates");
    const std::size_t window = get<std::size_t>(s, "window");
    const UpdateScheme scheme{scheme_from_string(get<std::string>(s, "scheme")),
                              self_trade_from_string(get<std::string>(s, "self_trade"))};
    Rng draw = Rng::stream(p.master_seed, "hetero/strategies", 0);
    const auto strategies = sample_strategies(scenario_from_json(s["scenario"]), p.n_agents, p, draw);
    std::vector<SigmaEstimate> est(reps);
    parallel_for(reps, [&](std::size_t r) {
        Rng rng = Rng::stream(p.master_seed, "hetero", r);
        est[r] = estimate_sigma_bar(p, strategies, scheme, cfg, rng, window);
    });

    auto series = outs.open("hetero_sigma.csv");
    csv::row(series, {"step", "sigma"});
    for (std::size_t k = 0; k < est[0].series.size(); ++k)
        csv::row(series, {number(cfg.burn_in_steps + k + 1), number(est[0].series[k])});
    Outputs::finish(series, "hetero_sigma.csv");
    auto sum = outs.open("hetero_summary.csv");
    csv::row(sum, {"replicate", "sigma_bar", "mean_eps"});
    double sigma_bar = 0.0, eps = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        sigma_bar += est[r].sigma_bar / static_cast<double>(reps);
        eps += est[r].mean_epsilon / static_cast<double>(reps);
        csv::row(sum, {number(r), number(est[r].sigma_bar), number(est[r].mean_epsilon)});
    }
    Outputs::finish(sum, "hetero_summary.csv");
    const double g = mean_climb_probability(strategies, p);
    json summary = {{"mean_G", g}, {"sigma_bar", sigma_bar}, {"mean_eps_sim", eps}};
    if (scheme.variant == Scheme::IM) {
        summary["eps_star_uncorrected"] = epsilon_fixpoint_from_climb(g, p, FixpointVariant::adjusted);
        summary["eps_star_corrected"] = epsilon_fixpoint_from_climb(g, p, FixpointVariant::corrected, sigma_bar);
    }
    return summary;
}

json task_learn(const ExperimentSpec& spec, Outputs& outs) {
    const auto& s = spec.settings;
    const ModelParams& p = spec.params;
    const LearnConfig lc = learn_config(p, s);
    const std::size_t reps = get<std::size_t>(s, "replicates");
    std::vector<LearningTrajectory> runs(reps);
    parallel_for(reps, [&](std::size_t r) {
        Rng rng = Rng::stream(p.master_seed, "learn", r);
        runs[r] = run_learning(p, lc, rng);
    });
    auto out = outs.open("learning.csv");
    csv::row(out, {"step", "epsilon", "mean_c", "mean_v1", "mean_v0"});
    const auto& t = runs[0];
    for (std::size_t k = 0; k < t.size(); ++k)
        csv::row(out, {number(t.step_at(k)), number(t.epsilon[k]), number(t.mean_c[k]), number(t.mean_v1[k]),
                       number(t.mean_v0[k])});
    Outputs::finish(out, "learning.csv");
    auto sum = outs.open("learning_summary.csv");
    csv::row(sum, {"replicate", "eps_final", "c_final"});
    for (std::size_t r = 0; r < reps; ++r)
        csv::row(sum, {number(r), number(epsilon(runs[r].final_population)), number(runs[r].final_mean_c())});
    Outputs::finish(sum, "learning_summary.csv");
    return {{"final_eps", epsilon(t.final_population)}, {"final_mean_c", t.final_mean_c()}};
}

json dispatch(const ExperimentSpec& spec, Outputs& outs) {
    switch (spec.id) {
    case ExperimentId::fig1: return run_fig1(spec, outs);
    case ExperimentId::fig2: return run_fig2(spec, outs);
    case ExperimentId::fig3:
    case ExperimentId::fig4: return run_heterogeneity(spec, outs);
    case ExperimentId::fig5: return run_fig5(spec, outs);
    case ExperimentId::fig6: return run_fig6(spec, outs);
    case ExperimentId::fig7: return run_fig7(spec, outs);
    case ExperimentId::fig8: return run_fig8(spec, outs);
    case ExperimentId::fig9: return run_fig9(spec, outs);
    case ExperimentId::fig10: return run_fig10(spec, outs);
    case ExperimentId::custom: break;
    }
    const std::string task = spec.settings.at("task");
    if (task == "simulate") return task_simulate(spec, outs);
    if (task == "chain") return task_chain(spec, outs);
    if (task == "ode") return task_ode(spec, outs);
    if (task == "equilibria") return task_equilibria(spec, outs);
    if (task == "hetero") return task_hetero(spec, outs);
    if (task == "learn") return task_learn(spec, outs);
    if (task == "phase") return run_phase(spec, outs, spec.params, "phase.csv", "phase");
    throw ConfigError("unknown custom task '" + task + "'");
}

// -- plots --------------------------------------------------------------------

using plot::Series;

// Groups rows of `t` by the string value of `key` (first-seen order).
std::vector<std::pair<std::string, std::vector<std::size_t>>> group_rows(const plot::Table& t,
                                                                         const std::string& key) {
    std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
    const auto vals = t.strings(key);
    for (std::size_t i = 0; i < vals.size(); ++i) {
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == vals[i]; });
        if (it == groups.end()) {
            groups.push_back({vals[i], {}});
            it = std::prev(groups.end());
        }
        it->second.push_back(i);
    }
    return groups;
}

Series pick(const std::string& label, const std::vector<double>& x, const std::vector<double>& y,
            const std::vector<std::size_t>& rows, bool markers = false) {
    Series s{label, {}, {}, markers};
    for (std::size_t r : rows) {
        s.x.push_back(x[r]);
        s.y.push_back(y[r]);
    }
    return s;
}

std::vector<std::size_t> all_rows(const plot::Table& t) {
    std::vector<std::size_t> r(t.rows.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = i;
    return r;
}

// Nullclines and equilibria of one gamma from a gamma, c, eps, branch table,
// drawn in the (eps, c) plane.
std::vector<Series> curve_series(const plot::Table& t, const std::string& gamma) {
    const auto eps = t.numbers("eps"), c = t.numbers("c");
    const auto g = t.strings("gamma"), branch = t.strings("branch");
    std::vector<Series> out;
    for (const char* name : {"c_nullcline", "eps_nullcline"}) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (g[i] == gamma && branch[i] == name) rows.push_back(i);
        out.push_back(pick(name, eps, c, rows));
    }
    std::vector<std::size_t> eq;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g[i] == gamma && (branch[i] == "lower" || branch[i] == "upper")) eq.push_back(i);
    out.push_back(pick("equilibria", eps, c, eq, true));
    return out;
}

void quiver_from_phase(const fs::path& phase, const fs::path& svg, const std::string& title,
                       const std::vector<Series>& overlay) {
    const auto t = plot::read_csv(phase);
    const auto e0 = t.numbers("eps0"), c0 = t.numbers("c0");
    const auto e1 = t.numbers("eps_final_mean"), c1 = t.numbers("c_final_mean");
    std::vector<plot::Arrow> arrows;
    for (std::size_t i = 0; i < e0.size(); ++i) arrows.push_back({e0[i], c0[i], e1[i], c1[i]});
    plot::quiver(svg, {title, "eps", "c"}, arrows, overlay);
}

} // namespace

std::vector<fs::path> render_plots(const ExperimentSpec& spec, const fs::path& dir) {
    std::vector<fs::path> made;
    auto chart = [&](const std::string& name, const plot::Axes& axes, const std::vector<Series>& series) {
        plot::line_chart(dir / name, axes, series);
        made.push_back(dir / name);
    };
    const std::string tag = experiment_tag(spec);
    switch (spec.id) {
    case ExperimentId::fig1: {
        const auto t = plot::read_csv(dir / "fig1.csv");
        const auto c = t.numbers("c");
        const auto rows = all_rows(t);
        chart("fig1.svg", {"Stationary coconut level", "c", "eps"},
              {pick("IM", c, t.numbers("mean_eps_IM"), rows, true),
               pick("AM1", c, t.numbers("mean_eps_AM1"), rows, true),
               pick("AM2", c, t.numbers("mean_eps_AM2"), rows, true),
               pick("eps* (eps^2 trading)", c, t.numbers("eps_star_eq3"), rows),
               pick("eps* (2 eps^2 trading)", c, t.numbers("eps_star_eq5"), rows)});
        break;
    }
    case ExperimentId::fig2: {
        const auto t = plot::read_csv(dir / "fig2.csv");
        const auto e = t.numbers("e");
        const auto rows = all_rows(t);
        chart("fig2.svg", {"Stationary distribution, IM chain", "e", "probability"},
              {pick("chain", e, t.numbers("probability"), rows),
               pick("simulation", e, t.numbers("empirical"), rows, true)});
        break;
    }
    case ExperimentId::fig3:
    case ExperimentId::fig4: {
        const auto summary = plot::read_csv(dir / (tag + "_summary.csv"));
        const auto kinds = summary.strings("kind");
        for (std::size_t k = 0; k < kinds.size(); ++k) {
            const std::string base = tag + "_" + std::to_string(k) + "_" + kinds[k];
            const auto t = plot::read_csv(dir / (base + ".csv"));
            const auto e = t.numbers("e");
            const auto rows = all_rows(t);
            chart(base + ".svg", {"Stationary distribution, " + kinds[k], "e", "probability"},
                  {pick("chain", e, t.numbers("probability_uncorrected"), rows),
                   pick("chain, corrected", e, t.numbers("probability_corrected"), rows),
                   pick("simulation", e, t.numbers("empirical"), rows, true)});
        }
        break;
    }
    case ExperimentId::fig5: {
        const auto probe = plot::read_csv(dir / "fig5_probe.csv");
        const auto curves = plot::read_csv(dir / "fig5_curves.csv");
        const auto ef = probe.numbers("eps_fix"), mc = probe.numbers("mean_c");
        for (const auto& [g, rows] : group_rows(probe, "gamma")) {
            auto series = curve_series(curves, g);
            series.push_back(pick("probe", ef, mc, rows, true));
            chart("fig5_gamma" + g + ".svg", {"Strategy nullcline probe, gamma = " + g, "eps", "c"}, series);
        }
        break;
    }
    case ExperimentId::fig6: {
        const auto theory = plot::read_csv(dir / "fig6_theory.csv");
        const auto learn = plot::read_csv(dir / "fig6_learning.csv");
        const auto tg = theory.numbers("gamma"), tc = theory.numbers("c");
        std::vector<Series> series;
        for (const auto& [b, rows] : group_rows(theory, "branch")) series.push_back(pick(b, tg, tc, rows));
        series.push_back(pick("learning", learn.numbers("gamma"), learn.numbers("c_final"), all_rows(learn), true));
        chart("fig6.svg", {"Equilibrium strategy against discount rate", "gamma", "c"}, series);
        break;
    }
    case ExperimentId::fig7: {
        const auto t = plot::read_csv(dir / "fig7.csv");
        const auto step = t.numbers("step"), c = t.numbers("mean_c");
        std::vector<Series> series;
        for (const auto& [o, rows] : group_rows(t, "v1_offset")) series.push_back(pick("dV1 = " + o, step, c, rows));
        chart("fig7.svg", {"Learning near the lower equilibrium", "step", "mean c"}, series);
        break;
    }
    case ExperimentId::fig8: {
        const auto t = plot::read_csv(dir / "fig8.csv");
        const auto time = t.numbers("time"), step = t.numbers("step"), c = t.numbers("mean_c");
        std::vector<Series> by_time, by_step;
        for (const auto& [n, rows] : group_rows(t, "n_agents")) {
            by_time.push_back(pick("N = " + n, time, c, rows));
            by_step.push_back(pick("N = " + n, step, c, rows));
        }
        chart("fig8_steps.svg", {"Escape from the lower equilibrium", "step", "mean c"}, by_step);
        chart("fig8_rescaled.svg", {"Escape from the lower equilibrium", "step / N", "mean c"}, by_time);
        break;
    }
    case ExperimentId::fig9: {
        const auto curves = plot::read_csv(dir / "fig9_curves.csv");
        std::size_t k = 0;
        for (const auto& [g, rows] : group_rows(curves, "gamma")) {
            (void)rows;
            const std::string base = "fig9_phase_" + std::to_string(k++);
            quiver_from_phase(dir / (base + ".csv"), dir / (base + ".svg"), "Learning dynamics, gamma = " + g,
                              curve_series(curves, g));
            made.push_back(dir / (base + ".svg"));
        }
        break;
    }
    case ExperimentId::fig10: {
        const auto curves = plot::read_csv(dir / "fig10_curves.csv");
        const std::string g = curves.strings("gamma").front();
        quiver_from_phase(dir / "fig10_phase.csv", dir / "fig10_phase.svg", "Close-up, gamma = " + g,
                          curve_series(curves, g));
        made.push_back(dir / "fig10_phase.svg");
        break;
    }
    case ExperimentId::custom: {
        if (tag == "simulate") {
            const auto t = plot::read_csv(dir / "simulate_trajectory.csv");
            chart("simulate.svg", {"Coconut level", "step", "eps"},
                  {pick("eps", t.numbers("step"), t.numbers("epsilon"), all_rows(t))});
        } else if (tag == "chain") {
            const auto t = plot::read_csv(dir / "chain_stationary.csv");
            chart("chain.svg", {"Stationary distribution", "e", "probability"},
                  {pick("pi", t.numbers("e"), t.numbers("probability"), all_rows(t))});
        } else if (tag == "ode") {
            const auto t = plot::read_csv(dir / "ode.csv");
            std::vector<Series> series;
            for (std::size_t k = 1; k < t.header.size(); ++k)
                series.push_back(pick(t.header[k], t.numbers("t"), t.numbers(t.header[k]), all_rows(t)));
            chart("ode.svg", {"Integrated trajectory", "t", "state"}, series);
        } else if (tag == "equilibria") {
            const auto t = plot::read_csv(dir / "equilibria.csv");
            std::vector<Series> series;
            for (const auto& [b, rows] : group_rows(t, "branch"))
                series.push_back(pick(b, t.numbers("gamma"), t.numbers("c"), rows, true));
            chart("equilibria.svg", {"Equilibrium strategies", "gamma", "c"}, series);
        } else if (tag == "hetero") {
            const auto t = plot::read_csv(dir / "hetero_sigma.csv");
            chart("hetero.svg", {"Heterogeneity covariance", "step", "sigma"},
                  {pick("sigma", t.numbers("step"), t.numbers("sigma"), all_rows(t))});
        } else if (tag == "learn") {
            const auto t = plot::read_csv(dir / "learning.csv");
            const auto step = t.numbers("step");
            const auto rows = all_rows(t);
            chart("learning.svg", {"TD learning", "step", "value"},
                  {pick("eps", step, t.numbers("epsilon"), rows), pick("mean c", step, t.numbers("mean_c"), rows)});
        } else if (tag == "phase") {
            quiver_from_phase(dir / "phase.csv", dir / "phase.svg", "Learning dynamics", {});
            made.push_back(dir / "phase.svg");
        }
        break;
    }
    }
    return made;
}

ResultBundle run_experiment(const ExperimentSpec& spec) {
    spec.params.validate();
    const auto started = std::chrono::steady_clock::now();
    std::error_code ec;
    fs::create_directories(spec.output_dir, ec);
    if (ec || !fs::is_directory(spec.output_dir))
        throw IoError("cannot create output directory " + spec.output_dir.string());

    ResultBundle bundle;
    bundle.output_dir = spec.output_dir;
    Outputs outs(spec.output_dir);
    const std::string context = "experiment " + experiment_tag(spec) + ": ";
    try {
        bundle.summary = dispatch(spec, outs);
    } catch (const ConfigError& e) {
        throw ConfigError(context + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(context + e.what());
    } catch (const IoError& e) {
        throw IoError(context + e.what());
    }
    bundle.csv_files = outs.files();
    const auto simulated = std::chrono::steady_clock::now();
    if (spec.plots) bundle.plot_files = render_plots(spec, spec.output_dir);
    const auto finished = std::chrono::steady_clock::now();
    bundle.wall_seconds = std::chrono::duration<double>(finished - started).count();

    json files = json::array(), plots = json::array();
    for (const auto& f : bundle.csv_files) files.push_back(f.filename().string());
    for (const auto& f : bundle.plot_files) plots.push_back(f.filename().string());
    const json manifest = {
        {"experiment", std::string(to_string(spec.id))},
        {"config_hash", spec.config_hash()},
        {"master_seed", spec.params.master_seed},
        {"resolved_config", spec.resolved()},
        {"versions",
         {{"coconut", COCONUT_VERSION},
          {"compiler", __VERSION__},
          {"cxx_standard", __cplusplus},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
        {"timings",
         {{"compute_seconds", std::chrono::duration<double>(simulated - started).count()},
          {"plot_seconds", std::chrono::duration<double>(finished - simulated).count()},
          {"total_seconds", bundle.wall_seconds}}},
        {"workers", worker_count()},
        {"files", files},
        {"plots", plots},
        {"summary", bundle.summary},
    };
    bundle.manifest = spec.output_dir / "manifest.json";
    std::ofstream out(bundle.manifest, std::ios::binary);
    if (!out) throw IoError("cannot write " + bundle.manifest.string());
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("failed writing " + bundle.manifest.string());
    return bundle;
}

} // namespace coconut::harness

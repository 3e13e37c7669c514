// Acceptance run: every criterion prints one PASS/FAIL line. Presets run
// through the harness at their default settings; the checks recompute the
// reference values here from closed forms rather than trusting library output.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coconut/chain.hpp"
#include "coconut/core.hpp"
#include "coconut/dynamics.hpp"
#include "coconut/harness.hpp"
#include "coconut/hetero.hpp"
#include "coconut/rng.hpp"

using namespace coconut;
using nlohmann::json;
namespace fs = std::filesystem;
namespace h = coconut::harness;

namespace {

// ---- reference formulas ----------------------------------------------------

double uniform_cdf(double c, const ModelParams& p) {
    return std::clamp((c - p.c_min) / (p.c_max - p.c_min), 0.0, 1.0);
}

double eps_ratio(double fg) { return fg / 2 * (std::sqrt(1 + 4 / fg) - 1); }
double eps_pairs(double fg) { return fg / 4 * (std::sqrt(1 + 8 / fg) - 1); }
double eps_corrected(double g, double sigma, double f) {
    const double fg = f * g;
    return fg / 4 * (std::sqrt(1 + 8 / fg - 8 * sigma / (f * g * g)) - 1);
}

// Root in c of gamma c + eps (c - y) + f I(c), solved piece by piece.
double nullcline_oracle(double eps, const ModelParams& p) {
    const double a = p.gamma + eps;
    const double w = p.c_max - p.c_min;
    const double below = eps * p.y / a;
    if (below <= p.c_min) return below;
    const double q = p.f / (2 * w);
    const double u = (-a + std::sqrt(a * a - 4 * q * (a * p.c_min - eps * p.y))) / (2 * q);
    if (u <= w) return p.c_min + u;
    return (eps * p.y + p.f * (p.c_min + p.c_max) / 2) / (a + p.f);
}

// Stationary law of the IM occupancy chain by plain power iteration on the
// sparse transition rule: +1 with f g (N-e)/N, -2 with e(e-1)/(N(N-1)).
std::vector<double> im_chain_oracle(const ModelParams& p, double g) {
    const std::size_t n = p.n_agents;
    const double nd = double(n);
    std::vector<double> pi(n + 1, 1.0 / (nd + 1)), next(n + 1);
    for (int it = 0; it < 200000; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t e = 0; e <= n; ++e) {
            const double ed = double(e);
            const double up = e < n ? p.f * g * (nd - ed) / nd : 0.0;
            const double down = ed * (ed - 1) / (nd * (nd - 1));
            if (e < n) next[e + 1] += pi[e] * up;
            if (e >= 2) next[e - 2] += pi[e] * down;
            next[e] += pi[e] * (1 - up - down);
        }
        double diff = 0.0;
        for (std::size_t e = 0; e <= n; ++e) diff = std::max(diff, std::abs(next[e] - pi[e]));
        pi.swap(next);
        if (diff < 1e-15) break;
    }
    return pi;
}

// ---- CSV access ------------------------------------------------------------

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t col(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::runtime_error("missing column " + name);
        return std::size_t(it - header.begin());
    }
    double num(std::size_t r, const std::string& name) const { return std::stod(rows[r][col(name)]); }
};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

Csv read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    Csv t;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (t.header.empty())
            t.header = split(line);
        else
            t.rows.push_back(split(line));
    }
    return t;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

bool near(double a, double b) { return std::abs(a - b) < 1e-9; }

std::string fmt(double x, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

// ---- running presets -------------------------------------------------------

struct Runner {
    fs::path root;
    std::map<std::string, h::ResultBundle> done;

    const h::ResultBundle& preset(const std::string& name, json settings = json::object(),
                                  const std::string& label = {}) {
        const std::string key = label.empty() ? name : label;
        if (auto it = done.find(key); it != done.end()) return it->second;
        json doc = {{"experiment", name}, {"settings", std::move(settings)},
                    {"output_dir", (root / key).string()}, {"plots", false}};
        return done.emplace(key, h::run_experiment(h::parse_config(doc))).first->second;
    }
};

struct Outcome {
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

// ---- criteria --------------------------------------------------------------

Outcome fixed_point_alignment(Runner& run) {
    const auto& r = run.preset("fig1");
    const Csv t = read_csv(r.output_dir / "fig1.csv");
    const ModelParams p;
    double im = 0.0, am = 0.0;
    std::size_t found = 0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const double c = t.num(i, "c");
        const double targets[] = {0.32, 0.36, 0.40, 0.44, 0.48};
        if (std::none_of(std::begin(targets), std::end(targets), [&](double x) { return near(x, c); })) continue;
        ++found;
        const double fg = p.f * uniform_cdf(c, p);
        im = std::max(im, std::abs(t.num(i, "mean_eps_IM") - eps_pairs(fg)));
        am = std::max(am, std::abs(t.num(i, "mean_eps_AM1") - eps_ratio(fg)));
        am = std::max(am, std::abs(t.num(i, "mean_eps_AM2") - eps_ratio(fg)));
    }
    Outcome o;
    o.seconds = r.wall_seconds;
    o.pass = found == 5 && im < 0.02 && am < 0.02 && o.seconds < 30;
    o.detail = "max|IM - pair form| = " + fmt(im) + ", max|AM - ratio form| = " + fmt(am) + " over " +
               std::to_string(found) + " strategies";
    return o;
}

Outcome chain_agreement(Runner& run) {
    const auto& r = run.preset("fig2");
    const Csv t = read_csv(r.output_dir / "fig2.csv");
    ModelParams p;
    const auto oracle = im_chain_oracle(p, uniform_cdf(0.4, p));
    double tv = 0.0, solver_gap = 0.0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        tv += 0.5 * std::abs(t.num(i, "probability") - t.num(i, "empirical"));
        solver_gap = std::max(solver_gap, std::abs(t.num(i, "probability") - oracle[i]));
    }
    Outcome o;
    o.seconds = r.wall_seconds;
    o.pass = t.rows.size() == 101 && tv < 0.05 && solver_gap < 1e-9 && o.seconds < 60;
    o.detail = "TV(chain, simulation) = " + fmt(tv) + ", |chain - power-iteration oracle| = " + fmt(solver_gap, 2);
    return o;
}

Outcome heterogeneity_correction(Runner& run) {
    Outcome o;
    o.pass = true;
    const ModelParams p;
    for (const char* fig : {"fig3", "fig4"}) {
        const auto& r = run.preset(fig);
        o.seconds += r.wall_seconds;
        const Csv t = read_csv(r.output_dir / (std::string(fig) + "_summary.csv"));
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            const double g = t.num(i, "mean_G"), sigma = t.num(i, "sigma_bar"), sim = t.num(i, "mean_eps_sim");
            const double corrected = eps_corrected(g, sigma, p.f);
            const double plain = eps_pairs(p.f * g);
            const double err_c = std::abs(sim - corrected), err_u = std::abs(sim - plain);
            const bool ok = err_c < 0.015 && err_u > err_c;
            o.pass = o.pass && ok;
            o.detail += (o.detail.empty() ? "" : "; ") + t.rows[i][t.col("kind")] + " corrected err " + fmt(err_c, 3) +
                        " vs uncorrected " + fmt(err_u, 3);
        }
        o.pass = o.pass && t.rows.size() == 2;
    }
    o.pass = o.pass && o.seconds < 120;
    return o;
}

Outcome covariance_identity(Runner&) {
    const auto start = std::chrono::steady_clock::now();
    ModelParams p;
    double worst_identity = 0.0, worst_sigma = 0.0;
    for (std::size_t k = 0; k < 1000; ++k) {
        Rng rng = Rng::stream(p.master_seed, "acceptance/covariance", k);
        const std::size_t n = 2 + rng.index(400);
        Population pop;
        double sum_g = 0.0, sum_s = 0.0, sum_empty_g = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = 0.25 + 0.3 * rng.uniform();
            const std::uint8_t s = rng.uniform() < rng.uniform() ? 1 : 0;
            pop.states.push_back(s);
            pop.strategies.push_back(c);
            const double g = uniform_cdf(c, p);
            sum_g += g;
            sum_s += s;
            sum_empty_g += (1 - s) * g;
        }
        pop.values_have.assign(n, 0.0);
        pop.values_not.assign(n, 0.0);
        const double nd = double(n), eps = sum_s / nd, mean_g = sum_g / nd;
        const double sigma = covariance_sigma(pop, p);
        // Centered form of the covariance as an independent evaluation.
        double centered = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            centered += (pop.states[i] - eps) * (uniform_cdf(pop.strategies[i], p) - mean_g);
        centered /= nd;
        worst_sigma = std::max(worst_sigma, std::abs(sigma - centered));
        // Mean climbing rate of empty agents = (1 - eps) <G> - sigma.
        worst_identity = std::max(worst_identity, std::abs(sum_empty_g / nd - ((1 - eps) * mean_g - sigma)));
    }
    Outcome o;
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.pass = worst_identity < 1e-12 && worst_sigma < 1e-12;
    o.detail = "max identity residual " + fmt(worst_identity, 2) + ", max |sigma - centered form| " + fmt(worst_sigma, 2) +
               " over 1000 populations";
    return o;
}

Outcome nullcline_probe(Runner& run) {
    const auto& r = run.preset("fig5");
    const Csv t = read_csv(r.output_dir / "fig5_probe.csv");
    std::map<double, double> worst;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const double gamma = t.num(i, "gamma"), eps_fix = t.num(i, "eps_fix");
        if (eps_fix < 0.1 - 1e-9) continue;
        ModelParams p;
        p.gamma = gamma;
        const double dev = std::abs(t.num(i, "mean_c") - nullcline_oracle(eps_fix, p));
        worst[gamma] = std::max(worst[gamma], dev);
    }
    Outcome o;
    o.seconds = r.wall_seconds;
    o.pass = worst.size() == 3 && o.seconds < 600;
    for (const auto& [gamma, dev] : worst) {
        // The 0.03 relaxation applies to the largest discount rate only.
        const double tol = near(gamma, 0.3) ? 0.03 : 0.015;
        o.pass = o.pass && dev < tol;
        o.detail += (o.detail.empty() ? "" : "; ") + ("gamma " + fmt(gamma, 2)) + " max dev " + fmt(dev, 3) +
                    " (tol " + fmt(tol, 2) + ")";
    }
    return o;
}

Outcome equilibrium_values(Runner&) {
    const auto start = std::chrono::steady_clock::now();
    auto with_gamma = [](double g) {
        ModelParams p;
        p.gamma = g;
        return p;
    };
    auto lower = [](const std::vector<Equilibrium>& eqs) -> const Equilibrium* {
        for (const auto& e : eqs)
            if (e.branch == Branch::lower) return &e;
        return nullptr;
    };
    const auto e1 = solve_equilibria(with_gamma(0.1));
    const auto e2 = solve_equilibria(with_gamma(0.2));
    const auto e3 = solve_equilibria(with_gamma(0.3));
    const Equilibrium* l1 = lower(e1);
    const Equilibrium* l2 = lower(e2);
    Outcome o;
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool at01 = l1 && std::abs(l1->v1_star - 0.303065) < 1e-4 && std::abs(l1->v0_star - 0.000168) < 1e-4 &&
                      std::abs(l1->eps_star - 0.102) < 0.002 && std::abs(l1->c_star - 0.303) < 0.002;
    const bool at02 = l2 && std::abs(l2->c_star - 0.316) < 0.002;
    const bool at03 = std::none_of(e3.begin(), e3.end(), [](const Equilibrium& e) { return e.branch != Branch::collapse; });
    o.pass = at01 && at02 && at03 && o.seconds < 1.0;
    if (l1)
        o.detail = "gamma 0.1 lower: V1 " + fmt(l1->v1_star, 7) + ", V0 " + fmt(l1->v0_star, 4) + ", eps " +
                   fmt(l1->eps_star, 5) + ", c " + fmt(l1->c_star, 5);
    else
        o.detail = "gamma 0.1: no lower branch";
    o.detail += l2 ? "; gamma 0.2 lower c " + fmt(l2->c_star, 5) : "; gamma 0.2: no lower branch";
    o.detail += std::string("; gamma 0.3 interior equilibria: ") + (at03 ? "none" : "present");
    return o;
}

Outcome equilibrium_selection(Runner& run) {
    const auto& r = run.preset("fig6");
    const Csv t = read_csv(r.output_dir / "fig6_learning.csv");
    Outcome o;
    o.seconds = r.wall_seconds;
    o.pass = o.seconds < 900;
    std::map<double, std::pair<double, std::size_t>> worst;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const double gamma = t.num(i, "gamma"), c = t.num(i, "c_final"), eps = t.num(i, "eps_final");
        ModelParams p;
        p.gamma = gamma;
        if (near(gamma, 0.5)) {
            const bool collapsed = eps < 0.02 && c < p.c_min;
            o.pass = o.pass && collapsed;
            ++worst[gamma].second;
            worst[gamma].first = std::max(worst[gamma].first, eps);
            continue;
        }
        if (!near(gamma, 0.05) && !near(gamma, 0.10) && !near(gamma, 0.15)) continue;
        const auto eqs = solve_equilibria(p);
        double upper = NAN, low = NAN;
        for (const auto& e : eqs) {
            // Each branch must satisfy both stationarity conditions before it is used.
            const bool consistent = std::abs(strategy_residual(e.c_star, e.eps_star, p)) < 1e-8 &&
                                    std::abs(p.f * (1 - e.eps_star) * uniform_cdf(e.c_star, p) -
                                             e.eps_star * e.eps_star) < 1e-8;
            o.pass = o.pass && consistent;
            if (e.branch == Branch::upper) upper = e.c_star;
            if (e.branch == Branch::lower) low = e.c_star;
        }
        const double dev = std::abs(c - upper);
        o.pass = o.pass && dev < 0.02 && !(std::abs(c - low) < 0.02);
        auto& w = worst[gamma];
        w.first = std::max(w.first, dev);
        ++w.second;
    }
    for (double g : {0.05, 0.10, 0.15, 0.5}) {
        auto it = std::find_if(worst.begin(), worst.end(), [&](const auto& kv) { return near(kv.first, g); });
        if (it == worst.end() || it->second.second != 5) {
            o.pass = false;
            o.detail += "; gamma " + fmt(g, 2) + " missing runs";
            continue;
        }
        o.detail += (o.detail.empty() ? "" : "; ") + ("gamma " + fmt(g, 2)) +
                    (near(g, 0.5) ? " max final eps " : " max |c - upper| ") + fmt(it->second.first, 3);
    }
    return o;
}

Outcome lower_instability(Runner& run) {
    const auto& r7 = run.preset("fig7");
    const auto& r8 = run.preset("fig8");
    const Csv t = read_csv(r8.output_dir / "fig8.csv");
    ModelParams p;
    const auto eqs = solve_equilibria(p);
    double c_star = NAN;
    for (const auto& e : eqs)
        if (e.branch == Branch::lower) c_star = e.c_star;

    std::map<int, std::map<long, double>> curves; // n -> time -> mean c
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        curves[int(t.num(i, "n_agents"))][std::lround(t.num(i, "time"))] = t.num(i, "mean_c");
    Outcome o;
    o.seconds = r7.wall_seconds + r8.wall_seconds;
    o.pass = curves.size() == 3 && o.seconds < 1200;
    for (const auto& [n, curve] : curves) {
        long first = -1;
        for (const auto& [time, c] : curve)
            if (first < 0 && c > c_star + 0.05 && double(time) * n <= 200000.0 * n / 100) first = time;
        o.pass = o.pass && first >= 0;
        o.detail += "N=" + std::to_string(n) + " escapes at t=" + (first >= 0 ? std::to_string(first) : "never") + "; ";
    }
    double sup = 0.0;
    for (auto a = curves.begin(); a != curves.end(); ++a)
        for (auto b = std::next(a); b != curves.end(); ++b)
            for (const auto& [time, c] : a->second)
                if (auto it = b->second.find(time); it != b->second.end()) sup = std::max(sup, std::abs(c - it->second));
    o.pass = o.pass && sup < 0.03;
    o.detail += "rescaled sup-norm gap " + fmt(sup, 3);
    return o;
}

Outcome phase_diagram(Runner& run) {
    const auto& r9 = run.preset("fig9");
    ModelParams p;
    p.gamma = 0.2;
    double upper = NAN, saddle = NAN;
    for (const auto& e : solve_equilibria(p)) {
        if (e.branch == Branch::upper) upper = e.c_star;
        if (e.branch == Branch::lower) saddle = e.c_star;
    }
    // fig9 sweeps gamma {0.1, 0.2}; the second grid is the one at 0.2.
    const Csv t = read_csv(r9.output_dir / "fig9_phase_1.csv");
    std::size_t high = 0, high_bad = 0, low = 0, low_bad = 0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const double e0 = t.num(i, "eps0"), c0 = t.num(i, "c0");
        const double ef = t.num(i, "eps_final_mean"), cf = t.num(i, "c_final_mean");
        if (c0 >= 0.34 - 1e-9) {
            ++high;
            if (!(std::abs(cf - upper) < 0.05)) ++high_bad;
        }
        if (c0 <= 0.31 + 1e-9 && e0 <= 0.1 + 1e-9) {
            ++low;
            if (!(ef < 0.05 && cf < p.c_min)) ++low_bad;
        }
    }
    // Saddle neighbourhood: c0 = c* + {-0.012, ..., 0.012} in steps of 0.004.
    const auto& rs = run.preset("fig10",
                                {{"eps_lo", 0.05}, {"eps_hi", 0.15}, {"eps_points", 5},
                                 {"c_lo", saddle - 0.012}, {"c_hi", saddle + 0.012}, {"c_points", 7}},
                                "saddle");
    const Csv s = read_csv(rs.output_dir / "fig10_phase.csv");
    std::size_t local = 0, local_bad = 0;
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
        const double offset = s.num(i, "c0") - saddle;
        if (std::abs(offset) < 1e-6) continue;
        ++local;
        const double drift = s.num(i, "c_final_mean") - s.num(i, "c0");
        if (!(offset < 0 ? drift < 0 : drift > 0)) ++local_bad;
    }
    Outcome o;
    o.seconds = r9.wall_seconds + rs.wall_seconds;
    o.pass = t.rows.size() == 676 && high_bad == 0 && low_bad == 0 && local == 30 && local_bad == 0 &&
             o.seconds < 1800;
    o.detail = "c0>=0.34 off upper branch: " + std::to_string(high_bad) + "/" + std::to_string(high) +
               "; low corner not collapsed: " + std::to_string(low_bad) + "/" + std::to_string(low) +
               "; saddle sign violations: " + std::to_string(local_bad) + "/" + std::to_string(local);
    return o;
}

Outcome numerical_infrastructure(Runner& run) {
    const auto start = std::chrono::steady_clock::now();
    ModelParams p;
    std::vector<std::string> notes;
    bool pass = true;

    // RK4 order on the pair-trading equation.
    const auto sys = OdeSystem::adjusted(p, 0.4);
    const std::vector<double> x0 = {0.0};
    auto end_state = [&](double dt) { return integrate(sys, x0, 2.0, dt, 1, false).final_state()[0]; };
    const double ref = end_state(0.1 / 8);
    const double factor = std::abs(end_state(0.1) - ref) / std::abs(end_state(0.05) - ref);
    pass = pass && factor >= 12 && factor <= 20;
    notes.push_back("RK4 factor " + fmt(factor, 4));

    // Closed-form fixed points against the right-hand sides.
    double worst = 0.0;
    for (double c = 0.31; c <= 0.5 + 1e-9; c += 0.01) {
        const double g = uniform_cdf(c, p), fg = p.f * g;
        const std::vector<double> orig = {eps_ratio(fg), c};
        worst = std::max(worst, std::abs(OdeSystem::original(p).rhs(0, orig)[0]));
        const std::vector<double> adj = {eps_pairs(fg)};
        worst = std::max(worst, std::abs(OdeSystem::adjusted(p, c).rhs(0, adj)[0]));
        const double sigma = 0.01;
        const std::vector<double> cor = {eps_corrected(g, sigma, p.f)};
        worst = std::max(worst, std::abs(OdeSystem::corrected(p, g, [&](double) { return sigma; }).rhs(0, cor)[0]));
    }
    for (double gamma : {0.05, 0.1, 0.2}) {
        ModelParams q = p;
        q.gamma = gamma;
        for (const auto& e : solve_equilibria(q)) {
            if (e.branch == Branch::collapse) continue;
            const std::vector<double> x = {e.eps_star, e.v1_star, e.v0_star};
            for (double d : OdeSystem::value(q).rhs(0, x)) worst = std::max(worst, std::abs(d));
        }
    }
    pass = pass && worst < 1e-10;
    notes.push_back("max fixed-point RHS " + fmt(worst, 2));

    // Stationary solver: residual of pi P - pi applied with the rates above.
    double residual = 0.0;
    for (double c : {0.31, 0.35, 0.4, 0.45, 0.5}) {
        const auto dist = stationary(build_chain(p, c, ChainVariant::IM_chain));
        const auto& pi = dist.probabilities;
        const std::size_t n = p.n_agents;
        const double nd = double(n), g = uniform_cdf(c, p);
        std::vector<double> next(n + 1, 0.0);
        for (std::size_t e = 0; e <= n; ++e) {
            const double ed = double(e);
            const double up = e < n ? p.f * g * (nd - ed) / nd : 0.0;
            const double down = ed * (ed - 1) / (nd * (nd - 1));
            if (e < n) next[e + 1] += pi[e] * up;
            if (e >= 2) next[e - 2] += pi[e] * down;
            next[e] += pi[e] * (1 - up - down);
        }
        for (std::size_t e = 0; e <= n; ++e) residual = std::max(residual, std::abs(next[e] - pi[e]));
        residual = std::max(residual, stationarity_residual(build_chain(p, c, ChainVariant::AM2_chain),
                                                            stationary(build_chain(p, c, ChainVariant::AM2_chain))
                                                                .probabilities));
    }
    pass = pass && residual < 1e-9;
    notes.push_back("stationary residual " + fmt(residual, 2));

    // Determinism: rerun presets and compare every CSV byte for byte.
    std::size_t compared = 0, differing = 0;
    for (const char* name : {"fig1", "fig2", "fig3", "fig4", "fig7", "fig10"}) {
        const auto& first = run.preset(name);
        const auto& again = run.preset(name, json::object(), std::string(name) + "_rerun");
        const json m1 = json::parse(slurp(first.manifest)), m2 = json::parse(slurp(again.manifest));
        if (m1["config_hash"] != m2["config_hash"]) ++differing;
        for (const auto& f : first.csv_files) {
            ++compared;
            if (slurp(f) != slurp(again.output_dir / f.filename())) ++differing;
        }
    }
    pass = pass && compared > 0 && differing == 0;
    notes.push_back("rerun CSVs identical " + std::to_string(compared - differing) + "/" + std::to_string(compared));

    Outcome o;
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.pass = pass;
    for (const auto& n : notes) o.detail += (o.detail.empty() ? "" : "; ") + n;
    return o;
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome(Runner&)> check;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string out = (fs::temp_directory_path() / "coconut_acceptance").string();
    std::vector<int> expect_fail, only;
    app.add_option("--out", out, "Scratch directory for experiment outputs");
    app.add_option("--expect-fail", expect_fail, "Criteria known to fail; the exit status ignores them")
        ->delimiter(',');
    app.add_option("--only", only, "Run only these criteria")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria = {
        {1, "fixed-point alignment", fixed_point_alignment},
        {2, "chain vs simulation", chain_agreement},
        {3, "heterogeneity correction", heterogeneity_correction},
        {4, "covariance identity", covariance_identity},
        {5, "nullcline probe", nullcline_probe},
        {6, "equilibrium values", equilibrium_values},
        {7, "equilibrium selection", equilibrium_selection},
        {8, "lower fixed-point instability", lower_instability},
        {9, "phase diagram", phase_diagram},
        {10, "numerical infrastructure", numerical_infrastructure},
    };

    fs::remove_all(out);
    Runner runner{out, {}};
    const std::set<int> expected(expect_fail.begin(), expect_fail.end());
    std::set<int> failed;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        Outcome o;
        try {
            o = c.check(runner);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        if (!o.pass) failed.insert(c.id);
        std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), o.seconds);
        std::fflush(stdout);
    }

    bool ok = true;
    for (int id : failed)
        if (!expected.count(id)) ok = false;
    for (int id : expected)
        if (!failed.count(id) && (only.empty() || std::find(only.begin(), only.end(), id) != only.end())) {
            std::printf("note: criterion %d was expected to fail but passed\n", id);
            ok = false;
        }
    std::printf("%zu failed%s\n", failed.size(), expected.empty() ? "" : " (expected failures listed via --expect-fail)");
    return ok ? 0 : 1;
}

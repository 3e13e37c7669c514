#include "coconut/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "coconut/csv.hpp"

namespace coconut {

std::string_view to_string(OdeVariant v) {
    switch (v) {
    case OdeVariant::original_2d: return "original_2d";
    case OdeVariant::adjusted_eps: return "adjusted_eps";
    case OdeVariant::corrected_eps: return "corrected_eps";
    case OdeVariant::value_3d: return "value_3d";
    case OdeVariant::moment_hierarchy: return "moment_hierarchy";
    }
    return "?";
}

OdeVariant ode_variant_from_string(std::string_view name) {
    for (auto v : {OdeVariant::original_2d, OdeVariant::adjusted_eps, OdeVariant::corrected_eps,
                   OdeVariant::value_3d, OdeVariant::moment_hierarchy})
        if (to_string(v) == name) return v;
    throw ConfigError("unknown ODE variant '" + std::string(name) + "'");
}

OdeSystem OdeSystem::original(const ModelParams& p) {
    OdeSystem s;
    s.variant = OdeVariant::original_2d;
    s.params = p;
    return s;
}

OdeSystem OdeSystem::adjusted(const ModelParams& p, double strategy) {
    OdeSystem s;
    s.variant = OdeVariant::adjusted_eps;
    s.params = p;
    s.climb_probability = cost_cdf(strategy, p);
    return s;
}

OdeSystem OdeSystem::corrected(const ModelParams& p, double climb_probability,
                               std::function<double(double)> sigma) {
    OdeSystem s;
    s.variant = OdeVariant::corrected_eps;
    s.params = p;
    s.climb_probability = climb_probability;
    s.sigma = std::move(sigma);
    return s;
}

OdeSystem OdeSystem::value(const ModelParams& p) {
    OdeSystem s;
    s.variant = OdeVariant::value_3d;
    s.params = p;
    return s;
}

OdeSystem OdeSystem::hierarchy(const ModelParams& p, std::vector<double> moments,
                               std::size_t order) {
    if (order < 1) throw ConfigError("moment hierarchy needs order K >= 1");
    if (moments.size() < order + 1)
        throw ConfigError("moment hierarchy of order K needs moments up to K+1");
    OdeSystem s;
    s.variant = OdeVariant::moment_hierarchy;
    s.params = p;
    s.moments = std::move(moments);
    s.order = order;
    return s;
}

std::size_t OdeSystem::dimension() const {
    switch (variant) {
    case OdeVariant::original_2d: return 2;
    case OdeVariant::adjusted_eps:
    case OdeVariant::corrected_eps: return 1;
    case OdeVariant::value_3d: return 3;
    case OdeVariant::moment_hierarchy: return order + 1;
    }
    return 0;
}

void OdeSystem::rhs(double t, std::span<const double> x, std::span<double> dx) const {
    const ModelParams& p = params;
    switch (variant) {
    case OdeVariant::original_2d: {
        const double eps = x[0], c = x[1];
        dx[0] = p.f * (1.0 - eps) * cost_cdf(c, p) - eps * eps;
        dx[1] = strategy_residual(c, eps, p);
        return;
    }
    case OdeVariant::adjusted_eps: {
        const double eps = x[0];
        dx[0] = p.f * (1.0 - eps) * climb_probability - 2.0 * eps * eps;
        return;
    }
    case OdeVariant::corrected_eps: {
        const double eps = x[0];
        const double s = sigma ? sigma(t) : 0.0;
        dx[0] = p.f * ((1.0 - eps) * climb_probability - s) - 2.0 * eps * eps;
        return;
    }
    case OdeVariant::value_3d: {
        const double eps = x[0], v1 = x[1], v0 = x[2];
        const double c = v1 - v0;
        dx[0] = p.f * (1.0 - eps) * cost_cdf(c, p) - eps * eps;
        dx[1] = p.gamma * v1 + eps * (c - p.y);
        dx[2] = p.gamma * v0 - p.f * climb_integral(c, p);
        return;
    }
    case OdeVariant::moment_hierarchy: {
        const auto d = moment_rhs(x, moments, p);
        std::copy(d.begin(), d.end(), dx.begin());
        return;
    }
    }
}

std::vector<double> OdeSystem::rhs(double t, std::span<const double> x) const {
    std::vector<double> dx(dimension());
    rhs(t, x, dx);
    return dx;
}

namespace {
std::string describe(double t, const std::vector<double>& x) {
    std::ostringstream msg;
    msg << "integration diverged at t=" << t << "; last finite state (";
    for (std::size_t k = 0; k < x.size(); ++k) msg << (k ? ", " : "") << x[k];
    msg << ")";
    return msg.str();
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}
} // namespace

IntegrationDiverged::IntegrationDiverged(double t, std::vector<double> last_finite)
    : NumericalError(describe(t, last_finite)), time_(t), last_(std::move(last_finite)) {}

OdeSolution integrate(const OdeSystem& sys, std::span<const double> init, double t_end,
                      double dt, std::size_t record_every, bool stop_at_steady_state) {
    const std::size_t n = sys.dimension();
    if (init.size() != n)
        throw ConfigError("integrate: initial state has dimension " + std::to_string(init.size()) +
                          ", expected " + std::to_string(n));
    if (!(dt > 0.0)) throw ConfigError("integrate: dt must be positive");
    if (record_every == 0) record_every = 1;

    OdeSolution sol;
    std::vector<double> x(init.begin(), init.end());
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    sol.times.push_back(0.0);
    sol.states.push_back(x);

    const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
    double t = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
        sys.rhs(t, x, k1);
        if (stop_at_steady_state && max_abs(k1) < kSteadyStateRhs) {
            sol.reached_steady_state = true;
            break;
        }
        const double h = std::min(dt, t_end - t);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
        sys.rhs(t + 0.5 * h, tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
        sys.rhs(t + 0.5 * h, tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
        sys.rhs(t + h, tmp, k4);
        std::vector<double> next(n);
        bool finite = true;
        for (std::size_t i = 0; i < n; ++i) {
            next[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            finite = finite && std::isfinite(next[i]);
        }
        if (!finite) throw IntegrationDiverged(t, x);
        x = std::move(next);
        t = static_cast<double>(s + 1) * dt;
        if (t > t_end) t = t_end;
        if ((s + 1) % record_every == 0 || s + 1 == steps) {
            sol.times.push_back(t);
            sol.states.push_back(x);
        }
    }
    if (sol.times.back() != t) {
        sol.times.push_back(t);
        sol.states.push_back(x);
    }
    return sol;
}

double epsilon_fixpoint_from_climb(double g, const ModelParams& p, FixpointVariant variant,
                                   double sigma_bar) {
    if (g <= 0.0) return 0.0;
    const double fg = p.f * g;
    if (fg <= 0.0) return 0.0;
    switch (variant) {
    case FixpointVariant::original:
        // Root of eps^2 + fg eps - fg = 0, rationalized.
        return 2.0 * fg / (std::sqrt(fg * fg + 4.0 * fg) + fg);
    case FixpointVariant::adjusted:
        sigma_bar = 0.0;
        [[fallthrough]];
    case FixpointVariant::corrected: {
        // Root of 2 eps^2 + fg eps - f(g - sigma) = 0.
        const double drive = p.f * (g - sigma_bar);
        const double disc = fg * fg + 8.0 * drive;
        if (disc < 0.0)
            throw NumericalError("epsilon_fixpoint: no real fixed point (negative discriminant)");
        return 2.0 * drive / (std::sqrt(disc) + fg);
    }
    }
    return 0.0;
}

double epsilon_fixpoint(double c, const ModelParams& p, FixpointVariant variant,
                        double sigma_bar) {
    return epsilon_fixpoint_from_climb(cost_cdf(c, p), p, variant, sigma_bar);
}

double strategy_residual(double c, double eps, const ModelParams& p) {
    return p.gamma * c + eps * (c - p.y) + p.f * climb_integral(c, p);
}

double strategy_nullcline(double eps, const ModelParams& p) {
    double lo = 0.0, hi = p.y;
    double r_lo = strategy_residual(lo, eps, p);
    const double r_hi = strategy_residual(hi, eps, p);
    if (r_lo == 0.0) return lo;
    if (r_hi == 0.0) return hi;
    if (r_lo > 0.0 || r_hi < 0.0) {
        std::ostringstream msg;
        msg << "strategy_nullcline: no sign change on [0, y] for eps=" << eps;
        throw NumericalError(msg.str());
    }
    // Bisect to well below the 1e-9 tolerance; the residual is monotone.
    while (hi - lo > 1e-13) {
        const double mid = 0.5 * (lo + hi);
        const double r = strategy_residual(mid, eps, p);
        if (r == 0.0) return mid;
        if (r < 0.0) {
            lo = mid;
            r_lo = r;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

std::string_view to_string(Branch b) {
    switch (b) {
    case Branch::lower: return "lower";
    case Branch::upper: return "upper";
    case Branch::collapse: return "collapse";
    }
    return "?";
}

namespace {

// Residual of the strategy equation along the eps-nullcline.
double equilibrium_residual(double c, const ModelParams& p) {
    return strategy_residual(c, epsilon_fixpoint(c, p, FixpointVariant::original), p);
}

double equilibrium_residual_slope(double c, const ModelParams& p) {
    const double width = p.c_max - p.c_min;
    const double g = cost_cdf(c, p);
    const double eps = epsilon_fixpoint_from_climb(g, p, FixpointVariant::original);
    double deps = 0.0;
    if (c > p.c_min && c < p.c_max) {
        // From eps^2 + fg eps - fg = 0: d eps / d(fg) = (1 - eps) / (2 eps + fg).
        const double fg = p.f * g;
        deps = (1.0 - eps) / (2.0 * eps + fg) * p.f / width;
    }
    return p.gamma + eps + deps * (c - p.y) + p.f * g;
}

double polish_root(double lo, double hi, const ModelParams& p) {
    double r_lo = equilibrium_residual(lo, p);
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double r = equilibrium_residual(x, p);
        if (r == 0.0) return x;
        if ((r < 0.0) == (r_lo < 0.0)) {
            lo = x;
            r_lo = r;
        } else {
            hi = x;
        }
        const double slope = equilibrium_residual_slope(x, p);
        double next = slope != 0.0 ? x - r / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) < 1e-16) return next;
        x = next;
    }
    return x;
}

std::vector<double> interior_roots(const ModelParams& p) {
    const double lo = p.c_min - 0.05;
    const double hi = p.c_max + 0.05;
    constexpr double kGrid = 1e-4;
    const auto cells = static_cast<std::size_t>(std::llround((hi - lo) / kGrid));
    std::vector<double> roots;
    double c_prev = lo;
    double r_prev = equilibrium_residual(c_prev, p);
    for (std::size_t k = 1; k <= cells; ++k) {
        const double c = lo + static_cast<double>(k) * kGrid;
        const double r = equilibrium_residual(c, p);
        if (r_prev == 0.0 && c_prev > p.c_min) {
            roots.push_back(c_prev);
        } else if ((r_prev < 0.0 && r > 0.0) || (r_prev > 0.0 && r < 0.0)) {
            roots.push_back(polish_root(c_prev, c, p));
        }
        c_prev = c;
        r_prev = r;
    }
    return roots;
}

} // namespace

std::size_t count_interior_equilibria(const ModelParams& p) { return interior_roots(p).size(); }

std::vector<Equilibrium> solve_equilibria(const ModelParams& p) {
    if (!(p.gamma > 0.0)) throw ConfigError("solve_equilibria requires gamma > 0");
    std::vector<Equilibrium> out;
    for (double c : interior_roots(p)) {
        Equilibrium eq;
        eq.c_star = c;
        eq.eps_star = epsilon_fixpoint(c, p, FixpointVariant::original);
        eq.v1_star = eq.eps_star * (p.y - c) / p.gamma;
        eq.v0_star = p.f * climb_integral(c, p) / p.gamma;
        out.push_back(eq);
    }
    std::sort(out.begin(), out.end(),
              [](const Equilibrium& a, const Equilibrium& b) { return a.eps_star < b.eps_star; });
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k].branch = k == 0 ? Branch::lower : Branch::upper;
    if (out.empty()) out.push_back(Equilibrium{0.0, 0.0, 0.0, 0.0, Branch::collapse});
    return out;
}

double bifurcation_gamma(const ModelParams& p) {
    ModelParams q = p;
    q.gamma = 0.1;
    if (count_interior_equilibria(q) == 0)
        throw NumericalError("bifurcation_gamma: no interior equilibria at gamma = 0.1");
    double lo = 0.1;
    double hi = 0.2;
    for (int k = 0;; ++k) {
        q.gamma = hi;
        if (count_interior_equilibria(q) == 0) break;
        if (k == 12) throw NumericalError("bifurcation_gamma: could not bracket the bifurcation");
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo > 1e-5) {
        const double mid = 0.5 * (lo + hi);
        q.gamma = mid;
        if (count_interior_equilibria(q) > 0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<double> moment_rhs(std::span<const double> state, std::span<const double> moments,
                               const ModelParams& p) {
    if (state.size() < 2) throw ConfigError("moment_rhs: need at least (eps, sigma_1)");
    const std::size_t order = state.size() - 1;
    if (moments.size() < order + 1) throw ConfigError("moment_rhs: moments up to K+1 required");
    const double eps = state[0];
    const double g1 = moments[0];
    const double s1 = state[1];
    std::vector<double> d(state.size());
    d[0] = p.f * (1.0 - eps) * g1 - p.f * s1 - 2.0 * eps * eps;
    for (std::size_t k = 1; k <= order; ++k) {
        const double gk = moments[k - 1];
        const double gk1 = moments[k];
        const double next = k < order ? state[k + 1] : 0.0;
        d[k] = p.f * (1.0 - eps) * (gk1 - gk * g1) - p.f * next - 2.0 * eps * state[k] +
               p.f * gk * s1;
    }
    return d;
}

void write_equilibria_csv(std::ostream& out, double gamma, const std::vector<Equilibrium>& eqs,
                          bool header) {
    if (header) csv::row(out, {"gamma", "c", "eps", "branch"});
    for (const auto& eq : eqs)
        csv::row(out, {csv::number(gamma), csv::number(eq.c_star), csv::number(eq.eps_star),
                       to_string(eq.branch)});
}

} // namespace coconut

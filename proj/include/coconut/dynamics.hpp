#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "coconut/core.hpp"
#include "coconut/errors.hpp"

namespace coconut {

// Deterministic descriptions of the economy.
//
//   original_2d       (eps, c):      eps' = f(1-eps)G(c) - eps^2
//                                    c'   = gamma c + eps(c - y) + f I(c)
//   adjusted_eps      (eps):         eps' = f(1-eps)G - 2 eps^2
//   corrected_eps     (eps):         eps' = f[(1-eps)G - sigma(t)] - 2 eps^2
//   value_3d          (eps, V1, V0): eps' = f(1-eps)G(c) - eps^2
//                                    V1'  = gamma V1 + eps(c - y)
//                                    V0'  = gamma V0 - f I(c),   c = V1 - V0
//   moment_hierarchy  (eps, s_1..s_K): heterogeneity hierarchy closed by s_{K+1} = 0
//
// I is climb_integral. For the one-dimensional variants G is either G(c) of a
// fixed strategy or a population mean climbing probability.
enum class OdeVariant { original_2d, adjusted_eps, corrected_eps, value_3d, moment_hierarchy };

std::string_view to_string(OdeVariant v);
OdeVariant ode_variant_from_string(std::string_view name);

struct OdeSystem {
    OdeVariant variant = OdeVariant::adjusted_eps;
    ModelParams params;
    double climb_probability = 0.0;       // adjusted_eps, corrected_eps
    std::function<double(double)> sigma;  // corrected_eps: sigma(t)
    std::vector<double> moments;          // moment_hierarchy: <G^1>..<G^{K+1}>
    std::size_t order = 3;                // moment_hierarchy: K

    static OdeSystem original(const ModelParams& p);
    static OdeSystem adjusted(const ModelParams& p, double strategy);
    static OdeSystem corrected(const ModelParams& p, double climb_probability,
                               std::function<double(double)> sigma);
    static OdeSystem value(const ModelParams& p);
    static OdeSystem hierarchy(const ModelParams& p, std::vector<double> moments, std::size_t order);

    std::size_t dimension() const;
    void rhs(double t, std::span<const double> x, std::span<double> dx) const;
    std::vector<double> rhs(double t, std::span<const double> x) const;
};

struct OdeSolution {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    bool reached_steady_state = false;

    const std::vector<double>& final_state() const { return states.back(); }
};

class IntegrationDiverged : public NumericalError {
public:
    IntegrationDiverged(double t, std::vector<double> last_finite);
    double time() const { return time_; }
    const std::vector<double>& last_finite_state() const { return last_; }

private:
    double time_;
    std::vector<double> last_;
};

inline constexpr double kDefaultDt = 1e-3;
inline constexpr double kSteadyStateTime = 1e3;
inline constexpr double kSteadyStateRhs = 1e-10;

// Classical fixed-step RK4 from t = 0. Stops early once the max-norm of the
// right-hand side drops below 1e-10. Every `record_every`-th state is kept,
// plus the initial and final ones.
OdeSolution integrate(const OdeSystem& sys, std::span<const double> init, double t_end,
                      double dt = kDefaultDt, std::size_t record_every = 1,
                      bool stop_at_steady_state = true);

enum class FixpointVariant { original, adjusted, corrected };

// Closed-form eps fixed points for a climbing probability g:
//   original  (fg/2)(sqrt(1 + 4/(fg)) - 1)
//   adjusted  (fg/4)(sqrt(1 + 8/(fg)) - 1)
//   corrected (fg/4)(sqrt(1 + 8/(fg) - 8 sigma/(f g^2)) - 1)
// All return 0 for g = 0. Throws NumericalError for a negative discriminant.
double epsilon_fixpoint_from_climb(double g, const ModelParams& p, FixpointVariant variant,
                                   double sigma_bar = 0.0);
double epsilon_fixpoint(double c, const ModelParams& p, FixpointVariant variant,
                        double sigma_bar = 0.0);

// Residual gamma c + eps(c - y) + f I(c) of the stationary strategy equation.
double strategy_residual(double c, double eps, const ModelParams& p);

// Root in c of strategy_residual for fixed eps, by bisection on [0, y] to 1e-9
// (the residual is nondecreasing in c). Throws NumericalError without a sign change.
double strategy_nullcline(double eps, const ModelParams& p);

enum class Branch { lower, upper, collapse };
std::string_view to_string(Branch b);

struct Equilibrium {
    double eps_star = 0.0;
    double c_star = 0.0;
    double v1_star = 0.0;
    double v0_star = 0.0;
    Branch branch = Branch::collapse;
};

// Intersections of the eps-nullcline (eps^2 trading) with the strategy
// nullcline, found by scanning c over [c_min - 0.05, c_max + 0.05] on a 1e-4
// grid and polishing each bracketed root. Values follow from the stationary
// value equations. With no interior intersection the single collapse state
// (eps = 0, c = V1 = V0 = 0) is returned. Requires gamma > 0.
std::vector<Equilibrium> solve_equilibria(const ModelParams& p);
std::size_t count_interior_equilibria(const ModelParams& p);

// Discount rate at which the two interior equilibria disappear, bracketed
// from gamma = 0.1 upward and bisected to width 1e-5.
double bifurcation_gamma(const ModelParams& p);

// Right-hand side of the truncated heterogeneity hierarchy for the IM trading
// rule: state (eps, s_1..s_K), moments <G>..<G^{K+1}>.
std::vector<double> moment_rhs(std::span<const double> state, std::span<const double> moments,
                               const ModelParams& p);

// CSV: gamma, c, eps, branch.
void write_equilibria_csv(std::ostream& out, double gamma, const std::vector<Equilibrium>& eqs,
                          bool header = true);

} // namespace coconut

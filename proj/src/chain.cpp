#include "coconut/chain.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "coconut/csv.hpp"
#include "coconut/errors.hpp"

namespace coconut {

namespace {
constexpr std::size_t kDirectSolveLimit = 2000;
constexpr double kRowTolerance = 1e-12;
} // namespace

std::string_view to_string(ChainVariant v) {
    return v == ChainVariant::IM_chain ? "IM_chain" : "AM2_chain";
}

TransitionMatrix::TransitionMatrix(std::size_t n_agents, ChainVariant variant,
                                   std::optional<double> sigma_bar, std::vector<double> up,
                                   std::vector<double> down, std::size_t clamped_rows)
    : n_(n_agents), variant_(variant), sigma_bar_(sigma_bar), up_(std::move(up)),
      down_(std::move(down)), clamped_(clamped_rows) {
    if (up_.size() != n_ + 1 || down_.size() != n_ + 1)
        throw std::logic_error("TransitionMatrix: rate vectors must have N+1 entries");
    for (std::size_t e = 0; e <= n_; ++e) {
        if (up_[e] < 0.0 || down_[e] < 0.0 || up_[e] + down_[e] > 1.0 + kRowTolerance)
            throw std::logic_error("TransitionMatrix: row " + std::to_string(e) +
                                   " is not a probability distribution");
    }
}

double TransitionMatrix::operator()(std::size_t from, std::size_t to) const {
    const double u = up_[from];
    const double d = down_[from];
    double p = 0.0;
    if (to == from) p += 1.0 - u - d;
    if (to == from + 1) p += u;
    if (from >= down_step() && to == from - down_step()) p += d;
    return p;
}

double TransitionMatrix::row_sum_error() const {
    double worst = 0.0;
    for (std::size_t e = 0; e < size(); ++e) {
        double sum = 0.0;
        const std::size_t lo = e >= 2 ? e - 2 : 0;
        const std::size_t hi = std::min(e + 1, n_);
        for (std::size_t j = lo; j <= hi; ++j) sum += (*this)(e, j);
        worst = std::max(worst, std::abs(sum - 1.0));
    }
    return worst;
}

TransitionMatrix build_chain_from_climb_probability(const ModelParams& p, double mean_climb,
                                                    ChainVariant variant,
                                                    std::optional<double> sigma_bar) {
    p.validate();
    if (!std::isfinite(mean_climb)) throw ConfigError("build_chain: climb probability not finite");
    const std::size_t n = p.n_agents;
    const double nd = static_cast<double>(n);
    const double correction = sigma_bar.value_or(0.0);
    std::vector<double> up(n + 1, 0.0), down(n + 1, 0.0);
    std::size_t clamped = 0;
    for (std::size_t e = 0; e <= n; ++e) {
        const double ed = static_cast<double>(e);
        double rate = p.f * ((nd - ed) / nd * mean_climb - correction);
        if (rate < 0.0) {
            // Only a correction can push the rate negative; e = N is zero anyway.
            if (rate < -1e-15 && e < n) ++clamped;
            rate = 0.0;
        }
        if (rate > 1.0) throw ConfigError("build_chain: harvest rate exceeds 1");
        up[e] = e < n ? rate : 0.0;
        down[e] = ed * (ed - 1.0) / (nd * (nd - 1.0));
    }
    // At e = 1 the AM2 variant has no partner; the IM variant cannot drop below zero.
    return TransitionMatrix(n, variant, sigma_bar, std::move(up), std::move(down), clamped);
}

TransitionMatrix build_chain(const ModelParams& p, double c, ChainVariant variant,
                             std::optional<double> sigma_bar) {
    if (!std::isfinite(c)) throw ConfigError("build_chain: strategy not finite");
    return build_chain_from_climb_probability(p, cost_cdf(c, p), variant, sigma_bar);
}

double StationaryDistribution::mean() const {
    double m = 0.0;
    for (std::size_t e = 0; e < probabilities.size(); ++e) m += static_cast<double>(e) * probabilities[e];
    return m;
}

double stationarity_residual(const TransitionMatrix& m, const std::vector<double>& pi) {
    const std::size_t n = m.size();
    std::vector<double> next(n, 0.0);
    for (std::size_t e = 0; e < n; ++e) {
        next[e] += pi[e] * (1.0 - m.up(e) - m.down(e));
        if (e + 1 < n) next[e + 1] += pi[e] * m.up(e);
        if (e >= m.down_step()) next[e - m.down_step()] += pi[e] * m.down(e);
    }
    double worst = 0.0;
    for (std::size_t e = 0; e < n; ++e) worst = std::max(worst, std::abs(next[e] - pi[e]));
    return worst;
}

namespace {

std::vector<double> solve_direct(const TransitionMatrix& m) {
    const auto n = static_cast<Eigen::Index>(m.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index from = 0; from < n; ++from) {
        const auto e = static_cast<std::size_t>(from);
        a(from, from) += -m.up(e) - m.down(e);
        if (from + 1 < n) a(from + 1, from) += m.up(e);
        const auto step = static_cast<Eigen::Index>(m.down_step());
        if (from >= step) a(from - step, from) += m.down(e);
    }
    a.row(n - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(n - 1) = 1.0;
    const Eigen::VectorXd x = a.partialPivLu().solve(b);
    std::vector<double> pi(x.data(), x.data() + n);
    for (double v : pi)
        if (!std::isfinite(v)) throw NumericalError("stationary: singular balance system");
    return pi;
}

std::vector<double> solve_power(const TransitionMatrix& m) {
    const std::size_t n = m.size();
    std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
    constexpr std::size_t kMaxIterations = 50'000'000;
    for (std::size_t it = 0; it < kMaxIterations; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t e = 0; e < n; ++e) {
            next[e] += pi[e] * (1.0 - m.up(e) - m.down(e));
            if (e + 1 < n) next[e + 1] += pi[e] * m.up(e);
            if (e >= m.down_step()) next[e - m.down_step()] += pi[e] * m.down(e);
        }
        double diff = 0.0;
        for (std::size_t e = 0; e < n; ++e) diff += std::abs(next[e] - pi[e]);
        pi.swap(next);
        if (diff < 1e-12) return pi;
    }
    throw NumericalError("stationary: power iteration did not converge");
}

} // namespace

StationaryDistribution stationary(const TransitionMatrix& m) {
    StationaryDistribution dist;
    const std::size_t n = m.size();
    bool any_harvest = false;
    for (std::size_t e = 0; e < n; ++e) any_harvest = any_harvest || m.up(e) > 0.0;
    if (!any_harvest) {
        dist.probabilities.assign(n, 0.0);
        dist.probabilities[0] = 1.0;
        dist.mode_state = 0;
        return dist;
    }
    std::vector<double> pi = n <= kDirectSolveLimit + 1 ? solve_direct(m) : solve_power(m);
    // Transient states come out as tiny negatives from the LU solve.
    for (double& v : pi) v = std::max(v, 0.0);
    const double total = std::accumulate(pi.begin(), pi.end(), 0.0);
    for (double& v : pi) v /= total;
    dist.probabilities = std::move(pi);
    dist.mode_state = static_cast<std::size_t>(
        std::max_element(dist.probabilities.begin(), dist.probabilities.end()) -
        dist.probabilities.begin());
    return dist;
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ConfigError("total_variation: size mismatch");
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) sum += std::abs(a[k] - b[k]);
    return 0.5 * sum;
}

void write_stationary_csv(std::ostream& out, const StationaryDistribution& dist) {
    csv::row(out, {"e", "probability"});
    for (std::size_t e = 0; e < dist.probabilities.size(); ++e)
        csv::row(out, {csv::number(static_cast<std::uint64_t>(e)), csv::number(dist.probabilities[e])});
}

void write_matrix_csv(std::ostream& out, const TransitionMatrix& m) {
    std::vector<std::string> header{"from"};
    for (std::size_t j = 0; j < m.size(); ++j) header.push_back(std::to_string(j));
    csv::row(out, header);
    for (std::size_t i = 0; i < m.size(); ++i) {
        std::vector<std::string> fields{std::to_string(i)};
        for (std::size_t j = 0; j < m.size(); ++j) fields.push_back(csv::number(m(i, j)));
        csv::row(out, fields);
    }
}

} // namespace coconut

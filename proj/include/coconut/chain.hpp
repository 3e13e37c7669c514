#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "coconut/core.hpp"

namespace coconut {

// IM_chain: trades remove two coconuts. AM2_chain: a trade clears one.
enum class ChainVariant { IM_chain, AM2_chain };

std::string_view to_string(ChainVariant v);

// Row-stochastic matrix over coconut counts e = 0..N. Each row has at most
// three nonzero entries (stay, one up, one down), stored densely by offset.
class TransitionMatrix {
public:
    TransitionMatrix(std::size_t n_agents, ChainVariant variant, std::optional<double> sigma_bar,
                     std::vector<double> up, std::vector<double> down, std::size_t clamped_rows);

    std::size_t size() const { return up_.size(); }
    std::size_t n_agents() const { return size() - 1; }
    ChainVariant variant() const { return variant_; }
    std::optional<double> sigma_bar() const { return sigma_bar_; }
    // Number of rows whose corrected harvest rate was negative and clamped to 0.
    std::size_t clamped_rows() const { return clamped_; }

    // P(to | from).
    double operator()(std::size_t from, std::size_t to) const;
    double up(std::size_t e) const { return up_[e]; }
    double down(std::size_t e) const { return down_[e]; }
    std::size_t down_step() const { return variant_ == ChainVariant::IM_chain ? 2 : 1; }

    // Max over rows of |sum_j P(e, j) - 1|.
    double row_sum_error() const;

private:
    std::size_t n_;
    ChainVariant variant_;
    std::optional<double> sigma_bar_;
    std::vector<double> up_;
    std::vector<double> down_;
    std::size_t clamped_;
};

// Harvest rate f*((N-e)/N * g - sigma_bar), trade rate e(e-1)/(N(N-1)).
TransitionMatrix build_chain_from_climb_probability(const ModelParams& p, double mean_climb,
                                                    ChainVariant variant,
                                                    std::optional<double> sigma_bar = {});

TransitionMatrix build_chain(const ModelParams& p, double c, ChainVariant variant,
                             std::optional<double> sigma_bar = {});

struct StationaryDistribution {
    std::vector<double> probabilities;
    std::size_t mode_state = 0;

    double mean() const;
};

// Left eigenvector for eigenvalue 1. Chains up to 2000 agents use a direct
// LU solve of (P^T - I) pi = 0 with a normalization row; larger chains use
// power iteration to 1e-12. When no harvest is possible the chain drains and
// the point mass on e = 0 is returned.
StationaryDistribution stationary(const TransitionMatrix& m);

// max_j |(pi P)_j - pi_j|
double stationarity_residual(const TransitionMatrix& m, const std::vector<double>& pi);

double total_variation(const std::vector<double>& a, const std::vector<double>& b);

// CSV: e, probability.
void write_stationary_csv(std::ostream& out, const StationaryDistribution& dist);
// Dense (N+1)x(N+1) matrix with header row "from,0,1,...,N".
void write_matrix_csv(std::ostream& out, const TransitionMatrix& m);

} // namespace coconut

#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "impact_qlbs/market.hpp"

namespace impact_qlbs {

enum class StrategyKind { postulated, optimal };

/// Hedge positions u_t in units of foreign currency. The final column is
/// zero: the book is liquidated at expiry.
struct StrategyMatrix {
  Eigen::MatrixXd positions;
  StrategyKind kind = StrategyKind::postulated;

  Eigen::Index n_paths() const { return positions.rows(); }
  Eigen::Index n_steps() const { return positions.cols() - 1; }
  void validate() const;  // terminal column exactly zero
};

/// Validated construction; throws if the terminal column is not zero.
StrategyMatrix make_strategy(Eigen::MatrixXd positions, StrategyKind kind);

/// Hedge-portfolio values Pi_t in domestic currency, terminal column pinned
/// to the put payoff.
struct PortfolioMatrix {
  Eigen::MatrixXd values;
};

/// One-step rewards R_t; the terminal column holds the cross-sectional
/// variance penalty, constant across paths.
struct RewardMatrix {
  Eigen::MatrixXd values;
};

/// positions ~ Uniform[lo, hi) i.i.d. for t < T, final column zero;
/// per-path substreams of `seed`.
StrategyMatrix sample_strategy(double lo, double hi, int n_paths, int n_steps,
                               std::uint64_t seed);

double payoff(double terminal_rate, double strike);

/// Pi_T = max(K - F_T, 0); backward Pi_t = e^{-r_d dt}(Pi_{t+1} - u_t dF_t)
/// with dF_t = F_{t+1} - e^{r_d dt} F_t, all on the quoted process.
PortfolioMatrix portfolio_recursion(const PathMatrix& quoted, const StrategyMatrix& strategy,
                                    const MarketParams& params);

/// R_t = gamma a_t dF_t - lambda gamma^2 (hat(Pi)_{t+1}^2
///        - 2 a_t hat(dF)_t hat(Pi)_{t+1} + a_t^2 hat(dF)_t^2) for t < T,
/// where hats subtract the cross-sectional mean over paths at fixed t;
/// R_T = -lambda Var[Pi_T] broadcast to every path.
RewardMatrix rewards(const PathMatrix& quoted, const StrategyMatrix& strategy,
                     const PortfolioMatrix& portfolio, const MarketParams& params,
                     double lambda);

/// Per-path total proportional cost: sum_t kappa |F_t (a_t - a_{t-1})| with
/// a_{-1} = 0, including the forced liquidation step at T.
Eigen::VectorXd transaction_costs(const PathMatrix& paths, const StrategyMatrix& strategy,
                                  double kappa);

/// Discounted Monte Carlo average payoff on the quoted process.
double fair_price(const PathMatrix& quoted, const MarketParams& params);

/// Cross-sectional variance with the 1/N convention, used for the terminal
/// reward and the price premium alike.
double population_variance(const Eigen::VectorXd& v);

}  // namespace impact_qlbs

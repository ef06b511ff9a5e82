#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "impact_qlbs/errors.hpp"

namespace impact_qlbs {

struct StrategyMatrix;  // hedging.hpp

/// Static model inputs. Rates are domestic units per foreign unit; mu, sigma
/// and the interest rates are per year; tau is the time to maturity in years.
/// The grid spacing dt = tau / n_steps is always derived, never set.
struct MarketParams {
  double f0 = 2.4;
  double f_prev = 2.3;  // rate one step before t = 0; seeds the state at t = 0
  double strike = 3.0;
  double mu = 0.05;
  double sigma = 0.05;
  double r_domestic = 0.05;
  double r_foreign = 0.0;  // carried through reports, not used by the drift
  double tau = 0.3;
  int n_steps = 30;  // hedging steps; the time grid has n_steps + 1 points
  int n_paths = 1000;

  double dt() const { return tau / n_steps; }
  double discount_step() const;   // e^{-r_d dt}
  double discount_total() const;  // e^{-r_d tau}
  void validate() const;          // throws ConfigError
};

enum class PathKind { unaffected, quoted, implied };

/// n_paths x (n_steps + 1) grid of strictly positive exchange rates,
/// rows indexed by path.
struct PathMatrix {
  Eigen::MatrixXd values;
  PathKind kind = PathKind::unaffected;

  Eigen::Index n_paths() const { return values.rows(); }
  Eigen::Index n_steps() const { return values.cols() - 1; }
};

/// Per-path, per-time order-book samples: beta in [0, 1) governs how much of
/// an order's displacement stays permanent, thinness is the supply-curve slope.
struct ImpactSeries {
  Eigen::MatrixXd beta;
  Eigen::MatrixXd thinness;

  Eigen::Index n_paths() const { return beta.rows(); }
  Eigen::Index n_steps() const { return beta.cols() - 1; }
  void validate() const;
};

/// One-step log returns of a rate process.
struct StateMatrix {
  Eigen::MatrixXd values;
};

enum class NonPositivePolicy { error, drop_path };

/// GBM paths under the physical measure, exact log-Euler scheme:
/// F_{t+1} = F_t exp((mu - sigma^2/2) dt + sigma sqrt(dt) Z). Each path draws
/// from its own (seed, path) substream, so results do not depend on
/// evaluation order.
PathMatrix simulate_unaffected(const MarketParams& params, std::uint64_t seed);

/// Linear supply curve: price for an order of size u against base rate f.
double supply_price(double rate, double thinness, double order_size);

/// Uniform density of the hypothetical book, 1 / (2 M_t).
double book_density(double thinness);

/// Cost of acquiring u units through the book: f u + M u^2.
double order_cost(double rate, double thinness, double order_size);

struct Propagation {
  PathMatrix paths;
  std::vector<Eigen::Index> kept;  // original row indices that survived
  std::size_t dropped = 0;
};

/// Shifts the unaffected rates by the permanent impact of the hedging
/// schedule: each repositioning Delta u_t moves every rate from t onward by
/// 2 beta_t M_t Delta u_t. Output kind follows the strategy kind (postulated
/// -> quoted, optimal -> implied). Throws NonPositiveRate on the first
/// non-positive output.
PathMatrix propagate_impact(const PathMatrix& unaffected, const StrategyMatrix& strategy,
                            const ImpactSeries& impact);

/// Policy-aware variant: with drop_path, offending paths are removed from the
/// output and counted instead of raising.
Propagation propagate_impact(const PathMatrix& unaffected, const StrategyMatrix& strategy,
                             const ImpactSeries& impact, NonPositivePolicy policy);

/// S_0 = ln(F_0 / f_prev), S_t = ln(F_t / F_{t-1}).
StateMatrix state_variables(const PathMatrix& paths, double f_prev);

/// Copy of the listed rows, in the given order.
Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows);

}  // namespace impact_qlbs

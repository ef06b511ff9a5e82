#include "impact_qlbs/hedging.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "impact_qlbs/rng.hpp"

namespace impact_qlbs {

void StrategyMatrix::validate() const {
  if (positions.cols() < 2) throw std::invalid_argument("strategy needs at least two columns");
  if ((positions.col(positions.cols() - 1).array() != 0.0).any())
    throw std::invalid_argument("strategy terminal column must be zero");
}

StrategyMatrix make_strategy(Eigen::MatrixXd positions, StrategyKind kind) {
  StrategyMatrix s{std::move(positions), kind};
  s.validate();
  return s;
}

StrategyMatrix sample_strategy(double lo, double hi, int n_paths, int n_steps,
                               std::uint64_t seed) {
  if (lo > hi) throw std::invalid_argument("sample_strategy: lo must be <= hi");
  Eigen::MatrixXd u(n_paths, n_steps + 1);
  for (Eigen::Index k = 0; k < n_paths; ++k) {
    auto eng = rng::engine(seed, rng::Stream::strategy, static_cast<std::uint64_t>(k));
    for (int t = 0; t < n_steps; ++t) u(k, t) = rng::uniform_halfopen(eng, lo, hi);
    u(k, n_steps) = 0.0;
  }
  return StrategyMatrix{std::move(u), StrategyKind::postulated};
}

double payoff(double terminal_rate, double strike) {
  return std::max(strike - terminal_rate, 0.0);
}

PortfolioMatrix portfolio_recursion(const PathMatrix& quoted, const StrategyMatrix& strategy,
                                    const MarketParams& params) {
  const Eigen::MatrixXd& f = quoted.values;
  const Eigen::MatrixXd& u = strategy.positions;
  if (f.rows() != u.rows() || f.cols() != u.cols())
    throw std::invalid_argument("portfolio_recursion: shapes disagree");

  const double disc = params.discount_step();
  const double growth = std::exp(params.r_domestic * params.dt());
  const Eigen::Index last = f.cols() - 1;

  Eigen::MatrixXd pi(f.rows(), f.cols());
  pi.col(last) = (params.strike - f.col(last).array()).max(0.0);
  for (Eigen::Index t = last - 1; t >= 0; --t) {
    const auto df = f.col(t + 1).array() - growth * f.col(t).array();
    pi.col(t) = disc * (pi.col(t + 1).array() - u.col(t).array() * df);
  }
  return PortfolioMatrix{std::move(pi)};
}

RewardMatrix rewards(const PathMatrix& quoted, const StrategyMatrix& strategy,
                     const PortfolioMatrix& portfolio, const MarketParams& params,
                     double lambda) {
  const Eigen::MatrixXd& f = quoted.values;
  const Eigen::MatrixXd& u = strategy.positions;
  const Eigen::MatrixXd& pi = portfolio.values;
  if (f.rows() != u.rows() || f.cols() != u.cols() || pi.rows() != f.rows() ||
      pi.cols() != f.cols())
    throw std::invalid_argument("rewards: shapes disagree");
  if (f.rows() < 2) throw std::invalid_argument("rewards: need at least 2 paths for variances");

  const double gamma = params.discount_step();
  const double growth = std::exp(params.r_domestic * params.dt());
  const Eigen::Index last = f.cols() - 1;

  Eigen::MatrixXd r(f.rows(), f.cols());
  for (Eigen::Index t = 0; t < last; ++t) {
    const Eigen::ArrayXd df = f.col(t + 1).array() - growth * f.col(t).array();
    const Eigen::ArrayXd df_hat = df - df.mean();
    const Eigen::ArrayXd pi_hat = pi.col(t + 1).array() - pi.col(t + 1).mean();
    const auto a = u.col(t).array();
    r.col(t) = gamma * a * df -
               lambda * gamma * gamma *
                   (pi_hat.square() - 2.0 * a * df_hat * pi_hat + a.square() * df_hat.square());
  }
  r.col(last).setConstant(-lambda * population_variance(pi.col(last)));
  return RewardMatrix{std::move(r)};
}

Eigen::VectorXd transaction_costs(const PathMatrix& paths, const StrategyMatrix& strategy,
                                  double kappa) {
  const Eigen::MatrixXd& f = paths.values;
  const Eigen::MatrixXd& a = strategy.positions;
  if (f.rows() != a.rows() || f.cols() != a.cols())
    throw std::invalid_argument("transaction_costs: shapes disagree");

  Eigen::VectorXd totals = Eigen::VectorXd::Zero(f.rows());
  for (Eigen::Index k = 0; k < f.rows(); ++k) {
    double sum = 0.0;
    for (Eigen::Index t = 0; t < f.cols(); ++t) {
      const double da = (t == 0) ? a(k, 0) : a(k, t) - a(k, t - 1);
      sum += kappa * std::abs(f(k, t) * da);
    }
    totals(k) = sum;
  }
  return totals;
}

double fair_price(const PathMatrix& quoted, const MarketParams& params) {
  if (quoted.kind != PathKind::quoted)
    throw std::invalid_argument("fair_price expects the quoted process");
  const auto terminal = quoted.values.col(quoted.values.cols() - 1).array();
  const double mean_payoff = (params.strike - terminal).max(0.0).mean();
  return params.discount_total() * mean_payoff;
}

double population_variance(const Eigen::VectorXd& v) {
  if (v.size() < 2) throw std::invalid_argument("population_variance: need at least 2 values");
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(v.size());
}

}  // namespace impact_qlbs

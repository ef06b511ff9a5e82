#include "impact_qlbs/market.hpp"

#include <cmath>
#include <random>
#include <string>

#include "impact_qlbs/hedging.hpp"
#include "impact_qlbs/rng.hpp"

namespace impact_qlbs {

double MarketParams::discount_step() const { return std::exp(-r_domestic * dt()); }

double MarketParams::discount_total() const { return std::exp(-r_domestic * tau); }

void MarketParams::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(std::string("market: ") + msg);
  };
  require(f0 > 0, "f0 must be > 0");
  require(f_prev > 0, "f_prev must be > 0");
  require(strike > 0, "k must be > 0");
  require(sigma >= 0, "sigma must be >= 0");
  require(tau > 0, "tau must be > 0");
  require(n_steps >= 2, "t must be >= 2");
  require(n_paths >= 1, "n_mc must be >= 1");
  require(std::isfinite(mu) && std::isfinite(r_domestic) && std::isfinite(r_foreign),
          "rates must be finite");
}

void ImpactSeries::validate() const {
  if (beta.rows() != thinness.rows() || beta.cols() != thinness.cols())
    throw std::invalid_argument("impact series shapes disagree");
  if ((beta.array() < 0.0).any() || (beta.array() >= 1.0).any())
    throw std::invalid_argument("beta entries must lie in [0, 1)");
  if ((thinness.array() <= 0.0).any())
    throw std::invalid_argument("thinness entries must be > 0");
}

PathMatrix simulate_unaffected(const MarketParams& params, std::uint64_t seed) {
  params.validate();
  const double dt = params.dt();
  const double drift = (params.mu - 0.5 * params.sigma * params.sigma) * dt;
  const double vol = params.sigma * std::sqrt(dt);

  Eigen::MatrixXd values(params.n_paths, params.n_steps + 1);
  for (Eigen::Index k = 0; k < params.n_paths; ++k) {
    auto eng = rng::engine(seed, rng::Stream::unaffected_paths, static_cast<std::uint64_t>(k));
    std::normal_distribution<double> normal(0.0, 1.0);
    values(k, 0) = params.f0;
    for (int t = 0; t < params.n_steps; ++t) {
      const double z = normal(eng);
      values(k, t + 1) = values(k, t) * std::exp(drift + vol * z);
    }
  }
  return PathMatrix{std::move(values), PathKind::unaffected};
}

double supply_price(double rate, double thinness, double order_size) {
  return rate + thinness * order_size;
}

double book_density(double thinness) {
  if (thinness <= 0) throw std::invalid_argument("book_density: thinness must be > 0");
  return 1.0 / (2.0 * thinness);
}

double order_cost(double rate, double thinness, double order_size) {
  return rate * order_size + thinness * order_size * order_size;
}

Propagation propagate_impact(const PathMatrix& unaffected, const StrategyMatrix& strategy,
                             const ImpactSeries& impact, NonPositivePolicy policy) {
  const Eigen::Index n = unaffected.values.rows();
  const Eigen::Index cols = unaffected.values.cols();
  if (strategy.positions.rows() != n || strategy.positions.cols() != cols ||
      impact.beta.rows() != n || impact.beta.cols() != cols)
    throw std::invalid_argument("propagate_impact: shapes disagree");
  strategy.validate();
  impact.validate();

  const Eigen::MatrixXd& f = unaffected.values;
  const Eigen::MatrixXd& u = strategy.positions;

  Eigen::MatrixXd out(n, cols);
  std::vector<Eigen::Index> kept;
  kept.reserve(static_cast<std::size_t>(n));
  std::size_t dropped = 0;

  for (Eigen::Index k = 0; k < n; ++k) {
    double shift = 0.0;  // running sum of 2 beta_j M_j du_j through the current step
    bool bad = false;
    for (Eigen::Index t = 0; t < cols; ++t) {
      const double du = (t == 0) ? u(k, 0) : u(k, t) - u(k, t - 1);
      shift += 2.0 * impact.beta(k, t) * impact.thinness(k, t) * du;
      const double v = f(k, t) + shift;
      out(k, t) = v;
      if (!(v > 0)) {
        if (policy == NonPositivePolicy::error)
          throw NonPositiveRate(static_cast<std::size_t>(k), static_cast<std::size_t>(t), v);
        bad = true;
        ++dropped;
        break;
      }
    }
    if (!bad) kept.push_back(k);
  }

  const PathKind kind =
      strategy.kind == StrategyKind::postulated ? PathKind::quoted : PathKind::implied;
  if (dropped == 0) return Propagation{PathMatrix{std::move(out), kind}, std::move(kept), 0};
  return Propagation{PathMatrix{select_rows(out, kept), kind}, std::move(kept), dropped};
}

PathMatrix propagate_impact(const PathMatrix& unaffected, const StrategyMatrix& strategy,
                            const ImpactSeries& impact) {
  return propagate_impact(unaffected, strategy, impact, NonPositivePolicy::error).paths;
}

StateMatrix state_variables(const PathMatrix& paths, double f_prev) {
  if (!(f_prev > 0)) throw std::invalid_argument("state_variables: f_prev must be > 0");
  const Eigen::MatrixXd& f = paths.values;
  for (Eigen::Index k = 0; k < f.rows(); ++k)
    for (Eigen::Index t = 0; t < f.cols(); ++t)
      if (!(f(k, t) > 0))
        throw NonPositiveRate(static_cast<std::size_t>(k), static_cast<std::size_t>(t), f(k, t));

  Eigen::MatrixXd s(f.rows(), f.cols());
  s.col(0) = (f.col(0).array() / f_prev).log();
  for (Eigen::Index t = 1; t < f.cols(); ++t)
    s.col(t) = (f.col(t).array() / f.col(t - 1).array()).log();
  return StateMatrix{std::move(s)};
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace impact_qlbs

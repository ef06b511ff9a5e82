#pragma once

// Test-only reference implementations, kept independent of the library's
// evaluation and solve paths on purpose.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "impact_qlbs/features.hpp"
#include "impact_qlbs/fqi.hpp"

namespace oracles {

// Cox-de Boor by the textbook recursion (exponential, fine for cubics).
// Half-open spans, with the last nonempty interval closed on the right.
inline double bspline_naive(const std::vector<double>& knots, int j, int degree, double s) {
  const double hi = knots.back();
  if (degree == 0) {
    const bool last = knots[j + 1] == hi && knots[j] < knots[j + 1];
    if (last) return (s >= knots[j] && s <= knots[j + 1]) ? 1.0 : 0.0;
    return (s >= knots[j] && s < knots[j + 1]) ? 1.0 : 0.0;
  }
  double left = 0.0, right = 0.0;
  const double d1 = knots[j + degree] - knots[j];
  if (d1 > 0) left = (s - knots[j]) / d1 * bspline_naive(knots, j, degree - 1, s);
  const double d2 = knots[j + degree + 1] - knots[j + 1];
  if (d2 > 0) right = (knots[j + degree + 1] - s) / d2 * bspline_naive(knots, j + 1, degree - 1, s);
  return left + right;
}

inline Eigen::VectorXd basis_naive(const impact_qlbs::KnotVector& kv, double s) {
  s = std::clamp(s, kv.span_lo(), kv.span_hi());
  Eigen::VectorXd phi(kv.n_basis);
  for (int j = 0; j < kv.n_basis; ++j) phi(j) = bspline_naive(kv.knots, j, kv.degree, s);
  return phi;
}

inline Eigen::VectorXd psi_naive(const impact_qlbs::KnotVector& kv, double s, double a) {
  const Eigen::VectorXd phi = basis_naive(kv, s);
  Eigen::VectorXd out(3 * kv.n_basis);
  out << phi, a * phi, (0.5 * a * a) * phi;
  return out;
}

// Backward pass with its own feature evaluation and a QR solve of the
// ridge-stacked system; returns the fitted values at every data point.
struct FqiOracleResult {
  std::vector<Eigen::VectorXd> fitted;   // per t, values at the data points
  std::vector<Eigen::VectorXd> weights;  // per t, flattened
};

inline FqiOracleResult fqi_oracle(const impact_qlbs::Dataset& data,
                                  const impact_qlbs::KnotVector& kv,
                                  const impact_qlbs::MarketParams& params,
                                  const impact_qlbs::FqiOptions& opt) {
  const int n = static_cast<int>(data.n_paths());
  const int steps = static_cast<int>(data.n_steps());
  const int dim = 3 * kv.n_basis;
  const double gamma = params.discount_step();

  const Eigen::VectorXd& pi = data.terminal_portfolio;
  const double var =
      (pi.array() - pi.mean()).square().sum() / static_cast<double>(pi.size());
  Eigen::VectorXd q_next = -pi.array() - opt.lambda * var;

  FqiOracleResult result;
  result.fitted.resize(steps);
  result.weights.resize(steps);
  for (int t = steps - 1; t >= 0; --t) {
    Eigen::MatrixXd stacked(n + dim, dim);
    Eigen::VectorXd target(n + dim);
    for (int k = 0; k < n; ++k) {
      stacked.row(k) = psi_naive(kv, data.states(k, t), data.actions(k, t)).transpose();
      target(k) = data.rewards(k, t) + gamma * q_next(k);
    }
    stacked.bottomRows(dim) = std::sqrt(opt.ridge) * Eigen::MatrixXd::Identity(dim, dim);
    target.tail(dim).setZero();
    const Eigen::VectorXd w = stacked.colPivHouseholderQr().solve(target);
    result.weights[t] = w;
    result.fitted[t] = stacked.topRows(n) * w;

    if (t > 0) {
      const double y_lo = target.head(n).minCoeff();
      const double y_hi = target.head(n).maxCoeff();
      for (int k = 0; k < n; ++k) {
        const Eigen::VectorXd phi = basis_naive(kv, data.states(k, t));
        const double u0 = w.segment(0, kv.n_basis).dot(phi);
        const double u1 = w.segment(kv.n_basis, kv.n_basis).dot(phi);
        const double u2 = w.segment(2 * kv.n_basis, kv.n_basis).dot(phi);
        double a;
        if (u2 != 0.0)
          a = std::clamp(-u1 / u2, opt.action_lo, opt.action_hi);
        else if (u1 > 0)
          a = opt.action_hi;
        else if (u1 < 0)
          a = opt.action_lo;
        else
          a = std::clamp(0.0, opt.action_lo, opt.action_hi);
        const double q = u0 + a * u1 + 0.5 * a * a * u2;
        q_next(k) = std::clamp(q, y_lo, y_hi);
      }
    }
  }
  return result;
}

// Argmax of the model's Q over a uniform action grid.
inline double grid_argmax(const impact_qlbs::FittedModel& model, int t, double s, int points) {
  double best_a = model.action_lo;
  double best_q = impact_qlbs::optimal_q(model, t, s, best_a);
  for (int i = 1; i < points; ++i) {
    const double a = model.action_lo +
                     (model.action_hi - model.action_lo) * i / static_cast<double>(points - 1);
    const double q = impact_qlbs::optimal_q(model, t, s, a);
    if (q > best_q) {
      best_q = q;
      best_a = a;
    }
  }
  return best_a;
}

// Synthetic dataset for solver cross-checks.
inline impact_qlbs::Dataset random_dataset(int n, int steps, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> us(-0.1, 0.1);
  std::uniform_real_distribution<double> ua(-1.0, 1.0);
  std::normal_distribution<double> ur(0.0, 0.1);
  std::uniform_real_distribution<double> upi(0.0, 1.0);

  impact_qlbs::Dataset data;
  data.states.resize(n, steps + 1);
  data.actions.resize(n, steps + 1);
  data.rewards.resize(n, steps + 1);
  data.beta = Eigen::MatrixXd::Constant(n, steps + 1, 0.5);
  data.thinness = Eigen::MatrixXd::Constant(n, steps + 1, 0.02);
  data.terminal_portfolio.resize(n);
  for (int k = 0; k < n; ++k) {
    for (int t = 0; t <= steps; ++t) {
      data.states(k, t) = us(eng);
      data.actions(k, t) = t == steps ? 0.0 : ua(eng);
      data.rewards(k, t) = ur(eng);
    }
    data.terminal_portfolio(k) = upi(eng);
  }
  return data;
}

}  // namespace oracles

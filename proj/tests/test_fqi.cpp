#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "impact_qlbs/fqi.hpp"
#include "oracles.hpp"

using namespace impact_qlbs;

namespace {

MarketParams tiny_params(int n_paths, int n_steps) {
  MarketParams p;
  p.n_paths = n_paths;
  p.n_steps = n_steps;
  p.tau = 0.01 * n_steps;  // keep dt = 0.01
  return p;
}

// constant-rows weight matrix: partition of unity turns rows into (u0,u1,u2)
FittedModel constant_model(double u0, double u1, double u2, double lo, double hi) {
  FittedModel model;
  model.knots = make_knots(-0.1, 0.1, 12, 3);
  model.action_lo = lo;
  model.action_hi = hi;
  Eigen::MatrixXd w(3, 12);
  w.row(0).setConstant(u0);
  w.row(1).setConstant(u1);
  w.row(2).setConstant(u2);
  model.weights = {w};
  return model;
}

}  // namespace

TEST_CASE("assemble_dataset shapes and error paths") {
  const int n = 5, T = 4;
  StateMatrix states{Eigen::MatrixXd::Zero(n, T + 1)};
  StrategyMatrix strategy{Eigen::MatrixXd::Zero(n, T + 1), StrategyKind::postulated};
  RewardMatrix rewards{Eigen::MatrixXd::Zero(n, T + 1)};
  ImpactSeries impact{Eigen::MatrixXd::Constant(n, T + 1, 0.5),
                      Eigen::MatrixXd::Constant(n, T + 1, 0.02)};
  PortfolioMatrix portfolio{Eigen::MatrixXd::Zero(n, T + 1)};

  const Dataset data = assemble_dataset(states, strategy, rewards, impact, portfolio);
  CHECK(data.n_paths() == n);
  CHECK(data.n_steps() == T);
  CHECK(data.transitions() == n * T);
  CHECK(data.terminal_portfolio.size() == n);

  StateMatrix wrong{Eigen::MatrixXd::Zero(n, T)};
  CHECK_THROWS_AS(assemble_dataset(wrong, strategy, rewards, impact, portfolio),
                  std::invalid_argument);

  Dataset sized = data;
  CHECK(sized.transitions() == 20);
  const Dataset minimal = [&] {
    StateMatrix s2{Eigen::MatrixXd::Zero(1, 3)};
    StrategyMatrix u2{Eigen::MatrixXd::Zero(1, 3), StrategyKind::postulated};
    RewardMatrix r2{Eigen::MatrixXd::Zero(1, 3)};
    ImpactSeries i2{Eigen::MatrixXd::Constant(1, 3, 0.5), Eigen::MatrixXd::Constant(1, 3, 0.02)};
    PortfolioMatrix p2{Eigen::MatrixXd::Zero(1, 3)};
    return assemble_dataset(s2, u2, r2, i2, p2);
  }();
  CHECK(minimal.transitions() == 2);
}

TEST_CASE("dataset JSON round trip is bit exact") {
  const Dataset data = oracles::random_dataset(12, 4, 99);
  const auto file = std::filesystem::temp_directory_path() / "impact_qlbs_dataset_test.json";
  save_dataset(data, file);
  const Dataset back = load_dataset(file);
  CHECK((back.states.array() == data.states.array()).all());
  CHECK((back.actions.array() == data.actions.array()).all());
  CHECK((back.rewards.array() == data.rewards.array()).all());
  CHECK((back.beta.array() == data.beta.array()).all());
  CHECK((back.thinness.array() == data.thinness.array()).all());
  CHECK((back.terminal_portfolio.array() == data.terminal_portfolio.array()).all());
  std::filesystem::remove(file);
}

TEST_CASE("fit satisfies the normal equations it assembled") {
  const Dataset data = oracles::random_dataset(80, 5, 3);
  const KnotVector knots = build_knots(StateMatrix{data.states}, 8, 3);
  const MarketParams params = tiny_params(80, 5);
  const FqiOptions opt{0.001, 1e-3, -5.0, 5.0};
  const FitResult fitted = fit(data, knots, params, opt);

  // rebuild the t = T-1 system directly; its targets need no fitted model
  const int dim = 3 * knots.n_basis;
  const double gamma = params.discount_step();
  const double var = population_variance(data.terminal_portfolio);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd moment = Eigen::VectorXd::Zero(dim);
  double zero_model_sse = 0.0;
  for (int k = 0; k < 80; ++k) {
    const Eigen::VectorXd f = psi(knots, data.states(k, 4), data.actions(k, 4));
    const double y = data.rewards(k, 4) +
                     gamma * (-data.terminal_portfolio(k) - opt.lambda * var);
    gram += f * f.transpose();
    moment += f * y;
    zero_model_sse += y * y;
  }
  gram.diagonal().array() += opt.ridge;

  Eigen::VectorXd w(dim);
  for (int b = 0; b < 3; ++b)
    w.segment(b * knots.n_basis, knots.n_basis) = fitted.model.weights[4].row(b);
  CHECK((gram * w - moment).norm() <= 1e-8 * moment.norm());

  // in-sample residual no worse than the zero-weight model
  double sse = 0.0;
  for (int k = 0; k < 80; ++k) {
    const Eigen::VectorXd f = psi(knots, data.states(k, 4), data.actions(k, 4));
    const double y = data.rewards(k, 4) +
                     gamma * (-data.terminal_portfolio(k) - opt.lambda * var);
    const double e = y - f.dot(w);
    sse += e * e;
  }
  CHECK(sse <= zero_model_sse);
}

TEST_CASE("fit on a collapsed dataset reproduces discounted terminal values") {
  // zero rewards everywhere and a constant terminal portfolio: every target
  // collapses to the discounted terminal value
  const int n = 60, T = 4;
  Dataset data = oracles::random_dataset(n, T, 5);
  data.rewards.setZero();
  data.terminal_portfolio.setConstant(0.8);

  const KnotVector knots = build_knots(StateMatrix{data.states}, 6, 3);
  const MarketParams params = tiny_params(n, T);
  const FqiOptions opt{0.0, 1e-10, -5.0, 5.0};
  const FitResult fitted = fit(data, knots, params, opt);

  const double gamma = params.discount_step();
  for (int t = 0; t < T; ++t) {
    const double expected = -0.8 * std::pow(gamma, T - t);
    for (int k = 0; k < n; ++k) {
      const double q = optimal_q(fitted.model, t, data.states(k, t), data.actions(k, t));
      CHECK(q == doctest::Approx(expected).epsilon(1e-6));
    }
  }
}

TEST_CASE("fit matches an independent dense least-squares oracle") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Dataset data = oracles::random_dataset(50, 2, seed);
    const KnotVector knots = build_knots(StateMatrix{data.states}, 4, 3);
    const MarketParams params = tiny_params(50, 2);
    const FqiOptions opt{0.001, 1e-3, -5.0, 5.0};

    const FitResult fitted = fit(data, knots, params, opt);
    const oracles::FqiOracleResult oracle = oracles::fqi_oracle(data, knots, params, opt);

    double worst = 0.0;
    for (int t = 0; t < 2; ++t)
      for (int k = 0; k < 50; ++k) {
        const double q = optimal_q(fitted.model, t, data.states(k, t), data.actions(k, t));
        worst = std::max(worst, std::abs(q - oracle.fitted[t](k)));
      }
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("optimal_action branch logic") {
  SUBCASE("vertex of a concave quadratic") {
    const FittedModel m = constant_model(0.0, 0.5, -2.0, -5.0, 5.0);
    CHECK(optimal_action(m, 0, 0.0) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(choose_action(m, 0, 0.0).concave);
  }
  SUBCASE("symmetric concave quadratic centers at zero") {
    const FittedModel m = constant_model(1.0, 0.0, -1.0, -5.0, 5.0);
    CHECK(optimal_action(m, 0, 0.02) == 0.0);
  }
  SUBCASE("vertex outside the bounds is clipped") {
    const FittedModel m = constant_model(0.0, 4.0, -0.5, -3.0, 3.0);
    CHECK(optimal_action(m, 0, 0.0) == 3.0);
  }
  SUBCASE("convex quadratic picks the better endpoint") {
    const FittedModel m = constant_model(0.3, -0.2, 1.0, -3.0, 3.0);
    const ActionChoice c = choose_action(m, 0, 0.0);
    CHECK_FALSE(c.concave);
    CHECK(c.action == oracles::grid_argmax(m, 0, 0.0, 601));
  }
  SUBCASE("identically flat quadratic holds no position") {
    const FittedModel m = constant_model(0.0, 0.0, 0.0, -5.0, 5.0);
    CHECK(optimal_action(m, 0, 0.0) == 0.0);
  }
}

TEST_CASE("optimal_action matches a grid argmax on fitted models") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Dataset data = oracles::random_dataset(50, 2, 100 + seed);
    const KnotVector knots = build_knots(StateMatrix{data.states}, 4, 3);
    const MarketParams params = tiny_params(50, 2);
    const FitResult fitted = fit(data, knots, params, FqiOptions{0.001, 1e-3, -5.0, 5.0});

    const double cell = 10.0 / 600.0;
    for (int k = 0; k < 50; k += 7)
      for (int t = 0; t < 2; ++t) {
        const double s = data.states(k, t);
        const double analytic = optimal_action(fitted.model, t, s);
        const double grid = oracles::grid_argmax(fitted.model, t, s, 601);
        CHECK(std::abs(analytic - grid) <= cell + 1e-12);
      }
  }
}

TEST_CASE("optimal_q") {
  const FittedModel m = constant_model(0.7, -0.3, -1.2, -5.0, 5.0);
  CHECK(optimal_q(m, 0, 0.0, 0.0) == doctest::Approx(0.7).epsilon(1e-14));

  // representation identity against the flattened inner product
  std::mt19937_64 eng(23);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  Eigen::VectorXd flat(36);
  for (int b = 0; b < 3; ++b)
    flat.segment(12 * b, 12) = m.weights[0].row(b);
  for (int i = 0; i < 100; ++i) {
    const double s = 0.1 * un(eng), a = 4.0 * un(eng);
    CHECK(std::abs(optimal_q(m, 0, s, a) - flat.dot(psi(m.knots, s, a))) <= 1e-12);
  }

  // vertex dominates random actions for a concave fit
  const double best = optimal_q(m, 0, 0.0, optimal_action(m, 0, 0.0));
  for (int i = 0; i < 100; ++i) CHECK(best >= optimal_q(m, 0, 0.0, 5.0 * un(eng)) - 1e-12);
}

TEST_CASE("qlbs_price") {
  MarketParams p;
  std::mt19937_64 eng(31);
  std::uniform_real_distribution<double> upi(0.0, 1.0);
  Eigen::VectorXd pi(500);
  for (int k = 0; k < 500; ++k) pi(k) = upi(eng);

  SUBCASE("lambda = 0 is the plain discounted mean") {
    CHECK(qlbs_price(pi, p, 0.0) ==
          doctest::Approx(p.discount_total() * pi.mean()).epsilon(1e-14));
  }
  SUBCASE("variance premium enters additively") {
    const double lambda = 0.001;
    const double base = qlbs_price(pi, p, 0.0);
    const double priced = qlbs_price(pi, p, lambda);
    const double premium = p.discount_total() * lambda * population_variance(pi);
    CHECK(std::abs(priced - base - premium) <= 1e-12 * std::max(1.0, std::abs(priced)));
    CHECK(priced >= base);
  }
}

TEST_CASE("implied_rollout neutrality and terminal column") {
  MarketParams p;
  p.n_paths = 30;
  const PathMatrix unaffected = simulate_unaffected(p, 51);
  PathMatrix quoted{unaffected.values, PathKind::quoted};
  const StateMatrix states = state_variables(quoted, p.f_prev);

  FittedModel zero_model;
  zero_model.knots = build_knots(states, 12, 3);
  zero_model.gamma = p.discount_step();
  zero_model.weights.assign(30, Eigen::MatrixXd::Zero(3, 12));

  SUBCASE("zero model holds no positions, so the rates pass through") {
    ImpactSeries impact{Eigen::MatrixXd::Constant(30, 31, 0.5),
                        Eigen::MatrixXd::Constant(30, 31, 0.02)};
    const Rollout roll = implied_rollout(zero_model, unaffected, impact, states);
    CHECK((roll.optimal.positions.array() == 0.0).all());
    CHECK(roll.optimal.kind == StrategyKind::optimal);
    CHECK(roll.implied.kind == PathKind::implied);
    CHECK((roll.implied.values.array() == unaffected.values.array()).all());
  }

  SUBCASE("beta = 0 neutralizes whatever the model does") {
    FittedModel m = zero_model;
    for (auto& w : m.weights) {
      w.row(1).setConstant(0.4);
      w.row(2).setConstant(-1.0);
    }
    ImpactSeries impact{Eigen::MatrixXd::Zero(30, 31),
                        Eigen::MatrixXd::Constant(30, 31, 0.02)};
    const Rollout roll = implied_rollout(m, unaffected, impact, states);
    CHECK((roll.optimal.positions.leftCols(30).array() - 0.4).abs().maxCoeff() <= 1e-12);
    CHECK((roll.optimal.positions.col(30).array() == 0.0).all());
    CHECK((roll.implied.values.array() == unaffected.values.array()).all());
  }
}

TEST_CASE("fit is deterministic and backward-local") {
  Dataset data = oracles::random_dataset(60, 6, 77);
  const KnotVector knots = build_knots(StateMatrix{data.states}, 6, 3);
  const MarketParams params = tiny_params(60, 6);
  const FqiOptions opt{0.001, 1e-3, -5.0, 5.0};

  const FitResult a = fit(data, knots, params, opt);
  const FitResult b = fit(data, knots, params, opt);
  for (int t = 0; t < 6; ++t)
    CHECK((a.model.weights[t].array() == b.model.weights[t].array()).all());

  // perturbing rewards at t = 2 must not touch any later weight matrix
  Dataset perturbed = data;
  perturbed.rewards(7, 2) += 0.25;
  const FitResult c = fit(perturbed, knots, params, opt);
  for (int t = 3; t < 6; ++t)
    CHECK((a.model.weights[t].array() == c.model.weights[t].array()).all());
  CHECK_FALSE((a.model.weights[2].array() == c.model.weights[2].array()).all());
}

TEST_CASE("model JSON round trip preserves evaluations") {
  const Dataset data = oracles::random_dataset(50, 3, 41);
  const KnotVector knots = build_knots(StateMatrix{data.states}, 5, 3);
  const MarketParams params = tiny_params(50, 3);
  const FitResult fitted = fit(data, knots, params, FqiOptions{0.001, 1e-3, -4.0, 4.0});

  const auto file = std::filesystem::temp_directory_path() / "impact_qlbs_model_test.json";
  save_model(fitted.model, file);
  const FittedModel back = load_model(file);
  std::filesystem::remove(file);

  CHECK(back.gamma == fitted.model.gamma);
  CHECK(back.lambda == fitted.model.lambda);
  CHECK(back.ridge == fitted.model.ridge);
  CHECK(back.action_lo == fitted.model.action_lo);
  CHECK(back.action_hi == fitted.model.action_hi);
  for (int t = 0; t < 3; ++t)
    for (int k = 0; k < 50; k += 11) {
      const double s = data.states(k, t);
      const double a = data.actions(k, t);
      CHECK(optimal_q(back, t, s, a) == optimal_q(fitted.model, t, s, a));
      CHECK(optimal_action(back, t, s) == optimal_action(fitted.model, t, s));
    }
}

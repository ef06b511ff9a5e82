#include "impact_qlbs/fqi.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace impact_qlbs {

void Dataset::validate() const {
  const Eigen::Index n = states.rows();
  const Eigen::Index c = states.cols();
  auto same = [&](const Eigen::MatrixXd& m) { return m.rows() == n && m.cols() == c; };
  if (!same(actions) || !same(rewards) || !same(beta) || !same(thinness) ||
      terminal_portfolio.size() != n)
    throw std::invalid_argument("dataset: shapes disagree");
  if (!states.allFinite() || !actions.allFinite() || !rewards.allFinite() ||
      !beta.allFinite() || !thinness.allFinite() || !terminal_portfolio.allFinite())
    throw ModelError("dataset: non-finite entries");
}

Dataset assemble_dataset(const StateMatrix& states, const StrategyMatrix& strategy,
                         const RewardMatrix& rewards, const ImpactSeries& impact,
                         const PortfolioMatrix& portfolio) {
  Dataset data{states.values, strategy.positions, rewards.values, impact.beta,
               impact.thinness,
               portfolio.values.col(portfolio.values.cols() - 1)};
  data.validate();
  return data;
}

namespace {

using json = nlohmann::ordered_json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    json row = json::array();
    for (Eigen::Index t = 0; t < m.cols(); ++t) row.push_back(m(k, t));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) return Eigen::MatrixXd(0, 0);
  const Eigen::Index c = static_cast<Eigen::Index>(rows.at(0).size());
  Eigen::MatrixXd m(n, c);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& row = rows.at(static_cast<std::size_t>(k));
    if (static_cast<Eigen::Index>(row.size()) != c)
      throw ConfigError("matrix rows have inconsistent lengths");
    for (Eigen::Index t = 0; t < c; ++t) m(k, t) = row.at(static_cast<std::size_t>(t)).get<double>();
  }
  return m;
}

void write_json_file(const json& j, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot open for writing: " + file.string());
  out << j.dump(2) << '\n';
  if (!out) throw ConfigError("write failed: " + file.string());
}

json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open: " + file.string());
  json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  return j;
}

}  // namespace

void save_dataset(const Dataset& data, const std::filesystem::path& file) {
  json j;
  j["schema_version"] = 1;
  j["states"] = matrix_to_json(data.states);
  j["actions"] = matrix_to_json(data.actions);
  j["rewards"] = matrix_to_json(data.rewards);
  j["beta"] = matrix_to_json(data.beta);
  j["thinness"] = matrix_to_json(data.thinness);
  j["terminal_portfolio"] = matrix_to_json(data.terminal_portfolio);
  write_json_file(j, file);
}

Dataset load_dataset(const std::filesystem::path& file) {
  const json j = read_json_file(file);
  Dataset data;
  data.states = matrix_from_json(j.at("states"));
  data.actions = matrix_from_json(j.at("actions"));
  data.rewards = matrix_from_json(j.at("rewards"));
  data.beta = matrix_from_json(j.at("beta"));
  data.thinness = matrix_from_json(j.at("thinness"));
  data.terminal_portfolio = matrix_from_json(j.at("terminal_portfolio"));
  data.validate();
  return data;
}

namespace {

struct Quadratic {
  double u0, u1, u2;
  double at(double a) const { return u0 + a * u1 + 0.5 * a * a * u2; }
};

Quadratic rows_at(const Eigen::MatrixXd& w, const KnotVector& knots, double s) {
  const Eigen::VectorXd phi = eval_basis(knots, s);
  return Quadratic{w.row(0).dot(phi), w.row(1).dot(phi), w.row(2).dot(phi)};
}

ActionChoice choose_from(const Quadratic& q, double lo, double hi) {
  if (q.u2 < 0) {
    const double vertex = -q.u1 / q.u2;
    return ActionChoice{std::clamp(vertex, lo, hi), true};
  }
  // Flat or convex in a: the maximum sits on a bound. An exact tie means the
  // fit carries no preference; take the flat zero position.
  const double q_lo = q.at(lo);
  const double q_hi = q.at(hi);
  if (q_lo == q_hi) return ActionChoice{std::clamp(0.0, lo, hi), false};
  return ActionChoice{q_lo > q_hi ? lo : hi, false};
}

// Action used inside the backward targets: the vertex -u1/u2 clipped into the
// bounds, never a bound endpoint chosen for a convex fit. Evaluating targets
// at the far endpoints multiplies coefficient noise by a_max^2/2 and makes
// the backward recursion diverge; the clipped vertex keeps it contained.
double target_action(const Quadratic& q, double lo, double hi, std::size_t& violations) {
  if (q.u2 < 0) return std::clamp(-q.u1 / q.u2, lo, hi);
  ++violations;
  if (q.u2 > 0) return std::clamp(-q.u1 / q.u2, lo, hi);
  if (q.u1 > 0) return hi;  // linear in a
  if (q.u1 < 0) return lo;
  return std::clamp(0.0, lo, hi);
}

}  // namespace

FitResult fit(const Dataset& data, const KnotVector& knots, const MarketParams& params,
              const FqiOptions& options) {
  data.validate();
  if (!(options.action_lo < options.action_hi))
    throw ConfigError("fit: action bounds must satisfy lo < hi");
  if (options.ridge < 0) throw ConfigError("fit: ridge must be >= 0");

  const Eigen::Index n = data.n_paths();
  const int steps = static_cast<int>(data.n_steps());
  const int dim = 3 * knots.n_basis;
  if (n < 3 * knots.n_basis)
    std::fprintf(stderr, "fit: %lld paths for %d coefficients; expect a weak fit\n",
                 static_cast<long long>(n), dim);

  FittedModel model;
  model.knots = knots;
  model.gamma = params.discount_step();
  model.lambda = options.lambda;
  model.ridge = options.ridge;
  model.action_lo = options.action_lo;
  model.action_hi = options.action_hi;
  model.weights.resize(static_cast<std::size_t>(steps));

  std::size_t violations = 0;

  // Q*_T per path from the terminal condition.
  const double terminal_var = population_variance(data.terminal_portfolio);
  Eigen::VectorXd q_next =
      -data.terminal_portfolio.array() - options.lambda * terminal_var;

  Eigen::MatrixXd gram(dim, dim);
  Eigen::VectorXd moment(dim);
  Eigen::VectorXd y(n);
  for (int t = steps - 1; t >= 0; --t) {
    gram.setZero();
    moment.setZero();
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::VectorXd features = psi(knots, data.states(k, t), data.actions(k, t));
      y(k) = data.rewards(k, t) + model.gamma * q_next(k);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(features);
      moment.noalias() += features * y(k);
    }
    Eigen::MatrixXd system = gram.selfadjointView<Eigen::Lower>();
    system.diagonal().array() += options.ridge;

    Eigen::LDLT<Eigen::MatrixXd> solver(system);
    if (solver.info() != Eigen::Success) throw SingularSystem(t);
    const Eigen::VectorXd w = solver.solve(moment);
    if (!w.allFinite()) throw SingularSystem(t);

    Eigen::MatrixXd weight(3, knots.n_basis);
    for (int b = 0; b < 3; ++b) weight.row(b) = w.segment(b * knots.n_basis, knots.n_basis);
    model.weights[static_cast<std::size_t>(t)] = std::move(weight);

    if (t > 0) {
      // Next-step values for the t-1 targets. The quadratic extrapolates in
      // both s and a, so its value is clamped into the range of the targets
      // it was fitted to; without this the noise in sparsely observed basis
      // regions compounds geometrically through the backward pass.
      const double y_lo = y.minCoeff();
      const double y_hi = y.maxCoeff();
      const Eigen::MatrixXd& wt = model.weights[static_cast<std::size_t>(t)];
      for (Eigen::Index k = 0; k < n; ++k) {
        const Quadratic q = rows_at(wt, knots, data.states(k, t));
        const double a = target_action(q, options.action_lo, options.action_hi, violations);
        q_next(k) = std::clamp(q.at(a), y_lo, y_hi);
      }
    }
  }
  return FitResult{std::move(model), violations};
}

UWRows uw_rows(const FittedModel& model, int t, double s) {
  const Quadratic q = rows_at(model.weights.at(static_cast<std::size_t>(t)), model.knots, s);
  return UWRows{q.u0, q.u1, q.u2};
}

ActionChoice choose_action(const FittedModel& model, int t, double s) {
  const Quadratic q = rows_at(model.weights.at(static_cast<std::size_t>(t)), model.knots, s);
  return choose_from(q, model.action_lo, model.action_hi);
}

double optimal_action(const FittedModel& model, int t, double s) {
  return choose_action(model, t, s).action;
}

double optimal_q(const FittedModel& model, int t, double s, double a) {
  const Quadratic q = rows_at(model.weights.at(static_cast<std::size_t>(t)), model.knots, s);
  return q.at(a);
}

double qlbs_price(const Eigen::VectorXd& terminal_portfolio, const MarketParams& params,
                  double lambda) {
  const double premium = lambda * population_variance(terminal_portfolio);
  return params.discount_total() * (terminal_portfolio.mean() + premium);
}

Rollout implied_rollout(const FittedModel& model, const PathMatrix& unaffected,
                        const ImpactSeries& impact, const StateMatrix& states,
                        NonPositivePolicy policy) {
  const Eigen::Index n = unaffected.values.rows();
  const Eigen::Index cols = unaffected.values.cols();
  if (states.values.rows() != n || states.values.cols() != cols)
    throw std::invalid_argument("implied_rollout: shapes disagree");
  if (model.n_steps() != static_cast<int>(cols - 1))
    throw std::invalid_argument("implied_rollout: model horizon mismatch");

  std::size_t violations = 0;
  Eigen::MatrixXd actions(n, cols);
  for (int t = 0; t + 1 < static_cast<int>(cols); ++t) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const ActionChoice choice = choose_action(model, t, states.values(k, t));
      if (!choice.concave) ++violations;
      actions(k, t) = choice.action;
    }
  }
  actions.col(cols - 1).setZero();

  StrategyMatrix optimal{std::move(actions), StrategyKind::optimal};
  Propagation prop = propagate_impact(unaffected, optimal, impact, policy);
  return Rollout{std::move(prop.paths), std::move(optimal), std::move(prop.kept),
                 prop.dropped, violations};
}

void save_model(const FittedModel& model, const std::filesystem::path& file) {
  json j;
  j["schema_version"] = 1;
  j["gamma"] = model.gamma;
  j["lambda"] = model.lambda;
  j["ridge"] = model.ridge;
  j["action_bounds"] = {model.action_lo, model.action_hi};
  j["knots"] = {{"degree", model.knots.degree},
                {"n_basis", model.knots.n_basis},
                {"values", model.knots.knots}};
  json weights = json::array();
  for (const auto& w : model.weights) weights.push_back(matrix_to_json(w));
  j["weights"] = std::move(weights);
  write_json_file(j, file);
}

FittedModel load_model(const std::filesystem::path& file) {
  const json j = read_json_file(file);
  if (j.at("schema_version").get<int>() != 1)
    throw ConfigError(file.string() + ": unsupported schema_version");
  FittedModel model;
  model.gamma = j.at("gamma").get<double>();
  model.lambda = j.at("lambda").get<double>();
  model.ridge = j.at("ridge").get<double>();
  model.action_lo = j.at("action_bounds").at(0).get<double>();
  model.action_hi = j.at("action_bounds").at(1).get<double>();
  const auto& knots = j.at("knots");
  model.knots.degree = knots.at("degree").get<int>();
  model.knots.n_basis = knots.at("n_basis").get<int>();
  model.knots.knots = knots.at("values").get<std::vector<double>>();
  for (const auto& w : j.at("weights")) model.weights.push_back(matrix_from_json(w));
  return model;
}

}  // namespace impact_qlbs

#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "impact_qlbs/features.hpp"
#include "impact_qlbs/hedging.hpp"
#include "impact_qlbs/market.hpp"

namespace impact_qlbs {

/// One batch of transitions. Column t of each array belongs to the tuple
/// (S_t, S_{t+1}, a_t, R_t, beta_t, M_t); the terminal column carries S_T,
/// and terminal_portfolio holds Pi_T per path. The quoted rates themselves
/// are not stored; they enter only through the states.
struct Dataset {
  Eigen::MatrixXd states;    // n_paths x (n_steps + 1)
  Eigen::MatrixXd actions;   // final column zero
  Eigen::MatrixXd rewards;
  Eigen::MatrixXd beta;
  Eigen::MatrixXd thinness;
  Eigen::VectorXd terminal_portfolio;  // n_paths

  Eigen::Index n_paths() const { return states.rows(); }
  Eigen::Index n_steps() const { return states.cols() - 1; }
  Eigen::Index transitions() const { return n_paths() * n_steps(); }
  void validate() const;
};

Dataset assemble_dataset(const StateMatrix& states, const StrategyMatrix& strategy,
                         const RewardMatrix& rewards, const ImpactSeries& impact,
                         const PortfolioMatrix& portfolio);

void save_dataset(const Dataset& data, const std::filesystem::path& file);
Dataset load_dataset(const std::filesystem::path& file);

struct FqiOptions {
  double lambda = 0.001;
  double ridge = 1e-3;
  double action_lo = -5.0;
  double action_hi = 5.0;
};

/// Backward-fitted Q expansion: one 3 x n_basis weight matrix per time step,
/// Q_t(s, a) = u0 + a u1 + (a^2/2) u2 with (u0, u1, u2) = W_t Phi(s).
struct FittedModel {
  std::vector<Eigen::MatrixXd> weights;  // n_steps matrices, 3 x n_basis
  KnotVector knots;
  double gamma = 1.0;  // e^{-r_d dt}
  double lambda = 0.0;
  double ridge = 0.0;
  double action_lo = -5.0;
  double action_hi = 5.0;

  int n_steps() const { return static_cast<int>(weights.size()); }
};

struct FitResult {
  FittedModel model;
  std::size_t concavity_violations = 0;
};

/// Backward pass over t = T-1 .. 0. Targets are R_t + gamma Q*_{t+1}, with
/// Q*_T = -Pi_T - lambda Var[Pi_T]; below T the next value is the fitted
/// quadratic at its vertex action -u1/u2 clipped into the action bounds, and
/// the value itself is clamped into the range of the targets that quadratic
/// was fitted to, which keeps the recursion from amplifying edge noise. Each
/// step solves the ridge-regularized normal equations accumulated over paths
/// in fixed order.
FitResult fit(const Dataset& data, const KnotVector& knots, const MarketParams& params,
              const FqiOptions& options);

/// Rows of U_W(t, s) = W_t Phi(s).
struct UWRows {
  double u0 = 0;
  double u1 = 0;
  double u2 = 0;
};
UWRows uw_rows(const FittedModel& model, int t, double s);

struct ActionChoice {
  double action = 0;
  bool concave = true;  // false marks a concavity violation (u2 >= 0)
};

/// Argmax of the fitted quadratic over the action bounds: the vertex
/// -u1/u2 clipped when concave, otherwise the bound endpoint with the
/// larger Q (exact ties return a flat zero position).
ActionChoice choose_action(const FittedModel& model, int t, double s);
double optimal_action(const FittedModel& model, int t, double s);

double optimal_q(const FittedModel& model, int t, double s, double a);

/// e^{-r_d tau} (mean Pi_T + lambda Var[Pi_T]): the discounted average of
/// -Q_T over paths.
double qlbs_price(const Eigen::VectorXd& terminal_portfolio, const MarketParams& params,
                  double lambda);

struct Rollout {
  PathMatrix implied;
  StrategyMatrix optimal;
  std::vector<Eigen::Index> kept;  // rows of `implied` relative to the inputs
  std::size_t dropped = 0;
  std::size_t concavity_violations = 0;
};

/// Evaluates the optimal actions at the training states (a*_T = 0) and runs
/// them through the impact dynamics to produce the implied process.
Rollout implied_rollout(const FittedModel& model, const PathMatrix& unaffected,
                        const ImpactSeries& impact, const StateMatrix& states,
                        NonPositivePolicy policy = NonPositivePolicy::error);

void save_model(const FittedModel& model, const std::filesystem::path& file);
FittedModel load_model(const std::filesystem::path& file);

}  // namespace impact_qlbs

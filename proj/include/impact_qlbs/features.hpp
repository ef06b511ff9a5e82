#pragma once

#include <Eigen/Core>
#include <vector>

#include "impact_qlbs/market.hpp"

namespace impact_qlbs {

/// Clamped B-spline knot vector: n_basis + degree + 1 nondecreasing values,
/// the end knots repeated degree + 1 times, interior knots uniform.
struct KnotVector {
  std::vector<double> knots;
  int degree = 3;
  int n_basis = 12;

  double span_lo() const { return knots.front(); }
  double span_hi() const { return knots.back(); }
};

/// Clamped uniform knots over [lo, hi].
KnotVector make_knots(double lo, double hi, int n_basis, int degree);

/// Knot span from the smallest to the greatest state observed anywhere in
/// the data; a degenerate span is padded by 1e-6 on both sides.
KnotVector build_knots(const StateMatrix& states, int n_basis = 12, int degree = 3);

/// All n_basis B-spline values at s via the Cox-de Boor recursion. s is
/// clamped to the knot span first, so evaluation never extrapolates.
Eigen::VectorXd eval_basis(const KnotVector& knots, double s);

/// Joint state-action feature vector of length 3 n_basis, laid out in
/// blocks [Phi, a Phi, (a^2/2) Phi]; equals vec of the outer product of
/// (1, a, a^2/2) with Phi(s) flattened block-by-block.
Eigen::VectorXd psi(const KnotVector& knots, double s, double a);

}  // namespace impact_qlbs

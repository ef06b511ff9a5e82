#include "impact_qlbs/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "impact_qlbs/errors.hpp"

namespace impact_qlbs {

KnotVector make_knots(double lo, double hi, int n_basis, int degree) {
  if (degree < 1) throw std::invalid_argument("make_knots: degree must be >= 1");
  if (n_basis <= degree) throw std::invalid_argument("make_knots: n_basis must exceed degree");
  if (!(lo < hi)) throw std::invalid_argument("make_knots: empty span");

  const int n_knots = n_basis + degree + 1;
  const int n_intervals = n_basis - degree;
  const double h = (hi - lo) / n_intervals;

  std::vector<double> knots(static_cast<std::size_t>(n_knots));
  for (int i = 0; i <= degree; ++i) knots[static_cast<std::size_t>(i)] = lo;
  for (int i = 1; i < n_intervals; ++i)
    knots[static_cast<std::size_t>(degree + i)] = lo + i * h;
  for (int i = n_basis; i < n_knots; ++i) knots[static_cast<std::size_t>(i)] = hi;
  return KnotVector{std::move(knots), degree, n_basis};
}

KnotVector build_knots(const StateMatrix& states, int n_basis, int degree) {
  if (states.values.size() == 0) throw std::invalid_argument("build_knots: empty states");
  if (!states.values.allFinite()) throw ModelError("build_knots: non-finite state values");
  double lo = states.values.minCoeff();
  double hi = states.values.maxCoeff();
  if (lo == hi) {  // degenerate data: pad to a usable span
    lo -= 1e-6;
    hi += 1e-6;
  }
  return make_knots(lo, hi, n_basis, degree);
}

namespace {

int find_span(const KnotVector& kv, double s) {
  const auto& knots = kv.knots;
  const int p = kv.degree;
  const int n = kv.n_basis;
  if (s >= knots[static_cast<std::size_t>(n)]) return n - 1;
  if (s <= knots[static_cast<std::size_t>(p)]) return p;
  int lo = p, hi = n;
  int mid = (lo + hi) / 2;
  while (s < knots[static_cast<std::size_t>(mid)] ||
         s >= knots[static_cast<std::size_t>(mid + 1)]) {
    if (s < knots[static_cast<std::size_t>(mid)])
      hi = mid;
    else
      lo = mid;
    mid = (lo + hi) / 2;
  }
  return mid;
}

}  // namespace

Eigen::VectorXd eval_basis(const KnotVector& kv, double s) {
  const auto& knots = kv.knots;
  const int p = kv.degree;
  s = std::clamp(s, kv.span_lo(), kv.span_hi());

  const int span = find_span(kv, s);

  // Cox-de Boor: the degree+1 basis values that are nonzero on this span.
  std::vector<double> left(static_cast<std::size_t>(p) + 1);
  std::vector<double> right(static_cast<std::size_t>(p) + 1);
  std::vector<double> local(static_cast<std::size_t>(p) + 1);
  local[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[static_cast<std::size_t>(j)] = s - knots[static_cast<std::size_t>(span + 1 - j)];
    right[static_cast<std::size_t>(j)] = knots[static_cast<std::size_t>(span + j)] - s;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = local[static_cast<std::size_t>(r)] /
                          (right[static_cast<std::size_t>(r + 1)] +
                           left[static_cast<std::size_t>(j - r)]);
      local[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
      saved = left[static_cast<std::size_t>(j - r)] * temp;
    }
    local[static_cast<std::size_t>(j)] = saved;
  }

  Eigen::VectorXd phi = Eigen::VectorXd::Zero(kv.n_basis);
  for (int j = 0; j <= p; ++j) phi(span - p + j) = local[static_cast<std::size_t>(j)];
  return phi;
}

Eigen::VectorXd psi(const KnotVector& kv, double s, double a) {
  const Eigen::VectorXd phi = eval_basis(kv, s);
  const int m = kv.n_basis;
  Eigen::VectorXd out(3 * m);
  out.segment(0, m) = phi;
  out.segment(m, m) = a * phi;
  out.segment(2 * m, m) = (0.5 * a * a) * phi;
  return out;
}

}  // namespace impact_qlbs

#pragma once

// Dual coordinate descent for   min 1/2 a'Ha + q'a   s.t. 0 <= a <= u,
// where u may hold +inf entries.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "odm/data.hpp"
#include "odm/error.hpp"

namespace odm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct BoxQpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd q;
  Eigen::VectorXd u;  // upper bounds, > 0, may be +inf

  Eigen::Index size() const noexcept { return q.size(); }

  void validate() const {
    const auto n = q.size();
    if (H.rows() != n || H.cols() != n || u.size() != n) throw InvalidArgument("box QP dimensions disagree");
    if (!H.allFinite() || !q.allFinite()) throw InvalidArgument("box QP has non-finite H or q");
    for (Eigen::Index i = 0; i < n; ++i)
      if (!(u(i) > 0.0)) throw InvalidArgument("box QP upper bounds must be positive");
    // Products like B B' are symmetric only up to rounding.
    const double tol = 1e-12 * std::max(1.0, H.cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < j; ++i)
        if (!(std::abs(H(i, j) - H(j, i)) <= tol)) throw InvalidArgument("box QP matrix must be symmetric");
  }
};

struct SolverOptions {
  double tolerance = 1e-6;
  int max_passes = 5000;
  std::uint64_t seed = 0;
  bool shuffle = true;  // false: visit coordinates 0..n-1 in order every pass
};

struct QpSolution {
  Eigen::VectorXd alpha;
  double objective = 0.0;
  int passes_used = 0;
  bool converged = false;
};

inline double qp_objective(const BoxQpProblem& p, const Eigen::VectorXd& alpha) {
  return 0.5 * alpha.dot(p.H * alpha) + p.q.dot(alpha);
}

inline constexpr double kMinCurvature = 1e-12;

/// Exact minimizer of the one-dimensional restriction along coordinate i,
/// clipped to [0, u_i]. Near-zero curvature falls back to moving to the bound
/// the gradient points at.
inline double coordinate_update(double alpha_i, double g_i, double h_ii, double u_i) {
  if (h_ii > kMinCurvature) return std::min(std::max(alpha_i - g_i / h_ii, 0.0), u_i);
  if (g_i > 0.0) return 0.0;
  if (g_i < 0.0) {
    if (std::isinf(u_i)) throw UnboundedProblemError("coordinate has zero curvature and an unbounded descent direction");
    return u_i;
  }
  return alpha_i;
}

/// Magnitude of the projected gradient: the KKT violation of coordinate i.
inline double projected_gradient(double alpha_i, double g_i, double u_i) {
  if (alpha_i <= 0.0) return std::min(g_i, 0.0);
  if (alpha_i >= u_i) return std::max(g_i, 0.0);
  return g_i;
}

namespace detail {
struct NoObserver {
  void operator()(Eigen::Index, const Eigen::VectorXd&) const noexcept {}
};
}  // namespace detail

/// Runs passes of exact coordinate minimization until the largest projected
/// gradient at the end of a pass is within tolerance. The gradient is kept up
/// to date incrementally and recomputed from scratch before declaring
/// convergence. `observe(i, alpha)` is invoked after every coordinate step.
template <class Observer = detail::NoObserver>
QpSolution dcd_solve(const BoxQpProblem& p, const SolverOptions& opts, Observer&& observe = {}) {
  if (!(opts.tolerance > 0.0)) throw InvalidArgument("solver tolerance must be positive");
  if (opts.max_passes < 1) throw InvalidArgument("solver needs at least one pass");
  p.validate();

  const auto n = p.size();
  QpSolution sol;
  sol.alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = p.q;
  Eigen::VectorXd& a = sol.alpha;

  auto max_violation = [&](const Eigen::VectorXd& grad) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) v = std::max(v, std::abs(projected_gradient(a(i), grad(i), p.u(i))));
    return v;
  };

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(opts.seed);

  for (int pass = 0; pass < opts.max_passes; ++pass) {
    if (opts.shuffle)
      for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[uniform_index(rng, k)]);

    for (auto i : order) {
      const double old = a(i);
      const double next = coordinate_update(old, g(i), p.H(i, i), p.u(i));
      const double delta = next - old;
      if (delta != 0.0) {
        a(i) = next;
        g.noalias() += delta * p.H.col(i);
      }
      observe(i, a);
    }
    sol.passes_used = pass + 1;

    if (max_violation(g) <= opts.tolerance) {
      g.noalias() = p.H * a + p.q;
      if (max_violation(g) <= opts.tolerance) {
        sol.converged = true;
        break;
      }
    }
  }
  sol.objective = qp_objective(p, a);
  return sol;
}

}  // namespace odm

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "odm/data.hpp"
#include "odm/error.hpp"

namespace odm {

enum class KernelKind { Linear, Rbf };

/// Linear: k(x,z) = x'z.  Rbf: k(x,z) = exp(-||x-z||^2 / (2 width^2)).
struct KernelSpec {
  KernelKind kind = KernelKind::Linear;
  double width = 1.0;

  static KernelSpec linear() { return {KernelKind::Linear, 1.0}; }

  static KernelSpec rbf(double width) {
    if (!(width > 0.0) || !std::isfinite(width)) throw InvalidArgument("RBF width must be positive and finite");
    return {KernelKind::Rbf, width};
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

inline const char* to_string(KernelKind k) { return k == KernelKind::Linear ? "linear" : "rbf"; }

inline double kernel_eval(const KernelSpec& spec, const SparseVector& x, const SparseVector& z) {
  if (spec.kind == KernelKind::Linear) return dot(x, z);
  return std::exp(-squared_distance(x, z) / (2.0 * spec.width * spec.width));
}

/// Dense m x m Gram matrix. Only the upper triangle is evaluated; the lower is mirrored.
inline Eigen::MatrixXd gram(const KernelSpec& spec, std::span<const SparseVector> xs) {
  const auto m = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd g(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      double v = kernel_eval(spec, xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(j)]);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

inline Eigen::MatrixXd gram(const KernelSpec& spec, const Dataset& d) { return gram(spec, d.instances); }

/// Mean Euclidean distance over all unordered pairs of a seeded subsample of
/// min(m, cap) instances. Returns 0 when every sampled instance coincides.
inline double avg_pairwise_distance(const Dataset& d, std::size_t cap = 1000, std::uint64_t seed = 0) {
  if (d.size() < 2) throw InvalidArgument("average pairwise distance needs at least two instances");
  if (cap < 2) throw InvalidArgument("subsample cap must be at least 2");
  std::vector<std::size_t> idx;
  if (d.size() <= cap) {
    idx.resize(d.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  } else {
    auto perm = seeded_permutation(d.size(), seed);
    idx.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(cap));
  }
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      sum += std::sqrt(squared_distance(d.instances[idx[a]], d.instances[idx[b]]));
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

/// Solves M X = B by LU with partial pivoting. Rejects matrices whose
/// reciprocal condition estimate falls below `min_rcond`.
inline Eigen::MatrixXd solve_linear_system(const Eigen::MatrixXd& M, const Eigen::MatrixXd& B,
                                           double min_rcond = 1e-14) {
  if (M.rows() != M.cols()) throw InvalidArgument("linear system matrix must be square");
  if (B.rows() != M.rows()) throw InvalidArgument("right-hand side is not conformable");
  if (M.size() == 0) return Eigen::MatrixXd(0, B.cols());
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
  const double rc = lu.rcond();
  if (!(rc >= min_rcond)) throw SingularMatrixError("linear system is singular to working precision", rc);
  Eigen::MatrixXd X = lu.solve(B);
  if (!X.allFinite()) throw SingularMatrixError("linear solve produced non-finite values", rc);
  return X;
}

/// The variance-coupling matrix A = 2 lambda1 (m I - y y') / m^2.
inline Eigen::MatrixXd variance_coupling(std::span<const int> y, double lambda1) {
  const auto m = static_cast<Eigen::Index>(y.size());
  Eigen::VectorXd yv(m);
  for (Eigen::Index i = 0; i < m; ++i) yv(i) = y[static_cast<std::size_t>(i)];
  const double md = static_cast<double>(m);
  Eigen::MatrixXd A = -yv * yv.transpose();
  A.diagonal().array() += md;
  A *= 2.0 * lambda1 / (md * md);
  return A;
}

/// I + A G, the system matrix shared by the ODM^L dual and coefficient recovery.
inline Eigen::MatrixXd odml_system_matrix(const Eigen::MatrixXd& G, std::span<const int> y, double lambda1) {
  Eigen::MatrixXd M = variance_coupling(y, lambda1) * G;
  M.diagonal().array() += 1.0;
  return M;
}

/// Quadratic form of the ODM^L dual, H = Y G (I + A G)^{-1} Y, together with
/// the LU factors of I + A G (unset when lambda1 = 0) for recovering theta.
struct OdmlDualMatrix {
  Eigen::MatrixXd H;
  double lambda1 = 0.0;
  std::vector<int> labels;
  Eigen::PartialPivLU<Eigen::MatrixXd> system;
};

/// Builds H without forming (I + AG)^{-1}: B = G (I + AG)^{-1} is obtained from
/// (I + AG)' B' = G (G symmetric), then H = Y B Y is symmetrized. lambda1 = 0
/// short-circuits to Y G Y exactly.
inline OdmlDualMatrix build_odml_H(const Eigen::MatrixXd& G, std::span<const int> y, double lambda1,
                                   double min_rcond = 1e-14) {
  if (!(lambda1 >= 0.0)) throw InvalidArgument("lambda1 must be nonnegative");
  const auto m = G.rows();
  if (G.cols() != m || static_cast<std::size_t>(m) != y.size())
    throw InvalidArgument("Gram matrix and label vector sizes disagree");

  OdmlDualMatrix out;
  out.lambda1 = lambda1;
  out.labels.assign(y.begin(), y.end());

  Eigen::MatrixXd B;
  if (lambda1 == 0.0) {
    B = G;
  } else {
    const Eigen::MatrixXd M = odml_system_matrix(G, y, lambda1);
    B = solve_linear_system(M.transpose(), G, min_rcond).transpose();
    out.system.compute(M);
  }
  out.H.resize(m, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < m; ++i) out.H(i, j) = y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)] * B(i, j);
  if (lambda1 != 0.0) {
    Eigen::MatrixXd sym = 0.5 * (out.H + out.H.transpose());
    out.H = std::move(sym);
  }
  return out;
}

}  // namespace odm

#pragma once

// Dual problems of the soft-margin SVM (no bias), ODM^L and ODM, recovery of
// the kernel-expansion coefficients theta, and the kernel training pipeline.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "odm/boxqp.hpp"
#include "odm/data.hpp"
#include "odm/error.hpp"
#include "odm/kernel.hpp"

namespace odm {

enum class Variant { Svm, Odml, Odm };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::Svm: return "svm";
    case Variant::Odml: return "odml";
    case Variant::Odm: return "odm";
  }
  return "?";
}

struct SvmParams {
  double C = 1.0;
  friend bool operator==(const SvmParams&, const SvmParams&) = default;
};

/// Soft-margin ODM^L: C weighs the hinge loss, lambda1 the margin variance,
/// lambda2 the margin mean.
struct OdmlParams {
  double C = 1.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  friend bool operator==(const OdmlParams&, const OdmlParams&) = default;
};

/// ODM: C1/C2 weigh squared deviations below/above the band [1-D, 1+D].
struct OdmParams {
  double C1 = 1.0;
  double C2 = 1.0;
  double D = 0.0;
  friend bool operator==(const OdmParams&, const OdmParams&) = default;
};

using ModelParams = std::variant<SvmParams, OdmlParams, OdmParams>;

inline Variant variant_of(const ModelParams& p) {
  return std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, SvmParams>) return Variant::Svm;
        else if constexpr (std::is_same_v<T, OdmlParams>) return Variant::Odml;
        else return Variant::Odm;
      },
      p);
}

inline void validate(const SvmParams& p) {
  if (!(p.C > 0.0)) throw InvalidArgument("C must be positive");
}
inline void validate(const OdmlParams& p) {
  if (!(p.C > 0.0)) throw InvalidArgument("C must be positive");
  if (!(p.lambda1 >= 0.0) || !(p.lambda2 >= 0.0)) throw InvalidArgument("lambda1 and lambda2 must be nonnegative");
}
inline void validate(const OdmParams& p) {
  if (!(p.C1 > 0.0) || !(p.C2 > 0.0)) throw InvalidArgument("C1 and C2 must be positive");
  if (!(p.D >= 0.0)) throw InvalidArgument("D must be nonnegative");
}
inline void validate(const ModelParams& p) {
  std::visit([](const auto& v) { validate(v); }, p);
}

/// Y G Y, i.e. Q_ij = y_i y_j G_ij.
inline Eigen::MatrixXd signed_gram(const Eigen::MatrixXd& G, std::span<const int> y) {
  const auto m = G.rows();
  Eigen::MatrixXd Q(m, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < m; ++i) Q(i, j) = y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)] * G(i, j);
  return Q;
}

inline BoxQpProblem build_svm_dual(const Eigen::MatrixXd& G, std::span<const int> y, double C) {
  validate(SvmParams{C});
  const auto m = G.rows();
  BoxQpProblem p;
  p.H = signed_gram(G, y);
  p.q = Eigen::VectorXd::Constant(m, -1.0);
  p.u = Eigen::VectorXd::Constant(m, C / static_cast<double>(m));
  return p;
}

/// min 1/2 a'Ha + (lambda2/m He - e)'a  s.t. 0 <= a <= C/m.
inline BoxQpProblem build_odml_dual(const OdmlDualMatrix& Hm, const OdmlParams& prm) {
  validate(prm);
  const auto m = Hm.H.rows();
  const double md = static_cast<double>(m);
  BoxQpProblem p;
  p.H = Hm.H;
  p.q = Eigen::VectorXd::Constant(m, -1.0);
  if (prm.lambda2 != 0.0) p.q += (prm.lambda2 / md) * (Hm.H * Eigen::VectorXd::Ones(m));
  p.u = Eigen::VectorXd::Constant(m, prm.C / md);
  return p;
}

inline BoxQpProblem build_odml_dual(const Eigen::MatrixXd& G, std::span<const int> y, const OdmlParams& prm) {
  validate(prm);
  return build_odml_dual(build_odml_H(G, y, prm.lambda1), prm);
}

/// 2m-dimensional dual over a = [zeta; beta] >= 0 with
/// H = [[Q + m/(2C1) I, -Q], [-Q, Q + m/(2C2) I]], q = [(D-1)e; (D+1)e].
inline BoxQpProblem build_odm_dual(const Eigen::MatrixXd& G, std::span<const int> y, const OdmParams& prm) {
  validate(prm);
  const auto m = G.rows();
  const double md = static_cast<double>(m);
  const Eigen::MatrixXd Q = signed_gram(G, y);
  BoxQpProblem p;
  p.H.resize(2 * m, 2 * m);
  p.H.topLeftCorner(m, m) = Q;
  p.H.topRightCorner(m, m) = -Q;
  p.H.bottomLeftCorner(m, m) = -Q;
  p.H.bottomRightCorner(m, m) = Q;
  p.H.diagonal().head(m).array() += md / (2.0 * prm.C1);
  p.H.diagonal().tail(m).array() += md / (2.0 * prm.C2);
  p.q.resize(2 * m);
  p.q.head(m).setConstant(prm.D - 1.0);
  p.q.tail(m).setConstant(prm.D + 1.0);
  p.u = Eigen::VectorXd::Constant(2 * m, kInf);
  return p;
}

/// theta = (I + AG)^{-1} Y (lambda2/m e + alpha).
inline Eigen::VectorXd recover_theta_odml(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& G,
                                          std::span<const int> y, const OdmlParams& prm) {
  const auto m = G.rows();
  if (alpha.size() != m) throw InvalidArgument("alpha has the wrong length");
  Eigen::VectorXd rhs(m);
  const double shift = prm.lambda2 / static_cast<double>(m);
  for (Eigen::Index i = 0; i < m; ++i) rhs(i) = y[static_cast<std::size_t>(i)] * (shift + alpha(i));
  if (prm.lambda1 == 0.0) return rhs;
  return solve_linear_system(odml_system_matrix(G, y, prm.lambda1), rhs);
}

/// theta_i = y_i (zeta_i - beta_i).
inline Eigen::VectorXd recover_theta_odm(const Eigen::VectorXd& alpha, std::span<const int> y) {
  const auto m = static_cast<Eigen::Index>(y.size());
  if (alpha.size() != 2 * m) throw InvalidArgument("ODM alpha must have length 2m");
  Eigen::VectorXd theta(m);
  for (Eigen::Index i = 0; i < m; ++i) theta(i) = y[static_cast<std::size_t>(i)] * (alpha(i) - alpha(m + i));
  return theta;
}

/// Same, reusing the factorization stored in `Hm`.
inline Eigen::VectorXd recover_theta_odml(const Eigen::VectorXd& alpha, const OdmlDualMatrix& Hm, const OdmlParams& prm) {
  const auto m = Hm.H.rows();
  if (alpha.size() != m) throw InvalidArgument("alpha has the wrong length");
  if (prm.lambda1 != Hm.lambda1) throw InvalidArgument("dual matrix was built for a different lambda1");
  Eigen::VectorXd rhs(m);
  const double shift = prm.lambda2 / static_cast<double>(m);
  for (Eigen::Index i = 0; i < m; ++i) rhs(i) = Hm.labels[static_cast<std::size_t>(i)] * (shift + alpha(i));
  if (prm.lambda1 == 0.0) return rhs;
  Eigen::VectorXd theta = Hm.system.solve(rhs);
  if (!theta.allFinite()) throw SingularMatrixError("coefficient recovery produced non-finite values", 0.0);
  return theta;
}

/// Primal slacks implied by an ODM dual point: xi = m/(2C1) zeta, eps = m/(2C2) beta.
struct OdmSlacks {
  Eigen::VectorXd xi;
  Eigen::VectorXd eps;
};

inline OdmSlacks odm_slacks(const Eigen::VectorXd& alpha, const OdmParams& prm) {
  const auto m = alpha.size() / 2;
  const double md = static_cast<double>(m);
  return {alpha.head(m) * (md / (2.0 * prm.C1)), alpha.tail(m) * (md / (2.0 * prm.C2))};
}

// ---------------------------------------------------------------------------
// Fitting on a precomputed Gram matrix

struct DualFit {
  QpSolution solution;
  Eigen::VectorXd theta;
  Eigen::VectorXd diag;  // h_ii (SVM / ODM^L) or k(x_i, x_i) (ODM); feeds the LOO bounds
};

/// ODM^L fit on a prebuilt dual matrix, so one factorization serves every
/// (C, lambda2) sharing lambda1.
inline DualFit fit_odml(const OdmlDualMatrix& Hm, const OdmlParams& prm, const SolverOptions& opts) {
  DualFit fit;
  auto p = build_odml_dual(Hm, prm);
  fit.solution = dcd_solve(p, opts);
  fit.theta = recover_theta_odml(fit.solution.alpha, Hm, prm);
  fit.diag = p.H.diagonal();
  return fit;
}

inline DualFit fit_dual(const Eigen::MatrixXd& G, std::span<const int> y, const ModelParams& params,
                        const SolverOptions& opts) {
  validate(params);
  DualFit fit;
  std::visit(
      [&](const auto& prm) {
        using T = std::decay_t<decltype(prm)>;
        if constexpr (std::is_same_v<T, SvmParams>) {
          auto p = build_svm_dual(G, y, prm.C);
          fit.solution = dcd_solve(p, opts);
          fit.theta = recover_theta_odml(fit.solution.alpha, G, y, OdmlParams{prm.C, 0.0, 0.0});
          fit.diag = p.H.diagonal();
        } else if constexpr (std::is_same_v<T, OdmlParams>) {
          fit = fit_odml(build_odml_H(G, y, prm.lambda1), prm, opts);
        } else {
          auto p = build_odm_dual(G, y, prm);
          fit.solution = dcd_solve(p, opts);
          fit.theta = recover_theta_odm(fit.solution.alpha, y);
          fit.diag = G.diagonal();
        }
      },
      params);
  return fit;
}

// ---------------------------------------------------------------------------
// Trained kernel model

/// alpha* and the diagonal needed by the leave-one-out bounds.
struct BoundData {
  std::vector<double> alpha;
  std::vector<double> diag;
};

/// f(z) = sum_i theta_i k(x_i, n(z)) where n is the stored training normalizer
/// and x_i are normalized support instances with |theta_i| above threshold.
struct TrainedModel {
  ModelParams params = SvmParams{};
  KernelSpec kernel;
  Normalizer normalizer;
  std::vector<SparseVector> support;
  std::vector<double> theta;
  std::size_t m_train = 0;
  bool converged = false;
  double objective = 0.0;
  int passes = 0;
  std::optional<BoundData> bound_data;

  Variant variant() const { return variant_of(params); }
};

struct Prediction {
  int label;
  double decision;
};

/// Decision value for an instance already in the model's normalized space.
inline double decision_normalized(const TrainedModel& model, const SparseVector& z) {
  double s = 0.0;
  for (std::size_t i = 0; i < model.support.size(); ++i) s += model.theta[i] * kernel_eval(model.kernel, model.support[i], z);
  return s;
}

/// Ties (decision exactly 0) predict +1.
inline Prediction predict(const TrainedModel& model, const SparseVector& raw) {
  double f = decision_normalized(model, model.normalizer.apply(raw));
  return {f >= 0.0 ? 1 : -1, f};
}

inline int classify(const TrainedModel& model, const SparseVector& raw) { return predict(model, raw).label; }

struct TrainOptions {
  SolverOptions solver;
  bool normalize = true;
  bool keep_alpha = false;
  double support_threshold = 1e-10;
};

/// normalize -> Gram -> dual -> DCD -> theta -> model.
inline TrainedModel train_kernel(const Dataset& d, const KernelSpec& kernel, const ModelParams& params,
                                 const TrainOptions& opts = {}) {
  require_trainable(d);
  validate(params);
  TrainedModel model;
  model.params = params;
  model.kernel = kernel;
  if (opts.normalize) model.normalizer = Normalizer::fit(d);
  const Dataset nd = model.normalizer.apply(d);
  const Eigen::MatrixXd G = gram(kernel, nd);

  DualFit fit = fit_dual(G, nd.labels, params, opts.solver);

  model.m_train = d.size();
  model.converged = fit.solution.converged;
  model.objective = fit.solution.objective;
  model.passes = fit.solution.passes_used;
  for (std::size_t i = 0; i < nd.size(); ++i) {
    double t = fit.theta(static_cast<Eigen::Index>(i));
    if (std::abs(t) > opts.support_threshold) {
      model.support.push_back(nd.instances[i]);
      model.theta.push_back(t);
    }
  }
  if (opts.keep_alpha) {
    BoundData b;
    b.alpha.assign(fit.solution.alpha.data(), fit.solution.alpha.data() + fit.solution.alpha.size());
    b.diag.assign(fit.diag.data(), fit.diag.data() + fit.diag.size());
    model.bound_data = std::move(b);
  }
  return model;
}

}  // namespace odm

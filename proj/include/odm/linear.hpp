#pragma once

// Linear-kernel primal objectives f_L (ODM^L) and f_O (ODM), their exact and
// single-sample stochastic gradients, and the SVRG trainer.
//
// Features are 1-based; component j-1 of a weight vector multiplies feature j.
// Feature indices beyond w.size() contribute nothing.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>

#include "odm/data.hpp"
#include "odm/dual.hpp"
#include "odm/error.hpp"

namespace odm {

inline double dot(const Eigen::VectorXd& w, const SparseVector& x) {
  double s = 0.0;
  const auto n = w.size();
  for (const auto& e : x) {
    if (e.index > n) break;
    s += w(e.index - 1) * e.value;
  }
  return s;
}

/// w += a * x
inline void axpy(double a, const SparseVector& x, Eigen::VectorXd& w) {
  const auto n = w.size();
  for (const auto& e : x) {
    if (e.index > n) break;
    w(e.index - 1) += a * e.value;
  }
}

/// Dense copy of a weight vector's support as a sparse vector.
inline Eigen::VectorXd to_dense(const SparseVector& x, Eigen::Index dim) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  axpy(1.0, x, v);
  return v;
}

// ---------------------------------------------------------------------------
// ODM^L:  f_L(w) = 1/2 w'w + lambda1/m w'XX'w - lambda1/m^2 (w'Xy)^2
//                 - lambda2/m (Xy)'w + C/m sum_i max(0, 1 - y_i w'x_i)

inline double objective_odml_linear(const Eigen::VectorXd& w, const Dataset& d, const OdmlParams& p) {
  const double m = static_cast<double>(d.size());
  double sq = 0.0, mean_sum = 0.0, hinge = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double f = dot(w, d.instances[i]);
    const double gamma = d.labels[i] * f;
    sq += f * f;
    mean_sum += gamma;
    hinge += std::max(0.0, 1.0 - gamma);
  }
  return 0.5 * w.squaredNorm() + p.lambda1 / m * sq - p.lambda1 / (m * m) * mean_sum * mean_sum -
         p.lambda2 / m * mean_sum + p.C / m * hinge;
}

/// Subgradient with I1 = { i : y_i w'x_i < 1 } (strict).
inline Eigen::VectorXd full_gradient_odml(const Eigen::VectorXd& w, const Dataset& d, const OdmlParams& p) {
  const double m = static_cast<double>(d.size());
  std::vector<double> f(d.size());
  double mean_sum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    f[i] = dot(w, d.instances[i]);
    mean_sum += d.labels[i] * f[i];
  }
  Eigen::VectorXd g = w;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double y = d.labels[i];
    double c = 2.0 * p.lambda1 / m * f[i] - 2.0 * p.lambda1 / (m * m) * mean_sum * y - p.lambda2 / m * y;
    if (y * f[i] < 1.0) c -= p.C / m * y;
    axpy(c, d.instances[i], g);
  }
  return g;
}

/// Scalar s such that the pair estimate equals w + s x_i. Takes the inner
/// products x_i'w and x_j'w so SVRG can reuse snapshot values.
inline double odml_sample_scale(double fi, int yi, double fj, int yj, const OdmlParams& p) {
  double s = 2.0 * p.lambda1 * fi - 2.0 * p.lambda1 * yi * yj * fj - p.lambda2 * yi;
  if (yi * fi < 1.0) s -= p.C * yi;
  return s;
}

/// Unbiased estimate of grad f_L from two independently drawn samples i, j.
inline Eigen::VectorXd stoch_grad_odml(const Eigen::VectorXd& w, const SparseVector& xi, int yi,
                                       const SparseVector& xj, int yj, const OdmlParams& p) {
  Eigen::VectorXd g = w;
  axpy(odml_sample_scale(dot(w, xi), yi, dot(w, xj), yj, p), xi, g);
  return g;
}

// ---------------------------------------------------------------------------
// ODM:  f_O(w) = 1/2 w'w + C1/m sum max(0, 1-D-y_i w'x_i)^2
//                        + C2/m sum max(0, y_i w'x_i - 1-D)^2

inline double objective_odm_linear(const Eigen::VectorXd& w, const Dataset& d, const OdmParams& p) {
  const double m = static_cast<double>(d.size());
  double below = 0.0, above = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double gamma = d.labels[i] * dot(w, d.instances[i]);
    const double lo = std::max(0.0, 1.0 - p.D - gamma);
    const double hi = std::max(0.0, gamma - 1.0 - p.D);
    below += lo * lo;
    above += hi * hi;
  }
  return 0.5 * w.squaredNorm() + p.C1 / m * below + p.C2 / m * above;
}

/// Scalar s such that the single-sample estimate equals w + s x_i.
/// I2 = { gamma < 1-D } and I3 = { gamma > 1+D } are disjoint for D >= 0.
inline double odm_sample_scale(double fi, int yi, const OdmParams& p) {
  const double gamma = yi * fi;
  if (gamma < 1.0 - p.D) return 2.0 * p.C1 * (gamma + p.D - 1.0) * yi;
  if (gamma > 1.0 + p.D) return 2.0 * p.C2 * (gamma - p.D - 1.0) * yi;
  return 0.0;
}

inline Eigen::VectorXd full_gradient_odm(const Eigen::VectorXd& w, const Dataset& d, const OdmParams& p) {
  const double m = static_cast<double>(d.size());
  Eigen::VectorXd g = w;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double s = odm_sample_scale(dot(w, d.instances[i]), d.labels[i], p);
    if (s != 0.0) axpy(s / m, d.instances[i], g);
  }
  return g;
}

inline Eigen::VectorXd stoch_grad_odm(const Eigen::VectorXd& w, const SparseVector& xi, int yi, const OdmParams& p) {
  Eigen::VectorXd g = w;
  const double s = odm_sample_scale(dot(w, xi), yi, p);
  if (s != 0.0) axpy(s, xi, g);
  return g;
}

// ---------------------------------------------------------------------------
// Linear model and SVRG

/// SVM parameters are run through the ODM^L objective with lambda1 = lambda2 = 0.
inline OdmlParams as_odml(const ModelParams& params) {
  if (const auto* s = std::get_if<SvmParams>(&params)) return {s->C, 0.0, 0.0};
  return std::get<OdmlParams>(params);
}

struct LinearModel {
  ModelParams params = SvmParams{};
  Normalizer normalizer;
  Eigen::VectorXd w;
  double objective = 0.0;  // primal objective on the (normalized) training set
  int stages = 0;

  Variant variant() const { return variant_of(params); }
  Eigen::Index dim() const { return w.size(); }
};

inline double primal_objective(const Eigen::VectorXd& w, const Dataset& d, const ModelParams& params) {
  if (const auto* o = std::get_if<OdmParams>(&params)) return objective_odm_linear(w, d, *o);
  return objective_odml_linear(w, d, as_odml(params));
}

inline Eigen::VectorXd full_gradient(const Eigen::VectorXd& w, const Dataset& d, const ModelParams& params) {
  if (const auto* o = std::get_if<OdmParams>(&params)) return full_gradient_odm(w, d, *o);
  return full_gradient_odml(w, d, as_odml(params));
}

/// Unseen feature indices (beyond the model dimension) are ignored.
inline Prediction predict(const LinearModel& model, const SparseVector& raw) {
  const double f = dot(model.w, model.normalizer.apply(raw));
  return {f >= 0.0 ? 1 : -1, f};
}

inline int classify(const LinearModel& model, const SparseVector& raw) { return predict(model, raw).label; }

enum class SnapshotRule { RandomIterate, LastIterate };

struct SvrgOptions {
  double eta = 0.01;
  int stages = 50;
  std::size_t epoch_length = 0;  // 0 means m
  std::uint64_t seed = 0;
  SnapshotRule snapshot_rule = SnapshotRule::RandomIterate;
  bool normalize = true;
};

/// Variance-reduced SGD. Each stage takes the full gradient mu at the snapshot
/// w_bar and performs epoch_length steps
///   w <- w - eta (g_i(w) - g_i(w_bar) + mu)
/// where g_i is the single-sample estimate (pair estimate for ODM^L, with j
/// drawn independently of i). The next snapshot is a uniformly chosen inner
/// iterate (RandomIterate) or the final one (LastIterate).
inline LinearModel svrg_train(const Dataset& data, const ModelParams& params, const SvrgOptions& opts) {
  require_trainable(data);
  validate(params);
  if (!(opts.eta > 0.0)) throw InvalidArgument("SVRG step size must be positive");
  if (opts.stages < 1) throw InvalidArgument("SVRG needs at least one stage");

  LinearModel model;
  model.params = params;
  if (opts.normalize) model.normalizer = Normalizer::fit(data);
  const Dataset d = model.normalizer.apply(data);
  const auto m = d.size();
  const std::size_t epoch = opts.epoch_length ? opts.epoch_length : m;
  const bool is_odm = std::holds_alternative<OdmParams>(params);
  const OdmParams odm_p = is_odm ? std::get<OdmParams>(params) : OdmParams{};
  const OdmlParams odml_p = is_odm ? OdmlParams{} : as_odml(params);

  Eigen::VectorXd snapshot = Eigen::VectorXd::Zero(d.dim);
  const double f0 = primal_objective(snapshot, d, params);
  const double blowup = 1e6 * std::max(std::abs(f0), 1.0);

  Rng rng(opts.seed);
  std::vector<double> snap_f(m);
  Eigen::VectorXd w(d.dim), keep(d.dim);

  for (int s = 0; s < opts.stages; ++s) {
    const Eigen::VectorXd mu = full_gradient(snapshot, d, params);
    for (std::size_t i = 0; i < m; ++i) snap_f[i] = dot(snapshot, d.instances[i]);

    const std::size_t pick = opts.snapshot_rule == SnapshotRule::RandomIterate ? uniform_index(rng, epoch) + 1 : epoch;
    w = snapshot;
    for (std::size_t t = 1; t <= epoch; ++t) {
      const std::size_t i = uniform_index(rng, m);
      const auto& xi = d.instances[i];
      const int yi = d.labels[i];
      double ds;
      if (is_odm) {
        ds = odm_sample_scale(dot(w, xi), yi, odm_p) - odm_sample_scale(snap_f[i], yi, odm_p);
      } else {
        const std::size_t j = uniform_index(rng, m);
        const auto& xj = d.instances[j];
        const int yj = d.labels[j];
        ds = odml_sample_scale(dot(w, xi), yi, dot(w, xj), yj, odml_p) -
             odml_sample_scale(snap_f[i], yi, snap_f[j], yj, odml_p);
      }
      // g_i(w) - g_i(w_bar) + mu = (w - w_bar) + ds x_i + mu
      w -= opts.eta * ((w - snapshot) + mu);
      if (ds != 0.0) axpy(-opts.eta * ds, xi, w);
      if (t == pick) keep = w;
    }
    snapshot = keep;
    model.stages = s + 1;

    if (!snapshot.allFinite())
      throw DivergenceError("SVRG diverged (non-finite weights) at stage " + std::to_string(s + 1) + "; use a smaller eta");
    const double f = primal_objective(snapshot, d, params);
    if (!(f <= blowup))
      throw DivergenceError("SVRG diverged (objective " + std::to_string(f) + ") at stage " + std::to_string(s + 1) +
                            "; use a smaller eta");
    model.objective = f;
  }
  model.w = snapshot;
  return model;
}

}  // namespace odm

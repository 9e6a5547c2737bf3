#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "odm/data.hpp"
#include "odm/dual.hpp"
#include "odm/error.hpp"
#include "odm/kernel.hpp"
#include "odm/linear.hpp"

namespace odm {

// ---------------------------------------------------------------------------
// Margin statistics

struct CurvePoint {
  double margin;
  double cumulative_frequency;
};

struct MarginReport {
  std::vector<double> margins;             // gamma_i = y_i f(x_i)
  std::vector<double> normalized_margins;  // gamma_i / ||w||; empty when ||w|| = 0
  double weight_norm = 0.0;
  bool zero_norm = false;
  double mean = 0.0;
  double variance = 0.0;  // population variance, 1/m sum (gamma_i - mean)^2
  std::vector<CurvePoint> curve;  // empirical CDF over normalized margins (raw if zero_norm)
};

/// Empirical CDF: one point per distinct value, fraction of values <= it.
inline std::vector<CurvePoint> cumulative_curve(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::vector<CurvePoint> out;
  const double m = static_cast<double>(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k + 1 < values.size() && values[k + 1] == values[k]) continue;
    out.push_back({values[k], static_cast<double>(k + 1) / m});
  }
  return out;
}

inline MarginReport margin_report_from(std::vector<double> margins, double weight_norm) {
  MarginReport r;
  r.margins = std::move(margins);
  r.weight_norm = weight_norm;
  const double m = static_cast<double>(r.margins.size());
  if (!r.margins.empty()) {
    double sum = 0.0;
    for (double g : r.margins) sum += g;
    r.mean = sum / m;
    double ss = 0.0;
    for (double g : r.margins) ss += (g - r.mean) * (g - r.mean);
    r.variance = ss / m;
  }
  r.zero_norm = !(weight_norm > 0.0);
  if (!r.zero_norm) {
    r.normalized_margins.reserve(r.margins.size());
    for (double g : r.margins) r.normalized_margins.push_back(g / weight_norm);
    r.curve = cumulative_curve(r.normalized_margins);
  } else {
    r.curve = cumulative_curve(r.margins);
  }
  return r;
}

/// ||w|| = sqrt(theta' G_sv theta) over the support set.
inline double weight_norm(const TrainedModel& model) {
  const Eigen::MatrixXd G = gram(model.kernel, model.support);
  const Eigen::Map<const Eigen::VectorXd> theta(model.theta.data(), static_cast<Eigen::Index>(model.theta.size()));
  return std::sqrt(std::max(0.0, theta.dot(G * theta)));
}

inline MarginReport margin_report(const TrainedModel& model, const Dataset& d) {
  std::vector<double> g(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) g[i] = d.labels[i] * predict(model, d.instances[i]).decision;
  return margin_report_from(std::move(g), weight_norm(model));
}

inline MarginReport margin_report(const LinearModel& model, const Dataset& d) {
  std::vector<double> g(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) g[i] = d.labels[i] * predict(model, d.instances[i]).decision;
  return margin_report_from(std::move(g), model.w.norm());
}

/// CSV with header `margin,cumulative_frequency`, 12 significant digits, one
/// row per distinct printed margin in ascending order.
inline void write_margin_curve_csv(std::ostream& out, const MarginReport& r) {
  out << "margin,cumulative_frequency\n";
  char m_buf[40], f_buf[40];
  std::string pending;
  std::string pending_margin;
  for (const auto& p : r.curve) {
    std::snprintf(m_buf, sizeof m_buf, "%.12g", p.margin);
    std::snprintf(f_buf, sizeof f_buf, "%.12g", p.cumulative_frequency);
    if (!pending.empty() && pending_margin != m_buf) out << pending;
    pending_margin = m_buf;
    pending = std::string(m_buf) + "," + f_buf + "\n";
  }
  out << pending;
}

// ---------------------------------------------------------------------------
// Leave-one-out bounds

struct LooBoundReport {
  Variant variant = Variant::Odml;
  std::size_t m = 0;
  double bound_value = 0.0;  // (sum of terms) / m
  // ODM^L / SVM: first_sum = sum_{0 < a_i < C/m} a_i h_ii, first_count = that set's size,
  //              second_count = #{a_i = C/m}.
  // ODM: first_sum over positive zeta, second_sum over positive beta, d_term = D(|I1| - |I2|).
  double first_sum = 0.0;
  double second_sum = 0.0;
  double d_term = 0.0;
  std::size_t first_count = 0;
  std::size_t second_count = 0;

  double total() const {
    return variant == Variant::Odm ? first_sum + second_sum + d_term : first_sum + static_cast<double>(second_count);
  }
};

/// Relative tolerance (w.r.t. C/m) for placing a_i at a box boundary.
inline constexpr double kBoundaryTolerance = 1e-8;

inline LooBoundReport loo_bound_odml(std::span<const double> alpha, std::span<const double> h_diag, double C,
                                     std::size_t m) {
  if (alpha.size() != m || h_diag.size() != m) throw InvalidArgument("alpha/diagonal length must equal m");
  if (m == 0) throw InvalidArgument("bound needs m >= 1");
  const double ub = C / static_cast<double>(m);
  const double tol = kBoundaryTolerance * ub;
  LooBoundReport r;
  r.variant = Variant::Odml;
  r.m = m;
  for (std::size_t i = 0; i < m; ++i) {
    if (alpha[i] >= ub - tol) {
      ++r.second_count;
    } else if (alpha[i] > tol) {
      r.first_sum += alpha[i] * h_diag[i];
      ++r.first_count;
    }
  }
  r.bound_value = r.total() / static_cast<double>(m);
  return r;
}

inline LooBoundReport loo_bound_odml(std::span<const double> alpha, const OdmlDualMatrix& H, double C) {
  Eigen::VectorXd d = H.H.diagonal();
  return loo_bound_odml(alpha, std::span<const double>(d.data(), static_cast<std::size_t>(d.size())), C,
                        static_cast<std::size_t>(H.H.rows()));
}

/// `self_kernel[i]` is ||x_i||^2 (k(x_i, x_i) for a general kernel).
/// Positive means strictly positive: DCD clips to exact zeros.
inline LooBoundReport loo_bound_odm(std::span<const double> alpha, std::span<const double> self_kernel,
                                    const OdmParams& p, std::size_t m) {
  if (alpha.size() != 2 * m || self_kernel.size() != m) throw InvalidArgument("ODM bound needs |alpha| = 2m and m norms");
  if (m == 0) throw InvalidArgument("bound needs m >= 1");
  const double md = static_cast<double>(m);
  LooBoundReport r;
  r.variant = Variant::Odm;
  r.m = m;
  for (std::size_t i = 0; i < m; ++i) {
    if (alpha[i] > 0.0) {
      r.first_sum += alpha[i] * (self_kernel[i] + md / (2.0 * p.C1));
      ++r.first_count;
    }
    if (alpha[m + i] > 0.0) {
      r.second_sum += alpha[m + i] * (self_kernel[i] + md / (2.0 * p.C2));
      ++r.second_count;
    }
  }
  r.d_term = p.D * (static_cast<double>(r.first_count) - static_cast<double>(r.second_count));
  r.bound_value = r.total() / md;
  return r;
}

/// Bound for a model trained with keep_alpha.
inline LooBoundReport loo_bound(const TrainedModel& model) {
  if (!model.bound_data) throw InvalidArgument("model carries no dual solution; retrain with alpha retention");
  const auto& b = model.bound_data.value();
  const auto m = model.m_train;
  return std::visit(
      [&](const auto& p) -> LooBoundReport {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, OdmParams>) {
          return loo_bound_odm(b.alpha, b.diag, p, m);
        } else {
          auto r = loo_bound_odml(b.alpha, b.diag, as_odml(model.params).C, m);
          r.variant = model.variant();
          return r;
        }
      },
      model.params);
}

// ---------------------------------------------------------------------------
// Brute-force leave-one-out

class LooError : public Error {
public:
  LooError(std::size_t index, const std::string& what)
      : Error("leave-one-out retraining failed at index " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

private:
  std::size_t index_;
};

/// Number of held-out instances misclassified when retraining on the other
/// m - 1. `train(const Dataset&)` must return something `classify` accepts.
template <class Trainer>
std::size_t loo_exact(const Dataset& d, Trainer&& train) {
  if (d.size() < 2) throw InvalidArgument("leave-one-out needs m >= 2");
  std::size_t errors = 0;
  std::vector<std::size_t> idx;
  idx.reserve(d.size() - 1);
  for (std::size_t held = 0; held < d.size(); ++held) {
    idx.clear();
    for (std::size_t i = 0; i < d.size(); ++i)
      if (i != held) idx.push_back(i);
    try {
      const auto model = train(d.subset(idx));
      if (classify(model, d.instances[held]) != d.labels[held]) ++errors;
    } catch (const std::exception& e) {
      throw LooError(held, e.what());
    }
  }
  return errors;
}

}  // namespace odm

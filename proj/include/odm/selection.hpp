#pragma once

// Grid search by k-fold cross validation and the repeated hold-out benchmark.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "odm/data.hpp"
#include "odm/dual.hpp"
#include "odm/error.hpp"
#include "odm/kernel.hpp"

namespace odm {

/// Candidate values per parameter. RBF widths are multiples of the average
/// pairwise distance of the (normalized) training set.
struct GridSpec {
  std::vector<double> C;
  std::vector<double> lambda1;
  std::vector<double> lambda2;
  std::vector<double> C1;
  std::vector<double> C2;
  std::vector<double> D;
  std::vector<double> width_factors;
  std::vector<double> widths;  // absolute RBF widths; replace width_factors when nonempty

  /// 3 values per parameter.
  static GridSpec coarse() {
    return {{10, 50, 100},
            {std::ldexp(1.0, -8), std::ldexp(1.0, -5), std::ldexp(1.0, -2)},
            {std::ldexp(1.0, -8), std::ldexp(1.0, -5), std::ldexp(1.0, -2)},
            {1, 32, 1024},
            {1, 32, 1024},
            {0.0, 0.3, 0.5},
            {0.25, 1.0, 4.0},
            {}};
  }

  /// The complete published protocol: 3 x 7 x 7 (ODM^L), 11 x 11 x 6 (ODM), 5 widths.
  static GridSpec full() {
    GridSpec g;
    g.C = {10, 50, 100};
    for (int e = -8; e <= -2; ++e) g.lambda1.push_back(std::ldexp(1.0, e));
    g.lambda2 = g.lambda1;
    for (int e = 0; e <= 10; ++e) g.C1.push_back(std::ldexp(1.0, e));
    g.C2 = g.C1;
    for (int k = 0; k <= 5; ++k) g.D.push_back(0.1 * k);
    for (int e = -2; e <= 2; ++e) g.width_factors.push_back(std::ldexp(1.0, e));
    return g;
  }
};

/// Parameter combinations for one variant, in canonical order (first
/// parameter outermost, lists in the order given).
inline std::vector<ModelParams> param_grid(Variant v, const GridSpec& g) {
  std::vector<ModelParams> out;
  auto need = [](const std::vector<double>& xs, const char* name) {
    if (xs.empty()) throw InvalidArgument(std::string("grid for ") + name + " is empty");
  };
  switch (v) {
    case Variant::Svm:
      need(g.C, "C");
      for (double c : g.C) out.push_back(SvmParams{c});
      break;
    case Variant::Odml:
      need(g.C, "C");
      need(g.lambda1, "lambda1");
      need(g.lambda2, "lambda2");
      for (double c : g.C)
        for (double l1 : g.lambda1)
          for (double l2 : g.lambda2) out.push_back(OdmlParams{c, l1, l2});
      break;
    case Variant::Odm:
      need(g.C1, "C1");
      need(g.C2, "C2");
      need(g.D, "D");
      for (double c1 : g.C1)
        for (double c2 : g.C2)
          for (double d : g.D) out.push_back(OdmParams{c1, c2, d});
      break;
  }
  for (const auto& p : out) validate(p);
  return out;
}

/// C for SVM / ODM^L, C1 for ODM.
inline double regularization_key(const ModelParams& p) {
  if (const auto* o = std::get_if<OdmParams>(&p)) return o->C1;
  if (const auto* s = std::get_if<SvmParams>(&p)) return s->C;
  return std::get<OdmlParams>(p).C;
}

// ---------------------------------------------------------------------------
// Cross validation

struct CvOptions {
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  SolverOptions solver{1e-3, 2000, 0, true};
  bool normalize = true;
};

struct CvPoint {
  ModelParams params;
  KernelSpec kernel;
  double mean_accuracy = 0.0;
};

struct CvResult {
  std::vector<CvPoint> points;  // grid order: width outermost, then param_grid order
  std::size_t best = 0;
  double delta = 0.0;  // average pairwise distance used to scale RBF widths (0 for linear)

  const CvPoint& winner() const { return points.at(best); }
};

/// Strictly better: higher accuracy; ties go to the smaller C (C1 for ODM),
/// then to the earlier grid point.
inline bool cv_better(const CvPoint& a, std::size_t ia, const CvPoint& b, std::size_t ib) {
  if (a.mean_accuracy != b.mean_accuracy) return a.mean_accuracy > b.mean_accuracy;
  const double ka = regularization_key(a.params), kb = regularization_key(b.params);
  if (ka != kb) return ka < kb;
  return ia < ib;
}

/// Optional hook called with every (fold, train index list, validation index
/// list) the search uses; indices refer to rows of `train`.
using FoldObserver = std::function<void(std::size_t, std::span<const std::size_t>, std::span<const std::size_t>)>;

/// Exhaustive grid search on `train` only. The normalizer is fit once on
/// `train`, the Gram matrix is computed once per kernel width, and each fold
/// solves on the corresponding sub-matrix.
inline CvResult cross_validate(const Dataset& train, Variant variant, KernelKind kind, const GridSpec& grid,
                               const CvOptions& opts, const FoldObserver& observe = {}) {
  require_trainable(train);
  const auto params = param_grid(variant, grid);
  const Dataset nd = opts.normalize ? Normalizer::fit(train).apply(train) : train;
  const auto folds = kfold_indices(nd.size(), opts.folds, opts.seed);
  for (std::size_t f = 0; f < folds.size(); ++f)
    if (observe) observe(f, folds[f].train, folds[f].validation);

  CvResult res;
  std::vector<KernelSpec> kernels;
  if (kind == KernelKind::Linear) {
    kernels.push_back(KernelSpec::linear());
  } else {
    if (!grid.widths.empty()) {
      for (double w : grid.widths) kernels.push_back(KernelSpec::rbf(w));
    } else {
      if (grid.width_factors.empty()) throw InvalidArgument("grid for RBF width is empty");
      res.delta = avg_pairwise_distance(nd);
      if (!(res.delta > 0.0)) throw InvalidArgument("all training instances coincide; RBF width undefined");
      for (double f : grid.width_factors) kernels.push_back(KernelSpec::rbf(f * res.delta));
    }
  }

  for (const auto& k : kernels) {
    const Eigen::MatrixXd G = gram(k, nd);
    std::vector<double> acc_sum(params.size(), 0.0);
    for (const auto& fold : folds) {
      const auto nt = static_cast<Eigen::Index>(fold.train.size());
      const auto nv = static_cast<Eigen::Index>(fold.validation.size());
      Eigen::MatrixXd Gt(nt, nt), Gvt(nv, nt);
      std::vector<int> yt(fold.train.size());
      for (Eigen::Index b = 0; b < nt; ++b) {
        const auto jb = static_cast<Eigen::Index>(fold.train[static_cast<std::size_t>(b)]);
        yt[static_cast<std::size_t>(b)] = nd.labels[static_cast<std::size_t>(jb)];
        for (Eigen::Index a = 0; a < nt; ++a) Gt(a, b) = G(static_cast<Eigen::Index>(fold.train[static_cast<std::size_t>(a)]), jb);
        for (Eigen::Index a = 0; a < nv; ++a)
          Gvt(a, b) = G(static_cast<Eigen::Index>(fold.validation[static_cast<std::size_t>(a)]), jb);
      }
      const bool trainable = std::count(yt.begin(), yt.end(), 1) > 0 && std::count(yt.begin(), yt.end(), -1) > 0;
      // ODM^L points sharing lambda1 share one dual matrix.
      std::map<double, OdmlDualMatrix> cached;
      for (std::size_t p = 0; p < params.size(); ++p) {
        std::size_t correct = 0;
        if (trainable) {
          DualFit fit;
          if (const auto* o = std::get_if<OdmlParams>(&params[p])) {
            auto it = cached.find(o->lambda1);
            if (it == cached.end()) it = cached.emplace(o->lambda1, build_odml_H(Gt, yt, o->lambda1)).first;
            fit = fit_odml(it->second, *o, opts.solver);
          } else {
            fit = fit_dual(Gt, yt, params[p], opts.solver);
          }
          const Eigen::VectorXd f = Gvt * fit.theta;
          for (Eigen::Index a = 0; a < nv; ++a) {
            const int label = f(a) >= 0.0 ? 1 : -1;
            if (label == nd.labels[fold.validation[static_cast<std::size_t>(a)]]) ++correct;
          }
        } else {
          // Single-class fold: the constant predictor for that class.
          for (auto i : fold.validation)
            if (nd.labels[i] == yt.front()) ++correct;
        }
        acc_sum[p] += static_cast<double>(correct) / static_cast<double>(nv);
      }
    }
    for (std::size_t p = 0; p < params.size(); ++p)
      res.points.push_back({params[p], k, acc_sum[p] / static_cast<double>(folds.size())});
  }

  for (std::size_t i = 1; i < res.points.size(); ++i)
    if (cv_better(res.points[i], i, res.points[res.best], res.best)) res.best = i;
  return res;
}

/// Grid search followed by a retrain of the winner on all of `train`.
struct CvTrainResult {
  CvResult cv;
  TrainedModel model;
};

inline CvTrainResult cv_train(const Dataset& train, Variant variant, KernelKind kind, const GridSpec& grid,
                              const CvOptions& cv_opts, const TrainOptions& final_opts) {
  CvTrainResult r;
  r.cv = cross_validate(train, variant, kind, grid, cv_opts);
  TrainOptions o = final_opts;
  o.normalize = cv_opts.normalize;
  r.model = train_kernel(train, r.cv.winner().kernel, r.cv.winner().params, o);
  return r;
}

inline double accuracy(const TrainedModel& model, const Dataset& d) {
  if (d.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (classify(model, d.instances[i]) == d.labels[i]) ++ok;
  return static_cast<double>(ok) / static_cast<double>(d.size());
}

// ---------------------------------------------------------------------------
// Benchmark

struct BenchOptions {
  std::vector<Variant> methods{Variant::Svm, Variant::Odml, Variant::Odm};
  KernelKind kernel = KernelKind::Linear;
  int repeats = 30;
  std::uint64_t seed = 0;
  GridSpec grid = GridSpec::coarse();
  CvOptions cv;
  SolverOptions final_solver{1e-4, 5000, 0, true};
  bool timing = true;  // false writes 0 seconds so output is reproducible byte for byte
};

struct BenchResult {
  std::string dataset;
  Variant method = Variant::Svm;
  KernelKind kernel = KernelKind::Linear;
  double mean_acc = 0.0;
  double std_acc = 0.0;  // sample standard deviation (n - 1); 0 for a single repeat
  double seconds = 0.0;
  std::vector<double> accuracies;
};

inline double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

inline double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Repeat r splits half/half with seed + r; every method sees the same splits.
/// Cross validation runs on the training half only.
inline std::vector<BenchResult> bench_dataset(const std::string& name, const Dataset& d, const BenchOptions& opts) {
  if (opts.repeats < 1) throw InvalidArgument("bench needs at least one repeat");
  if (opts.methods.empty()) throw InvalidArgument("bench needs at least one method");
  std::vector<BenchResult> rows;
  for (auto v : opts.methods) rows.push_back({name, v, opts.kernel, 0, 0, 0, {}});

  for (int r = 0; r < opts.repeats; ++r) {
    const std::uint64_t s = opts.seed + static_cast<std::uint64_t>(r);
    const Split sp = split(d, 0.5, s);
    for (auto& row : rows) {
      const auto t0 = std::chrono::steady_clock::now();
      CvOptions cv = opts.cv;
      cv.seed = s;
      TrainOptions fo;
      fo.solver = opts.final_solver;
      fo.solver.seed = s;
      const auto trained = cv_train(sp.train, row.method, opts.kernel, opts.grid, cv, fo);
      row.accuracies.push_back(accuracy(trained.model, sp.test));
      const auto t1 = std::chrono::steady_clock::now();
      if (opts.timing) row.seconds += std::chrono::duration<double>(t1 - t0).count();
    }
  }
  for (auto& row : rows) {
    row.mean_acc = mean_of(row.accuracies);
    row.std_acc = sample_std(row.accuracies);
  }
  return rows;
}

inline void write_bench_csv(std::ostream& out, std::span<const BenchResult> rows) {
  out << "dataset,method,kernel,mean_acc,std_acc,seconds\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, ",%s,%s,%.6f,%.6f,%.3f\n", to_string(r.method), to_string(r.kernel), r.mean_acc,
                  r.std_acc, r.seconds);
    out << r.dataset << buf;
  }
}

/// Aligned "mean ± std" table for terminals.
inline void write_bench_table(std::ostream& out, std::span<const BenchResult> rows) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-16s %-6s %-7s %-17s %10s\n", "dataset", "method", "kernel", "accuracy", "seconds");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-16s %-6s %-7s %.3f +/- %.3f %12.2f\n", r.dataset.c_str(), to_string(r.method),
                  to_string(r.kernel), r.mean_acc, r.std_acc, r.seconds);
    out << buf;
  }
}

}  // namespace odm

#pragma once

// The `odm` command-line tool. Kept in a header so tests can drive it
// in-process; tools/odm.cpp only forwards argv.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "odm/analysis.hpp"
#include "odm/data.hpp"
#include "odm/dual.hpp"
#include "odm/error.hpp"
#include "odm/kernel.hpp"
#include "odm/linear.hpp"
#include "odm/model_io.hpp"
#include "odm/selection.hpp"

namespace odm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Thrown for flag combinations CLI11 cannot express.
class UsageError : public Error {
public:
  using Error::Error;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline Variant parse_variant(const std::string& s) {
  if (s == "svm") return Variant::Svm;
  if (s == "odml") return Variant::Odml;
  if (s == "odm") return Variant::Odm;
  throw UsageError("unknown variant '" + s + "'");
}

inline KernelKind parse_kernel(const std::string& s) {
  if (s == "linear") return KernelKind::Linear;
  if (s == "rbf") return KernelKind::Rbf;
  throw UsageError("unknown kernel '" + s + "'");
}

inline GridSpec parse_grid(const std::string& s) {
  if (s == "coarse") return GridSpec::coarse();
  if (s == "full") return GridSpec::full();
  throw UsageError("unknown grid '" + s + "'");
}

/// Variant parameters as given on the command line.
struct ParamFlags {
  double c = 0, lambda1 = 0, lambda2 = 0, c1 = 0, c2 = 0, d = 0;
  CLI::Option *o_c = nullptr, *o_l1 = nullptr, *o_l2 = nullptr, *o_c1 = nullptr, *o_c2 = nullptr, *o_d = nullptr;

  void add(CLI::App* app) {
    o_c = app->add_option("--c", c, "C (svm, odml)");
    o_l1 = app->add_option("--lambda1", lambda1, "margin-variance weight (odml)");
    o_l2 = app->add_option("--lambda2", lambda2, "margin-mean weight (odml)");
    o_c1 = app->add_option("--c1", c1, "weight below the band (odm)");
    o_c2 = app->add_option("--c2", c2, "weight above the band (odm)");
    o_d = app->add_option("--d", d, "band half-width D (odm)");
  }

  static bool given(const CLI::Option* o) { return o && o->count() > 0; }

  /// Rejects parameters that belong to another variant.
  void check_foreign(Variant v) const {
    auto reject = [](const CLI::Option* o, const char* variant) {
      if (given(o)) throw UsageError(o->get_name() + " does not apply to variant " + variant);
    };
    if (v != Variant::Svm && v != Variant::Odml) reject(o_c, to_string(v));
    if (v != Variant::Odml) {
      reject(o_l1, to_string(v));
      reject(o_l2, to_string(v));
    }
    if (v != Variant::Odm) {
      reject(o_c1, to_string(v));
      reject(o_c2, to_string(v));
      reject(o_d, to_string(v));
    }
  }

  /// All parameters of the variant must be present.
  ModelParams require(Variant v) const {
    check_foreign(v);
    auto need = [](const CLI::Option* o) {
      if (!given(o)) throw UsageError("missing " + o->get_name() + " (give every variant parameter or use --cv)");
    };
    ModelParams p;
    switch (v) {
      case Variant::Svm:
        need(o_c);
        p = SvmParams{c};
        break;
      case Variant::Odml:
        need(o_c), need(o_l1), need(o_l2);
        p = OdmlParams{c, lambda1, lambda2};
        break;
      case Variant::Odm:
        need(o_c1), need(o_c2), need(o_d);
        p = OdmParams{c1, c2, d};
        break;
    }
    try {
      validate(p);
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
    return p;
  }

  /// Given parameters pin the corresponding grid list to a single value.
  void pin(Variant v, GridSpec& g) const {
    check_foreign(v);
    if (given(o_c)) g.C = {c};
    if (given(o_l1)) g.lambda1 = {lambda1};
    if (given(o_l2)) g.lambda2 = {lambda2};
    if (given(o_c1)) g.C1 = {c1};
    if (given(o_c2)) g.C2 = {c2};
    if (given(o_d)) g.D = {d};
  }
};

inline Dataset load_training(const std::string& path) {
  Dataset d = read_libsvm_file(path);
  require_trainable(d);
  return d;
}

inline std::string describe(const ModelParams& p) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, SvmParams>) return "C=" + fmt(v.C);
        else if constexpr (std::is_same_v<T, OdmlParams>)
          return "C=" + fmt(v.C) + " lambda1=" + fmt(v.lambda1) + " lambda2=" + fmt(v.lambda2);
        else return "C1=" + fmt(v.C1) + " C2=" + fmt(v.C2) + " D=" + fmt(v.D);
      },
      p);
}

inline void report(std::ostream& out, const TrainedModel& m) {
  out << "objective " << fmt(m.objective) << "\n"
      << "support_vectors " << m.support.size() << "\n"
      << "converged " << (m.converged ? "yes" : "no") << "\n"
      << "passes " << m.passes << "\n";
}

}  // namespace detail

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

// ---------------------------------------------------------------------------
// Subcommands

struct TrainFlags {
  std::string input, variant, kernel = "linear", model_out, solver = "dcd", grid = "coarse", snapshot = "random";
  detail::ParamFlags params;
  double width = 0, tol = 1e-6, eta = 0.01, cv_tol = 1e-3;
  CLI::Option* o_width = nullptr;
  int max_passes = 5000, stages = 50;
  std::uint64_t seed = 0;
  std::size_t folds = 5;
  bool keep_alpha = false, cv = false, no_normalize = false;
};

inline int cmd_train(const TrainFlags& f, Streams io) {
  using namespace detail;
  const Variant v = parse_variant(f.variant);
  const KernelKind kind = parse_kernel(f.kernel);
  const bool svrg = f.solver == "svrg";
  if (svrg && kind == KernelKind::Rbf) throw UsageError("--solver svrg supports only the linear kernel");
  if (svrg && f.keep_alpha) throw UsageError("--keep-alpha needs the dual solver (--solver dcd)");
  if (svrg && f.cv) throw UsageError("--cv runs the dual solver; drop --solver svrg");
  if (kind == KernelKind::Linear && ParamFlags::given(f.o_width)) throw UsageError("--width applies to the rbf kernel only");
  if (ParamFlags::given(f.o_width) && !(f.width > 0.0)) throw UsageError("--width must be positive");

  std::optional<ModelParams> params;
  if (!f.cv) params = f.params.require(v);

  const Dataset d = load_training(f.input);

  if (svrg) {
    SvrgOptions o;
    o.eta = f.eta;
    o.stages = f.stages;
    o.seed = f.seed;
    o.snapshot_rule = f.snapshot == "last" ? SnapshotRule::LastIterate : SnapshotRule::RandomIterate;
    o.normalize = !f.no_normalize;
    const LinearModel m = svrg_train(d, *params, o);
    save_model_file(f.model_out, m);
    io.out << "objective " << fmt(m.objective) << "\n"
           << "nonzero_weights " << (m.w.array() != 0.0).count() << "\n"
           << "stages " << m.stages << "\n";
    return kExitOk;
  }

  TrainOptions to;
  to.solver = {f.tol, f.max_passes, f.seed, true};
  to.normalize = !f.no_normalize;
  to.keep_alpha = f.keep_alpha;

  TrainedModel m;
  if (f.cv) {
    GridSpec g = parse_grid(f.grid);
    f.params.pin(v, g);
    if (ParamFlags::given(f.o_width)) g.widths = {f.width};
    CvOptions co;
    co.folds = f.folds;
    co.seed = f.seed;
    co.solver = {f.cv_tol, f.max_passes, f.seed, true};
    co.normalize = to.normalize;
    auto r = cv_train(d, v, kind, g, co, to);
    io.out << "cv_best " << describe(r.cv.winner().params);
    if (kind == KernelKind::Rbf) io.out << " width=" << fmt(r.cv.winner().kernel.width);
    io.out << " accuracy=" << fmt(r.cv.winner().mean_accuracy) << "\n";
    m = std::move(r.model);
  } else {
    KernelSpec k = KernelSpec::linear();
    if (kind == KernelKind::Rbf) {
      double w = f.width;
      if (!ParamFlags::given(f.o_width)) {
        const Dataset nd = to.normalize ? Normalizer::fit(d).apply(d) : d;
        w = avg_pairwise_distance(nd);
        if (!(w > 0.0)) throw Error("all training instances coincide; pass --width explicitly");
        io.out << "width " << fmt(w) << " (average pairwise distance)\n";
      }
      k = KernelSpec::rbf(w);
    }
    m = train_kernel(d, k, *params, to);
  }
  save_model_file(f.model_out, m);
  report(io.out, m);
  if (!m.converged) io.err << "warning: solver stopped at --max-passes before reaching --tol\n";
  return kExitOk;
}

struct PredictFlags {
  std::string model, input, output;
};

inline int cmd_predict(const PredictFlags& f, Streams io) {
  const AnyModel model = load_model_file(f.model);
  std::ifstream in(f.input);
  if (!in) throw Error("cannot open input '" + f.input + "'");
  const ParsedInput pi = parse_libsvm_input(in);
  std::ofstream out(f.output);
  if (!out) throw Error("cannot write '" + f.output + "'");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pi.data.size(); ++i) {
    const int label = predict(model, pi.data.instances[i]).label;
    out << label << '\n';
    if (label == pi.data.labels[i]) ++correct;
  }
  if (!out) throw Error("failed writing '" + f.output + "'");
  if (pi.labeled && !pi.data.empty())
    io.out << "accuracy " << detail::fmt(static_cast<double>(correct) / static_cast<double>(pi.data.size())) << " ("
           << correct << "/" << pi.data.size() << ")\n";
  return kExitOk;
}

struct CvFlags {
  std::string input, variant, kernel = "linear", grid = "coarse", model_out;
  detail::ParamFlags params;
  double width = 0, tol = 1e-3;
  CLI::Option* o_width = nullptr;
  int max_passes = 2000;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  bool no_normalize = false;
};

inline int cmd_cv(const CvFlags& f, Streams io) {
  using namespace detail;
  const Variant v = parse_variant(f.variant);
  const KernelKind kind = parse_kernel(f.kernel);
  GridSpec g = parse_grid(f.grid);
  f.params.pin(v, g);
  if (ParamFlags::given(f.o_width)) {
    if (kind != KernelKind::Rbf) throw UsageError("--width applies to the rbf kernel only");
    g.widths = {f.width};
  }
  try {
    (void)param_grid(v, g);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const Dataset d = load_training(f.input);
  CvOptions co;
  co.folds = f.folds;
  co.seed = f.seed;
  co.solver = {f.tol, f.max_passes, f.seed, true};
  co.normalize = !f.no_normalize;
  TrainOptions to;
  to.solver = {1e-6, 5000, f.seed, true};
  auto r = cv_train(d, v, kind, g, co, to);
  for (std::size_t i = 0; i < r.cv.points.size(); ++i) {
    const auto& p = r.cv.points[i];
    io.out << (i == r.cv.best ? "* " : "  ") << describe(p.params);
    if (kind == KernelKind::Rbf) io.out << " width=" << fmt(p.kernel.width);
    io.out << " accuracy=" << fmt(p.mean_accuracy) << "\n";
  }
  io.out << "best " << describe(r.cv.winner().params) << " accuracy=" << fmt(r.cv.winner().mean_accuracy) << "\n";
  if (!f.model_out.empty()) {
    save_model_file(f.model_out, r.model);
    report(io.out, r.model);
  }
  return kExitOk;
}

struct MarginsFlags {
  std::string model, input, output;
};

inline int cmd_margins(const MarginsFlags& f, Streams io) {
  const AnyModel model = load_model_file(f.model);
  const Dataset d = read_libsvm_file(f.input);
  if (d.empty()) throw Error("margins need at least one labeled instance");
  const MarginReport r = std::visit([&](const auto& m) { return margin_report(m, d); }, model);
  if (r.zero_norm) throw Error("model has zero weight norm; normalized margins are undefined");
  std::ofstream out(f.output);
  if (!out) throw Error("cannot write '" + f.output + "'");
  write_margin_curve_csv(out, r);
  io.out << "margin_mean " << detail::fmt(r.mean) << "\n"
         << "margin_variance " << detail::fmt(r.variance) << "\n"
         << "weight_norm " << detail::fmt(r.weight_norm) << "\n";
  return kExitOk;
}

struct LooFlags {
  std::string model, input;
  bool exact = false;
  std::size_t max_m = 200;
};

inline int cmd_loo_bound(const LooFlags& f, Streams io) {
  using detail::fmt;
  if (f.exact && f.input.empty()) throw UsageError("--exact needs --input with the training data");
  const AnyModel any = load_model_file(f.model);
  const auto* model = std::get_if<TrainedModel>(&any);
  if (!model || !model->bound_data) throw Error("model carries no dual solution; retrain with --keep-alpha");
  const LooBoundReport r = loo_bound(*model);
  io.out << "variant " << to_string(r.variant) << "\n" << "m " << r.m << "\n";
  if (r.variant == Variant::Odm) {
    io.out << "zeta_sum " << fmt(r.first_sum) << " (" << r.first_count << " positive)\n"
           << "beta_sum " << fmt(r.second_sum) << " (" << r.second_count << " positive)\n"
           << "d_term " << fmt(r.d_term) << "\n";
  } else {
    io.out << "free_sum " << fmt(r.first_sum) << " (" << r.first_count << " free)\n"
           << "at_bound " << r.second_count << "\n";
  }
  io.out << "bound " << fmt(r.bound_value) << "\n";
  if (!f.exact) return kExitOk;

  const Dataset d = detail::load_training(f.input);
  if (d.size() > f.max_m)
    throw UsageError("--exact retrains m = " + std::to_string(d.size()) + " times; raise --max-m (now " +
                     std::to_string(f.max_m) + ") to allow it");
  if (d.size() != model->m_train)
    throw Error("--input has " + std::to_string(d.size()) + " instances but the model was trained on " +
                std::to_string(model->m_train));
  TrainOptions to;
  to.normalize = !model->normalizer.is_identity();
  const std::size_t errors = loo_exact(d, [&](const Dataset& s) { return train_kernel(s, model->kernel, model->params, to); });
  const double rate = static_cast<double>(errors) / static_cast<double>(d.size());
  io.out << "loo_errors " << errors << "\n" << "loo_rate " << fmt(rate) << "\n";
  io.out << "ratio " << (errors ? fmt(r.bound_value / rate) : std::string("inf")) << "\n";
  return kExitOk;
}

struct BenchFlags {
  std::string datasets, methods = "svm,odml,odm", kernel = "linear", grid = "coarse", output, timing = "on";
  int repeats = 30;
  std::uint64_t seed = 0;
  std::size_t folds = 5;
};

inline int cmd_bench(const BenchFlags& f, Streams io) {
  namespace fs = std::filesystem;
  BenchOptions o;
  o.methods.clear();
  std::stringstream ms(f.methods);
  for (std::string tok; std::getline(ms, tok, ',');) {
    if (tok.empty()) continue;
    const Variant v = detail::parse_variant(tok);
    if (std::find(o.methods.begin(), o.methods.end(), v) == o.methods.end()) o.methods.push_back(v);
  }
  if (o.methods.empty()) throw UsageError("--methods is empty");
  o.kernel = detail::parse_kernel(f.kernel);
  o.grid = detail::parse_grid(f.grid);
  if (f.repeats < 1) throw UsageError("--repeats must be at least 1");
  o.repeats = f.repeats;
  o.seed = f.seed;
  o.cv.folds = f.folds;
  o.timing = f.timing == "on";

  if (!fs::is_directory(f.datasets)) throw Error("'" + f.datasets + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(f.datasets))
    if (e.is_regular_file() && e.path().filename().string().front() != '.') files.push_back(e.path());
  std::sort(files.begin(), files.end());

  std::vector<BenchResult> rows;
  for (const auto& p : files) {
    Dataset d;
    try {
      d = read_libsvm_file(p.string());
      require_trainable(d);
    } catch (const Error& e) {
      io.err << "warning: skipping " << p.filename().string() << ": " << e.what() << "\n";
      continue;
    }
    io.err << "bench " << p.filename().string() << " (m=" << d.size() << ", d=" << d.dim << ")\n";
    auto part = bench_dataset(p.filename().string(), d, o);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  if (rows.empty()) throw Error("no readable dataset in '" + f.datasets + "'");

  if (f.output.empty()) {
    write_bench_csv(io.out, rows);
  } else {
    std::ofstream out(f.output);
    if (!out) throw Error("cannot write '" + f.output + "'");
    write_bench_csv(out, rows);
    write_bench_table(io.out, rows);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, Streams io) {
  CLI::App app{"Optimal margin distribution machines: training, evaluation and benchmarks", "odm"};
  app.require_subcommand(1);

  const std::vector<std::string> variants{"svm", "odml", "odm"}, kernels{"linear", "rbf"}, grids{"coarse", "full"};

  TrainFlags tf;
  auto* train = app.add_subcommand("train", "train a model on a LIBSVM file");
  train->add_option("--input", tf.input, "training data (LIBSVM format)")->required();
  train->add_option("--variant", tf.variant, "svm | odml | odm")->required()->check(CLI::IsMember(variants));
  train->add_option("--kernel", tf.kernel, "linear | rbf")->check(CLI::IsMember(kernels))->capture_default_str();
  train->add_option("--model-out", tf.model_out, "where to write the model")->required();
  tf.params.add(train);
  tf.o_width = train->add_option("--width", tf.width, "RBF width (default: average pairwise distance)");
  train->add_option("--solver", tf.solver, "dcd | svrg")->check(CLI::IsMember({"dcd", "svrg"}))->capture_default_str();
  train->add_option("--tol", tf.tol, "DCD projected-gradient tolerance")->capture_default_str();
  train->add_option("--max-passes", tf.max_passes, "DCD pass limit")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--eta", tf.eta, "SVRG step size")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--stages", tf.stages, "SVRG stages")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--snapshot", tf.snapshot, "SVRG snapshot rule: random | last")
      ->check(CLI::IsMember({"random", "last"}))
      ->capture_default_str();
  train->add_option("--seed", tf.seed, "random seed")->capture_default_str();
  train->add_flag("--keep-alpha", tf.keep_alpha, "store the dual solution (needed by loo-bound)");
  train->add_flag("--cv", tf.cv, "select missing parameters by cross validation");
  train->add_option("--grid", tf.grid, "grid for --cv: coarse | full")->check(CLI::IsMember(grids))->capture_default_str();
  train->add_option("--folds", tf.folds, "folds for --cv")->check(CLI::Range(2, 1000))->capture_default_str();
  train->add_option("--cv-tol", tf.cv_tol, "DCD tolerance inside --cv")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_flag("--no-normalize", tf.no_normalize, "skip the [0,1] feature scaling");

  PredictFlags pf;
  auto* pred = app.add_subcommand("predict", "label instances with a saved model");
  pred->add_option("--model", pf.model, "model file")->required();
  pred->add_option("--input", pf.input, "instances (labels optional)")->required();
  pred->add_option("--output", pf.output, "one predicted label per line")->required();

  CvFlags cf;
  auto* cv = app.add_subcommand("cv", "grid search by k-fold cross validation");
  cv->add_option("--input", cf.input, "training data")->required();
  cv->add_option("--variant", cf.variant, "svm | odml | odm")->required()->check(CLI::IsMember(variants));
  cv->add_option("--kernel", cf.kernel, "linear | rbf")->check(CLI::IsMember(kernels))->capture_default_str();
  cv->add_option("--grid", cf.grid, "coarse | full")->check(CLI::IsMember(grids))->capture_default_str();
  cf.params.add(cv);
  cf.o_width = cv->add_option("--width", cf.width, "fix the RBF width")->check(CLI::PositiveNumber);
  cv->add_option("--folds", cf.folds, "number of folds")->check(CLI::Range(2, 1000))->capture_default_str();
  cv->add_option("--seed", cf.seed, "random seed")->capture_default_str();
  cv->add_option("--tol", cf.tol, "DCD tolerance per fold")->check(CLI::PositiveNumber)->capture_default_str();
  cv->add_option("--max-passes", cf.max_passes, "DCD pass limit")->check(CLI::PositiveNumber)->capture_default_str();
  cv->add_option("--model-out", cf.model_out, "retrain the winner on all data and save it");
  cv->add_flag("--no-normalize", cf.no_normalize, "skip the [0,1] feature scaling");

  MarginsFlags mf;
  auto* mar = app.add_subcommand("margins", "export the cumulative margin distribution as CSV");
  mar->add_option("--model", mf.model, "model file")->required();
  mar->add_option("--input", mf.input, "labeled instances")->required();
  mar->add_option("--output", mf.output, "CSV path")->required();

  LooFlags lf;
  auto* loo = app.add_subcommand("loo-bound", "leave-one-out error bound of a model trained with --keep-alpha");
  loo->add_option("--model", lf.model, "model file")->required();
  loo->add_option("--input", lf.input, "training data (for --exact)");
  loo->add_flag("--exact", lf.exact, "also count leave-one-out errors by retraining");
  loo->add_option("--max-m", lf.max_m, "refuse --exact above this many instances")->capture_default_str();

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "repeated half/half splits with cross-validated parameters");
  bench->add_option("--datasets", bf.datasets, "directory of LIBSVM files")->required();
  bench->add_option("--methods", bf.methods, "comma-separated subset of svm,odml,odm")->capture_default_str();
  bench->add_option("--kernel", bf.kernel, "linear | rbf")->check(CLI::IsMember(kernels))->capture_default_str();
  bench->add_option("--repeats", bf.repeats, "random splits per dataset")->capture_default_str();
  bench->add_option("--seed", bf.seed, "base seed; repeat r uses seed + r")->capture_default_str();
  bench->add_option("--grid", bf.grid, "coarse | full")->check(CLI::IsMember(grids))->capture_default_str();
  bench->add_option("--folds", bf.folds, "cross-validation folds")->check(CLI::Range(2, 1000))->capture_default_str();
  bench->add_option("--output", bf.output, "CSV path (default: standard output)");
  bench->add_option("--timing", bf.timing, "on | off (off writes 0 seconds)")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    io.out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    io.err << "error: " << e.what() << "\n";
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) io.err << sub->help();
    else io.err << app.help();
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(tf, io);
    if (*pred) return cmd_predict(pf, io);
    if (*cv) return cmd_cv(cf, io);
    if (*mar) return cmd_margins(mf, io);
    if (*loo) return cmd_loo_bound(lf, io);
    return cmd_bench(bf, io);
  } catch (const UsageError& e) {
    io.err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace odm::cli

#pragma once

// Line-oriented model files.
//
//   format_version 1
//   model_type kernel|linear
//   variant svm|odml|odm
//   <parameter lines: C | C lambda1 lambda2 | C1 C2 D>
//   kernel linear|rbf, width <w>               (kernel models)
//   m_train, m_support, converged, objective   (kernel models)
//   dim, objective, stages                     (linear models)
//   normalizer_dim <n>, then `range <j> <min> <max>` per feature
//   alpha <v> / diag <v>                       (optional, in order)
//   theta <theta_i> <idx:val ...>              (kernel: one per support vector)
//   w <idx> <value>                            (linear: nonzero weights)
//
// Reals are written with 17 significant digits so a reload is bit-exact.

#include <Eigen/Dense>

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "odm/data.hpp"
#include "odm/dual.hpp"
#include "odm/error.hpp"
#include "odm/linear.hpp"

namespace odm {

inline constexpr int kModelFormatVersion = 1;

using AnyModel = std::variant<TrainedModel, LinearModel>;

namespace detail {

inline void write_params(std::ostream& out, const ModelParams& params) {
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SvmParams>) {
          out << "C " << format_real(p.C) << '\n';
        } else if constexpr (std::is_same_v<T, OdmlParams>) {
          out << "C " << format_real(p.C) << '\n'
              << "lambda1 " << format_real(p.lambda1) << '\n'
              << "lambda2 " << format_real(p.lambda2) << '\n';
        } else {
          out << "C1 " << format_real(p.C1) << '\n'
              << "C2 " << format_real(p.C2) << '\n'
              << "D " << format_real(p.D) << '\n';
        }
      },
      params);
}

inline void write_normalizer(std::ostream& out, const Normalizer& n) {
  out << "normalizer_dim " << n.dim() << '\n';
  int j = 1;
  for (const auto& r : n.ranges()) out << "range " << j++ << ' ' << format_real(r.min) << ' ' << format_real(r.max) << '\n';
}

}  // namespace detail

inline void save_model(std::ostream& out, const TrainedModel& m) {
  out << "format_version " << kModelFormatVersion << '\n'
      << "model_type kernel\n"
      << "variant " << to_string(m.variant()) << '\n'
      << "kernel " << to_string(m.kernel.kind) << '\n'
      << "width " << format_real(m.kernel.width) << '\n';
  detail::write_params(out, m.params);
  out << "m_train " << m.m_train << '\n'
      << "m_support " << m.support.size() << '\n'
      << "converged " << (m.converged ? 1 : 0) << '\n'
      << "objective " << format_real(m.objective) << '\n'
      << "passes " << m.passes << '\n';
  detail::write_normalizer(out, m.normalizer);
  if (m.bound_data) {
    for (double a : m.bound_data->alpha) out << "alpha " << format_real(a) << '\n';
    for (double h : m.bound_data->diag) out << "diag " << format_real(h) << '\n';
  }
  for (std::size_t i = 0; i < m.support.size(); ++i) {
    out << "theta " << format_real(m.theta[i]);
    if (!m.support[i].empty()) out << ' ' << format_entries(m.support[i]);
    out << '\n';
  }
}

inline void save_model(std::ostream& out, const LinearModel& m) {
  out << "format_version " << kModelFormatVersion << '\n'
      << "model_type linear\n"
      << "variant " << to_string(m.variant()) << '\n';
  detail::write_params(out, m.params);
  out << "dim " << m.w.size() << '\n'
      << "objective " << format_real(m.objective) << '\n'
      << "stages " << m.stages << '\n';
  detail::write_normalizer(out, m.normalizer);
  for (Eigen::Index j = 0; j < m.w.size(); ++j)
    if (m.w(j) != 0.0) out << "w " << (j + 1) << ' ' << format_real(m.w(j)) << '\n';
}

inline void save_model(std::ostream& out, const AnyModel& m) {
  std::visit([&](const auto& v) { save_model(out, v); }, m);
}

template <class Model>
void save_model_file(const std::string& path, const Model& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file '" + path + "'");
  save_model(out, m);
  if (!out) throw Error("failed writing model file '" + path + "'");
}

inline AnyModel load_model(std::istream& in) {
  std::map<std::string, std::string> header;
  std::vector<Normalizer::Range> ranges;
  std::vector<double> alpha, diag;
  std::vector<SparseVector> support;
  std::vector<double> theta;
  std::vector<std::pair<long long, double>> weights;

  auto fail = [](std::size_t lineno, const std::string& what) -> ModelFormatError {
    return ModelFormatError("model file line " + std::to_string(lineno) + ": " + what);
  };
  auto real = [&](std::string_view s, std::size_t lineno) {
    double v;
    if (!detail::parse_double(s, v)) throw fail(lineno, "bad number '" + std::string(s) + "'");
    return v;
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    const std::string key(tok[0]);
    if (key == "range") {
      if (tok.size() != 4) throw fail(lineno, "range needs index, min, max");
      long long j;
      if (!detail::parse_int(tok[1], j) || j != static_cast<long long>(ranges.size()) + 1)
        throw fail(lineno, "range indices must be consecutive from 1");
      ranges.push_back({real(tok[2], lineno), real(tok[3], lineno)});
    } else if (key == "alpha" || key == "diag") {
      if (tok.size() != 2) throw fail(lineno, key + " needs one value");
      (key == "alpha" ? alpha : diag).push_back(real(tok[1], lineno));
    } else if (key == "theta") {
      if (tok.size() < 2) throw fail(lineno, "theta needs a coefficient");
      theta.push_back(real(tok[1], lineno));
      std::string rest;
      for (std::size_t k = 2; k < tok.size(); ++k) {
        rest += ' ';
        rest += tok[k];
      }
      try {
        auto pl = detail::parse_line(rest, lineno, true);
        support.push_back(pl ? std::move(pl->x) : SparseVector{});
      } catch (const ParseError& e) {
        throw ModelFormatError(std::string("model file: ") + e.what());
      }
    } else if (key == "w") {
      long long j;
      if (tok.size() != 3 || !detail::parse_int(tok[1], j) || j < 1) throw fail(lineno, "w needs index and value");
      weights.emplace_back(j, real(tok[2], lineno));
    } else {
      if (tok.size() != 2) throw fail(lineno, "expected '<key> <value>'");
      if (!header.emplace(key, std::string(tok[1])).second) throw fail(lineno, "duplicate key '" + key + "'");
    }
  }

  auto get = [&](const std::string& k) -> const std::string& {
    auto it = header.find(k);
    if (it == header.end()) throw ModelFormatError("model file lacks '" + k + "'");
    return it->second;
  };
  auto get_real = [&](const std::string& k) { return real(get(k), 0); };
  auto get_int = [&](const std::string& k) {
    long long v;
    if (!detail::parse_int(get(k), v) || v < 0) throw ModelFormatError("model file: bad integer for '" + k + "'");
    return v;
  };

  if (get("format_version") != std::to_string(kModelFormatVersion))
    throw ModelFormatError("unsupported model format_version " + get("format_version"));

  ModelParams params;
  const auto& var = get("variant");
  if (var == "svm") params = SvmParams{get_real("C")};
  else if (var == "odml") params = OdmlParams{get_real("C"), get_real("lambda1"), get_real("lambda2")};
  else if (var == "odm") params = OdmParams{get_real("C1"), get_real("C2"), get_real("D")};
  else throw ModelFormatError("unknown variant '" + var + "'");
  try {
    validate(params);
  } catch (const InvalidArgument& e) {
    throw ModelFormatError(std::string("model file: ") + e.what());
  }

  if (get_int("normalizer_dim") != static_cast<long long>(ranges.size()))
    throw ModelFormatError("normalizer_dim disagrees with the number of range lines");
  Normalizer norm(std::move(ranges));

  const auto& type = get("model_type");
  if (type == "kernel") {
    TrainedModel m;
    m.params = params;
    const auto& k = get("kernel");
    if (k == "linear") m.kernel = KernelSpec::linear();
    else if (k == "rbf") m.kernel = KernelSpec::rbf(get_real("width"));
    else throw ModelFormatError("unknown kernel '" + k + "'");
    m.normalizer = std::move(norm);
    m.m_train = static_cast<std::size_t>(get_int("m_train"));
    m.converged = get_int("converged") != 0;
    m.objective = get_real("objective");
    m.passes = static_cast<int>(get_int("passes"));
    if (get_int("m_support") != static_cast<long long>(support.size()))
      throw ModelFormatError("m_support disagrees with the number of theta lines");
    m.support = std::move(support);
    m.theta = std::move(theta);
    if (!alpha.empty() || !diag.empty()) {
      const std::size_t n = m.variant() == Variant::Odm ? 2 * m.m_train : m.m_train;
      if (alpha.size() != n || diag.size() != m.m_train)
        throw ModelFormatError("alpha/diag line counts do not match m_train");
      m.bound_data = BoundData{std::move(alpha), std::move(diag)};
    }
    return m;
  }
  if (type == "linear") {
    LinearModel m;
    m.params = params;
    m.normalizer = std::move(norm);
    const auto dim = get_int("dim");
    m.w = Eigen::VectorXd::Zero(dim);
    for (auto [j, v] : weights) {
      if (j > dim) throw ModelFormatError("weight index beyond dim");
      m.w(j - 1) = v;
    }
    m.objective = get_real("objective");
    m.stages = static_cast<int>(get_int("stages"));
    return m;
  }
  throw ModelFormatError("unknown model_type '" + type + "'");
}

inline AnyModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file '" + path + "'");
  return load_model(in);
}

inline Prediction predict(const AnyModel& m, const SparseVector& raw) {
  return std::visit([&](const auto& v) { return predict(v, raw); }, m);
}

}  // namespace odm

#pragma once

// Sparse instances, LIBSVM text I/O, [0,1] feature scaling, and seeded
// partitioning (hold-out splits and k-fold).

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "odm/error.hpp"

namespace odm {

struct Entry {
  int index;  // 1-based feature index
  double value;

  friend bool operator==(const Entry&, const Entry&) = default;
};

/// Sparse feature vector with strictly increasing indices and finite values.
class SparseVector {
public:
  SparseVector() = default;

  explicit SparseVector(std::vector<Entry> entries) : entries_(std::move(entries)) {
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      if (entries_[k].index < 1) throw InvalidArgument("feature indices must be positive");
      if (!std::isfinite(entries_[k].value)) throw InvalidArgument("feature values must be finite");
      if (k > 0 && entries_[k].index <= entries_[k - 1].index)
        throw InvalidArgument("feature indices must be strictly increasing");
    }
  }

  std::span<const Entry> entries() const noexcept { return entries_; }
  std::size_t nnz() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  int max_index() const noexcept { return entries_.empty() ? 0 : entries_.back().index; }

  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

private:
  std::vector<Entry> entries_;
};

inline double dot(const SparseVector& a, const SparseVector& b) {
  double s = 0.0;
  auto ia = a.begin(), ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->index == ib->index) {
      s += ia->value * ib->value;
      ++ia;
      ++ib;
    } else if (ia->index < ib->index) {
      ++ia;
    } else {
      ++ib;
    }
  }
  return s;
}

inline double squared_norm(const SparseVector& a) {
  double s = 0.0;
  for (const auto& e : a) s += e.value * e.value;
  return s;
}

/// ||a - b||^2 by merging; avoids the cancellation of ||a||^2 + ||b||^2 - 2ab.
inline double squared_distance(const SparseVector& a, const SparseVector& b) {
  double s = 0.0;
  auto ia = a.begin(), ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    double d;
    if (ib == b.end() || (ia != a.end() && ia->index < ib->index)) {
      d = ia->value;
      ++ia;
    } else if (ia == a.end() || ib->index < ia->index) {
      d = ib->value;
      ++ib;
    } else {
      d = ia->value - ib->value;
      ++ia;
      ++ib;
    }
    s += d * d;
  }
  return s;
}

/// Labeled sample set. labels[i] is +1 or -1; dim is the largest feature index seen.
struct Dataset {
  std::vector<SparseVector> instances;
  std::vector<int> labels;
  int dim = 0;

  std::size_t size() const noexcept { return instances.size(); }
  bool empty() const noexcept { return instances.empty(); }

  void push_back(SparseVector x, int y) {
    if (y != 1 && y != -1) throw InvalidArgument("labels must be +1 or -1");
    dim = std::max(dim, x.max_index());
    instances.push_back(std::move(x));
    labels.push_back(y);
  }

  bool has_both_classes() const {
    bool pos = false, neg = false;
    for (int y : labels) (y > 0 ? pos : neg) = true;
    return pos && neg;
  }

  /// Instances at the given positions, in the given order. dim is inherited.
  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset out;
    out.instances.reserve(idx.size());
    out.labels.reserve(idx.size());
    for (auto i : idx) {
      out.instances.push_back(instances.at(i));
      out.labels.push_back(labels.at(i));
    }
    out.dim = dim;
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Throws unless the set is usable for training.
inline void require_trainable(const Dataset& d) {
  if (d.empty()) throw InvalidArgument("training set is empty");
  if (d.instances.size() != d.labels.size()) throw InvalidArgument("instance/label count mismatch");
  if (!d.has_both_classes()) throw InvalidArgument("training set must contain both classes");
}

// ---------------------------------------------------------------------------
// LIBSVM text format

namespace detail {

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

inline bool parse_int(std::string_view s, long long& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

struct ParsedLine {
  std::optional<int> label;
  SparseVector x;
};

inline std::optional<ParsedLine> parse_line(std::string_view line, std::size_t lineno,
                                            bool label_optional) {
  if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
  auto tokens = split_ws(line);
  if (tokens.empty()) return std::nullopt;

  ParsedLine out;
  std::size_t first = 0;
  if (tokens[0].find(':') == std::string_view::npos) {
    double lv;
    if (!parse_double(tokens[0], lv)) throw ParseError(lineno, "malformed label '" + std::string(tokens[0]) + "'");
    if (lv == 1.0) out.label = 1;
    else if (lv == -1.0 || lv == 0.0) out.label = -1;
    else throw ParseError(lineno, "unsupported label '" + std::string(tokens[0]) + "'");
    first = 1;
  } else if (!label_optional) {
    throw ParseError(lineno, "missing label");
  }

  std::vector<Entry> entries;
  entries.reserve(tokens.size() - first);
  for (std::size_t k = first; k < tokens.size(); ++k) {
    auto tok = tokens[k];
    auto colon = tok.find(':');
    if (colon == std::string_view::npos)
      throw ParseError(lineno, "malformed token '" + std::string(tok) + "'");
    long long idx;
    double val;
    if (!parse_int(tok.substr(0, colon), idx) || idx < 1 || idx > INT32_MAX)
      throw ParseError(lineno, "malformed index in '" + std::string(tok) + "'");
    if (!parse_double(tok.substr(colon + 1), val))
      throw ParseError(lineno, "malformed value in '" + std::string(tok) + "'");
    if (!std::isfinite(val)) throw ParseError(lineno, "non-finite value in '" + std::string(tok) + "'");
    if (!entries.empty() && idx <= entries.back().index)
      throw ParseError(lineno, "non-ascending index " + std::to_string(idx));
    entries.push_back({static_cast<int>(idx), val});
  }
  out.x = SparseVector(std::move(entries));
  return out;
}

}  // namespace detail

/// Instances read from a file whose labels may be absent (prediction input).
struct ParsedInput {
  Dataset data;  // labels are +1 placeholders when !labeled
  bool labeled = true;
};

/// Parses LIBSVM text where every line must carry a label.
/// Blank lines are skipped and '#' starts a comment.
inline Dataset parse_libsvm(std::istream& in) {
  Dataset d;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto pl = detail::parse_line(line, lineno, false);
    if (pl) d.push_back(std::move(pl->x), *pl->label);
  }
  return d;
}

inline Dataset parse_libsvm(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in);
}

/// Like parse_libsvm but accepts files with no labels at all. Mixing labeled and
/// unlabeled lines is an error.
inline ParsedInput parse_libsvm_input(std::istream& in) {
  ParsedInput out;
  std::optional<bool> labeled;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto pl = detail::parse_line(line, lineno, true);
    if (!pl) continue;
    bool has = pl->label.has_value();
    if (labeled && *labeled != has) throw ParseError(lineno, "labeled and unlabeled lines are mixed");
    labeled = has;
    out.data.push_back(std::move(pl->x), pl->label.value_or(1));
  }
  out.labeled = labeled.value_or(true);
  return out;
}

inline Dataset read_libsvm_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return parse_libsvm(in);
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// "idx:val idx:val ..." with round-trip precision.
inline std::string format_entries(const SparseVector& x) {
  std::string s;
  for (const auto& e : x) {
    if (!s.empty()) s += ' ';
    s += std::to_string(e.index);
    s += ':';
    s += format_real(e.value);
  }
  return s;
}

inline std::string to_libsvm(const Dataset& d) {
  std::string out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    out += d.labels[i] > 0 ? "+1" : "-1";
    if (!d.instances[i].empty()) {
      out += ' ';
      out += format_entries(d.instances[i]);
    }
    out += '\n';
  }
  return out;
}

/// Appends a constant feature at index dim+1 so that a bias-free model can learn an offset.
inline Dataset with_constant_feature(const Dataset& d, double value = 1.0) {
  Dataset out;
  const int idx = d.dim + 1;
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<Entry> e(d.instances[i].begin(), d.instances[i].end());
    e.push_back({idx, value});
    out.push_back(SparseVector(std::move(e)), d.labels[i]);
  }
  out.dim = idx;
  return out;
}

// ---------------------------------------------------------------------------
// Feature scaling

/// Per-feature affine map onto [0,1] learned from a training set. Absent
/// features count as 0. Constant features map to 0; features beyond the
/// fitted dimension pass through untouched, and nothing is clipped.
class Normalizer {
public:
  struct Range {
    double min;
    double max;
  };

  Normalizer() = default;
  explicit Normalizer(std::vector<Range> ranges) : ranges_(std::move(ranges)) {
    for (const auto& r : ranges_)
      if (!(r.min <= r.max)) throw InvalidArgument("normalizer range has min > max");
  }

  static Normalizer fit(const Dataset& train) {
    if (train.empty()) throw InvalidArgument("cannot fit a normalizer on an empty set");
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<Range> r(static_cast<std::size_t>(train.dim), Range{inf, -inf});
    std::vector<std::size_t> seen(r.size(), 0);
    for (const auto& x : train.instances) {
      for (const auto& e : x) {
        auto j = static_cast<std::size_t>(e.index - 1);
        r[j].min = std::min(r[j].min, e.value);
        r[j].max = std::max(r[j].max, e.value);
        ++seen[j];
      }
    }
    // Instances lacking feature j hold an implicit 0.
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (seen[j] == train.size()) continue;
      r[j].min = std::min(r[j].min, 0.0);
      r[j].max = std::max(r[j].max, 0.0);
    }
    return Normalizer(std::move(r));
  }

  bool is_identity() const noexcept { return ranges_.empty(); }
  int dim() const noexcept { return static_cast<int>(ranges_.size()); }
  std::span<const Range> ranges() const noexcept { return ranges_; }

  double map(int index, double v) const {
    if (index > dim()) return v;
    const auto& r = ranges_[static_cast<std::size_t>(index - 1)];
    if (r.max == r.min) return 0.0;
    return (v - r.min) / (r.max - r.min);
  }

  SparseVector apply(const SparseVector& x) const {
    if (is_identity()) return x;
    std::vector<Entry> out;
    auto it = x.begin();
    for (int j = 1; j <= dim(); ++j) {
      double v = 0.0;
      if (it != x.end() && it->index == j) {
        v = it->value;
        ++it;
      }
      double mv = map(j, v);
      if (mv != 0.0) out.push_back({j, mv});
    }
    for (; it != x.end(); ++it) out.push_back(*it);
    return SparseVector(std::move(out));
  }

  Dataset apply(const Dataset& d) const {
    Dataset out;
    out.instances.reserve(d.size());
    for (const auto& x : d.instances) out.instances.push_back(apply(x));
    out.labels = d.labels;
    out.dim = d.dim;
    return out;
  }

private:
  std::vector<Range> ranges_;
};

inline Normalizer fit_normalizer(const Dataset& train) { return Normalizer::fit(train); }
inline Dataset apply_normalizer(const Normalizer& n, const Dataset& d) { return n.apply(d); }

// ---------------------------------------------------------------------------
// Seeded partitioning
//
// All randomness comes from std::mt19937_64 (fully specified by the standard).
// Index draws use rejection sampling and permutations use Fisher-Yates, so a
// given seed produces the same partition on every conforming toolchain.

using Rng = std::mt19937_64;

/// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return static_cast<std::size_t>(v % range);
}

inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[uniform_index(rng, i)]);
  return p;
}

struct Split {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_index;  // ascending
  std::vector<std::size_t> test_index;   // ascending
  std::optional<std::string> warning;
};

/// Random hold-out split with |train| = round(fraction * m).
inline Split split(const Dataset& d, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgument("split fraction must lie in (0,1)");
  const auto m = d.size();
  auto perm = seeded_permutation(m, seed);
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(m)));
  Split s;
  s.train_index.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test_index.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(s.train_index.begin(), s.train_index.end());
  std::sort(s.test_index.begin(), s.test_index.end());
  s.train = d.subset(s.train_index);
  s.test = d.subset(s.test_index);
  if (!s.train.has_both_classes()) s.warning = "training split contains a single class";
  return s;
}

struct FoldIndices {
  std::vector<std::size_t> train;       // ascending
  std::vector<std::size_t> validation;  // ascending
};

/// k validation folds whose sizes differ by at most one and which partition [0, m).
inline std::vector<FoldIndices> kfold_indices(std::size_t m, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("k-fold needs k >= 2");
  if (k > m) throw InvalidArgument("k-fold needs k <= m (k=" + std::to_string(k) + ", m=" + std::to_string(m) + ")");
  auto perm = seeded_permutation(m, seed);
  std::vector<FoldIndices> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t len = m / k + (f < m % k ? 1 : 0);
    auto& v = folds[f].validation;
    v.assign(perm.begin() + static_cast<std::ptrdiff_t>(pos), perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
    std::sort(v.begin(), v.end());
    pos += len;
  }
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<char> in_val(m, 0);
    for (auto i : folds[f].validation) in_val[i] = 1;
    for (std::size_t i = 0; i < m; ++i)
      if (!in_val[i]) folds[f].train.push_back(i);
  }
  return folds;
}

struct Fold {
  Dataset train;
  Dataset validation;
};

inline std::vector<Fold> kfold(const Dataset& d, std::size_t k, std::uint64_t seed) {
  std::vector<Fold> out;
  for (const auto& f : kfold_indices(d.size(), k, seed)) out.push_back({d.subset(f.train), d.subset(f.validation)});
  return out;
}

}  // namespace odm

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "odm/selection.hpp"
#include "oracles.hpp"

using namespace odm;

namespace {

GridSpec small_grid() {
  GridSpec g;
  g.C = {1, 10, 100};
  g.lambda1 = {0.0625, 0.25};
  g.lambda2 = {0.0625};
  g.C1 = {1, 16};
  g.C2 = {4};
  g.D = {0.0, 0.3};
  g.width_factors = {0.5, 2.0};
  return g;
}

}  // namespace

TEST(Grid, SizesAndOrder) {
  auto c = GridSpec::coarse();
  EXPECT_EQ(param_grid(Variant::Svm, c).size(), 3u);
  EXPECT_EQ(param_grid(Variant::Odml, c).size(), 27u);
  EXPECT_EQ(param_grid(Variant::Odm, c).size(), 27u);
  auto p = GridSpec::full();
  EXPECT_EQ(param_grid(Variant::Odm, p).size(), 11u * 11u * 6u);
  EXPECT_EQ(param_grid(Variant::Odml, p).size(), 3u * 7u * 7u);
  EXPECT_EQ(p.width_factors.size(), 5u);
  EXPECT_DOUBLE_EQ(p.D.back(), 0.5);

  auto odm = param_grid(Variant::Odm, small_grid());
  EXPECT_EQ(std::get<OdmParams>(odm.front()), (OdmParams{1, 4, 0.0}));
  EXPECT_EQ(std::get<OdmParams>(odm[1]), (OdmParams{1, 4, 0.3}));
  EXPECT_EQ(std::get<OdmParams>(odm.back()), (OdmParams{16, 4, 0.3}));

  GridSpec empty = small_grid();
  empty.C.clear();
  EXPECT_THROW(param_grid(Variant::Svm, empty), InvalidArgument);
}

TEST(Cv, TieBreaking) {
  CvPoint a{SvmParams{10}, KernelSpec::linear(), 0.8}, b{SvmParams{1}, KernelSpec::linear(), 0.8},
      c{SvmParams{100}, KernelSpec::linear(), 0.9};
  EXPECT_TRUE(cv_better(b, 1, a, 0));
  EXPECT_FALSE(cv_better(a, 0, b, 1));
  EXPECT_TRUE(cv_better(c, 2, b, 1));
  EXPECT_TRUE(cv_better(a, 0, a, 3));
  CvPoint o1{OdmParams{2, 64, 0}, KernelSpec::linear(), 0.8}, o2{OdmParams{4, 1, 0}, KernelSpec::linear(), 0.8};
  EXPECT_TRUE(cv_better(o1, 5, o2, 0));
}

TEST(Cv, WinnerIsArgmax) {
  std::mt19937_64 rng(1);
  auto d = oracle::random_dataset(60, 3, rng, 0.2);
  for (auto v : {Variant::Svm, Variant::Odml, Variant::Odm}) {
    for (auto k : {KernelKind::Linear, KernelKind::Rbf}) {
      auto r = cross_validate(d, v, k, small_grid(), {});
      const auto& w = r.winner();
      for (std::size_t i = 0; i < r.points.size(); ++i) {
        EXPECT_GE(w.mean_accuracy, r.points[i].mean_accuracy);
        if (i != r.best) {
          EXPECT_FALSE(cv_better(r.points[i], i, w, r.best));
        }
        EXPECT_GE(r.points[i].mean_accuracy, 0.0);
        EXPECT_LE(r.points[i].mean_accuracy, 1.0);
      }
      const std::size_t widths = k == KernelKind::Rbf ? 2 : 1;
      EXPECT_EQ(r.points.size(), widths * param_grid(v, small_grid()).size());
      if (k == KernelKind::Rbf) {
        EXPECT_GT(r.delta, 0.0);
      }
    }
  }
}

TEST(Cv, SinglePointGridEqualsTrain) {
  std::mt19937_64 rng(2);
  auto d = oracle::random_dataset(50, 3, rng);
  GridSpec g;
  g.C1 = {8};
  g.C2 = {2};
  g.D = {0.2};
  g.widths = {0.9};
  CvOptions co;
  TrainOptions fo;
  auto r = cv_train(d, Variant::Odm, KernelKind::Rbf, g, co, fo);
  EXPECT_EQ(r.cv.points.size(), 1u);
  auto direct = train_kernel(d, KernelSpec::rbf(0.9), OdmParams{8, 2, 0.2}, fo);
  EXPECT_EQ(r.model.theta, direct.theta);
  EXPECT_EQ(r.model.support, direct.support);
}

TEST(Cv, Deterministic) {
  std::mt19937_64 rng(3);
  auto d = oracle::random_dataset(40, 3, rng, 0.25);
  CvOptions o;
  o.seed = 17;
  auto a = cross_validate(d, Variant::Odml, KernelKind::Linear, small_grid(), o);
  auto b = cross_validate(d, Variant::Odml, KernelKind::Linear, small_grid(), o);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i].mean_accuracy, b.points[i].mean_accuracy);
  EXPECT_EQ(a.best, b.best);
}

TEST(Cv, CachedDualMatrixMatchesDirectFit) {
  // cross_validate shares one ODM^L dual matrix across C and lambda2; compare
  // against fitting every point independently.
  std::mt19937_64 rng(4);
  auto d = oracle::random_dataset(30, 3, rng, 0.2);
  CvOptions o;
  o.folds = 3;
  o.normalize = false;
  auto r = cross_validate(d, Variant::Odml, KernelKind::Linear, small_grid(), o);
  const auto folds = kfold_indices(d.size(), 3, o.seed);
  for (const auto& pt : r.points) {
    double acc = 0.0;
    for (const auto& f : folds) {
      TrainOptions t;
      t.normalize = false;
      t.solver = o.solver;
      t.support_threshold = 0.0;
      auto m = train_kernel(d.subset(f.train), pt.kernel, pt.params, t);
      acc += accuracy(m, d.subset(f.validation));
    }
    EXPECT_NEAR(pt.mean_accuracy, acc / 3.0, 1e-12);
  }
}

TEST(Bench, CvNeverSeesTestHalf) {
  std::mt19937_64 rng(5);
  auto d = oracle::random_dataset(40, 3, rng);
  for (std::uint64_t s = 0; s < 3; ++s) {
    const Split sp = split(d, 0.5, s);
    std::set<std::size_t> seen;
    cross_validate(sp.train, Variant::Svm, KernelKind::Linear, small_grid(), {},
                   [&](std::size_t, std::span<const std::size_t> tr, std::span<const std::size_t> va) {
                     seen.insert(tr.begin(), tr.end());
                     seen.insert(va.begin(), va.end());
                   });
    // Indices are rows of the training half; map them back to the full set.
    std::set<std::size_t> original;
    for (auto i : seen) original.insert(sp.train_index.at(i));
    for (auto t : sp.test_index) EXPECT_EQ(original.count(t), 0u);
    EXPECT_EQ(seen.size(), sp.train.size());
  }
}

TEST(Bench, DeterministicCsv) {
  std::mt19937_64 rng(6);
  auto d = oracle::random_dataset(40, 3, rng, 0.2);
  BenchOptions o;
  o.repeats = 3;
  o.seed = 9;
  o.timing = false;
  o.grid = small_grid();
  auto run = [&] {
    std::ostringstream s;
    auto rows = bench_dataset("toy", d, o);
    write_bench_csv(s, rows);
    return s.str();
  };
  const auto a = run();
  EXPECT_EQ(a, run());
  EXPECT_EQ(a.substr(0, a.find('\n')), "dataset,method,kernel,mean_acc,std_acc,seconds");
  EXPECT_NE(a.find("\ntoy,odm,linear,"), std::string::npos);
  EXPECT_NE(a.find(",0.000\n"), std::string::npos);
}

TEST(Bench, Statistics) {
  std::vector<double> xs{0.8, 0.9, 1.0};
  EXPECT_DOUBLE_EQ(mean_of(xs), 0.9);
  EXPECT_NEAR(sample_std(xs), 0.1, 1e-15);
  std::vector<double> one{0.7};
  EXPECT_EQ(sample_std(one), 0.0);

  BenchResult r{"heart", Variant::Odm, KernelKind::Linear, 0.8012346, 0.0212346, 12.3456, {}};
  std::ostringstream s;
  write_bench_csv(s, std::span<const BenchResult>(&r, 1));
  EXPECT_EQ(s.str(), "dataset,method,kernel,mean_acc,std_acc,seconds\nheart,odm,linear,0.801235,0.021235,12.346\n");
}

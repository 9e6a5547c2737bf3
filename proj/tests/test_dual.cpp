#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "odm/dual.hpp"
#include "odm/linear.hpp"
#include "oracles.hpp"

using namespace odm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SparseVector sv(std::vector<Entry> e) { return SparseVector(std::move(e)); }

TrainOptions raw_opts(double tol = 1e-10) {
  TrainOptions o;
  o.normalize = false;
  o.solver.tolerance = tol;
  o.solver.max_passes = 200000;
  return o;
}

Dataset two_points() {
  Dataset d;
  d.push_back(sv({{1, 2}}), 1);
  d.push_back(sv({{1, -1}}), -1);
  return d;
}

}  // namespace

TEST(SvmDual, HandExample) {
  auto d = two_points();
  MatrixXd G = gram(KernelSpec::linear(), d);
  auto p = build_svm_dual(G, d.labels, 1.0);
  MatrixXd H(2, 2);
  H << 4, 2, 2, 1;
  EXPECT_EQ(p.H, H);
  EXPECT_EQ(p.q, -VectorXd::Ones(2));
  EXPECT_EQ(p.u, VectorXd::Constant(2, 0.5));

  auto box = oracle::grid_search_qp2(H, p.q, 0.5, 0.5, 1000);
  auto fit = fit_dual(G, d.labels, SvmParams{1.0}, {1e-12, 1000, 0, true});
  EXPECT_NEAR(fit.solution.alpha(0), box(0), 1e-9);
  EXPECT_NEAR(fit.solution.alpha(1), box(1), 1e-9);
  // w = sum alpha_i y_i x_i = 0.5 * (-1) * (-1) = 0.5 on feature 1
  const double w = fit.theta(0) * 2.0 + fit.theta(1) * -1.0;
  EXPECT_NEAR(w, 0.5, 1e-9);

  auto m = train_kernel(d, KernelSpec::linear(), SvmParams{1.0}, raw_opts());
  ASSERT_EQ(m.support.size(), 1u);
  EXPECT_NEAR(m.theta[0], -0.5, 1e-9);
  auto a = predict(m, sv({{1, 2}}));
  EXPECT_NEAR(a.decision, 1.0, 1e-9);
  EXPECT_EQ(a.label, 1);
  auto b = predict(m, sv({{1, -1}}));
  EXPECT_NEAR(b.decision, -0.5, 1e-9);
  EXPECT_EQ(b.label, -1);
}

TEST(SvmDual, ReductionOfOdml) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    auto d = oracle::random_dataset(5 + rep * 7, 4, rng);
    MatrixXd G = gram(rep % 2 ? KernelSpec::linear() : KernelSpec::rbf(0.9), d);
    const double C = 0.5 + rep;
    auto s = build_svm_dual(G, d.labels, C);
    auto o = build_odml_dual(G, d.labels, OdmlParams{C, 0.0, 0.0});
    EXPECT_EQ(s.H, o.H);
    EXPECT_EQ(s.q, o.q);
    EXPECT_EQ(s.u, o.u);
  }
}

TEST(OdmlDual, LinearTermAndOracle) {
  std::mt19937_64 rng(2);
  auto d = oracle::random_dataset(6, 3, rng);
  MatrixXd G = gram(KernelSpec::linear(), d);
  auto p0 = build_odml_dual(G, d.labels, OdmlParams{2.0, 0.3, 0.0});
  EXPECT_EQ(p0.q, -VectorXd::Ones(6));

  for (int rep = 0; rep < 10; ++rep) {
    auto r = oracle::random_dataset(6, 3, rng);
    MatrixXd Gr = gram(KernelSpec::rbf(0.7), r);
    OdmlParams prm{1.0 + rep, 0.05 * rep, 0.1 * (rep % 3)};
    auto p = build_odml_dual(Gr, r.labels, prm);
    auto sol = dcd_solve(p, {1e-10, 100000, 0, true});
    auto ref = oracle::projected_gradient_qp(p.H, p.q, p.u);
    EXPECT_NEAR(sol.objective, oracle::qp_value(p.H, p.q, ref), 1e-6);
    EXPECT_LE(sol.objective, 0.0);
  }
}

TEST(OdmDual, Structure) {
  std::mt19937_64 rng(3);
  auto d = oracle::random_dataset(4, 3, rng);
  MatrixXd G = gram(KernelSpec::linear(), d);
  auto p = build_odm_dual(G, d.labels, OdmParams{2.0, 3.0, 0.0});
  ASSERT_EQ(p.size(), 8);
  EXPECT_EQ(p.H, p.H.transpose());
  EXPECT_EQ(Eigen::LLT<MatrixXd>(p.H).info(), Eigen::Success);
  EXPECT_EQ(p.q.head(4), -VectorXd::Ones(4));
  EXPECT_EQ(p.q.tail(4), VectorXd::Ones(4));
  for (int i = 0; i < 8; ++i) EXPECT_TRUE(std::isinf(p.u(i)));
  // m/(2 C1) and m/(2 C2) on the diagonal
  MatrixXd Q = signed_gram(G, d.labels);
  EXPECT_DOUBLE_EQ(p.H(0, 0), Q(0, 0) + 1.0);
  EXPECT_DOUBLE_EQ(p.H(4, 4), Q(0, 0) + 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(p.H(0, 5), -Q(0, 1));

  for (int rep = 0; rep < 10; ++rep) {
    auto r = oracle::random_dataset(4, 2, rng);
    MatrixXd Gr = gram(KernelSpec::linear(), r);
    auto pr = build_odm_dual(Gr, r.labels, OdmParams{0.5 + rep, 1.0 + 0.3 * rep, 0.1 * (rep % 5)});
    auto sol = dcd_solve(pr, {1e-10, 100000, 0, true});
    VectorXd big = VectorXd::Constant(8, 1e6);
    auto ref = oracle::projected_gradient_qp(pr.H, pr.q, big);
    EXPECT_NEAR(sol.objective, oracle::qp_value(pr.H, pr.q, ref), 1e-6);
  }
}

TEST(Theta, Recovery) {
  std::vector<int> y{1, -1};
  VectorXd a(4);
  a << 0.2, 0, 0, 0.1;
  VectorXd t = recover_theta_odm(a, y);
  EXPECT_DOUBLE_EQ(t(0), 0.2);
  EXPECT_DOUBLE_EQ(t(1), 0.1);
  EXPECT_EQ(recover_theta_odm(VectorXd::Zero(4), y), VectorXd::Zero(2));
  std::vector<int> flipped{-1, 1};
  EXPECT_EQ(recover_theta_odm(a, flipped), -t);

  std::mt19937_64 rng(4);
  auto d = oracle::random_dataset(7, 3, rng);
  MatrixXd G = gram(KernelSpec::linear(), d);
  VectorXd alpha = VectorXd::Random(7).cwiseAbs();
  VectorXd ya(7);
  for (int i = 0; i < 7; ++i) ya(i) = d.labels[i] * alpha(i);
  EXPECT_EQ(recover_theta_odml(alpha, G, d.labels, OdmlParams{1, 0, 0}), ya);

  // lambda2 > 0 gives a nonzero expansion even at alpha = 0.
  OdmlParams prm{1.0, 0.4, 0.6};
  VectorXd t0 = recover_theta_odml(VectorXd::Zero(7), G, d.labels, prm);
  EXPECT_GT(t0.norm(), 0.0);
  VectorXd yv = oracle::label_vector(d);
  MatrixXd A = 2 * 0.4 * (7 * MatrixXd::Identity(7, 7) - yv * yv.transpose()) / 49.0;
  VectorXd want = oracle::inverse(MatrixXd::Identity(7, 7) + A * G) * (yv * (0.6 / 7));
  EXPECT_LE((t0 - want).cwiseAbs().maxCoeff(), 1e-12);

  // The cached-factor path agrees with the direct one.
  auto Hm = build_odml_H(G, d.labels, prm.lambda1);
  EXPECT_LE((recover_theta_odml(alpha, Hm, prm) - recover_theta_odml(alpha, G, d.labels, prm)).cwiseAbs().maxCoeff(), 1e-12);
}

// The expansion w = sum theta_i x_i from the dual must satisfy the primal
// optimality condition 0 in grad f_L(w) with hinge multipliers s_i = m alpha_i / C.
TEST(Theta, PrimalStationarityOdml) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 8; ++rep) {
    auto d = oracle::random_dataset(12, 3, rng);
    OdmlParams prm{4.0, 0.1 * rep, 0.05 * rep};
    MatrixXd G = gram(KernelSpec::linear(), d);
    auto fit = fit_dual(G, d.labels, prm, {1e-12, 500000, 0, true});
    ASSERT_TRUE(fit.solution.converged);
    const MatrixXd X = oracle::dense_rows(d);
    const VectorXd y = oracle::label_vector(d);
    const double m = 12;
    VectorXd w = X.transpose() * fit.theta;
    VectorXd f = X * w;
    VectorXd grad = w + 2 * prm.lambda1 / m * X.transpose() * f - 2 * prm.lambda1 / (m * m) * y.dot(f) * X.transpose() * y -
                    prm.lambda2 / m * X.transpose() * y;
    for (int i = 0; i < 12; ++i) grad -= fit.solution.alpha(i) * y(i) * X.row(i).transpose();
    EXPECT_LE(grad.cwiseAbs().maxCoeff(), 1e-8);
    for (int i = 0; i < 12; ++i) {
      const double gamma = y(i) * f(i), a = fit.solution.alpha(i), u = prm.C / m;
      if (a <= 0) EXPECT_GE(gamma, 1 - 1e-8);
      else if (a >= u) EXPECT_LE(gamma, 1 + 1e-8);
      else EXPECT_NEAR(gamma, 1.0, 1e-8);
    }
  }
}

TEST(Predict, Examples) {
  TrainedModel m;
  m.support = {sv({{1, 2}})};
  m.theta = {0.5};
  auto a = predict(m, sv({{1, 2}}));
  EXPECT_DOUBLE_EQ(a.decision, 2.0);
  EXPECT_EQ(a.label, 1);
  auto b = predict(m, sv({{1, -1}}));
  EXPECT_DOUBLE_EQ(b.decision, -1.0);
  EXPECT_EQ(b.label, -1);
}

TEST(Predict, TieAndLinearity) {
  TrainedModel m;
  m.support = {sv({{1, 2}})};
  m.theta = {0.0};
  auto p = predict(m, sv({{1, 3}}));
  EXPECT_EQ(p.decision, 0.0);
  EXPECT_EQ(p.label, 1);

  m.theta = {0.5};
  auto a = predict(m, sv({{1, -1}}));
  m.theta = {1.0};
  auto b = predict(m, sv({{1, -1}}));
  EXPECT_DOUBLE_EQ(b.decision, 2 * a.decision);
  EXPECT_EQ(a.label, b.label);
}

TEST(Train, SeparablePairLargeC) {
  auto d = two_points();
  auto m = train_kernel(d, KernelSpec::linear(), SvmParams{1000.0}, raw_opts());
  for (std::size_t i = 0; i < 2; ++i) EXPECT_GE(d.labels[i] * predict(m, d.instances[i]).decision, 1 - 1e-6);
}

TEST(Train, OdmlReducesToSvm) {
  std::mt19937_64 rng(6);
  auto d = oracle::random_dataset(40, 5, rng);
  for (auto k : {KernelSpec::linear(), KernelSpec::rbf(0.5)}) {
    auto a = train_kernel(d, k, SvmParams{3.0}, raw_opts());
    auto b = train_kernel(d, k, OdmlParams{3.0, 0.0, 0.0}, raw_opts());
    ASSERT_EQ(a.theta.size(), b.theta.size());
    for (std::size_t i = 0; i < a.theta.size(); ++i) EXPECT_NEAR(a.theta[i], b.theta[i], 1e-8);
  }
}

TEST(Train, OdmSlackGeometry) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    auto d = oracle::random_dataset(30, 4, rng, 0.2);
    OdmParams prm{std::ldexp(1.0, rep % 6), std::ldexp(1.0, (rep * 3) % 7), 0.1 * (rep % 6)};
    MatrixXd G = gram(rep % 2 ? KernelSpec::linear() : KernelSpec::rbf(1.0), d);
    auto fit = fit_dual(G, d.labels, prm, {1e-8, 200000, 0, true});
    ASSERT_TRUE(fit.solution.converged);
    auto sl = odm_slacks(fit.solution.alpha, prm);
    VectorXd f = G * fit.theta;
    for (int i = 0; i < 30; ++i) {
      EXPECT_FALSE(fit.solution.alpha(i) > 1e-6 && fit.solution.alpha(30 + i) > 1e-6);
      const double gamma = d.labels[i] * f(i);
      EXPECT_GE(gamma, 1 - prm.D - sl.xi(i) - 1e-6);
      EXPECT_LE(gamma, 1 + prm.D + sl.eps(i) + 1e-6);
    }
    EXPECT_LE(fit.solution.objective, 0.0);
  }
}

TEST(Train, PermutationInvariantPrediction) {
  std::mt19937_64 rng(8);
  auto d = oracle::random_dataset(25, 3, rng);
  std::vector<std::size_t> perm(25);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto a = train_kernel(d, KernelSpec::rbf(0.6), OdmParams{4, 4, 0.2}, raw_opts(1e-12));
  auto b = train_kernel(d.subset(perm), KernelSpec::rbf(0.6), OdmParams{4, 4, 0.2}, raw_opts(1e-12));
  auto probe = oracle::random_dataset(20, 3, rng);
  for (const auto& z : probe.instances) EXPECT_NEAR(predict(a, z).decision, predict(b, z).decision, 1e-8);
}

TEST(Train, NormalizationIsBakedIn) {
  std::mt19937_64 rng(9);
  auto d = oracle::random_dataset(30, 3, rng, 0.1, 5.0, 50.0);
  TrainOptions o;
  auto m = train_kernel(d, KernelSpec::linear(), SvmParams{10.0}, o);
  EXPECT_FALSE(m.normalizer.is_identity());
  auto nd = m.normalizer.apply(d);
  for (std::size_t i = 0; i < d.size(); ++i)
    EXPECT_DOUBLE_EQ(predict(m, d.instances[i]).decision, decision_normalized(m, nd.instances[i]));
}

TEST(Train, KeepsAlpha) {
  auto d = two_points();
  TrainOptions o = raw_opts();
  o.keep_alpha = true;
  auto m = train_kernel(d, KernelSpec::linear(), OdmParams{1, 1, 0}, o);
  ASSERT_TRUE(m.bound_data.has_value());
  EXPECT_EQ(m.bound_data->alpha.size(), 4u);
  EXPECT_EQ(m.bound_data->diag, (std::vector<double>{4.0, 1.0}));
  EXPECT_THROW(train_kernel(Dataset{}, KernelSpec::linear(), SvmParams{1}, o), InvalidArgument);
  EXPECT_THROW(train_kernel(d, KernelSpec::linear(), SvmParams{0}, o), InvalidArgument);
  EXPECT_THROW(train_kernel(d, KernelSpec::linear(), OdmParams{1, 1, -0.1}, o), InvalidArgument);
  EXPECT_THROW(train_kernel(d, KernelSpec::linear(), OdmlParams{1, -1, 0}, o), InvalidArgument);
}

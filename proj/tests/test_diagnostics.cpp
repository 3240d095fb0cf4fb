#include "esuot/diagnostics.hpp"

#include "fd.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <limits>

using namespace esuot;
using namespace esuot::diag;

namespace {

Matrix cloud(std::uint64_t seed, Eigen::Index n, Eigen::Index d, double shift = 0.0) {
  Rng rng(seed);
  return standard_normal(rng, n, d).array() + shift;
}

Classifier identity_classifier() {
  Classifier c;
  c.net.activation = nn::Activation::ReLU;
  for (int k = 0; k < 3; ++k) c.net.layers.push_back({Matrix::Identity(2, 2), Vector::Zero(2)});
  return c;
}

}  // namespace

TEST(Trajectory, CoincidentSetsAreNearZero) {
  const Matrix t = cloud(1, 100, 2);
  const Vector w = w2_trajectory({t, t, t}, t);
  EXPECT_EQ(w.size(), 3);
  EXPECT_LT(w.maxCoeff(), 0.05 * std::log(100.0));
  EXPECT_GE(w.minCoeff(), 0.0);
}

TEST(Trajectory, ReversalFlipsMonotonicity) {
  const Matrix target = cloud(2, 150, 2, 3.0);
  std::vector<Matrix> seq;
  for (int k = 0; k <= 3; ++k) seq.push_back(cloud(3, 150, 2, k * 1.0));
  const Vector fwd = w2_trajectory(seq, target);
  EXPECT_TRUE(non_increasing(fwd, 0.0));
  std::reverse(seq.begin(), seq.end());
  EXPECT_FALSE(non_increasing(w2_trajectory(seq, target), 0.05));
  EXPECT_THROW(w2_trajectory({}, target), ContractError);
}

TEST(NonIncreasing, Slack) {
  EXPECT_TRUE(non_increasing((Vector(3) << 1.0, 1.04, 1.0).finished(), 0.05));
  EXPECT_FALSE(non_increasing((Vector(3) << 1.0, 1.06, 1.0).finished(), 0.05));
}

TEST(BoundTerms, StatTermAndIdentityZeta) {
  const Matrix x = cloud(4, 30, 2);
  const std::vector<int> y(30, 0);
  const BoundReport r = estimate_bound_terms(identity_classifier(), {{x, y}, {x, y}}, 2000, 5);
  EXPECT_NEAR(r.stat_term, 0.1118, 1e-4);
  EXPECT_DOUBLE_EQ(r.stat_term, 5.0 / std::sqrt(2000.0));
  EXPECT_NEAR(r.zeta, 1.0, 1e-12);
  EXPECT_NEAR(r.cumulative_cost, 0.0, 0.2);
  EXPECT_DOUBLE_EQ(r.iota, 1.0);
  ASSERT_EQ(r.unestimated.size(), 1u);
  EXPECT_EQ(r.unestimated[0], "optimal_hypothesis_error");
  EXPECT_THROW(estimate_bound_terms(identity_classifier(), {{x, y}}, 10, 1), ContractError);
}

TEST(BoundTerms, ZetaMatchesSvdProduct) {
  ClassifierConfig cfg;
  cfg.hidden = 12;
  const Classifier c = make_classifier(cfg, 3, 2);
  double prod = 1.0;
  for (const auto& l : c.net.layers) prod *= oracle::top_singular_value(l.weight);
  EXPECT_NEAR(spectral_product(c.net), prod, 1e-6 * prod);
}

TEST(BoundTerms, DisagreementCountsLabelFlips) {
  const Matrix a = (Matrix(3, 1) << 0, 1, 2).finished();
  const Matrix b = (Matrix(3, 1) << 0.1, 1.1, 2.1).finished();
  EXPECT_DOUBLE_EQ(nn_label_disagreement({a, {0, 1, 1}}, {b, {0, 1, 1}}), 0.0);
  EXPECT_DOUBLE_EQ(nn_label_disagreement({a, {0, 1, 1}}, {b, {1, 1, 1}}), 1.0 / 3.0);
}

TEST(BoundTerms, PermutationInvariant) {
  const Matrix a = cloud(5, 40, 2);
  const Matrix b = cloud(6, 40, 2, 0.5);
  std::vector<int> ya(40), yb(40);
  for (int i = 0; i < 40; ++i) {
    ya[static_cast<std::size_t>(i)] = a(i, 0) > 0;
    yb[static_cast<std::size_t>(i)] = b(i, 1) > 0;
  }
  const Matrix b_rev = b.colwise().reverse();
  const std::vector<int> yb_rev(yb.rbegin(), yb.rend());
  const BoundReport r1 = estimate_bound_terms(identity_classifier(), {{a, ya}, {b, yb}}, 40, 1);
  const BoundReport r2 = estimate_bound_terms(identity_classifier(), {{a, ya}, {b_rev, yb_rev}}, 40, 1);
  EXPECT_NEAR(r1.cumulative_cost, r2.cumulative_cost, 1e-12);
  EXPECT_GE(r1.bound_value(), 0.0);
}

TEST(Dsm, LossGradientMatchesFiniteDifferences) {
  Rng rng(7);
  for (int inst = 0; inst < 20; ++inst) {
    const nn::NetParams net = nn::mlp_init({2, 8, 8, 2}, nn::Activation::SiLU, false, 40 + static_cast<std::uint64_t>(inst));
    const Matrix x = standard_normal(rng, 5, 2);
    const Matrix z = standard_normal(rng, 5, 2);
    const double sigma = 0.1 + 0.05 * inst;
    const Vector analytic = nn::flatten(dsm_objective_grad(net, x, z, sigma));
    const Vector numeric = fd::param_gradient(net, [&](const nn::NetParams& p) {
      const Matrix s = nn::mlp_forward(p, x + sigma * z);
      return (s + z / sigma).rowwise().squaredNorm().mean();
    });
    EXPECT_LE(fd::relative_error(analytic, numeric), 1e-4) << inst;
  }
}

TEST(Dsm, LearnsStandardNormalScore) {
  DsmConfig cfg;
  cfg.sigma = 0.1;
  cfg.hidden = 32;
  cfg.epochs = 3000;
  cfg.seed = 3;
  const Matrix samples = cloud(8, 4000, 1);
  const ScoreFit fit = dsm_train(cfg, samples);
  const Matrix probe = (Matrix(3, 1) << -1.0, 0.0, 1.0).finished();
  const Matrix s = score_fn(fit.model)(probe);
  EXPECT_NEAR(s(1, 0), 0.0, 0.2);
  EXPECT_NEAR((s(2, 0) - s(0, 0)) / 2.0, -1.0, 0.3);
  for (double l : fit.losses) EXPECT_GE(l, 0.0);
}

TEST(Langevin, ZeroScoreIsPureDiffusion) {
  const Matrix x0 = cloud(9, 10, 2);
  const ScoreFn zero = [](const Matrix& x) { return Matrix::Zero(x.rows(), x.cols()); };
  const Matrix out = langevin_transport(zero, x0, 0.04, 1, 77);
  Rng rng(77);
  const Matrix xi = standard_normal(rng, 10, 2);
  EXPECT_LT((out - (x0 + 0.2 * xi)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(langevin_transport(zero, x0, 0.04, 0, 77), x0);
}

TEST(Langevin, ExactScoreReachesStationaryLaw) {
  const Matrix x0 = cloud(10, 2000, 1, 3.0);
  const ScoreFn exact = [](const Matrix& x) { return Matrix(-x); };
  std::vector<Matrix> snaps;
  const Matrix out = langevin_transport(exact, x0, 0.01, 2000, 5, &snaps, 500);
  const double mean = out.mean();
  const double var = (out.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.0, 0.1);
  EXPECT_GE(var, 0.8);
  EXPECT_LE(var, 1.2);
  EXPECT_EQ(snaps.size(), 5u);
}

TEST(Langevin, NonFiniteStateReportsStep) {
  const ScoreFn blowup = [](const Matrix& x) { return Matrix(x * 1e200); };
  try {
    langevin_transport(blowup, Matrix::Constant(1, 1, 1e200), 1.0, 5, 1);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos);
  }
}

TEST(Advisory, FormulaAndBoundary) {
  const StepAdvisory a = step_size_advisory(0.4, 1.0, 2.0, 1.0);
  EXPECT_DOUBLE_EQ(a.limit, 0.5);
  EXPECT_TRUE(a.ok);
  EXPECT_FALSE(step_size_advisory(0.5, 1.0, 2.0, 1.0).ok);
  EXPECT_DOUBLE_EQ(step_size_advisory(0.1, 1.0, 2.0, 1e9).limit, 0.5);
  EXPECT_THROW(step_size_advisory(0.1, 0.0, 2.0, 1.0), ConfigError);
}

TEST(Motivation, RejectsNonPlanarClouds) {
  MotivationConfig cfg;
  EXPECT_THROW(motivation_compare(cfg, Matrix::Zero(4, 3), Matrix::Zero(4, 3)), ContractError);
}

TEST(Motivation, SameCloudGivesSmallDistances) {
  MotivationConfig cfg;
  cfg.transport.hidden = 16;
  cfg.transport.epochs = 50;
  cfg.transport.batch = 128;
  cfg.dsm.hidden = 16;
  cfg.dsm.epochs = 200;
  cfg.langevin_steps = 20;
  cfg.seed = 4;
  const Matrix x = cloud(11, 400, 2);
  const MotivationResult r = motivation_compare(cfg, x, x);
  EXPECT_LT(r.w2_dir_trans, 0.3);
  EXPECT_LT(r.w2_est_trans, 0.5);
  EXPECT_EQ(r.langevin_snapshots.size(), 6u);
}

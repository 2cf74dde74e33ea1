#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gcnspatial/gcn.hpp"
#include "support.hpp"

using namespace gcnspatial;
using namespace testing_support;

namespace {

GcnModel scalar_model(double t0, double t1) {
  GcnModel m;
  m.theta0 = Eigen::MatrixXd::Constant(1, 1, t0);
  m.theta1 = Eigen::MatrixXd::Constant(1, 1, t1);
  return m;
}

const PropagationOperator& single_node() {
  static const PropagationOperator p = propagation_operator(SpatialGraph::from_edges(1, {}));
  return p;
}

}  // namespace

TEST(Glorot, BoundAndDeterminism) {
  Rng a(42), b(42);
  const Eigen::MatrixXd m = glorot_init(3, 3, a);
  EXPECT_LE(m.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_EQ(m, glorot_init(3, 3, b));
  Rng c(1);
  const Eigen::MatrixXd big = glorot_init(9, 32, c);
  EXPECT_LE(big.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 41.0));
  EXPECT_THROW(glorot_init(0, 3, c), ConfigError);
}

TEST(Glorot, SampleMeanWithinThreeStandardErrors) {
  Rng rng(7);
  const Eigen::MatrixXd m = glorot_init(500, 200, rng);  // 1e5 draws
  const double s = std::sqrt(6.0 / 700.0);
  const double se = (s / std::sqrt(3.0)) / std::sqrt(static_cast<double>(m.size()));
  EXPECT_LT(std::abs(m.mean()), 3.0 * se);
}

TEST(Forward, HandExamples) {
  Rng rng(0);
  const auto m = scalar_model(2, 3);
  EXPECT_EQ(forward(m, Eigen::MatrixXd::Constant(1, 1, 1.0), single_node(), 0.2, Mode::eval, rng).output(0), 6.0);
  EXPECT_EQ(forward(m, Eigen::MatrixXd::Constant(1, 1, -1.0), single_node(), 0.2, Mode::eval, rng).output(0), 0.0);
}

TEST(Forward, ZeroDropoutTrainEqualsEval) {
  auto [model, inst] = make_gradient_check_instance(3);
  Rng r1(1), r2(2);
  const auto a = forward(model, inst.features, inst.prop, 0.0, Mode::train, r1);
  const auto b = forward(model, inst.features, inst.prop, 0.0, Mode::eval, r2);
  EXPECT_EQ(a.output, b.output);
}

TEST(Forward, EvalIsDeterministicAndLeavesRngAlone) {
  auto [model, inst] = make_gradient_check_instance(4);
  Rng r(9);
  const Rng before = r;
  const auto a = forward(model, inst.features, inst.prop, 0.5, Mode::eval, r);
  const auto b = forward(model, inst.features, inst.prop, 0.5, Mode::eval, r);
  EXPECT_EQ(a.output, b.output);
  EXPECT_TRUE(r == before);
  EXPECT_GE(a.hidden.minCoeff(), 0.0);
}

TEST(Forward, ShapeErrors) {
  auto [model, inst] = make_gradient_check_instance(5);
  Rng r(0);
  EXPECT_THROW(forward(model, inst.features.leftCols(2), inst.prop, 0.0, Mode::eval, r), DimensionError);
  EXPECT_THROW(forward(model, inst.features.topRows(4), inst.prop, 0.0, Mode::eval, r), DimensionError);
  EXPECT_THROW(forward(model, inst.features, inst.prop, 1.0, Mode::eval, r), ConfigError);
}

TEST(Forward, LinearWhenReluInactive) {
  Rng rng(10);
  std::mt19937_64 grng(10);
  const auto g = random_graph(12, 0.3, grng);
  const auto prop = propagation_operator(g);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd x(12, 3);
  for (auto& v : x.reshaped()) v = u(rng);
  GcnModel m;
  m.theta0 = Eigen::MatrixXd(3, 5);
  for (auto& v : m.theta0.reshaped()) v = u(rng);
  m.theta1 = Eigen::MatrixXd(5, 1);
  for (auto& v : m.theta1.reshaped()) v = u(rng) - 0.5;
  const Eigen::MatrixXd p(prop.matrix);
  const Eigen::VectorXd linear = p * p * x * m.theta0 * m.theta1;
  EXPECT_LT((predict(m, x, prop) - linear).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dropout, InvertedScalingExpectation) {
  auto [model, inst] = make_gradient_check_instance(6);
  Rng eval_rng(0);
  const auto eval = forward(model, inst.features, inst.prop, 0.0, Mode::eval, eval_rng);
  const double p = 0.3;
  const int masks = 10000;
  Rng rng(123);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(inst.features.rows(), inst.features.cols());
  Eigen::MatrixXd sum_sq = sum;
  Eigen::MatrixXd hsum = Eigen::MatrixXd::Zero(eval.hidden.rows(), eval.hidden.cols());
  Eigen::MatrixXd hsum_sq = hsum;
  for (int k = 0; k < masks; ++k) {
    const auto c = forward(model, inst.features, inst.prop, p, Mode::train, rng);
    sum += c.input;
    sum_sq += c.input.cwiseAbs2();
    // hidden-layer dropout applied to a fixed activation
    const Eigen::MatrixXd dropped = eval.hidden.cwiseProduct(c.hidden_mask);
    hsum += dropped;
    hsum_sq += dropped.cwiseAbs2();
  }
  auto within = [&](const Eigen::MatrixXd& s, const Eigen::MatrixXd& sq, const Eigen::MatrixXd& target) {
    int bad = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const double mean = s.reshaped()(i) / masks;
      const double var = sq.reshaped()(i) / masks - mean * mean;
      const double se = std::sqrt(std::max(var, 0.0) / masks);
      if (std::abs(mean - target.reshaped()(i)) > 3.0 * se + 1e-15) ++bad;
    }
    return bad;
  };
  // 3 standard errors leave about 0.3% of entries outside by chance
  EXPECT_LE(within(sum, sum_sq, inst.features), 1 + static_cast<int>(0.01 * sum.size()));
  EXPECT_LE(within(hsum, hsum_sq, eval.hidden), 1 + static_cast<int>(0.01 * hsum.size()));
}

TEST(L1Loss, Examples) {
  const Eigen::Vector2d z(1, 5), t(2, 9);
  const std::vector<std::size_t> both{0, 1}, second{1};
  EXPECT_EQ(l1_loss(z, z, both), 0.0);
  EXPECT_DOUBLE_EQ(l1_loss(z, t, both), 2.5);
  EXPECT_DOUBLE_EQ(l1_loss(z, t, second), 4.0);
  EXPECT_THROW(l1_loss(z, t, std::vector<std::size_t>{}), ConfigError);
  EXPECT_THROW(l1_loss(z, t, std::vector<std::size_t>{2}), DimensionError);
}

TEST(L1Loss, PermutationInvariance) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  Eigen::VectorXd z(20), t(20);
  for (Eigen::Index i = 0; i < 20; ++i) {
    z(i) = g(rng);
    t(i) = g(rng);
  }
  std::vector<std::size_t> idx{1, 4, 5, 9, 13, 17};
  const double base = l1_loss(z, t, idx);
  std::vector<std::size_t> perm(20);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::VectorXd zp(20), tp(20);
  std::vector<std::size_t> idxp;
  for (std::size_t i = 0; i < 20; ++i) {
    zp(static_cast<Eigen::Index>(perm[i])) = z(static_cast<Eigen::Index>(i));
    tp(static_cast<Eigen::Index>(perm[i])) = t(static_cast<Eigen::Index>(i));
  }
  for (auto i : idx) idxp.push_back(perm[i]);
  EXPECT_NEAR(l1_loss(zp, tp, idxp), base, 1e-15);
}

TEST(L2Penalty, Examples) {
  EXPECT_EQ(l2_penalty(scalar_model(3, 4), 0.0), 0.0);
  EXPECT_EQ(l2_penalty(scalar_model(2, 0), 1.0), 2.0);
  auto [model, inst] = make_gradient_check_instance(1);
  GcnModel doubled = model;
  doubled.theta0 *= 2.0;
  doubled.theta1 *= 2.0;
  EXPECT_NEAR(l2_penalty(doubled, 0.3), 4.0 * l2_penalty(model, 0.3), 1e-14);
}

TEST(Backward, ZeroAtPerfectFit) {
  auto [model, inst] = make_gradient_check_instance(2);
  Rng r(0);
  const auto c = forward(model, inst.features, inst.prop, 0.0, Mode::eval, r);
  const auto g = backward(model, c, c.output, inst.train_idx, inst.prop, 0.0);
  EXPECT_EQ(g.theta0.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.theta1.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, FlippedResidualsFlipOutputGradient) {
  auto [model, inst] = make_gradient_check_instance(8);
  Rng r(0);
  const auto c = forward(model, inst.features, inst.prop, 0.0, Mode::eval, r);
  // mirror every target about the prediction
  const Eigen::VectorXd mirrored = 2.0 * c.output - inst.targets;
  const auto g1 = backward(model, c, inst.targets, inst.train_idx, inst.prop, 0.0);
  const auto g2 = backward(model, c, mirrored, inst.train_idx, inst.prop, 0.0);
  EXPECT_LT((g1.theta1 + g2.theta1).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_GT(g1.theta1.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, RejectsStaleCache) {
  auto [model, inst] = make_gradient_check_instance(9);
  Rng r(0);
  const auto c = forward(model, inst.features, inst.prop, 0.0, Mode::eval, r);
  GcnModel moved = model;
  moved.theta0(0, 0) += 1e-3;
  EXPECT_THROW(backward(moved, c, inst.targets, inst.train_idx, inst.prop, 0.0), DimensionError);
}

TEST(GradientCheck, TwentySeedsEvalMode) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto [model, inst] = make_gradient_check_instance(seed);
    const auto rep = gradient_check(model, inst, 1e-6);
    EXPECT_TRUE(rep.passed) << "seed " << seed << " errors " << rep.max_rel_error_theta0 << " "
                            << rep.max_rel_error_theta1;
  }
}

TEST(GradientCheck, InjectedFaultIsReported) {
  auto [model, inst] = make_gradient_check_instance(1);
  Rng r(0);
  const auto c = forward(model, inst.features, inst.prop, 0.0, Mode::eval, r);
  GcnGradients g = backward(model, c, inst.targets, inst.train_idx, inst.prop, inst.l2_weight);
  g.theta0(2, 1) += 1e-3;
  const auto rep = gradient_check(model, inst, g, 1e-6);
  EXPECT_FALSE(rep.passed);
  EXPECT_EQ(rep.worst_layer, 0);
  EXPECT_EQ(rep.worst_row, 2);
  EXPECT_EQ(rep.worst_col, 1);
  EXPECT_TRUE(gradient_check(model, inst, g, std::numeric_limits<double>::infinity()).passed);
}

TEST(GradientCheck, TrainModeReusesCachedMasks) {
  // masks depend only on the generator, so re-seeding reproduces them for
  // every perturbed parameter
  auto [model, inst] = make_gradient_check_instance(11);
  const double p = 0.25;
  const std::uint64_t mask_seed = 77;
  auto objective_fixed_masks = [&](const GcnModel& m) {
    Rng r(mask_seed);
    const auto c = forward(m, inst.features, inst.prop, p, Mode::train, r);
    return l1_loss(c.output, inst.targets, inst.train_idx) + l2_penalty(m, inst.l2_weight);
  };
  Rng r(mask_seed);
  const auto c = forward(model, inst.features, inst.prop, p, Mode::train, r);
  const auto g = backward(model, c, inst.targets, inst.train_idx, inst.prop, inst.l2_weight);
  const double h = 1e-5;
  double worst = 0.0;
  for (int layer = 0; layer < 2; ++layer) {
    GcnModel probe = model;
    Eigen::MatrixXd& param = layer == 0 ? probe.theta0 : probe.theta1;
    const Eigen::MatrixXd& grad = layer == 0 ? g.theta0 : g.theta1;
    for (Eigen::Index i = 0; i < param.size(); ++i) {
      const double orig = param.reshaped()(i);
      param.reshaped()(i) = orig + h;
      const double up = objective_fixed_masks(probe);
      param.reshaped()(i) = orig - h;
      const double down = objective_fixed_masks(probe);
      param.reshaped()(i) = orig;
      const double num = (up - down) / (2 * h);
      const double a = grad.reshaped()(i);
      worst = std::max(worst, std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-10}));
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Adam, FirstStepClosedForm) {
  GcnModel m = scalar_model(0.7, -0.2);
  AdamState s = AdamState::for_model(m, {3e-4, 0.9, 0.999, 1e-8});
  GcnGradients g{Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::MatrixXd::Constant(1, 1, -2.5)};
  adam_step(s, m, g);
  const double m_hat = (1.0 * 0.1) / 0.1;
  const double v_hat = (1.0 * 0.001) / (1.0 - 0.999);
  const double expected0 = 0.7 - 3e-4 * m_hat / (std::sqrt(v_hat) + 1e-8);
  EXPECT_NEAR(m.theta0(0, 0), expected0, 1e-12);
  EXPECT_NEAR(m.theta0(0, 0) - 0.7, -3e-4, 1e-10);
  EXPECT_NEAR(m.theta1(0, 0) + 0.2, 3e-4, 1e-10);
  EXPECT_EQ(s.step, 1u);
  EXPECT_GE(s.v0.minCoeff(), 0.0);
}

TEST(Adam, ZeroGradientKeepsParametersAndDecaysMoments) {
  const GcnGradients zero{Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 1)};
  GcnModel fresh = scalar_model(1.0, 2.0);
  AdamState fs = AdamState::for_model(fresh);
  adam_step(fs, fresh, zero);
  EXPECT_EQ(fresh.theta0(0, 0), 1.0);
  EXPECT_EQ(fresh.theta1(0, 0), 2.0);

  GcnModel m = scalar_model(1.0, 2.0);
  AdamState s = AdamState::for_model(m);
  adam_step(s, m, {Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::MatrixXd::Constant(1, 1, 0.5)});
  const double m0 = s.m0(0, 0), v0 = s.v0(0, 0);
  adam_step(s, m, zero);
  EXPECT_DOUBLE_EQ(s.m0(0, 0), 0.9 * m0);
  EXPECT_DOUBLE_EQ(s.v0(0, 0), 0.999 * v0);
}

TEST(Adam, LayersUpdateIndependently) {
  auto [model, inst] = make_gradient_check_instance(3);
  GcnModel a = model, b = model;
  AdamState sa = AdamState::for_model(a), sb = AdamState::for_model(b);
  Rng rng(4);
  const GcnGradients g{glorot_init(3, 4, rng), glorot_init(4, 1, rng)};
  adam_step(sa, a, g);
  GcnGradients only0 = g;
  only0.theta1.setZero();
  adam_step(sb, b, only0);
  EXPECT_EQ(a.theta0, b.theta0);
  EXPECT_EQ(b.theta1, model.theta1);
}

TEST(Adam, PlainDirectionWithoutMomentum) {
  auto [model, inst] = make_gradient_check_instance(5);
  GcnModel m = model;
  AdamState s = AdamState::for_model(m, {1e-2, 0.0, 0.0, 1e6});
  Rng rng(5);
  const GcnGradients g{glorot_init(3, 4, rng), glorot_init(4, 1, rng)};
  adam_step(s, m, g);
  for (Eigen::Index i = 0; i < g.theta0.size(); ++i) {
    const double delta = m.theta0.reshaped()(i) - model.theta0.reshaped()(i);
    EXPECT_LT(delta * g.theta0.reshaped()(i), 0.0);
  }
  for (Eigen::Index i = 0; i < g.theta1.size(); ++i) {
    const double delta = m.theta1.reshaped()(i) - model.theta1.reshaped()(i);
    EXPECT_LT(delta * g.theta1.reshaped()(i), 0.0);
  }
}

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "gcnspatial/dataset.hpp"
#include "gcnspatial/stats.hpp"
#include "gcnspatial/synth.hpp"
#include "gcnspatial/training.hpp"
#include "support.hpp"

using namespace gcnspatial;
using namespace testing_support;

namespace {

std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name,
                                 const std::string& text) {
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

/// Small clustered dataset; fast enough for many training runs.
Dataset small_synthetic(std::size_t points = 200, std::uint64_t seed = 3) {
  GeneratorConfig g;
  g.points = points;
  g.clusters = 4;
  g.width = g.height = 4000;
  g.seed = seed;
  const auto s = synth_generate(g);
  return make_dataset(s.points, s.type_names);
}

struct TwoPass {
  double mean, variance, skew, kurt;
};

TwoPass two_pass(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0;
  for (double x : v) mean += x;
  mean /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : v) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  const double var = m2 / (n - 1);
  m2 /= n;
  m3 /= n;
  m4 /= n;
  return {mean, var, m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

}  // namespace

// ---------------------------------------------------------------- dataset

TEST(LoadDataset, ThreeRowsTwoTypes) {
  const auto dir = scratch_dir("load3");
  const auto p = write_file(dir, "d.csv", "id,x,y,type,checkins\na,0,0,shop,5\nb,1,2,park,0\nc,3,4,shop,12\n");
  const auto d = load_dataset(p, TypeMap({"shop", "park"}));
  ASSERT_EQ(d.features.rows(), 3);
  ASSERT_EQ(d.features.cols(), 2);
  for (Eigen::Index r = 0; r < 3; ++r) {
    EXPECT_EQ((d.features.row(r).array() != 0.0).count(), 1);
    EXPECT_EQ(d.features.row(r).sum(), 1.0);
  }
  EXPECT_EQ(d.features(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(d.targets_log(2), std::log(13.0));
}

TEST(LoadDataset, CountsAreOptional) {
  const auto dir = scratch_dir("loadnocount");
  const auto d = load_dataset(write_file(dir, "d.csv", "id,x,y,type\na,0,0,shop\n"), TypeMap({"shop"}));
  EXPECT_FALSE(d.has_targets());
  EXPECT_FALSE(d.points.has_intensity());
}

TEST(LoadDataset, NegativeCountNamesRow) {
  const auto dir = scratch_dir("loadneg");
  const auto p = write_file(dir, "d.csv", "id,x,y,type,checkins\na,0,0,shop,5\nb,1,2,shop,-1\n");
  try {
    load_dataset(p, TypeMap({"shop"}));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(LoadDataset, UnknownLabelsListEveryRow) {
  const auto dir = scratch_dir("loadunknown");
  const auto p = write_file(dir, "d.csv", "id,x,y,type,checkins\na,0,0,zoo,5\nb,1,2,shop,1\nc,1,2,moon,1\n");
  try {
    load_dataset(p, TypeMap({"shop"}));
    FAIL();
  } catch (const DataError& e) {
    const std::string w = e.what();
    EXPECT_NE(w.find("1 ('zoo')"), std::string::npos) << w;
    EXPECT_NE(w.find("3 ('moon')"), std::string::npos) << w;
  }
}

TEST(LoadDataset, MalformedInput) {
  const auto dir = scratch_dir("loadbad");
  const TypeMap t({"shop"});
  EXPECT_THROW(load_dataset(write_file(dir, "a.csv", "id,x,type\n"), t), DataError);
  EXPECT_THROW(load_dataset(write_file(dir, "b.csv", "id,x,y,type\na,0,shop\n"), t), DataError);
  EXPECT_THROW(load_dataset(write_file(dir, "c.csv", "id,x,y,type\na,zero,0,shop\n"), t), DataError);
  EXPECT_THROW(load_dataset(write_file(dir, "d.csv", "id,x,y,type\na,0,0,shop\na,1,1,shop\n"), t), DataError);
  EXPECT_THROW(load_dataset(dir / "missing.csv", t), IoError);
}

TEST(LoadDataset, MinCheckinsFilter) {
  const auto dir = scratch_dir("loadmin");
  const auto p = write_file(dir, "d.csv", "id,x,y,type,checkins\na,0,0,shop,50\nb,1,2,shop,150\n");
  const auto d = load_dataset(p, TypeMap({"shop"}), LoadOptions{100.0});
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.points.ids[0], "b");
}

TEST(EncodeFeatures, OneHotAndNormalization) {
  const Eigen::MatrixXd x = encode_features({2, 0, 8}, 9);
  EXPECT_EQ(x(0, 2), 1.0);
  EXPECT_EQ(x.row(0).sum(), 1.0);
  for (Eigen::Index r = 0; r < x.rows(); ++r) EXPECT_EQ(x.row(r).sum(), 1.0);
  Eigen::MatrixXd two_hot(1, 2);
  two_hot << 1, 1;
  EXPECT_EQ(normalize_rows(two_hot), Eigen::RowVector2d(0.5, 0.5));
  EXPECT_THROW(encode_features({9}, 9), DataError);
}

TEST(LogTransform, Examples) {
  const std::vector<double> c{0.0, std::exp(1.0) - 1.0, 100.0, 5000.0, 1e9};
  const Eigen::VectorXd y = log_transform(c);
  EXPECT_EQ(y(0), 0.0);
  EXPECT_NEAR(y(1), 1.0, 1e-15);
  for (std::size_t i = 2; i < c.size(); ++i)
    EXPECT_LE(std::abs(inverse_log_transform(y(static_cast<Eigen::Index>(i))) - c[i]) / c[i], 1e-12);
  const std::vector<double> neg{-1.0};
  EXPECT_THROW(log_transform(neg), DataError);
  EXPECT_EQ(inverse_log_transform(-0.5), 0.0);
  EXPECT_LT(inverse_log_transform(-0.5, false), 0.0);
}

TEST(Split, SizesPartitionAndDeterminism) {
  Rng a(5), b(5);
  const Split s = split(100, 0.05, a);
  EXPECT_EQ(s.train.size(), 5u);
  EXPECT_EQ(s.validation.size(), 95u);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.validation.begin(), s.validation.end());
  EXPECT_EQ(all.size(), 100u);
  EXPECT_EQ(*all.rbegin(), 99u);
  EXPECT_EQ(split(100, 0.05, b).train, s.train);
  Rng c(1);
  EXPECT_THROW(split(10, 0.01, c), ConfigError);
  EXPECT_THROW(split(2, 0.9, c), ConfigError);
}

// ---------------------------------------------------------------- stats

TEST(DistributionStats, HandValues) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto st = distribution_stats(v, 4);
  EXPECT_DOUBLE_EQ(st.mean, 2.5);
  EXPECT_NEAR(st.variance, 5.0 / 3.0, 1e-15);
  EXPECT_NEAR(*st.skewness, 0.0, 1e-12);
  EXPECT_EQ(std::accumulate(st.bin_counts.begin(), st.bin_counts.end(), std::size_t{0}), 4u);
}

TEST(DistributionStats, ConstantIsDegenerate) {
  const std::vector<double> v(7, 3.25);
  const auto st = distribution_stats(v, 5);
  EXPECT_EQ(st.variance, 0.0);
  EXPECT_FALSE(st.skewness.has_value());
  EXPECT_FALSE(st.excess_kurtosis.has_value());
  EXPECT_EQ(st.bin_counts.size(), 5u);
}

TEST(DistributionStats, SymmetricHasZeroSkew) {
  const std::vector<double> v{-3, 3, -1.5, 1.5, -7, 7};
  EXPECT_NEAR(*distribution_stats(v, 3).skewness, 0.0, 1e-12);
}

TEST(DistributionStats, MatchesTwoPassOracle) {
  std::mt19937_64 rng(17);
  std::lognormal_distribution<double> ln(1.0, 0.9);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> v(500 + rep * 37);
    for (auto& x : v) x = ln(rng);
    const auto st = distribution_stats(v, 12);
    const auto o = two_pass(v);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
    EXPECT_LT(rel(st.mean, o.mean), 1e-9);
    EXPECT_LT(rel(st.variance, o.variance), 1e-9);
    EXPECT_LT(rel(*st.skewness, o.skew), 1e-9);
    EXPECT_LT(rel(*st.excess_kurtosis, o.kurt), 1e-9);
  }
}

TEST(DistributionStats, LogBins) {
  const std::vector<double> v{1, 10, 100, 1000};
  const auto st = distribution_stats(v, 3, true);
  ASSERT_EQ(st.bin_edges.size(), 4u);
  EXPECT_NEAR(st.bin_edges[1], 10.0, 1e-9);
  EXPECT_NEAR(st.bin_edges[2], 100.0, 1e-9);
  EXPECT_EQ(st.bin_counts, (std::vector<std::size_t>{1, 1, 2}));
  const std::vector<double> bad{0.0, 1.0};
  EXPECT_THROW(distribution_stats(bad, 3, true), DataError);
  EXPECT_THROW(distribution_stats(std::vector<double>{}, 3), DataError);
}

// ---------------------------------------------------------------- synth

TEST(Synth, FlatFieldGivesEqualCounts) {
  GeneratorConfig g;
  g.points = 50;
  g.clusters = 1;
  g.types = 1;
  g.noise_sd = 0.0;
  g.bump_amplitude = 0.0;
  const auto s = synth_generate(g);
  const auto& c = *s.points.intensity;
  EXPECT_TRUE(std::all_of(c.begin(), c.end(), [&](double x) { return x == c[0]; }));
  EXPECT_EQ(c[0], std::round(std::exp(g.base_log)));
}

TEST(Synth, DefaultIsHeavyTailedAndDeterministic) {
  const auto a = synth_generate(GeneratorConfig{});
  const auto b = synth_generate(GeneratorConfig{});
  EXPECT_EQ(a.points.size(), 2000u);
  EXPECT_EQ(a.type_names.size(), 9u);
  EXPECT_GT(*distribution_stats(*a.points.intensity, 20).skewness, 1.0);
  EXPECT_EQ(dataset_csv(a.points, a.type_names), dataset_csv(b.points, b.type_names));
  a.points.validate();
}

TEST(Synth, RejectsDegenerateSpec) {
  GeneratorConfig g;
  g.clusters = 0;
  EXPECT_THROW(synth_generate(g), ConfigError);
  g = {};
  g.types = 0;
  EXPECT_THROW(synth_generate(g), ConfigError);
}

// ---------------------------------------------------------------- training

TEST(Metrics, HandValues) {
  const std::vector<double> p{90}, a{100};
  const auto m = count_metrics(p, a);
  EXPECT_DOUBLE_EQ(m.mae, 10.0);
  EXPECT_DOUBLE_EQ(m.ratio, 0.1);
  const auto zero = count_metrics(a, a);
  EXPECT_EQ(zero.mae, 0.0);
  EXPECT_EQ(zero.l1_log, 0.0);
  EXPECT_EQ(zero.ratio, 0.0);
}

TEST(Metrics, UnionIsWeightedCombination) {
  const auto data = small_synthetic();
  const auto g = buffer_adjacency(data.points, 600);
  Rng rng(1);
  const auto model = GcnModel::glorot(data.channels(), 8, rng);
  const Split s = split(data.size(), 0.1, rng);
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto mt = evaluate(model, data, g, s.train);
  const auto mv = evaluate(model, data, g, s.validation);
  const auto ma = evaluate(model, data, g, all);
  const double nt = static_cast<double>(mt.count), nv = static_cast<double>(mv.count);
  EXPECT_NEAR(ma.mae, (nt * mt.mae + nv * mv.mae) / (nt + nv), 1e-12);
  EXPECT_NEAR(ma.l1_log, (nt * mt.l1_log + nv * mv.l1_log) / (nt + nv), 1e-12);
  EXPECT_THROW(evaluate(model, data, g, std::vector<std::size_t>{}), ConfigError);
}

TEST(Train, HistoryShapeAndDeterminism) {
  const auto data = small_synthetic();
  const auto g = buffer_adjacency(data.points, 600);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.train_fraction = 0.2;
  cfg.hidden_units = 8;
  const auto a = train(data, g, cfg);
  const auto b = train(data, g, cfg);
  EXPECT_EQ(a.history.loss.size(), 40u);
  EXPECT_EQ(a.history.abs_error.size(), 40u);
  for (double v : a.history.loss) EXPECT_TRUE(std::isfinite(v) && v >= 0);
  for (double v : a.history.abs_error) EXPECT_TRUE(std::isfinite(v) && v >= 0);
  EXPECT_EQ(a.model.theta0, b.model.theta0);
  EXPECT_EQ(a.model.theta1, b.model.theta1);
  EXPECT_EQ(a.history.loss, b.history.loss);
}

TEST(Train, ConstantTargetsDoNotGetWorse) {
  auto data = small_synthetic();
  std::fill(data.points.intensity->begin(), data.points.intensity->end(), 20.0);
  data.targets_log = log_transform(*data.points.intensity);
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.learning_rate = 1e-2;
  cfg.train_fraction = 0.2;
  cfg.hidden_units = 8;
  const auto r = train(data, buffer_adjacency(data.points, 600), cfg);
  EXPECT_LE(r.history.loss.back(), r.history.loss.front());
}

TEST(Train, ZeroLearningRateIsFlat) {
  const auto data = small_synthetic();
  const auto g = buffer_adjacency(data.points, 600);
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.learning_rate = 0.0;
  cfg.dropout = 0.0;
  cfg.train_fraction = 0.2;
  cfg.hidden_units = 8;
  const auto r = train(data, g, cfg);
  Rng rng(cfg.seed);
  split(data.size(), cfg.train_fraction, rng);
  const auto init = GcnModel::glorot(data.channels(), cfg.hidden_units, rng);
  EXPECT_EQ(r.model.theta0, init.theta0);
  EXPECT_EQ(r.model.theta1, init.theta1);
  for (std::size_t e = 1; e < r.history.loss.size(); ++e) {
    EXPECT_EQ(r.history.loss[e], r.history.loss[0]);
    EXPECT_EQ(r.history.abs_error[e], r.history.abs_error[0]);
  }
}

TEST(Train, NeverReadsValidationTargets) {
  const auto data = small_synthetic();
  const auto prop = propagation_operator(buffer_adjacency(data.points, 600));
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.train_fraction = 0.2;
  cfg.hidden_units = 8;
  Rng r1(cfg.seed);
  const Split s = split(data.size(), cfg.train_fraction, r1);
  Rng r2 = r1;
  // poison every validation target; the recorded error uses the raw counts
  Dataset poisoned = data;
  for (auto i : s.validation)
    poisoned.targets_log(static_cast<Eigen::Index>(i)) = std::numeric_limits<double>::quiet_NaN();
  const auto clean = train(data, prop, cfg, s, r1);
  const auto dirty = train(poisoned, prop, cfg, s, r2);
  EXPECT_EQ(clean.model.theta0, dirty.model.theta0);
  EXPECT_EQ(clean.model.theta1, dirty.model.theta1);
  EXPECT_EQ(clean.history.loss, dirty.history.loss);
}

TEST(Train, DivergenceAbortsWithEpoch) {
  auto data = small_synthetic();
  for (Eigen::Index i = 0; i < data.targets_log.size(); ++i)
    data.targets_log(i) = std::numeric_limits<double>::infinity();
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.train_fraction = 0.2;
  try {
    train(data, buffer_adjacency(data.points, 600), cfg);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.epoch(), 1u);
  }
}

TEST(Train, RejectsBadConfigAndSizes) {
  const auto data = small_synthetic();
  TrainConfig cfg;
  cfg.train_fraction = 1.0;
  EXPECT_THROW(train(data, buffer_adjacency(data.points, 600), cfg), ConfigError);
  cfg = {};
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.dropout = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(train(data, SpatialGraph::from_edges(3, {}), TrainConfig{}), DimensionError);
}

TEST(Envelope, OrderAndSingleRun) {
  const auto single = envelope_from_histories({{3, 2, 1}});
  EXPECT_EQ(single.mean, single.min);
  EXPECT_EQ(single.mean, single.max);
  EXPECT_EQ(single.std, (std::vector<double>{0, 0, 0}));
  const auto env = envelope_from_histories({{1, 5}, {3, 1}, {2, 3}});
  EXPECT_DOUBLE_EQ(env.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(env.std[0], std::sqrt(2.0 / 3.0));
  EXPECT_EQ(env.min[1], 1.0);
  EXPECT_EQ(env.max[1], 5.0);
  EXPECT_THROW(envelope_from_histories({{1, 2}, {1}}), DimensionError);
}

TEST(MultiRun, DeterministicAndThreadIndependent) {
  const auto data = small_synthetic();
  const auto g = buffer_adjacency(data.points, 600);
  TrainConfig cfg;
  cfg.epochs = 25;
  cfg.train_fraction = 0.2;
  cfg.hidden_units = 8;
  const std::vector<std::uint64_t> seeds{11, 12, 13, 14};
  const auto seq = multi_run(data, g, cfg, seeds, 1);
  const auto par = multi_run(data, g, cfg, seeds, 4);
  EXPECT_EQ(seq.completed(), 4u);
  EXPECT_EQ(seq.envelope.mean, par.envelope.mean);
  EXPECT_EQ(seq.envelope.std, par.envelope.std);
  EXPECT_EQ(seq.envelope.seeds, seeds);
  for (std::size_t e = 0; e < seq.envelope.epochs(); ++e) {
    EXPECT_LE(seq.envelope.min[e], seq.envelope.mean[e]);
    EXPECT_LE(seq.envelope.mean[e], seq.envelope.max[e]);
  }
  // each run re-draws its split from its own seed
  EXPECT_NE(seq.runs[0].result->split.train, seq.runs[1].result->split.train);
  EXPECT_THROW(multi_run(data, g, cfg, {1, 1}), ConfigError);
  EXPECT_THROW(multi_run(data, g, cfg, {}), ConfigError);
}

TEST(MultiRun, SingleRunEnvelopeCollapses) {
  const auto data = small_synthetic();
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.train_fraction = 0.2;
  cfg.hidden_units = 4;
  const auto r = multi_run(data, buffer_adjacency(data.points, 600), cfg, {5});
  EXPECT_EQ(r.envelope.mean, r.envelope.min);
  EXPECT_EQ(r.envelope.mean, r.envelope.max);
  EXPECT_EQ(r.envelope.mean, r.runs[0].result->history.abs_error);
}

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "test_support.hpp"

using namespace alq;
namespace t = alq::testing;

namespace {

ConfusionMatrix from_rows(std::vector<std::vector<std::uint64_t>> rows) {
  ConfusionMatrix cm(static_cast<int>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.size(); ++j) cm.at(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  return cm;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Confusion, DiagonalWhenPerfect) {
  const std::vector<int> y{0, 3, 3, 16, 5};
  const auto cm = confusion(y, y);
  EXPECT_EQ(cm.trace(), 5u);
  EXPECT_EQ(cm.total(), 5u);
  EXPECT_EQ(cm.at(3, 3), 2u);
}

TEST(Confusion, TwoClassTally) {
  const std::vector<int> truth{0, 0, 1, 1, 1}, preds{0, 1, 1, 1, 0};
  EXPECT_EQ(confusion(preds, truth, 2), from_rows({{1, 1}, {1, 2}}));
  EXPECT_THROW(confusion(std::vector<int>{2}, std::vector<int>{0}, 2), ConfigError);
}

TEST(Metrics, HandComputedTwoClass) {
  const auto m = metrics(from_rows({{5, 0}, {1, 4}}));
  EXPECT_DOUBLE_EQ(m.oa, 90.0);
  EXPECT_DOUBLE_EQ(m.sen, 90.0);
  EXPECT_DOUBLE_EQ(m.spe, 90.0);
  EXPECT_DOUBLE_EQ(m.oa_literal_eq4, 180.0);  // (TP+TN) summed over both classes
}

TEST(Metrics, PerfectSeventeenClass) {
  std::vector<int> y;
  for (int c = 0; c < 17; ++c) y.push_back(c);
  const auto m = metrics(confusion(y, y));
  EXPECT_EQ(m.oa, 100.0);
  EXPECT_EQ(m.sen, 100.0);
  EXPECT_EQ(m.spe, 100.0);
}

TEST(Metrics, AbsentClassExcludedFromSensitivity) {
  const std::vector<int> truth{0, 0, 1}, preds{0, 2, 1};
  const auto m = metrics(confusion(preds, truth, 3));
  EXPECT_EQ(m.excluded_classes, std::vector<int>{2});
  EXPECT_DOUBLE_EQ(m.sen, (50.0 + 100.0) / 2);
  EXPECT_FALSE(m.per_class[2].sensitivity.has_value());
}

TEST(Metrics, RandomPropertySuite) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = std::uniform_int_distribution<int>(2, 17)(rng);
    const int n = std::uniform_int_distribution<int>(1, 200)(rng);
    std::uniform_int_distribution<int> cls(0, k - 1);
    std::vector<int> truth(n), preds(n);
    for (int i = 0; i < n; ++i) {
      truth[i] = cls(rng);
      preds[i] = std::bernoulli_distribution(0.6)(rng) ? truth[i] : cls(rng);
    }
    const auto m = metrics(confusion(preds, truth, k));
    for (double v : {m.oa, m.sen, m.spe}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 100.0);
    }
    EXPECT_EQ(metrics(confusion(truth, truth, k)).oa, 100.0);

    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> pt(n), pp(n);
    for (int i = 0; i < n; ++i) {
      pt[i] = perm[truth[i]];
      pp[i] = perm[preds[i]];
    }
    const auto q = metrics(confusion(pp, pt, k));
    EXPECT_NEAR(q.oa, m.oa, 1e-9);
    EXPECT_NEAR(q.sen, m.sen, 1e-9);
    EXPECT_NEAR(q.spe, m.spe, 1e-9);
  }
}

TEST(Evaluate, LosslessModelGivesIdenticalConfusion) {
  const auto net = oracle::snap_to_one_bit(init_network(default_ecgnet_spec(), 3), 16);
  AlqConfig c;
  c.prune = PruneTarget::none();
  c.refine_iters = 0;
  c.scorer = Scorer::magnitude;
  const auto model = alq_pipeline(net, Dataset{}, c).model;
  const auto test = normalize(synth_generate(2, 8, 0.2));
  EXPECT_EQ(evaluate(model, test).confusion, evaluate(net, test).confusion);
}

TEST(Evaluate, FullyPrunedPredictsClassZero) {
  auto model = uniform_baseline(init_network(default_ecgnet_spec(), 3), 1, 16);
  for (auto& l : model.layers)
    for (auto& g : l.groups) g = QuantGroup{g.size, {}, {}};
  const auto test = normalize(synth_generate(2, 8, 0.2));
  EXPECT_DOUBLE_EQ(evaluate(model, test).metrics.oa, 100.0 / 17.0);
}

TEST(Sweep, SinglePointEqualsPipeline) {
  const auto net = init_network(t::small_spec(), 5);
  const auto calib = t::random_dataset(net.spec, 10, 1), test = t::random_dataset(net.spec, 10, 2);
  AlqConfig c;
  c.group_size = 4;
  c.i_max_default = 3;
  c.prune = PruneTarget::rate(0.0);
  const std::vector<double> rates{0.0};
  const auto pts = sweep(net, calib, test, rates, c);
  const auto res = alq_pipeline(net, calib, c);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0].avg_bitwidth, network_average_bitwidth(res.model.layers));
  EXPECT_EQ(pts[0].calib_loss_refined, res.report.calib_loss_final);
  EXPECT_EQ(pts[0].test_oa, evaluate(res.model, test).metrics.oa);
}

TEST(Sweep, BitwidthStrictlyDecreasesAndCsvShape) {
  const auto net = init_network(t::small_spec(), 5);
  const auto calib = t::random_dataset(net.spec, 10, 1);
  AlqConfig c;
  c.group_size = 4;
  c.i_max_default = 3;
  const std::vector<double> rates{0.0, 0.5, 0.9};
  const auto pts = sweep(net, calib, Dataset{}, rates, c);
  EXPECT_GT(pts[0].avg_bitwidth, pts[1].avg_bitwidth);
  EXPECT_GT(pts[1].avg_bitwidth, pts[2].avg_bitwidth);
  EXPECT_GE(pts[0].base_bits, pts[1].base_bits);
  const auto csv = sweep_csv(pts);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  const std::vector<double> bad{0.5, 0.2};
  EXPECT_THROW(sweep(net, calib, Dataset{}, bad, c), ConfigError);
}

TEST(Reports, ByteIdenticalAcrossRuns) {
  t::TempDir tmp("alq_ev");
  const auto net = init_network(t::small_spec(), 5);
  const auto data = t::random_dataset(net.spec, 12, 1);
  AlqConfig c;
  c.group_size = 4;
  c.i_max_default = 3;
  const auto model = alq_pipeline(net, data, c).model;
  ReportBundle b;
  b.evaluation = evaluate(model, data);
  b.memory = memory_report(model);
  const std::vector<double> rates{0.0, 0.5};
  b.sweep = sweep(net, data, data, rates, c);
  const auto first = emit_reports(b, tmp.file("a"));
  const auto second = emit_reports(b, tmp.file("b"));
  ASSERT_EQ(first.size(), 8u);
  for (std::size_t i = 0; i < first.size(); ++i) EXPECT_EQ(slurp(first[i]), slurp(second[i])) << first[i];
  EXPECT_EQ(nlohmann::json::parse(slurp(first[0]))["n"], 12);
}

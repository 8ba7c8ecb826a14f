#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "satire/checkpoint.hpp"
#include "satire/errors.hpp"
#include "satire/metrics.hpp"
#include "satire/train.hpp"

using namespace satire;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("satire_train_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ModelConfig small_text() {
  ModelConfig c;
  c.kind = ModelKind::text;
  c.stream.d_t = 16;
  c.stream.d_v = 16;
  c.stream.heads = 2;
  c.stream.t_layers = 1;
  c.stream.max_len = 6;
  c.vocab_size = 8;
  c.init_seed = 4;
  return c;
}

// Label is decided by which of two marker tokens follows cls.
std::vector<Example> separable_set(int n, const ModelConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Example> out;
  for (int i = 0; i < n; ++i) {
    Example ex = synthetic_example(c, rng, 4);
    ex.id = "ex" + std::to_string(i);
    ex.label = i % 2;
    ex.tokens.ids[1] = ex.label ? 3 : 4;
    out.push_back(ex);
  }
  return out;
}

// Brute-force AUC over all positive/negative pairs, in percent.
double auc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  std::int64_t conc = 0, ties = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < s.size(); ++i) (y[i] ? pos : neg)++;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!(y[i] == 1 && y[j] == 0)) continue;
      if (s[i] > s[j]) ++conc;
      else if (s[i] == s[j]) ++ties;
    }
  return 100.0 * static_cast<double>(2 * conc + ties) / static_cast<double>(2 * pos * neg);
}

std::vector<Article> articles_with_images(int n, const fs::path& dir) {
  std::vector<Article> out;
  Rng rng(9);
  for (int i = 0; i < n; ++i) {
    const auto path = dir / ("img" + std::to_string(i) + ".png");
    write_image(path, synthetic_texture(48, 48, rng));
    Article a;
    a.id = "art-" + std::to_string(i);
    a.headline = "headline " + std::to_string(i);
    a.image_path = path;
    a.label = i % 2 ? Label::satire : Label::regular;
    a.source = "s";
    if (i % 4 == 1) a.splice = Rect{8, 8, 16, 16};
    out.push_back(a);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- Adam

TEST(Adam, QuadraticBowlConverges) {
  ParameterSet<double> p;
  Rng rng(1);
  auto& w = p.add_uniform("w", {5}, 1, 1, rng);
  for (auto& x : w.data) x *= 3.0;
  AdamState st;
  TrainConfig cfg;
  cfg.lr = 0.01;
  for (int step = 0; step < 2000; ++step) {
    auto& g = w.grad_buffer();
    for (std::size_t i = 0; i < 5; ++i) g[i] = 2.0 * w.data[i];
    adam_step(p, st, cfg);
  }
  double norm = 0;
  for (double x : w.data) norm += x * x;
  EXPECT_LT(std::sqrt(norm), 1e-3);
  EXPECT_EQ(st.step, 2000u);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  ParameterSet<double> p;
  auto& w = p.add_constant("w", {4}, 1.0);
  w.grad_buffer() = {0.5, -2.0, 1e-3, -7.0};
  AdamState st;
  TrainConfig cfg;
  cfg.lr = 0.01;
  adam_step(p, st, cfg);
  const double expect[] = {1.0 - 0.01, 1.0 + 0.01, 1.0 - 0.01, 1.0 + 0.01};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(w.data[i], expect[i], 1e-7) << i;
}

TEST(Adam, ZeroOrMissingGradientLeavesParametersUnchanged) {
  ParameterSet<float> p;
  auto& a = p.add_constant("a", {3}, 0.5f);
  auto& b = p.add_constant("b", {2}, -1.0f);
  a.grad_buffer().assign(3, 0.0f);
  AdamState st;
  adam_step(p, st, TrainConfig{});
  EXPECT_EQ(a.data, std::vector<float>(3, 0.5f));
  EXPECT_EQ(b.data, std::vector<float>(2, -1.0f));
}

TEST(Adam, NonFiniteGradientNamesParameterAndChangesNothing) {
  ParameterSet<float> p;
  auto& a = p.add_constant("alpha", {2}, 1.0f);
  auto& z = p.add_constant("zeta", {2}, 1.0f);
  a.grad_buffer() = {1.0f, 1.0f};
  z.grad_buffer() = {std::nanf(""), 0.0f};
  AdamState st;
  try {
    adam_step(p, st, TrainConfig{});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("zeta"), std::string::npos);
  }
  EXPECT_EQ(a.data, std::vector<float>(2, 1.0f));
  EXPECT_EQ(st.step, 0u);
}

TEST(Adam, FrozenParametersAreSkipped) {
  ParameterSet<float> p;
  auto& a = p.add_constant("text.w", {1}, 1.0f);
  auto& h = p.add_constant("head.w", {1}, 1.0f);
  a.grad_buffer() = {1.0f};
  h.grad_buffer() = {1.0f};
  AdamState st;
  adam_step(p, st, TrainConfig{}, [](const std::string& n) { return n.rfind("text.", 0) != 0; });
  EXPECT_EQ(a.data[0], 1.0f);
  EXPECT_LT(h.data[0], 1.0f);
}

// ---------------------------------------------------------------- training

TEST(TrainConfig, PresetsAndParsing) {
  EXPECT_DOUBLE_EQ(TrainConfig::finetune(ModelKind::coattn).lr, 5e-6);
  EXPECT_EQ(TrainConfig::finetune(ModelKind::coattn).epochs, 12);
  EXPECT_DOUBLE_EQ(TrainConfig::finetune(ModelKind::elacnn).lr, 1e-5);
  EXPECT_EQ(TrainConfig::finetune(ModelKind::elacnn).epochs, 7);
  EXPECT_DOUBLE_EQ(TrainConfig::toy(ModelKind::coattn).lr, 1e-3);
  EXPECT_DOUBLE_EQ(TrainConfig::toy(ModelKind::elacnn).lr, 1e-4);
  EXPECT_EQ(TrainConfig{}.batch_size, 32);
  auto c = TrainConfig::parse("lr = 0.002\nepochs = 3\nseed = 8\n");
  EXPECT_DOUBLE_EQ(c.lr, 0.002);
  EXPECT_EQ(TrainConfig::parse(c.to_text()).to_text(), c.to_text());
  EXPECT_THROW(TrainConfig::parse("lr = 0\n"), ConfigError);
  EXPECT_THROW(TrainConfig::parse("epochs = 0\n"), ConfigError);
  EXPECT_THROW(TrainConfig::parse("momentum = 0.9\n"), ConfigError);
}

TEST(Train, SeparableLossDecreasesAndHistoryMatchesEpochs) {
  const auto c = small_text();
  const auto data = separable_set(40, c, 1);
  Model<float> m(c);
  TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 8;
  tc.lr = 3e-3;
  int callbacks = 0;
  const auto hist = train(m, data, tc, [&](const EpochStats&) { ++callbacks; });
  ASSERT_EQ(hist.size(), 4u);
  EXPECT_EQ(callbacks, 4);
  for (int e = 1; e < 3; ++e) EXPECT_LT(hist[e].mean_loss, hist[e - 1].mean_loss) << e;
  EXPECT_EQ(hist[0].epoch, 1);
  const auto table = history_table(hist);
  EXPECT_EQ(table.rfind("epoch\tloss\ttrain_accuracy\n", 0), 0u);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 5);
}

TEST(Train, SameSeedGivesIdenticalCheckpoints) {
  const auto c = small_text();
  const auto data = separable_set(21, c, 2);  // final batch of 5 is kept
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.seed = 5;
  Model<float> a(c), b(c);
  train(a, data, tc);
  train(b, data, tc);
  EXPECT_EQ(encode_checkpoint("", a.params()), encode_checkpoint("", b.params()));
  tc.seed = 6;
  Model<float> d(c);
  train(d, data, tc);
  EXPECT_NE(encode_checkpoint("", a.params()), encode_checkpoint("", d.params()));
}

TEST(Train, RejectsEmptySetAndBadConfig) {
  Model<float> m(small_text());
  EXPECT_THROW(train(m, {}, TrainConfig{}), DataError);
  TrainConfig bad;
  bad.lr = -1;
  EXPECT_THROW(train(m, separable_set(2, small_text(), 1), bad), ConfigError);
}

TEST(Train, FrozenEncodersOnlyMoveTheHead) {
  auto c = small_text();
  c.kind = ModelKind::fuse_concat;
  c.stream.v_layers = 1;
  c.grid = PatchGrid{2, 2, 8};
  c.mlp_hidden = 8;
  c.freeze_encoders = true;
  Model<float> m(c);
  const auto before = m.params().tensors();
  TrainConfig tc;
  tc.epochs = 1;
  train(m, separable_set(6, c, 3), tc);
  for (const auto& [name, t] : m.params().tensors()) {
    if (m.trainable(name)) {
      EXPECT_NE(t.data, before.at(name).data) << name;
    } else {
      EXPECT_EQ(t.data, before.at(name).data) << name;
    }
  }
}

TEST(Checkpoint, ModelRoundTripKeepsPredictionsAndVocab) {
  const auto dir = scratch("ckpt");
  const auto c = small_text();
  Model<float> m(c);
  const auto data = separable_set(5, c, 4);
  const Vocab vocab({"alpha", "beta", "gamma"}, 1);
  save_model(dir / "m.ckpt", m, vocab);
  auto loaded = load_model(dir / "m.ckpt");
  EXPECT_EQ(loaded.vocab, vocab);
  EXPECT_EQ(loaded.model.config().to_text(), c.to_text());
  EXPECT_EQ(predict(loaded.model, data), predict(m, data));
  EXPECT_FALSE(loaded.split.has_value());
  save_model(dir / "s.ckpt", m, vocab, SplitSpec{0.75, 42});
  const auto with_split = load_model(dir / "s.ckpt");
  ASSERT_TRUE(with_split.split.has_value());
  EXPECT_EQ(with_split.split->ratio, 0.75);
  EXPECT_EQ(with_split.split->seed, 42u);

  write_checkpoint(dir / "bad.ckpt", "not json", m.params());
  EXPECT_THROW(load_model(dir / "bad.ckpt"), DataError);
  write_checkpoint(dir / "bad2.ckpt", "{\"format\": \"other\"}", m.params());
  EXPECT_THROW(load_model(dir / "bad2.ckpt"), DataError);
}

TEST(Predict, ProbabilitiesAreSoftmaxOfLogits) {
  const auto c = small_text();
  Model<float> m(c);
  const auto data = separable_set(3, c, 5);
  const auto p = predict(m, data);
  for (std::size_t i = 0; i < data.size(); ++i) {
    Graph<float> g;
    const auto z = m.forward(g, data[i]).value();
    const double e0 = std::exp(static_cast<double>(z[0])), e1 = std::exp(static_cast<double>(z[1]));
    EXPECT_NEAR(p[i], e1 / (e0 + e1), 1e-12);
  }
}

// ---------------------------------------------------------------- AUC

TEST(Auc, WorkedExamples) {
  EXPECT_DOUBLE_EQ(auc_roc({0.9, 0.8, 0.1}, {1, 1, 0}), 100.0);
  EXPECT_DOUBLE_EQ(auc_roc({0.3, 0.3, 0.3, 0.3}, {1, 0, 1, 0}), 50.0);
  EXPECT_DOUBLE_EQ(auc_roc({0.8, 0.7, 0.6, 0.5}, {1, 0, 1, 0}), 75.0);
  EXPECT_THROW(auc_roc({0.1, 0.2}, {1, 1}), DataError);
  EXPECT_THROW(auc_roc({0.1}, {1, 0}), DimensionError);
  EXPECT_THROW(auc_roc({0.1, 0.2}, {1, 2}), DataError);
}

TEST(Auc, MatchesPairCountingOracleExactly) {
  Rng rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = rng.range(2, 50);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
      s[i] = rng.range(0, 9) / 10.0;  // coarse grid forces ties
      y[i] = rng.bernoulli(0.4) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    ASSERT_EQ(auc_roc(s, y), auc_pairs(s, y)) << trial;
    ASSERT_NEAR(auc_trapezoid(s, y), auc_pairs(s, y), 1e-9) << trial;
    ++checked;
  }
  EXPECT_EQ(checked, 1000);
}

TEST(Auc, RandomScoresAreNearChance) {
  Rng rng(7);
  std::vector<double> s(1000);
  std::vector<int> y(1000);
  for (int i = 0; i < 1000; ++i) {
    s[i] = rng.uniform();
    y[i] = i % 2;
  }
  EXPECT_NEAR(auc_roc(s, y), 50.0, 5.0);
}

// ---------------------------------------------------------------- confusion metrics

TEST(Metrics, WorkedF1Example) {
  const Confusion c{3, 1, 0, 2};
  EXPECT_DOUBLE_EQ(*precision(c), 75.0);
  EXPECT_DOUBLE_EQ(*recall(c), 60.0);
  EXPECT_NEAR(*f1_score(c), 66.6667, 1e-4);
  EXPECT_DOUBLE_EQ(*f1_score(Confusion{5, 0, 5, 0}), 100.0);
  EXPECT_FALSE(f1_score(Confusion{0, 0, 6, 4}).has_value());
  EXPECT_FALSE(precision(Confusion{0, 0, 6, 4}).has_value());
  EXPECT_FALSE(recall(Confusion{0, 3, 6, 0}).has_value());
  EXPECT_THROW(accuracy(Confusion{}), DataError);
}

TEST(Metrics, ConfusionIdentitiesOnRandomMatrices) {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const Confusion c{rng.range(0, 40), rng.range(0, 40), rng.range(0, 40), rng.range(0, 40)};
    if (c.total() == 0) continue;
    EXPECT_DOUBLE_EQ(accuracy(c), 100.0 * static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total()));
    const auto p = precision(c), r = recall(c), f = f1_score(c);
    EXPECT_EQ(p.has_value(), c.tp + c.fp > 0);
    EXPECT_EQ(r.has_value(), c.tp + c.fn > 0);
    EXPECT_EQ(f.has_value(), p.has_value() && r.has_value());
    if (f) {
      const double harmonic = *p + *r > 0 ? 2 * *p * *r / (*p + *r) : 0.0;
      EXPECT_NEAR(*f, harmonic, 1e-9);
      EXPECT_GE(*f, std::min(*p, *r) - 1e-9);
      EXPECT_LE(*f, std::max(*p, *r) + 1e-9);
    }
  }
}

TEST(Metrics, ConfusionFromPredictions) {
  const auto c = confusion_matrix({1, 1, 0, 0, 1}, {1, 0, 0, 1, 1});
  EXPECT_EQ(c, (Confusion{2, 1, 1, 1}));
}

TEST(Metrics, PerfectClassifier) {
  const auto r = compute_metrics(std::vector<double>{0.9, 0.2, 0.7, 0.1}, {1, 0, 1, 0});
  EXPECT_DOUBLE_EQ(r.accuracy, 100.0);
  EXPECT_DOUBLE_EQ(*r.f1, 100.0);
  EXPECT_DOUBLE_EQ(r.auc_roc, 100.0);
}

TEST(Metrics, ThresholdIsStrictlyAboveHalf) {
  const auto r = compute_metrics(std::vector<double>{0.5, 0.51}, {1, 0});
  EXPECT_EQ(r.confusion, (Confusion{0, 1, 0, 1}));
}

TEST(MajorityBaseline, FortySixtyCorpusGivesTableOneRow) {
  std::vector<int> train(800), test(200);
  for (int i = 0; i < 800; ++i) train[i] = i < 320 ? 1 : 0;
  for (int i = 0; i < 200; ++i) test[i] = i < 80 ? 1 : 0;
  const auto r = majority_baseline(train, test);
  EXPECT_EQ(r.accuracy, 60.0);
  EXPECT_EQ(r.auc_roc, 50.0);
  EXPECT_FALSE(r.f1.has_value());
  EXPECT_NE(metrics_text(r).find("accuracy 60.00\n"), std::string::npos);
  EXPECT_NE(metrics_text(r).find("f1 \xe2\x80\x94\n"), std::string::npos);
}

TEST(MajorityBaseline, BalancedCorpusGivesFifty) {
  const auto r = majority_baseline({1, 0, 1, 0}, {1, 0, 1, 0, 1, 0});
  EXPECT_EQ(r.accuracy, 50.0);
  EXPECT_EQ(r.auc_roc, 50.0);
  EXPECT_THROW(majority_baseline({}, {1}), DataError);
}

TEST(MetricsSerialization, TextAndJson) {
  const auto r = compute_metrics(std::vector<double>{0.9, 0.6, 0.4, 0.1, 0.7}, {1, 0, 1, 0, 1});
  EXPECT_EQ(metrics_text(r),
            "accuracy 60.00\nprecision 66.67\nrecall 66.67\nf1 66.67\nauc_roc 83.33\ntp 2\nfp 1\ntn 1\nfn 1\n");
  const auto back = parse_metrics_json(metrics_json(r));
  EXPECT_EQ(metrics_json(back), metrics_json(r));
  const auto base = majority_baseline({0, 0, 1}, {1, 0});
  EXPECT_NE(metrics_json(base).find("\"f1\": null"), std::string::npos);
  EXPECT_FALSE(parse_metrics_json(metrics_json(base)).f1.has_value());
  EXPECT_THROW(parse_metrics_json("{\"accuracy\": 1}"), ParseError);
}

// ---------------------------------------------------------------- error analysis

TEST(MisclassificationReport, PerfectClassifierGivesEmptyReport) {
  const auto dir = scratch("report_empty");
  const auto arts = articles_with_images(4, dir);
  EXPECT_TRUE(misclassification_report(arts, {0.1, 0.9, 0.2, 0.8}).empty());
}

TEST(MisclassificationReport, SamplesCeilOfFractionDeterministically) {
  const auto dir = scratch("report");
  const auto arts = articles_with_images(12, dir);
  std::vector<double> prob(12);
  for (int i = 0; i < 12; ++i) prob[i] = (i < 10) == (i % 2 == 1) ? 0.2 : 0.8;  // first 10 wrong
  const auto a = misclassification_report(arts, prob, 0.2, 3);
  ASSERT_EQ(a.size(), 2u);
  const auto b = misclassification_report(arts, prob, 0.2, 3);
  EXPECT_EQ(misclassification_jsonl(a), misclassification_jsonl(b));
  EXPECT_EQ(misclassification_report(arts, prob, 0.25, 3).size(), 3u);
  EXPECT_EQ(misclassification_report(arts, prob, 1.0, 3).size(), 10u);
  for (const auto& r : misclassification_report(arts, prob, 1.0, 3)) {
    const int idx = std::stoi(r.id.substr(4));
    EXPECT_LT(idx, 10);
    EXPECT_NE(r.true_label, r.predicted);
    EXPECT_EQ(r.region_is_splice, arts[idx].splice.has_value());
    if (r.region_is_splice) {
      EXPECT_EQ(r.region, *arts[idx].splice);
    }
    EXPECT_GE(r.ela_stats.ratio, 0.0);
  }
  const auto jsonl = misclassification_jsonl(a);
  EXPECT_EQ(std::count(jsonl.begin(), jsonl.end(), '\n'), 2);
  EXPECT_THROW(misclassification_report(arts, prob, 0.0), UsageError);
  EXPECT_THROW(misclassification_report(arts, {0.5}), DimensionError);
}

TEST(MisclassificationReport, HottestTileFindsTheBrightRegion) {
  ElaMap map;
  map.width = 64;
  map.height = 64;
  map.values.assign(64 * 64 * 3, 1);
  for (int y = 32; y < 64; ++y)
    for (int x = 16; x < 48; ++x)
      for (int c = 0; c < 3; ++c) map.values[(y * 64 + x) * 3 + c] = 50;
  EXPECT_EQ(hottest_tile(map, 32), (Rect{16, 32, 32, 32}));
  EXPECT_EQ(hottest_tile(map, 100).w, 32);
}

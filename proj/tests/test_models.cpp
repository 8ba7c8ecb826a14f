#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "satire/errors.hpp"
#include "satire/models.hpp"
#include "satire/ops.hpp"

using namespace satire;
namespace fs = std::filesystem;

namespace {

ModelConfig small(ModelKind kind, int d = 16) {
  ModelConfig c;
  c.kind = kind;
  c.stream.d_v = d;
  c.stream.d_t = d;
  c.stream.heads = 2;
  c.stream.max_len = 8;
  c.grid = PatchGrid{2, 2, 8};
  c.vocab_size = 11;
  c.mlp_hidden = 12;
  c.init_seed = 3;
  return c;
}

std::vector<double> values(Var<double> v) { return {v.value().begin(), v.value().end()}; }
std::vector<float> values(Var<float> v) { return {v.value().begin(), v.value().end()}; }

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  EXPECT_EQ(a.size(), b.size());
  double m = 0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void randomize(Tensor<double>& t, Rng& rng, double lo = -0.5, double hi = 0.5) {
  for (auto& x : t.data) x = rng.uniform(lo, hi);
}

}  // namespace

// ---------------------------------------------------------------- config

TEST(ModelConfig, KindNamesRoundTrip) {
  for (auto k : {ModelKind::elacnn, ModelKind::text, ModelKind::image, ModelKind::fuse_avg, ModelKind::fuse_concat,
                 ModelKind::coattn}) {
    EXPECT_EQ(parse_model_kind(model_kind_name(k)), k);
  }
  EXPECT_THROW(parse_model_kind("vilbert"), ConfigError);
}

TEST(ModelConfig, TextRoundTrip) {
  auto c = small(ModelKind::fuse_concat, 24);
  c.stream.d_v = 12;
  c.stream.positions = false;
  c.dropout = 0.125;
  c.freeze_encoders = true;
  c.init_seed = 77;
  const auto back = ModelConfig::parse(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.stream.d_v, 12);
  EXPECT_FALSE(back.stream.positions);
}

TEST(ModelConfig, FullPresetAndOverrides) {
  const auto c = ModelConfig::parse("preset = full\nd_v = 64\nd_t = 64\n");
  EXPECT_EQ(c.stream.v_layers, 6);
  EXPECT_EQ(c.stream.t_layers, 12);
  EXPECT_EQ(c.stream.coattn_pairs, 6);
  EXPECT_EQ(c.stream.d_v, 64);
}

TEST(ModelConfig, RejectsInvalidStreams) {
  EXPECT_THROW(ModelConfig::parse("d_v = 30\nheads = 4\n"), ConfigError);
  EXPECT_THROW(ModelConfig::parse("coattn_pairs = 3\nv_layers = 2\n"), ConfigError);
  EXPECT_THROW(ModelConfig::parse("kind = fuse-avg\nd_v = 64\n"), ConfigError);
  EXPECT_THROW(ModelConfig::parse("kind = coattn\nd_v = 64\n"), ConfigError);
  EXPECT_NO_THROW(ModelConfig::parse("kind = coattn\nd_v = 64\nproject_streams = true\n"));
  EXPECT_NO_THROW(ModelConfig::parse("kind = fuse-concat\nd_v = 64\n"));
  EXPECT_THROW(ModelConfig::parse("dropout = 1\n"), ConfigError);
  EXPECT_THROW(ModelConfig::parse("layers = 3\n"), ConfigError);
}

// ---------------------------------------------------------------- ELA-CNN

TEST(ElaCnn, IntermediateShapes) {
  ModelConfig c;
  c.kind = ModelKind::elacnn;
  Model<float> m(c);
  Graph<float> g;
  auto& P = m.params();
  const Var<float> x = g.constant(Tensor<float>({128, 128, 3}, std::vector<float>(128 * 128 * 3, 0.25f)));
  const Var<float> c1 = relu(conv2d(x, g.param(P.at("elacnn.conv1.w")), g.param(P.at("elacnn.conv1.b"))));
  EXPECT_EQ(c1.shape(), (Shape{124, 124, 32}));
  const Var<float> p1 = maxpool2d(c1);
  EXPECT_EQ(p1.shape(), (Shape{62, 62, 32}));
  const Var<float> c2 = conv2d(p1, g.param(P.at("elacnn.conv2.w")), g.param(P.at("elacnn.conv2.b")));
  EXPECT_EQ(c2.shape(), (Shape{58, 58, 32}));
  EXPECT_EQ(maxpool2d(c2).shape(), (Shape{29, 29, 32}));
  EXPECT_EQ(P.at("elacnn.fc1.w").shape, (Shape{ElaCnnShape::flat, 256}));
  EXPECT_EQ(ElaCnnShape::flat, 26912u);
  Graph<float> g2;
  EXPECT_EQ(m.elacnn_forward(g2, Tensor<float>({128, 128, 3}, values(x))).shape(), (Shape{1, 2}));
}

TEST(ElaCnn, ZeroInputGivesPropagatedBiases) {
  ModelConfig c;
  c.kind = ModelKind::elacnn;
  Model<double> m(c);
  auto& P = m.params();
  Rng rng(11);
  for (const char* b : {"elacnn.conv1.b", "elacnn.conv2.b", "elacnn.fc1.b", "elacnn.fc2.b"}) randomize(P.at(b), rng);

  // Hand-propagated constant: every spatial position carries the same
  // per-channel value after each stage.
  const auto& b1 = P.at("elacnn.conv1.b").data;
  const auto& w2 = P.at("elacnn.conv2.w").data;
  const auto& b2 = P.at("elacnn.conv2.b").data;
  std::vector<double> a1(32), a2(32);
  for (int ch = 0; ch < 32; ++ch) a1[ch] = std::max(0.0, b1[ch]);
  for (int co = 0; co < 32; ++co) {
    double s = b2[co];
    for (int k = 0; k < 25; ++k)
      for (int ci = 0; ci < 32; ++ci) s += w2[(k * 32 + ci) * 32 + co] * a1[ci];
    a2[co] = std::max(0.0, s);
  }
  const auto& w3 = P.at("elacnn.fc1.w").data;
  const auto& b3 = P.at("elacnn.fc1.b").data;
  std::vector<double> h(256);
  for (int j = 0; j < 256; ++j) {
    double s = b3[j];
    for (int pos = 0; pos < 29 * 29; ++pos)
      for (int ch = 0; ch < 32; ++ch) s += a2[ch] * w3[static_cast<std::size_t>(pos * 32 + ch) * 256 + j];
    h[j] = std::max(0.0, s);
  }
  const auto& w4 = P.at("elacnn.fc2.w").data;
  const auto& b4 = P.at("elacnn.fc2.b").data;
  std::vector<double> expect(2);
  for (int k = 0; k < 2; ++k) {
    expect[k] = b4[k];
    for (int j = 0; j < 256; ++j) expect[k] += h[j] * w4[j * 2 + k];
  }

  Graph<double> g;
  const auto got = values(m.elacnn_forward(g, Tensor<float>({128, 128, 3}, std::vector<float>(128 * 128 * 3, 0.0f))));
  EXPECT_LT(max_abs_diff(got, expect), 1e-9);
}

TEST(ElaCnn, RejectsWrongInputShape) {
  ModelConfig c;
  c.kind = ModelKind::elacnn;
  Model<float> m(c);
  Graph<float> g;
  EXPECT_THROW(m.elacnn_forward(g, Tensor<float>({64, 64, 3}, std::vector<float>(64 * 64 * 3))), ConfigError);
}

// ---------------------------------------------------------------- text stream

TEST(TextEncode, StateShape) {
  for (bool trim : {false, true}) {
    auto c = small(ModelKind::text);
    c.trim_padding = trim;
    Model<float> m(c);
    Rng rng(1);
    const auto ex = synthetic_example(c, rng, 5);
    Graph<float> g;
    const auto e = m.text_encode(g, ex.tokens);
    EXPECT_EQ(e.states.shape(), (Shape{trim ? 5u : 8u, 16u}));
    EXPECT_EQ(e.pooled.shape(), (Shape{1, 16}));
  }
}

TEST(TextEncode, PadEmbeddingsDoNotReachPooledState) {
  auto c = small(ModelKind::text);
  c.trim_padding = false;
  Model<double> m(c);
  Rng rng(2);
  const auto ex = synthetic_example(c, rng, 4);
  Graph<double> g1;
  const auto before = values(m.text_encode(g1, ex.tokens).pooled);
  auto& tok = m.params().at("text.tok_emb");
  auto& pos = m.params().at("text.pos_emb");
  for (std::size_t j = 0; j < 16; ++j) tok.data[kPadId * 16 + j] += 3.0;
  for (std::size_t i = 4; i < 8; ++i)
    for (std::size_t j = 0; j < 16; ++j) pos.data[i * 16 + j] -= 2.0;
  Graph<double> g2;
  EXPECT_EQ(values(m.text_encode(g2, ex.tokens).pooled), before);
}

TEST(TextEncode, TrimmingPaddingIsEquivalent) {
  auto c = small(ModelKind::text);
  Rng rng(3);
  const auto ex = synthetic_example(c, rng, 3);
  c.trim_padding = false;
  Model<double> full(c);
  c.trim_padding = true;
  Model<double> trimmed(c);
  Graph<double> g1, g2;
  EXPECT_LT(max_abs_diff(values(full.text_encode(g1, ex.tokens).pooled),
                         values(trimmed.text_encode(g2, ex.tokens).pooled)),
            1e-12);
}

TEST(TextEncode, OutOfRangeIdIsDataError) {
  const auto c = small(ModelKind::text);
  Model<float> m(c);
  Rng rng(4);
  auto ex = synthetic_example(c, rng, 4);
  ex.tokens.ids[2] = 11;
  Graph<float> g;
  EXPECT_THROW(m.text_encode(g, ex.tokens), DataError);
}

// ---------------------------------------------------------------- image stream

TEST(ImageEncode, DefaultGridShape) {
  ModelConfig c;
  c.kind = ModelKind::image;
  Model<float> m(c);
  Rng rng(5);
  const auto ex = synthetic_example(c, rng);
  EXPECT_EQ(ex.patches.shape, (Shape{16, 3072}));
  Graph<float> g;
  const auto e = m.image_encode(g, ex.patches);
  EXPECT_EQ(e.states.shape(), (Shape{16, 128}));
  EXPECT_EQ(e.pooled.shape(), (Shape{1, 128}));
}

TEST(ImageEncode, PermutationEquivariantWithoutPositions) {
  auto c = small(ModelKind::image);
  c.stream.positions = false;
  Model<double> m(c);
  Rng rng(6);
  const auto ex = synthetic_example(c, rng);
  const std::vector<std::size_t> perm = {2, 0, 3, 1};
  const std::size_t d = ex.patches.shape[1];
  Tensor<float> permuted = ex.patches;
  for (std::size_t i = 0; i < 4; ++i)
    std::copy_n(ex.patches.data.begin() + perm[i] * d, d, permuted.data.begin() + i * d);
  Graph<double> g1, g2;
  const auto a = m.image_encode(g1, ex.patches), b = m.image_encode(g2, permuted);
  const auto sa = values(a.states), sb = values(b.states);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(sb[i * 16 + j], sa[perm[i] * 16 + j], 1e-12);
  EXPECT_LT(max_abs_diff(values(a.pooled), values(b.pooled)), 1e-12);
}

TEST(ImageEncode, RegionCountMismatchIsConfigError) {
  const auto c = small(ModelKind::image);
  Model<float> m(c);
  Graph<float> g;
  EXPECT_THROW(m.image_encode(g, Tensor<float>({3, 48}, std::vector<float>(3 * 48))), ConfigError);
}

// ---------------------------------------------------------------- co-attention

TEST(CoAttention, IdenticalTextStatesGiveOneAttendedVector) {
  const auto c = small(ModelKind::coattn);
  Model<double> m(c);
  Rng rng(7);
  auto v = Tensor<double>::zeros({4, 16}), t_row = Tensor<double>::zeros({1, 16}), t = Tensor<double>::zeros({5, 16});
  randomize(v, rng, -1, 1);
  randomize(t_row, rng, -1, 1);
  for (std::size_t i = 0; i < 5; ++i) std::copy_n(t_row.data.begin(), 16, t.data.begin() + i * 16);
  const std::vector<std::uint8_t> mask = {1, 1, 1, 0, 0};

  Graph<double> g;
  const auto [v2, t2] = m.coattention_block(g, 0, g.constant(v), g.constant(t), mask);

  // Any convex combination of identical values is that value, so the visual
  // update is o(v(t_row)) for every region regardless of the weights.
  const std::string b = "image.block" + std::to_string(c.stream.v_layers - c.stream.coattn_pairs);
  Graph<double> h;
  auto P = [&](const std::string& n) { return h.param(m.params().at(b + n)); };
  const Var<double> vt = add_bias(matmul(h.constant(t_row), P(".attn.v.w")), P(".attn.v.b"));
  const Var<double> upd = add_bias(matmul(vt, P(".attn.o.w")), P(".attn.o.b"));
  const Var<double> att = matmul(h.constant(Shape{4, 1}, std::vector<double>(4, 1.0)), upd);
  const Var<double> x1 = layer_norm(add(h.constant(v), att), P(".ln1.g"), P(".ln1.b"));
  const Var<double> f = add_bias(matmul(relu(add_bias(matmul(x1, P(".ffn1.w")), P(".ffn1.b"))), P(".ffn2.w")), P(".ffn2.b"));
  const Var<double> expect = layer_norm(add(x1, f), P(".ln2.g"), P(".ln2.b"));
  EXPECT_LT(max_abs_diff(values(v2), values(expect)), 1e-12);
}

TEST(CoAttention, PreservesLengthsAndNormalizesWeights) {
  const auto c = small(ModelKind::coattn);
  Model<double> m(c);
  Rng rng(8);
  auto v = Tensor<double>::zeros({4, 16}), t = Tensor<double>::zeros({6, 16});
  randomize(v, rng, -1, 1);
  randomize(t, rng, -1, 1);
  const std::vector<std::uint8_t> mask = {1, 1, 1, 1, 0, 0};
  Trace<double> trace;
  Graph<double> g;
  const auto [v2, t2] = m.coattention_block(g, 1, g.constant(v), g.constant(t), mask, nullptr, &trace);
  EXPECT_EQ(v2.shape(), (Shape{4, 16}));
  EXPECT_EQ(t2.shape(), (Shape{6, 16}));
  ASSERT_EQ(trace.attention.size(), 2u * 2u);  // two directions x two heads
  for (std::size_t a = 0; a < trace.attention.size(); ++a) {
    const auto w = trace.attention[a];
    const std::size_t rows = w.dim(0), cols = w.dim(1);
    EXPECT_EQ(cols, a < 2 ? 6u : 4u);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0;
      for (std::size_t k = 0; k < cols; ++k) s += w.value()[r * cols + k];
      EXPECT_NEAR(s, 1.0, 1e-5);
      if (a < 2) {
        EXPECT_EQ(w.value()[r * cols + 4] + w.value()[r * cols + 5], 0.0);
      }
    }
  }
}

TEST(CoAttention, StreamWidthMismatchIsConfigError) {
  const auto c = small(ModelKind::coattn);
  Model<double> m(c);
  Graph<double> g;
  const auto v = g.constant(Shape{4, 8}, std::vector<double>(32));
  const auto t = g.constant(Shape{3, 16}, std::vector<double>(48));
  EXPECT_THROW(m.coattention_block(g, 0, v, t, {}), ConfigError);
  EXPECT_THROW(m.coattention_block(g, 2, t, t, {}), ConfigError);
}

TEST(CoAttention, ZeroVisualSummaryGivesHeadBias) {
  const auto c = small(ModelKind::coattn);
  Model<double> m(c);
  Rng rng(9);
  const std::string last = "image.block" + std::to_string(c.stream.v_layers - 1);
  std::fill(m.params().at(last + ".ln2.g").data.begin(), m.params().at(last + ".ln2.g").data.end(), 0.0);
  randomize(m.params().at("head.b"), rng);
  const auto ex = synthetic_example(c, rng);
  Trace<double> trace;
  Graph<double> g;
  const auto logits = m.forward(g, ex, nullptr, &trace);
  ASSERT_TRUE(trace.h_v.has_value());
  for (double x : trace.h_v->value()) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(values(logits), m.params().at("head.b").data);
}

TEST(CoAttention, TextStatesDependOnRegionsOnlyAfterCoBlocks) {
  Rng rng(10);
  for (auto kind : {ModelKind::coattn, ModelKind::fuse_concat}) {
    const auto c = small(kind);
    Model<double> m(c);
    const auto ex = synthetic_example(c, rng);
    Example other = ex;
    for (auto& x : other.patches.data) x += static_cast<float>(rng.uniform(-0.1, 0.1));
    Trace<double> t1, t2;
    Graph<double> g1, g2;
    m.forward(g1, ex, nullptr, &t1);
    m.forward(g2, other, nullptr, &t2);
    ASSERT_EQ(t1.text_states.size(), static_cast<std::size_t>(c.stream.t_layers));
    const int first_co = kind == ModelKind::coattn ? c.stream.t_layers - c.stream.coattn_pairs : c.stream.t_layers;
    for (int i = 0; i < c.stream.t_layers; ++i) {
      const double diff = max_abs_diff(values(t1.text_states[i]), values(t2.text_states[i]));
      if (i < first_co) EXPECT_EQ(diff, 0.0) << model_kind_name(kind) << " block " << i;
      else EXPECT_GT(diff, 1e-6) << model_kind_name(kind) << " block " << i;
    }
  }
}

// ---------------------------------------------------------------- fusion heads

TEST(Fusion, ConcatInputWidthIsSumOfStreams) {
  auto c = small(ModelKind::fuse_concat, 16);
  c.stream.d_v = 8;
  Model<float> m(c);
  EXPECT_EQ(m.params().at("head.fc1.w").shape, (Shape{24, 12}));
  Rng rng(12);
  Graph<float> g;
  EXPECT_EQ(m.forward(g, synthetic_example(c, rng)).shape(), (Shape{1, 2}));
}

TEST(Fusion, AverageClassifiesTheMean) {
  const auto c = small(ModelKind::fuse_avg);
  Model<double> m(c);
  Rng rng(13);
  randomize(m.params().at("head.b"), rng);
  const auto ex = synthetic_example(c, rng);
  Trace<double> trace;
  Graph<double> g;
  const auto logits = values(m.forward(g, ex, nullptr, &trace));
  const auto hv = values(*trace.h_v), ht = values(*trace.h_t);
  const auto& W = m.params().at("head.w").data;
  const auto& b = m.params().at("head.b").data;
  std::vector<double> expect(b);
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 16; ++j) expect[k] += 0.5 * (hv[j] + ht[j]) * W[j * 2 + k];
  EXPECT_LT(max_abs_diff(logits, expect), 1e-12);

  // h_v == h_t == h reduces to the plain classifier on h.
  Graph<double> h;
  const auto hvar = h.constant(Shape{1, 16}, hv);
  const auto same = values(add_bias(matmul(scale(add(hvar, hvar), 0.5), h.param(m.params().at("head.w"))),
                                    h.param(m.params().at("head.b"))));
  const auto direct = values(add_bias(matmul(hvar, h.param(m.params().at("head.w"))), h.param(m.params().at("head.b"))));
  EXPECT_LT(max_abs_diff(same, direct), 1e-15);
}

TEST(Fusion, ProjectionAllowsUnequalWidths) {
  auto c = small(ModelKind::fuse_avg, 16);
  c.stream.d_v = 8;
  EXPECT_THROW(Model<float>{c}, ConfigError);
  c.stream.project_streams = true;
  Model<float> m(c);
  EXPECT_EQ(m.params().at("fuse.proj_v.w").shape, (Shape{8, 16}));
  Rng rng(14);
  Graph<float> g;
  EXPECT_EQ(m.forward(g, synthetic_example(c, rng)).shape(), (Shape{1, 2}));
}

TEST(Fusion, FrozenEncodersLeaveHeadTrainable) {
  auto c = small(ModelKind::fuse_concat);
  c.freeze_encoders = true;
  Model<float> m(c);
  EXPECT_FALSE(m.trainable("text.block0.ffn1.w"));
  EXPECT_FALSE(m.trainable("image.patch.proj_w"));
  EXPECT_TRUE(m.trainable("head.fc1.w"));
}

// ---------------------------------------------------------------- properties

TEST(ModelProperties, RandomSmallConfigsKeepShapeContracts) {
  Rng rng(15);
  const ModelKind kinds[] = {ModelKind::text, ModelKind::image, ModelKind::fuse_avg, ModelKind::fuse_concat,
                             ModelKind::coattn};
  for (int trial = 0; trial < 40; ++trial) {
    ModelConfig c;
    c.kind = kinds[trial % 5];
    c.stream.heads = rng.range(1, 3);
    c.stream.d_t = c.stream.heads * rng.range(1, 4);
    c.stream.d_v = rng.bernoulli(0.5) ? c.stream.d_t : c.stream.heads * rng.range(1, 4);
    c.stream.project_streams = c.stream.d_v != c.stream.d_t;
    c.stream.v_layers = rng.range(1, 3);
    c.stream.t_layers = rng.range(1, 3);
    c.stream.coattn_pairs = rng.range(1, std::min(c.stream.v_layers, c.stream.t_layers));
    c.stream.ffn_mult = rng.range(1, 2);
    c.stream.max_len = rng.range(2, 9);
    c.stream.positions = rng.bernoulli(0.5);
    const int side = rng.range(1, 3);
    c.grid = PatchGrid{side, rng.range(1, 3), 12};
    c.vocab_size = rng.range(3, 20);
    c.mlp_hidden = rng.range(1, 8);
    c.trim_padding = rng.bernoulli(0.5);
    c.init_seed = static_cast<std::uint64_t>(trial);
    SCOPED_TRACE(c.to_text());
    Model<double> m(c);
    const auto ex = synthetic_example(c, rng, static_cast<std::size_t>(rng.range(1, c.stream.max_len)));
    Graph<double> g1, g2;
    const auto a = m.forward(g1, ex), b = m.forward(g2, ex);
    ASSERT_EQ(a.shape(), (Shape{1, 2}));
    EXPECT_EQ(values(a), values(b));
    Graph<double> g3;
    const auto probs = values(softmax_rows(g3.constant(Shape{1, 2}, values(a))));
    EXPECT_NEAR(probs[0] + probs[1], 1.0, 1e-6);
  }
}

TEST(ModelProperties, WrongModelEntryPointIsConfigError) {
  const auto c = small(ModelKind::text);
  Model<float> m(c);
  Rng rng(16);
  const auto ex = synthetic_example(c, rng);
  Graph<float> g;
  EXPECT_THROW(m.image_encode(g, ex.patches), ConfigError);
  EXPECT_THROW(m.coattn_forward(g, ex.tokens, ex.patches), ConfigError);
  EXPECT_THROW(m.elacnn_forward(g, ex.ela), ConfigError);
}

// ---------------------------------------------------------------- gradients

class ModelGradients : public ::testing::TestWithParam<ModelKind> {};

TEST_P(ModelGradients, MatchCentralDifferences) {
  auto c = small(GetParam());
  Rng rng(17);
  const auto ex = synthetic_example(c, rng, 5);
  GradCheckOptions opt;
  opt.coords_per_tensor = 16;
  opt.floor = kModelGradFloor;
  const auto r = check_model_gradients(c, ex, opt);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param << "[" << r.worst_index << "] analytic " << r.analytic
                                   << " numeric " << r.numeric;
  EXPECT_GT(r.coords_checked, 0u);
}

INSTANTIATE_TEST_SUITE_P(AllStreamModels, ModelGradients,
                         ::testing::Values(ModelKind::text, ModelKind::image, ModelKind::fuse_avg,
                                           ModelKind::fuse_concat, ModelKind::coattn),
                         [](const auto& info) {
                           auto n = model_kind_name(info.param);
                           std::replace(n.begin(), n.end(), '-', '_');
                           return n;
                         });

TEST(ElaCnnGradients, MatchCentralDifferences) {
  ModelConfig c;
  c.kind = ModelKind::elacnn;
  c.init_seed = 1;
  Rng rng(11);
  const auto ex = synthetic_example(c, rng);
  GradCheckOptions opt;
  opt.coords_per_tensor = 4;
  opt.floor = kModelGradFloor;
  opt.eps = kElaCnnGradEps;
  const auto r = check_model_gradients(c, ex, opt);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param << "[" << r.worst_index << "] analytic " << r.analytic
                                   << " numeric " << r.numeric;
}

// ---------------------------------------------------------------- inputs

TEST(PrepareExamples, FillsOnlyWhatTheKindReads) {
  const auto dir = fs::temp_directory_path() / "satire_models_prep";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Rng rng(3);
  write_image(dir / "a.png", synthetic_texture(40, 40, rng));
  Article a{"a1", "Mayor adopts a confused goat", dir / "a.png", Label::satire, "s", std::nullopt, std::nullopt};
  const auto vocab = build_vocab({a.headline}, 1);

  ModelConfig c;
  c.kind = ModelKind::elacnn;
  auto ex = prepare_examples({a}, vocab, c);
  ASSERT_EQ(ex.size(), 1u);
  EXPECT_EQ(ex[0].label, 1);
  EXPECT_EQ(ex[0].ela.shape, (Shape{128, 128, 3}));
  EXPECT_TRUE(ex[0].tokens.ids.empty());

  c.kind = ModelKind::coattn;
  ex = prepare_examples({a}, vocab, c);
  EXPECT_EQ(ex[0].patches.shape, (Shape{16, 3072}));
  EXPECT_EQ(ex[0].tokens.ids.size(), 32u);
  EXPECT_TRUE(ex[0].ela.data.empty());

  a.image_path = dir / "missing.png";
  try {
    prepare_examples({a}, vocab, c);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("a1"), std::string::npos);
  }
}

TEST(PrepareExamples, ElaInputIsRawErrorLevels) {
  Rng rng(4);
  const auto img = synthetic_texture(128, 128, rng);
  const auto t = ela_input(img);
  const auto e = ela(img, 90);
  ASSERT_EQ(t.data.size(), e.values.size());
  for (std::size_t i = 0; i < t.data.size(); ++i) ASSERT_EQ(t.data[i], static_cast<float>(e.values[i])) << i;
}

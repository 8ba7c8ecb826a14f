#include "satire/models.hpp"

#include <algorithm>
#include <sstream>

#include "satire/ela.hpp"
#include "satire/errors.hpp"
#include "satire/kvconfig.hpp"
#include "satire/ops.hpp"

namespace satire {

std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::elacnn: return "elacnn";
    case ModelKind::text: return "text";
    case ModelKind::image: return "image";
    case ModelKind::fuse_avg: return "fuse-avg";
    case ModelKind::fuse_concat: return "fuse-concat";
    case ModelKind::coattn: return "coattn";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& s) {
  for (ModelKind k : {ModelKind::elacnn, ModelKind::text, ModelKind::image, ModelKind::fuse_avg,
                      ModelKind::fuse_concat, ModelKind::coattn}) {
    if (model_kind_name(k) == s) return k;
  }
  throw ConfigError("unknown model '" + s + "' (expected elacnn, text, image, fuse-avg, fuse-concat or coattn)");
}

// ---------------------------------------------------------------- config

StreamConfig StreamConfig::full_scale() {
  StreamConfig s;
  s.v_layers = 6;
  s.t_layers = 12;
  s.coattn_pairs = 6;
  return s;
}

void StreamConfig::validate(bool co_attentive) const {
  if (v_layers < 0 || t_layers < 0) throw ConfigError("layer counts must be >= 0");
  if (d_v < 1 || d_t < 1 || heads < 1 || ffn_mult < 1 || max_len < 1) {
    throw ConfigError("stream widths, heads, ffn_mult and max_len must be positive");
  }
  if (d_v % heads || d_t % heads) {
    throw ConfigError("d_v (" + std::to_string(d_v) + ") and d_t (" + std::to_string(d_t) +
                      ") must be divisible by heads (" + std::to_string(heads) + ")");
  }
  if (co_attentive && (coattn_pairs < 0 || coattn_pairs > std::min(v_layers, t_layers))) {
    throw ConfigError("coattn_pairs must be in 0..min(v_layers, t_layers)");
  }
}

void ModelConfig::validate() const {
  if (kind == ModelKind::elacnn) {
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
    return;
  }
  stream.validate(kind == ModelKind::coattn);
  if (grid.rows < 1 || grid.cols < 1 || grid.image_size % grid.rows || grid.image_size % grid.cols) {
    throw ConfigError("patch grid must divide image_size evenly");
  }
  if (vocab_size < 3) throw ConfigError("vocab_size must be >= 3");
  if (mlp_hidden < 1) throw ConfigError("mlp_hidden must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (kind == ModelKind::coattn && stream.coattn_pairs < 1) throw ConfigError("coattn needs coattn_pairs >= 1");
  const bool needs_match = kind == ModelKind::fuse_avg || kind == ModelKind::coattn;
  if (needs_match && stream.d_v != stream.d_t && !stream.project_streams) {
    throw ConfigError(model_kind_name(kind) + " needs d_v == d_t (" + std::to_string(stream.d_v) + " vs " +
                      std::to_string(stream.d_t) + "); set project_streams = true to add a projection");
  }
}

std::string ModelConfig::to_text() const {
  std::ostringstream o;
  auto b = [](bool v) { return v ? "true" : "false"; };
  o << "kind = " << model_kind_name(kind) << "\n"
    << "v_layers = " << stream.v_layers << "\n"
    << "t_layers = " << stream.t_layers << "\n"
    << "d_v = " << stream.d_v << "\n"
    << "d_t = " << stream.d_t << "\n"
    << "heads = " << stream.heads << "\n"
    << "coattn_pairs = " << stream.coattn_pairs << "\n"
    << "ffn_mult = " << stream.ffn_mult << "\n"
    << "max_len = " << stream.max_len << "\n"
    << "positions = " << b(stream.positions) << "\n"
    << "project_streams = " << b(stream.project_streams) << "\n"
    << "grid_rows = " << grid.rows << "\n"
    << "grid_cols = " << grid.cols << "\n"
    << "image_size = " << grid.image_size << "\n"
    << "vocab_size = " << vocab_size << "\n"
    << "mlp_hidden = " << mlp_hidden << "\n"
    << "dropout = " << kv_format(dropout) << "\n"
    << "freeze_encoders = " << b(freeze_encoders) << "\n"
    << "trim_padding = " << b(trim_padding) << "\n"
    << "init_seed = " << init_seed << "\n";
  return o.str();
}

ModelConfig ModelConfig::parse(const std::string& text) {
  ModelConfig c;
  const auto kv = KeyValues::parse(text);
  // A full-scale preset may be requested first and then refined.
  for (const auto& [key, value] : kv.entries) {
    if (key == "preset") {
      if (value == "full") c.stream = StreamConfig::full_scale();
      else if (value != "toy") throw ConfigError("preset must be toy or full, got '" + value + "'");
    }
  }
  for (std::size_t i = 0; i < kv.entries.size(); ++i) {
    const auto& [key, value] = kv.entries[i];
    if (key == "preset") continue;
    else if (key == "kind") c.kind = parse_model_kind(value);
    else if (key == "v_layers") c.stream.v_layers = kv_int(key, value);
    else if (key == "t_layers") c.stream.t_layers = kv_int(key, value);
    else if (key == "d_v") c.stream.d_v = kv_int(key, value);
    else if (key == "d_t") c.stream.d_t = kv_int(key, value);
    else if (key == "heads") c.stream.heads = kv_int(key, value);
    else if (key == "coattn_pairs") c.stream.coattn_pairs = kv_int(key, value);
    else if (key == "ffn_mult") c.stream.ffn_mult = kv_int(key, value);
    else if (key == "max_len") c.stream.max_len = kv_int(key, value);
    else if (key == "positions") c.stream.positions = kv_bool(key, value);
    else if (key == "project_streams") c.stream.project_streams = kv_bool(key, value);
    else if (key == "grid_rows") c.grid.rows = kv_int(key, value);
    else if (key == "grid_cols") c.grid.cols = kv_int(key, value);
    else if (key == "image_size") c.grid.image_size = kv_int(key, value);
    else if (key == "vocab_size") c.vocab_size = kv_int(key, value);
    else if (key == "mlp_hidden") c.mlp_hidden = kv_int(key, value);
    else if (key == "dropout") c.dropout = kv_double(key, value);
    else if (key == "freeze_encoders") c.freeze_encoders = kv_bool(key, value);
    else if (key == "trim_padding") c.trim_padding = kv_bool(key, value);
    else if (key == "init_seed") c.init_seed = kv_u64(key, value);
    else throw ConfigError("model config line " + std::to_string(kv.lines[i]) + ": unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------- construction

namespace {

std::string block_name(const char* stream, int i) { return std::string(stream) + ".block" + std::to_string(i); }

}  // namespace

template <typename T>
void Model<T>::add_linear(const std::string& prefix, std::size_t in, std::size_t out, Rng& rng, bool bias) {
  params_.add_uniform(prefix + ".w", {in, out}, in, out, rng);
  if (bias) params_.add_constant(prefix + ".b", {out}, T(0));
}

template <typename T>
void Model<T>::add_block_params(const std::string& prefix, std::size_t d_q, std::size_t d_kv, Rng& rng) {
  const std::size_t f = d_q * static_cast<std::size_t>(cfg_.stream.ffn_mult);
  add_linear(prefix + ".attn.q", d_q, d_q, rng);
  add_linear(prefix + ".attn.k", d_kv, d_q, rng);
  add_linear(prefix + ".attn.v", d_kv, d_q, rng);
  add_linear(prefix + ".attn.o", d_q, d_q, rng);
  params_.add_constant(prefix + ".ln1.g", {d_q}, T(1));
  params_.add_constant(prefix + ".ln1.b", {d_q}, T(0));
  add_linear(prefix + ".ffn1", d_q, f, rng);
  add_linear(prefix + ".ffn2", f, d_q, rng);
  params_.add_constant(prefix + ".ln2.g", {d_q}, T(1));
  params_.add_constant(prefix + ".ln2.b", {d_q}, T(0));
}

template <typename T>
Model<T>::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(cfg_.init_seed);
  const auto& s = cfg_.stream;
  const auto dv = static_cast<std::size_t>(s.d_v), dt = static_cast<std::size_t>(s.d_t);
  const int pairs = cfg_.kind == ModelKind::coattn ? s.coattn_pairs : 0;

  if (cfg_.kind == ModelKind::elacnn) {
    using E = ElaCnnShape;
    const std::size_t k2 = E::kernel * E::kernel;
    params_.add_uniform("elacnn.conv1.w", {E::kernel, E::kernel, 3, E::channels}, k2 * 3, k2 * E::channels, rng);
    params_.add_constant("elacnn.conv1.b", {E::channels}, T(0));
    params_.add_uniform("elacnn.conv2.w", {E::kernel, E::kernel, E::channels, E::channels}, k2 * E::channels,
                        k2 * E::channels, rng);
    params_.add_constant("elacnn.conv2.b", {E::channels}, T(0));
    add_linear("elacnn.fc1", E::flat, E::hidden, rng);
    add_linear("elacnn.fc2", E::hidden, 2, rng);
    return;
  }

  if (uses_text()) {
    params_.add_uniform("text.tok_emb", {static_cast<std::size_t>(cfg_.vocab_size), dt}, 1, dt, rng);
    if (s.positions) params_.add_uniform("text.pos_emb", {static_cast<std::size_t>(s.max_len), dt}, 1, dt, rng);
    for (int i = 0; i < s.t_layers; ++i) {
      const bool co = i >= s.t_layers - pairs;
      add_block_params(block_name("text", i), dt, co ? dv : dt, rng);
    }
  }
  if (uses_image()) {
    add_patch_params(params_, "image.patch", cfg_.grid, dv, rng);
    for (int i = 0; i < s.v_layers; ++i) {
      const bool co = i >= s.v_layers - pairs;
      add_block_params(block_name("image", i), dv, co ? dt : dv, rng);
    }
  }

  switch (cfg_.kind) {
    case ModelKind::text: add_linear("head", dt, 2, rng); break;
    case ModelKind::image: add_linear("head", dv, 2, rng); break;
    case ModelKind::fuse_avg:
    case ModelKind::coattn:
      if (s.project_streams) add_linear("fuse.proj_v", dv, dt, rng, false);
      add_linear("head", dt, 2, rng);
      break;
    case ModelKind::fuse_concat:
      add_linear("head.fc1", dv + dt, static_cast<std::size_t>(cfg_.mlp_hidden), rng);
      add_linear("head.fc2", static_cast<std::size_t>(cfg_.mlp_hidden), 2, rng);
      break;
    case ModelKind::elacnn: break;
  }
}

template <typename T>
bool Model<T>::trainable(const std::string& name) const {
  if (!cfg_.freeze_encoders) return true;
  return name.rfind("text.", 0) != 0 && name.rfind("image.", 0) != 0;
}

template <typename T>
bool Model<T>::uses_text() const {
  return cfg_.kind != ModelKind::elacnn && cfg_.kind != ModelKind::image;
}
template <typename T>
bool Model<T>::uses_image() const {
  return cfg_.kind != ModelKind::elacnn && cfg_.kind != ModelKind::text;
}
template <typename T>
bool Model<T>::uses_ela() const {
  return cfg_.kind == ModelKind::elacnn;
}

// ---------------------------------------------------------------- building blocks

template <typename T>
Var<T> Model<T>::linear(Graph<T>& g, Var<T> x, const std::string& prefix, bool bias) {
  Var<T> y = matmul(x, p(g, prefix + ".w"));
  return bias ? add_bias(y, p(g, prefix + ".b")) : y;
}

template <typename T>
Var<T> Model<T>::maybe_dropout(Var<T> x, Rng* rng) {
  return rng && cfg_.dropout > 0.0 ? dropout(x, cfg_.dropout, *rng) : x;
}

template <typename T>
Var<T> Model<T>::attention(Graph<T>& g, const std::string& prefix, Var<T> q_in, Var<T> kv_in,
                           std::span<const std::uint8_t> key_valid, Trace<T>* trace) {
  const Var<T> q = linear(g, q_in, prefix + ".attn.q");
  const Var<T> k = linear(g, kv_in, prefix + ".attn.k");
  const Var<T> v = linear(g, kv_in, prefix + ".attn.v");
  const Var<T> att = scaled_dot_attention(q, k, v, static_cast<std::size_t>(cfg_.stream.heads), key_valid,
                                          trace ? &trace->attention : nullptr);
  return linear(g, att, prefix + ".attn.o");
}

template <typename T>
Var<T> Model<T>::finish_block(Graph<T>& g, const std::string& prefix, Var<T> x, Var<T> attended, Rng* rng) {
  const Var<T> x1 = layer_norm(add(x, maybe_dropout(attended, rng)), p(g, prefix + ".ln1.g"), p(g, prefix + ".ln1.b"));
  const Var<T> f = linear(g, relu(linear(g, x1, prefix + ".ffn1")), prefix + ".ffn2");
  return layer_norm(add(x1, maybe_dropout(f, rng)), p(g, prefix + ".ln2.g"), p(g, prefix + ".ln2.b"));
}

template <typename T>
Var<T> Model<T>::self_block(Graph<T>& g, const std::string& prefix, Var<T> x, std::span<const std::uint8_t> mask,
                            Rng* rng, Trace<T>* trace) {
  return finish_block(g, prefix, x, attention(g, prefix, x, x, mask, trace), rng);
}

template <typename T>
Var<T> Model<T>::text_embed(Graph<T>& g, const TokenSeq& tokens, std::vector<std::uint8_t>& mask) {
  const std::size_t max_len = static_cast<std::size_t>(cfg_.stream.max_len);
  if (tokens.ids.size() != tokens.mask.size() || tokens.ids.empty()) {
    throw DataError("token sequence and mask lengths differ or are empty");
  }
  if (tokens.ids.size() > max_len) {
    throw ConfigError("token sequence of " + std::to_string(tokens.ids.size()) + " exceeds max_len " +
                      std::to_string(max_len));
  }
  std::size_t len = tokens.ids.size();
  if (cfg_.trim_padding) {
    // Trailing masked positions never influence unmasked ones.
    while (len > 1 && !tokens.mask[len - 1]) --len;
  }
  mask.assign(tokens.mask.begin(), tokens.mask.begin() + static_cast<std::ptrdiff_t>(len));
  const std::span<const int> ids(tokens.ids.data(), len);
  Var<T> x = embedding(p(g, "text.tok_emb"), ids);
  if (cfg_.stream.positions) {
    std::vector<int> pos(len);
    for (std::size_t i = 0; i < len; ++i) pos[i] = static_cast<int>(i);
    x = add(x, embedding(p(g, "text.pos_emb"), std::span<const int>(pos)));
  }
  return x;
}

template <typename T>
Var<T> Model<T>::image_embed(Graph<T>& g, const Tensor<float>& patches) {
  const Var<T> x = g.constant(patches.template cast<T>());
  return patch_features(g, x, params_, "image.patch", cfg_.grid, cfg_.stream.positions);
}

// ---------------------------------------------------------------- models

template <typename T>
Var<T> Model<T>::elacnn_forward(Graph<T>& g, const Tensor<float>& ela, Rng* rng) {
  using E = ElaCnnShape;
  if (cfg_.kind != ModelKind::elacnn) throw ConfigError("elacnn_forward on a " + model_kind_name(cfg_.kind) + " model");
  if (ela.shape != Shape{E::input, E::input, 3}) {
    throw ConfigError("ELA-CNN expects a 128x128x3 input, got " + shape_str(ela.shape));
  }
  Var<T> h = g.constant(ela.template cast<T>());
  h = maxpool2d(relu(conv2d(h, p(g, "elacnn.conv1.w"), p(g, "elacnn.conv1.b"))));
  h = maxpool2d(relu(conv2d(h, p(g, "elacnn.conv2.w"), p(g, "elacnn.conv2.b"))));
  h = reshape(h, {1, E::flat});
  h = maybe_dropout(relu(linear(g, h, "elacnn.fc1")), rng);
  return linear(g, h, "elacnn.fc2");
}

template <typename T>
Encoded<T> Model<T>::text_encode(Graph<T>& g, const TokenSeq& tokens, Rng* rng, Trace<T>* trace) {
  if (!uses_text()) throw ConfigError(model_kind_name(cfg_.kind) + " model has no text stream");
  std::vector<std::uint8_t> mask;
  Var<T> x = text_embed(g, tokens, mask);
  for (int i = 0; i < cfg_.stream.t_layers; ++i) {
    x = self_block(g, block_name("text", i), x, mask, rng, trace);
    if (trace) trace->text_states.push_back(x);
  }
  return {x, slice_rows(x, 0, 1)};
}

template <typename T>
Encoded<T> Model<T>::image_encode(Graph<T>& g, const Tensor<float>& patches, Rng* rng, Trace<T>* trace) {
  if (!uses_image()) throw ConfigError(model_kind_name(cfg_.kind) + " model has no image stream");
  Var<T> x = image_embed(g, patches);
  for (int i = 0; i < cfg_.stream.v_layers; ++i) {
    x = self_block(g, block_name("image", i), x, {}, rng, trace);
    if (trace) trace->image_states.push_back(x);
  }
  return {x, mean_rows(x)};
}

template <typename T>
std::pair<Var<T>, Var<T>> Model<T>::coattention_block(Graph<T>& g, std::size_t index, Var<T> v_states,
                                                      Var<T> t_states, std::span<const std::uint8_t> t_mask, Rng* rng,
                                                      Trace<T>* trace) {
  const auto& s = cfg_.stream;
  if (cfg_.kind != ModelKind::coattn || index >= static_cast<std::size_t>(s.coattn_pairs)) {
    throw ConfigError("no co-attention block " + std::to_string(index) + " in this model");
  }
  const std::string vb = block_name("image", s.v_layers - s.coattn_pairs + static_cast<int>(index));
  const std::string tb = block_name("text", s.t_layers - s.coattn_pairs + static_cast<int>(index));
  if (v_states.dim(1) != static_cast<std::size_t>(s.d_v) || t_states.dim(1) != static_cast<std::size_t>(s.d_t)) {
    throw ConfigError("co-attention inputs " + shape_str(v_states.shape()) + " / " + shape_str(t_states.shape()) +
                      " do not match d_v/d_t");
  }
  const Var<T> v_att = attention(g, vb, v_states, t_states, t_mask, trace);
  const Var<T> t_att = attention(g, tb, t_states, v_states, {}, trace);
  return {finish_block(g, vb, v_states, v_att, rng), finish_block(g, tb, t_states, t_att, rng)};
}

template <typename T>
Var<T> Model<T>::coattn_forward(Graph<T>& g, const TokenSeq& tokens, const Tensor<float>& patches, Rng* rng,
                                Trace<T>* trace) {
  if (cfg_.kind != ModelKind::coattn) throw ConfigError("coattn_forward on a " + model_kind_name(cfg_.kind) + " model");
  const auto& s = cfg_.stream;
  std::vector<std::uint8_t> mask;
  Var<T> t = text_embed(g, tokens, mask);
  for (int i = 0; i < s.t_layers - s.coattn_pairs; ++i) {
    t = self_block(g, block_name("text", i), t, mask, rng, trace);
    if (trace) trace->text_states.push_back(t);
  }
  Var<T> v = image_embed(g, patches);
  for (int i = 0; i < s.v_layers - s.coattn_pairs; ++i) {
    v = self_block(g, block_name("image", i), v, {}, rng, trace);
    if (trace) trace->image_states.push_back(v);
  }
  for (int k = 0; k < s.coattn_pairs; ++k) {
    std::tie(v, t) = coattention_block(g, static_cast<std::size_t>(k), v, t, mask, rng, trace);
    if (trace) {
      trace->image_states.push_back(v);
      trace->text_states.push_back(t);
    }
  }
  Var<T> h_v = mean_rows(v);
  const Var<T> h_t = slice_rows(t, 0, 1);
  if (s.project_streams) h_v = linear(g, h_v, "fuse.proj_v", false);
  if (trace) {
    trace->h_v = h_v;
    trace->h_t = h_t;
  }
  return linear(g, mul(h_v, h_t), "head");
}

template <typename T>
Var<T> Model<T>::fuse_forward(Graph<T>& g, const TokenSeq& tokens, const Tensor<float>& patches, Rng* rng,
                              Trace<T>* trace) {
  if (cfg_.kind != ModelKind::fuse_avg && cfg_.kind != ModelKind::fuse_concat) {
    throw ConfigError("fuse_forward on a " + model_kind_name(cfg_.kind) + " model");
  }
  const Encoded<T> te = text_encode(g, tokens, rng, trace);
  const Encoded<T> ve = image_encode(g, patches, rng, trace);
  Var<T> h_v = ve.pooled;
  const Var<T> h_t = te.pooled;
  if (cfg_.kind == ModelKind::fuse_avg && cfg_.stream.project_streams) h_v = linear(g, h_v, "fuse.proj_v", false);
  if (trace) {
    trace->h_v = h_v;
    trace->h_t = h_t;
  }
  if (cfg_.kind == ModelKind::fuse_avg) return linear(g, scale(add(h_v, h_t), T(0.5)), "head");
  const Var<T> z = concat_cols(std::vector<Var<T>>{h_v, h_t});
  return linear(g, maybe_dropout(relu(linear(g, z, "head.fc1")), rng), "head.fc2");
}

template <typename T>
Var<T> Model<T>::forward(Graph<T>& g, const Example& ex, Rng* rng, Trace<T>* trace) {
  switch (cfg_.kind) {
    case ModelKind::elacnn: return elacnn_forward(g, ex.ela, rng);
    case ModelKind::text: {
      const auto e = text_encode(g, ex.tokens, rng, trace);
      if (trace) trace->h_t = e.pooled;
      return linear(g, maybe_dropout(e.pooled, rng), "head");
    }
    case ModelKind::image: {
      const auto e = image_encode(g, ex.patches, rng, trace);
      if (trace) trace->h_v = e.pooled;
      return linear(g, maybe_dropout(e.pooled, rng), "head");
    }
    case ModelKind::fuse_avg:
    case ModelKind::fuse_concat: return fuse_forward(g, ex.tokens, ex.patches, rng, trace);
    case ModelKind::coattn: return coattn_forward(g, ex.tokens, ex.patches, rng, trace);
  }
  throw ConfigError("unhandled model kind");
}

template class Model<float>;
template class Model<double>;

// ---------------------------------------------------------------- inputs

Tensor<float> ela_input(const ImageBuffer& img) {
  const ImageBuffer raw = ela_raw_image(ela(img, 90));
  const ImageBuffer r = resize_bilinear(raw, ElaCnnShape::input, ElaCnnShape::input);
  std::vector<float> v(r.pixels.begin(), r.pixels.end());
  return Tensor<float>({ElaCnnShape::input, ElaCnnShape::input, 3}, std::move(v));
}

std::vector<Example> prepare_examples(const std::vector<Article>& articles, const Vocab& vocab,
                                      const ModelConfig& cfg) {
  const bool text = cfg.kind != ModelKind::elacnn && cfg.kind != ModelKind::image;
  const bool image = cfg.kind != ModelKind::elacnn && cfg.kind != ModelKind::text;
  const bool ela_in = cfg.kind == ModelKind::elacnn;
  std::vector<Example> out;
  out.reserve(articles.size());
  for (const auto& a : articles) {
    Example ex;
    ex.id = a.id;
    ex.label = static_cast<int>(a.label);
    if (text) ex.tokens = tokenize(a.headline, vocab, static_cast<std::size_t>(cfg.stream.max_len));
    if (image || ela_in) {
      ImageBuffer img;
      try {
        img = read_image(a.image_path);
      } catch (const Error& e) {
        throw DataError("article " + a.id + ": " + e.what());
      }
      if (image) ex.patches = extract_patches(img, cfg.grid);
      if (ela_in) ex.ela = ela_input(img);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

Example synthetic_example(const ModelConfig& cfg, Rng& rng, std::size_t length) {
  Example ex;
  ex.id = "synthetic";
  ex.label = static_cast<int>(rng.below(2));
  if (cfg.kind == ModelKind::elacnn) {
    const std::size_t n = ElaCnnShape::input;
    std::vector<float> v(n * n * 3);
    for (auto& x : v) x = static_cast<float>(rng.uniform(0.0, 40.0));
    ex.ela = Tensor<float>({n, n, 3}, std::move(v));
    return ex;
  }
  const auto max_len = static_cast<std::size_t>(cfg.stream.max_len);
  length = std::clamp<std::size_t>(length, 1, max_len);
  ex.tokens.ids.assign(max_len, kPadId);
  ex.tokens.mask.assign(max_len, 0);
  ex.tokens.ids[0] = kClsId;
  for (std::size_t i = 0; i < length; ++i) {
    if (i > 0) ex.tokens.ids[i] = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.vocab_size - 1)));
    ex.tokens.mask[i] = 1;
  }
  const auto r = static_cast<std::size_t>(cfg.grid.regions()), d = static_cast<std::size_t>(cfg.grid.patch_dim());
  std::vector<float> v(r * d);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-0.5, 0.5));
  ex.patches = Tensor<float>({r, d}, std::move(v));
  return ex;
}

GradCheckResult check_model_gradients(const ModelConfig& cfg, const Example& ex, const GradCheckOptions& options) {
  Model<double> model(cfg);
  NamedParams named;
  for (auto& [name, t] : model.params().tensors()) named.emplace_back(name, &t);
  const int label = ex.label;
  const LossClosure loss = [&](Graph<double>& g) {
    return softmax_cross_entropy(model.forward(g, ex), std::span<const int>(&label, 1));
  };
  return gradient_check(loss, named, options);
}

}  // namespace satire

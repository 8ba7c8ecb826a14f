#pragma once

#include <optional>
#include <string>
#include <vector>

#include "satire/corpus.hpp"
#include "satire/gradcheck.hpp"
#include "satire/graph.hpp"
#include "satire/params.hpp"

namespace satire {

enum class ModelKind { elacnn, text, image, fuse_avg, fuse_concat, coattn };

// "elacnn", "text", "image", "fuse-avg", "fuse-concat", "coattn"
std::string model_kind_name(ModelKind k);
ModelKind parse_model_kind(const std::string& s);  // ConfigError

// ELA-CNN geometry is fixed: 128x128x3 -> conv5x32 -> pool -> conv5x32 ->
// pool -> 29*29*32 = 26912 -> 256 -> 2.
struct ElaCnnShape {
  static constexpr std::size_t input = 128;
  static constexpr std::size_t kernel = 5;
  static constexpr std::size_t channels = 32;
  static constexpr std::size_t hidden = 256;
  static constexpr std::size_t flat = 29 * 29 * 32;
};

struct StreamConfig {
  int v_layers = 2;
  int t_layers = 3;
  int d_v = 128;
  int d_t = 128;
  int heads = 4;
  int coattn_pairs = 2;  // the last `coattn_pairs` blocks of each stream
  int ffn_mult = 2;      // feed-forward width = ffn_mult * d
  int max_len = 32;
  bool positions = true;         // position embeddings on both streams
  bool project_streams = false;  // allow d_v != d_t via learned projections

  static StreamConfig full_scale();  // 6 visual / 12 textual blocks, 6 pairs
  // `co_attentive` adds the coattn_pairs <= min(v_layers, t_layers) check.
  void validate(bool co_attentive = true) const;
};

struct ModelConfig {
  ModelKind kind = ModelKind::coattn;
  StreamConfig stream;
  PatchGrid grid;
  int vocab_size = 3;
  int mlp_hidden = 256;
  double dropout = 0.0;
  bool freeze_encoders = false;  // fusion baselines: train the head only
  bool trim_padding = true;      // drop trailing pad positions (masked either way)
  std::uint64_t init_seed = 0;

  void validate() const;
  // Plain-text "key = value" form, also stored in checkpoints.
  std::string to_text() const;
  static ModelConfig parse(const std::string& text);
};

// Model inputs derived from one article. Only the fields a model kind reads
// need to be filled.
struct Example {
  std::string id;
  int label = 0;
  TokenSeq tokens;
  Tensor<float> patches;  // [regions, patch_dim]
  Tensor<float> ela;      // [128, 128, 3] raw error levels
};

template <typename T>
struct Encoded {
  Var<T> states;  // [L, d]
  Var<T> pooled;  // [1, d]
};

// Optional record of intermediate states for inspection and tests.
template <typename T>
struct Trace {
  std::vector<Var<T>> text_states;   // after every text block
  std::vector<Var<T>> image_states;  // after every image block
  std::vector<Var<T>> attention;     // per-head weights, every attention call in order
  std::optional<Var<T>> h_v, h_t;
};

template <typename T>
class Model {
 public:
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  // False for encoder parameters when freeze_encoders is set.
  bool trainable(const std::string& name) const;

  // Logits [1, 2]. `dropout_rng` enables dropout (training); null = inference.
  Var<T> forward(Graph<T>& g, const Example& ex, Rng* dropout_rng = nullptr, Trace<T>* trace = nullptr);

  Var<T> elacnn_forward(Graph<T>& g, const Tensor<float>& ela, Rng* rng = nullptr);

  // Independent (self-attention only) stream encoders.
  Encoded<T> text_encode(Graph<T>& g, const TokenSeq& tokens, Rng* rng = nullptr, Trace<T>* trace = nullptr);
  Encoded<T> image_encode(Graph<T>& g, const Tensor<float>& patches, Rng* rng = nullptr, Trace<T>* trace = nullptr);

  // Pair `index` of co-attentive blocks: visual queries over textual
  // keys/values and vice versa, both from the block inputs, then per-stream
  // feed-forward with residuals and layer norm.
  std::pair<Var<T>, Var<T>> coattention_block(Graph<T>& g, std::size_t index, Var<T> v_states, Var<T> t_states,
                                              std::span<const std::uint8_t> t_mask, Rng* rng = nullptr,
                                              Trace<T>* trace = nullptr);

  Var<T> coattn_forward(Graph<T>& g, const TokenSeq& tokens, const Tensor<float>& patches, Rng* rng = nullptr,
                        Trace<T>* trace = nullptr);
  Var<T> fuse_forward(Graph<T>& g, const TokenSeq& tokens, const Tensor<float>& patches, Rng* rng = nullptr,
                      Trace<T>* trace = nullptr);

  // Which inputs forward() reads.
  bool uses_text() const;
  bool uses_image() const;
  bool uses_ela() const;

 private:
  Var<T> p(Graph<T>& g, const std::string& name) { return g.param(params_.at(name)); }
  Var<T> linear(Graph<T>& g, Var<T> x, const std::string& prefix, bool bias = true);
  Var<T> attention(Graph<T>& g, const std::string& prefix, Var<T> q_in, Var<T> kv_in,
                   std::span<const std::uint8_t> key_valid, Trace<T>* trace);
  Var<T> finish_block(Graph<T>& g, const std::string& prefix, Var<T> x, Var<T> attended, Rng* rng);
  Var<T> self_block(Graph<T>& g, const std::string& prefix, Var<T> x, std::span<const std::uint8_t> mask, Rng* rng,
                    Trace<T>* trace);
  Var<T> text_embed(Graph<T>& g, const TokenSeq& tokens, std::vector<std::uint8_t>& mask);
  Var<T> image_embed(Graph<T>& g, const Tensor<float>& patches);
  Var<T> maybe_dropout(Var<T> x, Rng* rng);

  void add_block_params(const std::string& prefix, std::size_t d_q, std::size_t d_kv, Rng& rng);
  void add_linear(const std::string& prefix, std::size_t in, std::size_t out, Rng& rng, bool bias = true);

  ModelConfig cfg_;
  ParameterSet<T> params_;
};

extern template class Model<float>;
extern template class Model<double>;

// Builds model inputs for `articles` (image decode, ELA at quality 90,
// resize, patch extraction, tokenization) as required by `cfg.kind`.
std::vector<Example> prepare_examples(const std::vector<Article>& articles, const Vocab& vocab,
                                      const ModelConfig& cfg);

// Random inputs of the right shapes for `cfg`: `length` unmasked tokens
// (cls included) padded to max_len, patches in [-0.5, 0.5], ELA in [0, 40].
Example synthetic_example(const ModelConfig& cfg, Rng& rng, std::size_t length = 6);

// Central-difference check of every parameter of a double-precision model
// built from `cfg`, with cross-entropy on `ex` as the loss. Callers should
// use a denominator floor of at least kModelGradFloor: some gradients are
// exactly zero (attention key biases under softmax shift invariance) and
// their numeric estimate is pure roundoff of order 1e-10.
inline constexpr double kModelGradFloor = 1e-5;
// Step for the ELA-CNN: inputs reach ~40, so a weight step moves ~5e5
// pre-activations by 40 * eps and larger steps cross ReLU / max-pool kinks.
inline constexpr double kElaCnnGradEps = 1e-6;

GradCheckResult check_model_gradients(const ModelConfig& cfg, const Example& ex, const GradCheckOptions& options = {});

// ELA map of an image as CNN input: raw values, resized to 128x128.
Tensor<float> ela_input(const ImageBuffer& img);

}  // namespace satire

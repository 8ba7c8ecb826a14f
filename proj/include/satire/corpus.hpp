#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "satire/ela.hpp"
#include "satire/graph.hpp"
#include "satire/image.hpp"
#include "satire/params.hpp"

namespace satire {

enum class Label { regular = 0, satire = 1 };

std::string label_name(Label l);
Label parse_label(const std::string& s);  // DataError on anything else

struct Article {
  std::string id;
  std::string headline;
  std::filesystem::path image_path;  // absolute once loaded
  Label label = Label::regular;
  std::string source;
  std::optional<Rect> splice;  // known tamper region, if any
  // Latent generator cues (cross-modal corpora only): {text absurd, image has object}.
  std::optional<std::pair<int, int>> cues;

  bool operator==(const Article&) const = default;
};

// ---------------------------------------------------------------- config

enum class CorpusMode { standard, cross_modal };

struct CorpusConfig {
  int n_satire = 400;
  int n_regular = 600;
  int image_size = 128;
  double splice_probability = 1.0;  // standard mode, satire images only
  int host_quality = 95;            // also the quality images are stored at
  int donor_quality = 60;
  CorpusMode mode = CorpusMode::standard;
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError
};

// Plain-text "key = value" lines; '#' starts a comment. Keys: n_satire,
// n_regular, image_size, splice_probability, host_quality, donor_quality,
// mode (standard | cross_modal), seed. Unknown keys are a ConfigError.
CorpusConfig parse_corpus_config(const std::string& text);
CorpusConfig load_corpus_config(const std::filesystem::path& path);
std::string format_corpus_config(const CorpusConfig& cfg);

// ---------------------------------------------------------------- generator

// Writes images/<id>.jpg and manifest.jsonl under `out_dir`; returns the
// articles in manifest order. In cross-modal mode the label is a function of
// (text cue, image cue) whose unimodal Bayes accuracy is checked to be at
// most 75% before anything is written.
std::vector<Article> generate_synthetic_corpus(const CorpusConfig& cfg, const std::filesystem::path& out_dir);

struct CueCell {
  int text = 0;
  int image = 0;
  int satire = 0;
  int regular = 0;
};

// Joint (text cue, image cue) -> label counts used by the cross-modal mode.
std::vector<CueCell> cross_modal_cells(int n_satire, int n_regular);

// Best accuracy of any rule that sees only one cue (0 = text, 1 = image),
// by enumeration over the cells.
double unimodal_bayes_accuracy(const std::vector<CueCell>& cells, int modality);

std::string absurd_headline(Rng& rng);
std::string mundane_headline(Rng& rng);

// ---------------------------------------------------------------- manifest

// JSON Lines: {"id", "headline", "image", "label", "source"} plus optional
// "splice": [x, y, w, h] and "cues": [text, image]. Image paths are stored
// relative to the manifest's directory.
void write_manifest(const std::filesystem::path& path, const std::vector<Article>& articles);
std::vector<Article> load_manifest(const std::filesystem::path& path);

// ---------------------------------------------------------------- split

struct Split {
  std::vector<Article> train;
  std::vector<Article> test;
};

// Stratified: each label's members are shuffled with the seed and cut at
// round(ratio * n). Both partitions keep manifest order.
Split split(const std::vector<Article>& articles, double ratio = 0.8, std::uint64_t seed = 0);

// ---------------------------------------------------------------- text

constexpr int kPadId = 0;
constexpr int kUnkId = 1;
constexpr int kClsId = 2;

// Lowercased alphanumeric runs; every other printable ASCII character is a
// token of its own. Bytes >= 0x80 are treated as word characters.
std::vector<std::string> split_tokens(const std::string& text);

class Vocab {
 public:
  Vocab() = default;
  // Tokens listed in id order starting at 3.
  explicit Vocab(std::vector<std::string> tokens, int min_freq = 2);

  int id(const std::string& token) const;  // unk when absent
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size() + 3; }
  int min_freq() const { return min_freq_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::string to_json() const;
  static Vocab from_json(const std::string& json);

  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_ && min_freq_ == o.min_freq_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
  int min_freq_ = 2;
};

// Tokens with frequency >= min_freq, ordered lexicographically.
Vocab build_vocab(const std::vector<std::string>& headlines, int min_freq = 2);

struct TokenSeq {
  std::vector<int> ids;            // exactly max_len
  std::vector<std::uint8_t> mask;  // 1 for cls and real tokens, 0 for pad
  std::size_t length() const;      // number of unmasked positions
};

TokenSeq tokenize(const std::string& headline, const Vocab& vocab, std::size_t max_len = 32);

// Fraction of tokens in `headlines` that map to a known id.
double token_coverage(const std::vector<std::string>& headlines, const Vocab& vocab);

// ---------------------------------------------------------------- regions

struct PatchGrid {
  int rows = 4;
  int cols = 4;
  int image_size = 128;
  int patch_dim() const { return (image_size / rows) * (image_size / cols) * 3; }
  int regions() const { return rows * cols; }
};

// Resizes to image_size (bilinear) and flattens each grid cell row-major,
// scaled to [-0.5, 0.5]. Shape [regions, patch_dim].
Tensor<float> extract_patches(const ImageBuffer& img, const PatchGrid& grid = {});

// Learned projection "<prefix>.proj_w" [patch_dim, d], "<prefix>.proj_b" [d]
// and 2-D position embedding "<prefix>.row" [rows, d] + "<prefix>.col" [cols, d].
template <typename T>
void add_patch_params(ParameterSet<T>& params, const std::string& prefix, const PatchGrid& grid, std::size_t d,
                      Rng& rng);

// RegionFeatures: [regions, d] = patches * W + b (+ row/col embeddings when
// `positions` is set).
template <typename T>
Var<T> patch_features(Graph<T>& g, Var<T> patches, ParameterSet<T>& params, const std::string& prefix,
                      const PatchGrid& grid, bool positions = true);

}  // namespace satire

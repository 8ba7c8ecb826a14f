#include "satire/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <set>
#include <sstream>

#include "satire/errors.hpp"
#include "satire/jpeg.hpp"
#include "satire/kvconfig.hpp"
#include "satire/ops.hpp"

namespace satire {

using json = nlohmann::ordered_json;

std::string label_name(Label l) { return l == Label::satire ? "satire" : "regular"; }

Label parse_label(const std::string& s) {
  if (s == "satire") return Label::satire;
  if (s == "regular") return Label::regular;
  throw DataError("unknown label '" + s + "' (expected satire or regular)");
}

// ---------------------------------------------------------------- config

void CorpusConfig::validate() const {
  if (n_satire < 1 || n_regular < 1) throw ConfigError("n_satire and n_regular must be >= 1");
  if (image_size < 16) throw ConfigError("image_size must be >= 16");
  if (!(splice_probability >= 0.0 && splice_probability <= 1.0)) {
    throw ConfigError("splice_probability must be in [0, 1]");
  }
  for (int q : {host_quality, donor_quality}) {
    if (q < 1 || q > 100) throw ConfigError("JPEG qualities must be in 1..100, got " + std::to_string(q));
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

CorpusConfig parse_corpus_config(const std::string& text) {
  CorpusConfig cfg;
  const auto kv = KeyValues::parse(text);
  for (std::size_t i = 0; i < kv.entries.size(); ++i) {
    const auto& [key, value] = kv.entries[i];
    if (key == "n_satire") cfg.n_satire = kv_int(key, value);
    else if (key == "n_regular") cfg.n_regular = kv_int(key, value);
    else if (key == "image_size") cfg.image_size = kv_int(key, value);
    else if (key == "splice_probability") cfg.splice_probability = kv_double(key, value);
    else if (key == "host_quality") cfg.host_quality = kv_int(key, value);
    else if (key == "donor_quality") cfg.donor_quality = kv_int(key, value);
    else if (key == "seed") cfg.seed = kv_u64(key, value);
    else if (key == "mode") {
      if (value == "standard") cfg.mode = CorpusMode::standard;
      else if (value == "cross_modal") cfg.mode = CorpusMode::cross_modal;
      else throw ConfigError("config key 'mode': expected standard or cross_modal, got '" + value + "'");
    } else {
      throw ConfigError("config line " + std::to_string(kv.lines[i]) + ": unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

CorpusConfig load_corpus_config(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_corpus_config(std::string(bytes.begin(), bytes.end()));
}

std::string format_corpus_config(const CorpusConfig& cfg) {
  std::ostringstream o;
  o << "n_satire = " << cfg.n_satire << "\n"
    << "n_regular = " << cfg.n_regular << "\n"
    << "image_size = " << cfg.image_size << "\n"
    << "splice_probability = " << kv_format(cfg.splice_probability) << "\n"
    << "host_quality = " << cfg.host_quality << "\n"
    << "donor_quality = " << cfg.donor_quality << "\n"
    << "mode = " << (cfg.mode == CorpusMode::standard ? "standard" : "cross_modal") << "\n"
    << "seed = " << cfg.seed << "\n";
  return o.str();
}

// ---------------------------------------------------------------- headlines

namespace {

const std::vector<std::string> kEntities = {
    "Senate committee", "City council", "Governor", "Central bank", "Local school board",
    "Prime minister",   "Tech giant",   "Mayor",    "Supreme court", "Health ministry",
    "Union leaders",    "Airline",      "Police chief", "Energy regulator", "Retail chain",
    "Opposition party"};

const std::vector<std::string> kMundaneVerbs = {"approves", "delays", "reviews", "announces", "debates",
                                                "rejects",  "backs",  "unveils"};
const std::vector<std::string> kMundaneObjects = {
    "new budget",     "trade agreement", "infrastructure plan", "tax proposal", "school funding",
    "housing reform", "quarterly report", "transit contract",   "pension changes", "water rates"};
const std::vector<std::string> kMundaneTails = {"on Monday", "after long debate", "amid criticism",
                                                "this week", "ahead of vote",     "despite delays"};

const std::vector<std::string> kAbsurdVerbs = {"marries", "declares war on", "adopts", "elects",
                                               "challenges", "knights", "replaces staff with",
                                               "swaps places with"};
const std::vector<std::string> kAbsurdObjects = {
    "a haunted toaster", "sentient traffic cone", "the moon",       "flock of pigeons", "giant inflatable duck",
    "its own reflection", "a confused goat",     "talking lasagna", "ghost of a walrus", "wizard llama"};
const std::vector<std::string> kAbsurdTails = {"after brief courtship", "citing ancient prophecy",
                                               "to boost morale",       "live on television",
                                               "in secret ceremony",    "for tax reasons"};

const std::string& pick(const std::vector<std::string>& v, Rng& rng) { return v[rng.below(v.size())]; }

std::string compose(const std::vector<std::string>& verbs, const std::vector<std::string>& objects,
                    const std::vector<std::string>& tails, Rng& rng) {
  std::string h;
  if (rng.bernoulli(0.2)) h = "Report: ";
  h += pick(kEntities, rng) + " " + pick(verbs, rng) + " " + pick(objects, rng);
  if (rng.bernoulli(0.7)) h += " " + pick(tails, rng);
  return h;
}

}  // namespace

std::string absurd_headline(Rng& rng) { return compose(kAbsurdVerbs, kAbsurdObjects, kAbsurdTails, rng); }
std::string mundane_headline(Rng& rng) { return compose(kMundaneVerbs, kMundaneObjects, kMundaneTails, rng); }

// ---------------------------------------------------------------- cells

std::vector<CueCell> cross_modal_cells(int n_satire, int n_regular) {
  // Satire = exactly one cue present; regular = neither (5/6) or both (1/6).
  const int s10 = (n_satire + 1) / 2;
  const int r11 = static_cast<int>(std::lround(n_regular / 6.0));
  return {{0, 0, 0, n_regular - r11}, {1, 1, 0, r11}, {1, 0, s10, 0}, {0, 1, n_satire - s10, 0}};
}

double unimodal_bayes_accuracy(const std::vector<CueCell>& cells, int modality) {
  if (modality != 0 && modality != 1) throw UsageError("modality must be 0 (text) or 1 (image)");
  std::map<int, std::pair<int, int>> by_cue;  // cue -> (satire, regular)
  int total = 0;
  for (const auto& c : cells) {
    auto& slot = by_cue[modality == 0 ? c.text : c.image];
    slot.first += c.satire;
    slot.second += c.regular;
    total += c.satire + c.regular;
  }
  int correct = 0;
  for (const auto& [cue, counts] : by_cue) correct += std::max(counts.first, counts.second);
  return total ? static_cast<double>(correct) / total : 0.0;
}

// ---------------------------------------------------------------- generator

namespace {

const std::uint8_t kObjectColours[][3] = {{255, 0, 255}, {0, 230, 255}, {255, 240, 0}, {255, 40, 40}, {30, 255, 60}};

// Saturated ellipse inscribed in `r`, drawn over `img`.
void draw_object(ImageBuffer& img, const Rect& r, Rng& rng) {
  const auto& col = kObjectColours[rng.below(std::size(kObjectColours))];
  const double cx = r.x + r.w / 2.0, cy = r.y + r.h / 2.0, rx = r.w / 2.0, ry = r.h / 2.0;
  for (int y = r.y; y < r.y + r.h; ++y)
    for (int x = r.x; x < r.x + r.w; ++x) {
      const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
      const double d2 = dx * dx + dy * dy;
      if (d2 > 1.0) continue;
      const double shade = 1.0 - 0.25 * d2;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(std::lround(col[c] * shade));
    }
}

Rect random_rect(Rng& rng, int size, int min_side) {
  Rect r;
  r.w = rng.range(min_side, size / 2);
  r.h = rng.range(min_side, size / 2);
  r.x = rng.range(0, size - r.w);
  r.y = rng.range(0, size - r.h);
  return r;
}

struct Plan {
  Label label;
  int text_cue;   // 1 = absurd headline
  int image_cue;  // 1 = tampered / object image
};

}  // namespace

std::vector<Article> generate_synthetic_corpus(const CorpusConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  Rng rng(cfg.seed);

  std::vector<Plan> plans;
  if (cfg.mode == CorpusMode::cross_modal) {
    const auto cells = cross_modal_cells(cfg.n_satire, cfg.n_regular);
    for (int m = 0; m < 2; ++m) {
      const double acc = unimodal_bayes_accuracy(cells, m);
      if (acc > 0.75) {
        throw ConfigError(std::string("cross-modal corpus: ") + (m == 0 ? "text" : "image") +
                          " cue alone reaches " + std::to_string(100 * acc) +
                          "% Bayes accuracy (> 75%); counts too small or unbalanced");
      }
    }
    for (const auto& c : cells) {
      for (int i = 0; i < c.satire; ++i) plans.push_back({Label::satire, c.text, c.image});
      for (int i = 0; i < c.regular; ++i) plans.push_back({Label::regular, c.text, c.image});
    }
  } else {
    for (int i = 0; i < cfg.n_satire; ++i) plans.push_back({Label::satire, 1, rng.bernoulli(cfg.splice_probability)});
    for (int i = 0; i < cfg.n_regular; ++i) plans.push_back({Label::regular, 0, 0});
  }
  rng.shuffle(plans);

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

  const int width = static_cast<int>(std::to_string(plans.size()).size());
  std::vector<Article> articles;
  articles.reserve(plans.size());
  int n_sat = 0, n_reg = 0;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const Plan& p = plans[i];
    Rng r = rng.fork(i);
    Article a;
    std::ostringstream id;
    id << "art-" << std::setw(width) << std::setfill('0') << i;
    a.id = id.str();
    a.label = p.label;
    a.source = p.label == Label::satire ? "satire-" + std::to_string(1 + n_sat++ % 4)
                                        : "regular-" + std::to_string(1 + n_reg++ % 6);
    a.headline = p.text_cue ? absurd_headline(r) : mundane_headline(r);
    if (cfg.mode == CorpusMode::cross_modal) a.cues = std::make_pair(p.text_cue, p.image_cue);

    const ImageBuffer host = synthetic_texture(cfg.image_size, cfg.image_size, r);
    ImageBuffer img;
    if (p.image_cue) {
      ImageBuffer donor = synthetic_texture(cfg.image_size, cfg.image_size, r);
      const Rect rect = random_rect(r, cfg.image_size, std::max(4, cfg.image_size * 3 / 16));
      if (cfg.mode == CorpusMode::cross_modal) draw_object(donor, rect, r);
      auto spliced = synth_splice(host, donor, rect, cfg.host_quality, cfg.donor_quality);
      img = std::move(spliced.first);
      a.splice = rect;
    } else {
      img = jpeg_roundtrip(host, cfg.host_quality);
    }
    a.image_path = (std::filesystem::absolute(out_dir) / "images" / (a.id + ".jpg")).lexically_normal();
    write_file(a.image_path, jpeg_encode(img, cfg.host_quality));
    articles.push_back(std::move(a));
  }
  write_manifest(out_dir / "manifest.jsonl", articles);
  return articles;
}

// ---------------------------------------------------------------- manifest

void write_manifest(const std::filesystem::path& path, const std::vector<Article>& articles) {
  const auto base = std::filesystem::absolute(path).parent_path();
  std::ostringstream out;
  for (const auto& a : articles) {
    json j;
    j["id"] = a.id;
    j["headline"] = a.headline;
    std::filesystem::path rel = a.image_path;
    if (rel.is_absolute()) {
      rel = a.image_path.lexically_relative(base);
      if (rel.empty() || *rel.begin() == "..") rel = a.image_path;  // outside the manifest tree
    }
    j["image"] = rel.generic_string();
    j["label"] = label_name(a.label);
    j["source"] = a.source;
    if (a.splice) j["splice"] = {a.splice->x, a.splice->y, a.splice->w, a.splice->h};
    if (a.cues) j["cues"] = {a.cues->first, a.cues->second};
    out << j.dump() << "\n";
  }
  const std::string s = out.str();
  write_file(path, std::vector<std::uint8_t>(s.begin(), s.end()));
}

std::vector<Article> load_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest " + path.string());
  const auto base = std::filesystem::absolute(path).parent_path();
  std::vector<Article> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t record = 0;
  while (std::getline(f, line)) {
    if (trim(line).empty()) continue;
    ++record;
    const std::string where = "manifest " + path.string() + " record " + std::to_string(record);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw DataError(where + ": not a JSON object");
    const std::string id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : "";
    if (id.empty()) throw DataError(where + ": missing id");
    const std::string who = where + " (id " + id + ")";
    auto field = [&](const char* name) -> std::string {
      if (!j.contains(name) || !j[name].is_string()) throw DataError(who + ": missing field '" + name + "'");
      return j[name].get<std::string>();
    };
    Article a;
    a.id = id;
    a.headline = field("headline");
    if (trim(a.headline).empty()) throw DataError(who + ": empty headline");
    const std::string image = j.contains("image") && j["image"].is_string() ? j["image"].get<std::string>() : "";
    if (image.empty()) throw DataError(who + ": missing image path");
    std::filesystem::path p(image);
    a.image_path = (p.is_absolute() ? p : base / p).lexically_normal();
    if (!std::filesystem::is_regular_file(a.image_path)) {
      throw DataError(who + ": image not found: " + a.image_path.string());
    }
    try {
      a.label = parse_label(field("label"));
    } catch (const DataError& e) {
      throw DataError(who + ": " + e.what());
    }
    a.source = field("source");
    try {
      if (j.contains("splice")) {
        const auto& s = j["splice"];
        if (!s.is_array() || s.size() != 4) throw DataError("splice must be [x, y, w, h]");
        a.splice = Rect{s[0].get<int>(), s[1].get<int>(), s[2].get<int>(), s[3].get<int>()};
      }
      if (j.contains("cues")) {
        const auto& c = j["cues"];
        if (!c.is_array() || c.size() != 2) throw DataError("cues must be [text, image]");
        a.cues = std::make_pair(c[0].get<int>(), c[1].get<int>());
      }
    } catch (const json::exception& e) {
      throw DataError(who + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(who + ": " + e.what());
    }
    if (!seen.insert(a.id).second) throw DataError(who + ": duplicate id");
    out.push_back(std::move(a));
  }
  return out;
}

// ---------------------------------------------------------------- split

Split split(const std::vector<Article>& articles, double ratio, std::uint64_t seed) {
  if (articles.size() < 5) throw DataError("split needs at least 5 articles, got " + std::to_string(articles.size()));
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must be in (0, 1)");
  Rng rng(seed);
  std::vector<std::uint8_t> in_train(articles.size(), 0);
  for (Label label : {Label::regular, Label::satire}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < articles.size(); ++i)
      if (articles[i].label == label) idx.push_back(i);
    if (idx.empty()) throw DataError("split: no " + label_name(label) + " articles");
    Rng class_rng = rng.fork(static_cast<std::uint64_t>(label));
    class_rng.shuffle(idx);
    const auto cut = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < cut; ++k) in_train[idx[k]] = 1;
  }
  Split s;
  for (std::size_t i = 0; i < articles.size(); ++i) (in_train[i] ? s.train : s.test).push_back(articles[i]);
  return s;
}

// ---------------------------------------------------------------- text

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (unsigned char ch : text) {
    if (std::isalnum(ch) || ch >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else if (std::isspace(ch) || !std::isprint(ch)) {
      flush();
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(ch));
    }
  }
  flush();
  return out;
}

Vocab::Vocab(std::vector<std::string> tokens, int min_freq) : tokens_(std::move(tokens)), min_freq_(min_freq) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i) + 3).second) {
      throw DataError("vocabulary token '" + tokens_[i] + "' listed twice");
    }
  }
}

int Vocab::id(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token(int id) const {
  static const std::string reserved[3] = {"<pad>", "<unk>", "<cls>"};
  if (id < 0 || static_cast<std::size_t>(id) >= size()) throw DataError("token id " + std::to_string(id) + " out of range");
  return id < 3 ? reserved[id] : tokens_[static_cast<std::size_t>(id) - 3];
}

std::string Vocab::to_json() const {
  json j;
  j["min_freq"] = min_freq_;
  j["tokens"] = tokens_;
  return j.dump();
}

Vocab Vocab::from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    return Vocab(j.at("tokens").get<std::vector<std::string>>(), j.at("min_freq").get<int>());
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed vocabulary: ") + e.what());
  }
}

Vocab build_vocab(const std::vector<std::string>& headlines, int min_freq) {
  std::map<std::string, int> freq;
  for (const auto& h : headlines)
    for (auto& t : split_tokens(h)) ++freq[t];
  std::vector<std::string> kept;
  for (const auto& [tok, n] : freq)
    if (n >= min_freq) kept.push_back(tok);
  return Vocab(std::move(kept), min_freq);
}

std::size_t TokenSeq::length() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1)); }

TokenSeq tokenize(const std::string& headline, const Vocab& vocab, std::size_t max_len) {
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  TokenSeq s;
  s.ids.assign(max_len, kPadId);
  s.mask.assign(max_len, 0);
  s.ids[0] = kClsId;
  s.mask[0] = 1;
  std::size_t pos = 1;
  for (const auto& t : split_tokens(headline)) {
    if (pos >= max_len) break;
    s.ids[pos] = vocab.id(t);
    s.mask[pos] = 1;
    ++pos;
  }
  return s;
}

double token_coverage(const std::vector<std::string>& headlines, const Vocab& vocab) {
  std::size_t known = 0, total = 0;
  for (const auto& h : headlines)
    for (const auto& t : split_tokens(h)) {
      ++total;
      known += vocab.id(t) != kUnkId;
    }
  return total ? static_cast<double>(known) / static_cast<double>(total) : 1.0;
}

// ---------------------------------------------------------------- regions

Tensor<float> extract_patches(const ImageBuffer& img, const PatchGrid& grid) {
  if (grid.rows < 1 || grid.cols < 1 || grid.image_size % grid.rows || grid.image_size % grid.cols) {
    throw ConfigError("patch grid must divide the image size evenly");
  }
  if (img.width < grid.cols || img.height < grid.rows) {
    throw GeometryError("image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                        " smaller than the patch grid");
  }
  const ImageBuffer r = resize_bilinear(img, grid.image_size, grid.image_size);
  const int ph = grid.image_size / grid.rows, pw = grid.image_size / grid.cols;
  const auto dim = static_cast<std::size_t>(grid.patch_dim());
  std::vector<float> data(static_cast<std::size_t>(grid.regions()) * dim);
  std::size_t k = 0;
  for (int gr = 0; gr < grid.rows; ++gr)
    for (int gc = 0; gc < grid.cols; ++gc)
      for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x)
          for (int c = 0; c < 3; ++c) data[k++] = r.at(gc * pw + x, gr * ph + y, c) / 255.0f - 0.5f;
  return Tensor<float>({static_cast<std::size_t>(grid.regions()), dim}, std::move(data));
}

template <typename T>
void add_patch_params(ParameterSet<T>& params, const std::string& prefix, const PatchGrid& grid, std::size_t d,
                      Rng& rng) {
  const auto dim = static_cast<std::size_t>(grid.patch_dim());
  params.add_uniform(prefix + ".proj_w", {dim, d}, dim, d, rng);
  params.add_constant(prefix + ".proj_b", {d}, T(0));
  params.add_uniform(prefix + ".row", {static_cast<std::size_t>(grid.rows), d}, 1, d, rng);
  params.add_uniform(prefix + ".col", {static_cast<std::size_t>(grid.cols), d}, 1, d, rng);
}

template <typename T>
Var<T> patch_features(Graph<T>& g, Var<T> patches, ParameterSet<T>& params, const std::string& prefix,
                      const PatchGrid& grid, bool positions) {
  if (patches.shape() != Shape{static_cast<std::size_t>(grid.regions()), static_cast<std::size_t>(grid.patch_dim())}) {
    throw ConfigError("patch tensor " + shape_str(patches.shape()) + " does not match grid " +
                      std::to_string(grid.rows) + "x" + std::to_string(grid.cols));
  }
  Var<T> x = add_bias(matmul(patches, g.param(params.at(prefix + ".proj_w"))), g.param(params.at(prefix + ".proj_b")));
  if (!positions) return x;
  std::vector<int> row_ids, col_ids;
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      row_ids.push_back(r);
      col_ids.push_back(c);
    }
  const Var<T> pos = add(embedding(g.param(params.at(prefix + ".row")), std::span<const int>(row_ids)),
                         embedding(g.param(params.at(prefix + ".col")), std::span<const int>(col_ids)));
  return add(x, pos);
}

template void add_patch_params<float>(ParameterSet<float>&, const std::string&, const PatchGrid&, std::size_t, Rng&);
template void add_patch_params<double>(ParameterSet<double>&, const std::string&, const PatchGrid&, std::size_t, Rng&);
template Var<float> patch_features<float>(Graph<float>&, Var<float>, ParameterSet<float>&, const std::string&,
                                          const PatchGrid&, bool);
template Var<double> patch_features<double>(Graph<double>&, Var<double>, ParameterSet<double>&, const std::string&,
                                            const PatchGrid&, bool);

}  // namespace satire

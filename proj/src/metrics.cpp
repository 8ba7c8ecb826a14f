#include "satire/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "satire/errors.hpp"

namespace satire {

namespace {

// Table 1 prints undefined metrics as an em dash.
constexpr const char* kAbsent = "\xe2\x80\x94";

void check_labels(const std::vector<int>& labels, std::size_t n, const char* what) {
  if (labels.size() != n) {
    throw DimensionError(std::string(what) + ": " + std::to_string(n) + " scores/predictions but " +
                         std::to_string(labels.size()) + " labels");
  }
  for (int l : labels) {
    if (l != 0 && l != 1) throw DataError(std::string(what) + ": label " + std::to_string(l) + " is not 0 or 1");
  }
}

void check_scores(const std::vector<double>& scores, const char* what) {
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericError(std::string(what) + ": non-finite score");
  }
}

double pct(std::int64_t num, std::int64_t den) { return 100.0 * static_cast<double>(num) / static_cast<double>(den); }

}  // namespace

Confusion confusion_matrix(const std::vector<int>& predicted, const std::vector<int>& labels) {
  check_labels(labels, predicted.size(), "confusion_matrix");
  check_labels(predicted, labels.size(), "confusion_matrix");
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predicted[i] == 1) (labels[i] == 1 ? c.tp : c.fp)++;
    else (labels[i] == 1 ? c.fn : c.tn)++;
  }
  return c;
}

double accuracy(const Confusion& c) {
  if (c.total() == 0) throw DataError("accuracy of an empty confusion matrix");
  return pct(c.tp + c.tn, c.total());
}

std::optional<double> precision(const Confusion& c) {
  if (c.tp + c.fp == 0) return std::nullopt;
  return pct(c.tp, c.tp + c.fp);
}

std::optional<double> recall(const Confusion& c) {
  if (c.tp + c.fn == 0) return std::nullopt;
  return pct(c.tp, c.tp + c.fn);
}

std::optional<double> f1_score(const Confusion& c) {
  if (c.tp + c.fp == 0 || c.tp + c.fn == 0) return std::nullopt;
  // Harmonic mean of precision and recall, written on the counts.
  return pct(2 * c.tp, 2 * c.tp + c.fp + c.fn);
}

double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_labels(labels, scores.size(), "auc_roc");
  check_scores(scores, "auc_roc");
  const std::int64_t n_pos = std::count(labels.begin(), labels.end(), 1);
  const std::int64_t n_neg = static_cast<std::int64_t>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("auc_roc needs both classes present");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::int64_t concordant = 0, ties = 0, neg_below = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::int64_t pos = 0, neg = 0;
    for (; j < idx.size() && scores[idx[j]] == scores[idx[i]]; ++j) (labels[idx[j]] == 1 ? pos : neg)++;
    concordant += pos * neg_below;
    ties += pos * neg;
    neg_below += neg;
    i = j;
  }
  return pct(2 * concordant + ties, 2 * n_pos * n_neg);
}

double auc_trapezoid(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_labels(labels, scores.size(), "auc_trapezoid");
  check_scores(scores, "auc_trapezoid");
  const std::int64_t n_pos = std::count(labels.begin(), labels.end(), 1);
  const std::int64_t n_neg = static_cast<std::int64_t>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("auc_trapezoid needs both classes present");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double area = 0.0, fpr = 0.0, tpr = 0.0;
  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    for (; j < idx.size() && scores[idx[j]] == scores[idx[i]]; ++j) (labels[idx[j]] == 1 ? tp : fp)++;
    const double x = static_cast<double>(fp) / static_cast<double>(n_neg);
    const double y = static_cast<double>(tp) / static_cast<double>(n_pos);
    area += (x - fpr) * (y + tpr) / 2.0;
    fpr = x;
    tpr = y;
    i = j;
  }
  return 100.0 * area;
}

MetricsReport compute_metrics(const std::vector<int>& predicted, const std::vector<double>& scores,
                              const std::vector<int>& labels) {
  if (labels.empty()) throw DataError("cannot compute metrics on an empty test set");
  MetricsReport r;
  r.confusion = confusion_matrix(predicted, labels);
  r.accuracy = accuracy(r.confusion);
  r.precision = precision(r.confusion);
  r.recall = recall(r.confusion);
  r.f1 = f1_score(r.confusion);
  r.auc_roc = auc_roc(scores, labels);
  return r;
}

MetricsReport compute_metrics(const std::vector<double>& satire_prob, const std::vector<int>& labels) {
  check_scores(satire_prob, "compute_metrics");
  std::vector<int> predicted(satire_prob.size());
  for (std::size_t i = 0; i < satire_prob.size(); ++i) predicted[i] = satire_prob[i] > 0.5 ? 1 : 0;
  return compute_metrics(predicted, satire_prob, labels);
}

MetricsReport majority_baseline(const std::vector<int>& train_labels, const std::vector<int>& test_labels) {
  if (train_labels.empty() || test_labels.empty()) throw DataError("majority baseline needs non-empty sets");
  check_labels(train_labels, train_labels.size(), "majority_baseline");
  const auto n_sat = std::count(train_labels.begin(), train_labels.end(), 1);
  const int majority = 2 * n_sat > static_cast<std::int64_t>(train_labels.size()) ? 1 : 0;
  return compute_metrics(std::vector<int>(test_labels.size(), majority),
                         std::vector<double>(test_labels.size(), 0.5), test_labels);
}

// ---------------------------------------------------------------- serialization

std::string metrics_text(const MetricsReport& r) {
  auto fmt = [](std::optional<double> v) {
    if (!v) return std::string(kAbsent);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", *v);
    return std::string(buf);
  };
  std::ostringstream o;
  o << "accuracy " << fmt(r.accuracy) << "\n"
    << "precision " << fmt(r.precision) << "\n"
    << "recall " << fmt(r.recall) << "\n"
    << "f1 " << fmt(r.f1) << "\n"
    << "auc_roc " << fmt(r.auc_roc) << "\n"
    << "tp " << r.confusion.tp << "\n"
    << "fp " << r.confusion.fp << "\n"
    << "tn " << r.confusion.tn << "\n"
    << "fn " << r.confusion.fn << "\n";
  return o.str();
}

std::string metrics_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  auto opt = [](std::optional<double> v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr); };
  j["accuracy"] = r.accuracy;
  j["precision"] = opt(r.precision);
  j["recall"] = opt(r.recall);
  j["f1"] = opt(r.f1);
  j["auc_roc"] = r.auc_roc;
  j["confusion"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}};
  return j.dump(2) + "\n";
}

MetricsReport parse_metrics_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    auto opt = [&](const char* k) -> std::optional<double> {
      if (j.at(k).is_null()) return std::nullopt;
      return j.at(k).get<double>();
    };
    MetricsReport r;
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = opt("precision");
    r.recall = opt("recall");
    r.f1 = opt("f1");
    r.auc_roc = j.at("auc_roc").get<double>();
    const auto& c = j.at("confusion");
    r.confusion = {c.at("tp").get<std::int64_t>(), c.at("fp").get<std::int64_t>(), c.at("tn").get<std::int64_t>(),
                   c.at("fn").get<std::int64_t>()};
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("metrics JSON: ") + e.what(), 0);
  }
}

// ---------------------------------------------------------------- error analysis

Rect hottest_tile(const ElaMap& map, int side) {
  if (map.width < 2 || map.height < 2) throw GeometryError("ELA map too small for a tile");
  side = std::max(1, std::min({side, map.width / 2, map.height / 2}));
  const int stride = std::max(1, side / 2);
  auto positions = [&](int extent) {
    std::vector<int> out;
    for (int p = 0; p + side <= extent; p += stride) out.push_back(p);
    if (out.back() != extent - side) out.push_back(extent - side);
    return out;
  };
  Rect best{0, 0, side, side};
  double best_sum = -1.0;
  for (int y : positions(map.height)) {
    for (int x : positions(map.width)) {
      double s = 0.0;
      for (int yy = y; yy < y + side; ++yy) {
        const auto* row = map.values.data() + (static_cast<std::size_t>(yy) * map.width + x) * 3;
        for (int k = 0; k < side * 3; ++k) s += row[k];
      }
      if (s > best_sum) {
        best_sum = s;
        best = Rect{x, y, side, side};
      }
    }
  }
  return best;
}

std::vector<MisclassifiedRecord> misclassification_report(const std::vector<Article>& test,
                                                          const std::vector<double>& satire_prob, double fraction,
                                                          std::uint64_t seed) {
  if (test.size() != satire_prob.size()) {
    throw DimensionError("misclassification_report: " + std::to_string(test.size()) + " articles but " +
                         std::to_string(satire_prob.size()) + " scores");
  }
  if (!(fraction > 0.0 && fraction <= 1.0)) throw UsageError("fraction must be in (0, 1]");
  check_scores(satire_prob, "misclassification_report");
  std::vector<std::size_t> wrong;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const int predicted = satire_prob[i] > 0.5 ? 1 : 0;
    if (predicted != static_cast<int>(test[i].label)) wrong.push_back(i);
  }
  if (wrong.empty()) return {};
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(wrong.size()) - 1e-9));
  Rng rng(seed);
  rng.shuffle(wrong);
  wrong.resize(std::max<std::size_t>(k, 1));
  std::sort(wrong.begin(), wrong.end());

  std::vector<MisclassifiedRecord> out;
  for (std::size_t i : wrong) {
    const Article& a = test[i];
    MisclassifiedRecord r;
    r.id = a.id;
    r.headline = a.headline;
    r.true_label = a.label;
    r.predicted = satire_prob[i] > 0.5 ? Label::satire : Label::regular;
    r.satire_prob = satire_prob[i];
    ImageBuffer img;
    try {
      img = read_image(a.image_path);
    } catch (const Error& e) {
      throw DataError("article " + a.id + ": " + e.what());
    }
    const ElaMap map = ela(img, 90);
    r.region_is_splice = a.splice.has_value() && a.splice->inside(img.width, img.height);
    r.region = r.region_is_splice ? *a.splice : hottest_tile(map);
    r.ela_stats = ela_region_stats(map, Mask::from_rect(img.width, img.height, r.region));
    out.push_back(r);
  }
  return out;
}

std::string misclassification_jsonl(const std::vector<MisclassifiedRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["headline"] = r.headline;
    j["label"] = label_name(r.true_label);
    j["predicted"] = label_name(r.predicted);
    j["satire_prob"] = r.satire_prob;
    j["region"] = {r.region.x, r.region.y, r.region.w, r.region.h};
    j["region_source"] = r.region_is_splice ? "splice" : "hottest_tile";
    j["ela_mean_in"] = r.ela_stats.mean_in;
    j["ela_mean_out"] = r.ela_stats.mean_out;
    j["ela_ratio"] = r.ela_stats.ratio;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace satire

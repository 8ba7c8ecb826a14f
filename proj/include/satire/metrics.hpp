#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "satire/corpus.hpp"
#include "satire/ela.hpp"

namespace satire {

// Satire is the positive class.
struct Confusion {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::int64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

// All values are percentages. Precision, recall and F1 are absent when they
// are undefined (no predicted or no actual positives).
struct MetricsReport {
  double accuracy = 0.0;
  std::optional<double> precision, recall, f1;
  double auc_roc = 0.0;
  Confusion confusion;
};

Confusion confusion_matrix(const std::vector<int>& predicted, const std::vector<int>& labels);

double accuracy(const Confusion& c);                // DataError when empty
std::optional<double> precision(const Confusion& c);
std::optional<double> recall(const Confusion& c);
std::optional<double> f1_score(const Confusion& c);  // absent with no predicted or actual positives

// Rank statistic (concordant + ties / 2) / (n_pos * n_neg), in percent,
// computed from integer pair counts. Single-class input is a DataError.
double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels);
// Trapezoidal area under the ROC curve over distinct thresholds, in percent.
double auc_trapezoid(const std::vector<double>& scores, const std::vector<int>& labels);

// Confusion from explicit predictions, AUC from the scores.
MetricsReport compute_metrics(const std::vector<int>& predicted, const std::vector<double>& scores,
                              const std::vector<int>& labels);
// Predictions are satire when the score exceeds 0.5.
MetricsReport compute_metrics(const std::vector<double>& satire_prob, const std::vector<int>& labels);

// Predicts the majority training class (regular on a tie) for every test
// sample, with score 0.5.
MetricsReport majority_baseline(const std::vector<int>& train_labels, const std::vector<int>& test_labels);

// One metric per line, two decimals, U+2014 for absent values, then the
// confusion counts.
std::string metrics_text(const MetricsReport& r);
// JSON object; absent values are null.
std::string metrics_json(const MetricsReport& r);
MetricsReport parse_metrics_json(const std::string& json);

// ---------------------------------------------------------------- error analysis

struct MisclassifiedRecord {
  std::string id;
  std::string headline;
  Label true_label = Label::regular;
  Label predicted = Label::regular;
  double satire_prob = 0.0;
  Rect region;             // splice rect if known, else the hottest ELA tile
  bool region_is_splice = false;
  RegionStats ela_stats;   // ELA at quality 90, region vs rest
};

// Uniform seeded sample of ceil(fraction * |misclassified|) of the test
// articles the scores get wrong (threshold 0.5), in test order. No
// misclassifications give an empty report.
std::vector<MisclassifiedRecord> misclassification_report(const std::vector<Article>& test,
                                                          const std::vector<double>& satire_prob,
                                                          double fraction = 0.2, std::uint64_t seed = 0);

// JSON Lines, one record per line.
std::string misclassification_jsonl(const std::vector<MisclassifiedRecord>& records);

// Square tile of side `side` with the largest mean ELA, scanned on a grid of
// stride side / 2 (clamped to the image).
Rect hottest_tile(const ElaMap& map, int side = 32);

}  // namespace satire

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "satire/corpus.hpp"
#include "satire/models.hpp"

namespace satire {

struct TrainConfig {
  int batch_size = 32;
  double lr = 1e-3;
  int epochs = 12;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  // From-scratch toy defaults: coattn and the other stream models 1e-3 for
  // 12 epochs, elacnn 1e-4 for 7 epochs.
  static TrainConfig toy(ModelKind kind);
  // Fine-tuning values: coattn 5e-6 for 12 epochs, elacnn 1e-5 for 7 epochs.
  static TrainConfig finetune(ModelKind kind);

  void validate() const;  // ConfigError
  std::string to_text() const;
  // Keys: batch_size, lr, epochs, beta1, beta2, adam_eps, seed. Starts from `base`.
  static TrainConfig parse(const std::string& text, TrainConfig base);
  static TrainConfig parse(const std::string& text);
};

// Per-parameter first/second moments, keyed by parameter name.
struct AdamState {
  std::map<std::string, std::vector<double>> m, v;
  std::uint64_t step = 0;
};

// One bias-corrected Adam update from the gradients stored on the
// parameters. Parameters without a gradient, or rejected by `trainable`, are
// left unchanged. A non-finite gradient is a NumericError naming the
// parameter, raised before anything is modified.
template <typename T>
void adam_step(ParameterSet<T>& params, AdamState& state, const TrainConfig& cfg,
               const std::function<bool(const std::string&)>& trainable = {});

extern template void adam_step<float>(ParameterSet<float>&, AdamState&, const TrainConfig&,
                                      const std::function<bool(const std::string&)>&);
extern template void adam_step<double>(ParameterSet<double>&, AdamState&, const TrainConfig&,
                                       const std::function<bool(const std::string&)>&);

struct EpochStats {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double train_accuracy = 0.0;  // percent
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Mini-batch training with mean cross-entropy per batch. The order is
// reshuffled every epoch from `cfg.seed`; the final short batch is kept.
// Empty `data` is a DataError.
std::vector<EpochStats> train(Model<float>& model, const std::vector<Example>& data, const TrainConfig& cfg,
                              const EpochCallback& on_epoch = {});

// Tab-separated "epoch loss train_accuracy" table with a header line.
std::string history_table(const std::vector<EpochStats>& history);

// Satire-class softmax probability for every example.
std::vector<double> predict(Model<float>& model, const std::vector<Example>& data);

// ---------------------------------------------------------------- checkpoints

// Train/test partition a model was trained on (see split()).
struct SplitSpec {
  double ratio = 0.8;
  std::uint64_t seed = 0;
};

// A trained model with everything needed to rebuild its inputs.
struct TrainedModel {
  Model<float> model;
  Vocab vocab;
  std::optional<SplitSpec> split;
};

// Checkpoint metadata is JSON: {"format": "satire-model", "model": config
// text, "vocab": vocab JSON, optional "split": {"ratio", "seed"}}.
void save_model(const std::filesystem::path& path, const Model<float>& model, const Vocab& vocab,
                std::optional<SplitSpec> split = std::nullopt);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace satire

#include "satire/train.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "satire/checkpoint.hpp"
#include "satire/errors.hpp"
#include "satire/kvconfig.hpp"
#include "satire/ops.hpp"

namespace satire {

// ---------------------------------------------------------------- config

TrainConfig TrainConfig::toy(ModelKind kind) {
  TrainConfig c;
  if (kind == ModelKind::elacnn) {
    c.lr = 1e-4;
    c.epochs = 7;
  }
  return c;
}

TrainConfig TrainConfig::finetune(ModelKind kind) {
  TrainConfig c;
  if (kind == ModelKind::elacnn) {
    c.lr = 1e-5;
    c.epochs = 7;
  } else {
    c.lr = 5e-6;
    c.epochs = 12;
  }
  return c;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("beta1 and beta2 must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
}

std::string TrainConfig::to_text() const {
  std::ostringstream o;
  o << "batch_size = " << batch_size << "\n"
    << "lr = " << kv_format(lr) << "\n"
    << "epochs = " << epochs << "\n"
    << "beta1 = " << kv_format(beta1) << "\n"
    << "beta2 = " << kv_format(beta2) << "\n"
    << "adam_eps = " << kv_format(adam_eps) << "\n"
    << "seed = " << seed << "\n";
  return o.str();
}

TrainConfig TrainConfig::parse(const std::string& text, TrainConfig c) {
  const auto kv = KeyValues::parse(text);
  for (std::size_t i = 0; i < kv.entries.size(); ++i) {
    const auto& [key, value] = kv.entries[i];
    if (key == "batch_size") c.batch_size = kv_int(key, value);
    else if (key == "lr") c.lr = kv_double(key, value);
    else if (key == "epochs") c.epochs = kv_int(key, value);
    else if (key == "beta1") c.beta1 = kv_double(key, value);
    else if (key == "beta2") c.beta2 = kv_double(key, value);
    else if (key == "adam_eps") c.adam_eps = kv_double(key, value);
    else if (key == "seed") c.seed = kv_u64(key, value);
    else throw ConfigError("train config line " + std::to_string(kv.lines[i]) + ": unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::parse(const std::string& text) { return parse(text, TrainConfig{}); }

// ---------------------------------------------------------------- Adam

template <typename T>
void adam_step(ParameterSet<T>& params, AdamState& state, const TrainConfig& cfg,
               const std::function<bool(const std::string&)>& trainable) {
  auto active = [&](const std::string& name, const Tensor<T>& t) {
    return t.grad.has_value() && (!trainable || trainable(name));
  };
  for (const auto& [name, t] : params.tensors()) {
    if (!active(name, t)) continue;
    for (T g : *t.grad) {
      if (!std::isfinite(static_cast<double>(g))) throw NumericError("non-finite gradient in parameter " + name);
    }
  }
  ++state.step;
  const double step = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, step);
  const double c2 = 1.0 - std::pow(cfg.beta2, step);
  for (auto& [name, t] : params.tensors()) {
    if (!active(name, t)) continue;
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != t.size()) {
      m.assign(t.size(), 0.0);
      v.assign(t.size(), 0.0);
    }
    const auto& g = *t.grad;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = m[i] / c1, vhat = v[i] / c2;
      t.data[i] = static_cast<T>(static_cast<double>(t.data[i]) - cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
    }
  }
}

template void adam_step<float>(ParameterSet<float>&, AdamState&, const TrainConfig&,
                               const std::function<bool(const std::string&)>&);
template void adam_step<double>(ParameterSet<double>&, AdamState&, const TrainConfig&,
                                const std::function<bool(const std::string&)>&);

// ---------------------------------------------------------------- training

std::vector<EpochStats> train(Model<float>& model, const std::vector<Example>& data, const TrainConfig& cfg,
                              const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.empty()) throw DataError("training set is empty");
  AdamState state;
  Rng order_rng(cfg.seed);
  Rng dropout_rng = Rng(cfg.seed).fork(0xd409);
  const bool use_dropout = model.config().dropout > 0.0;
  const auto trainable = [&](const std::string& name) { return model.trainable(name); };

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<EpochStats> history;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      const float weight = 1.0f / static_cast<float>(end - begin);
      model.params().zero_grad();
      for (std::size_t k = begin; k < end; ++k) {
        const Example& ex = data[order[k]];
        Graph<float> g;
        const Var<float> logits = model.forward(g, ex, use_dropout ? &dropout_rng : nullptr);
        const Var<float> loss = softmax_cross_entropy(logits, std::span<const int>(&ex.label, 1));
        const double l = loss.item();
        if (!std::isfinite(l)) throw NumericError("non-finite loss on example " + ex.id + " in epoch " + std::to_string(epoch));
        loss_sum += l;
        const auto z = logits.value();
        correct += static_cast<std::size_t>((z[1] > z[0] ? 1 : 0) == ex.label);
        g.backward(scale(loss, weight));
      }
      adam_step(model.params(), state, cfg, trainable);
    }
    EpochStats s{epoch, loss_sum / static_cast<double>(data.size()),
                 100.0 * static_cast<double>(correct) / static_cast<double>(data.size())};
    history.push_back(s);
    if (on_epoch) on_epoch(s);
  }
  return history;
}

std::string history_table(const std::vector<EpochStats>& history) {
  std::ostringstream o;
  o << "epoch\tloss\ttrain_accuracy\n";
  for (const auto& s : history) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d\t%.6f\t%.2f\n", s.epoch, s.mean_loss, s.train_accuracy);
    o << buf;
  }
  return o.str();
}

std::vector<double> predict(Model<float>& model, const std::vector<Example>& data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& ex : data) {
    Graph<float> g;
    const auto z = model.forward(g, ex).value();
    // Two-class softmax in double: p(satire) = 1 / (1 + exp(z0 - z1)).
    out.push_back(1.0 / (1.0 + std::exp(static_cast<double>(z[0]) - static_cast<double>(z[1]))));
  }
  return out;
}

// ---------------------------------------------------------------- checkpoints

void save_model(const std::filesystem::path& path, const Model<float>& model, const Vocab& vocab,
                std::optional<SplitSpec> split) {
  nlohmann::ordered_json meta;
  meta["format"] = "satire-model";
  meta["model"] = model.config().to_text();
  meta["vocab"] = vocab.to_json();
  if (split) meta["split"] = {{"ratio", split->ratio}, {"seed", split->seed}};
  write_checkpoint(path, meta.dump(), model.params());
}

TrainedModel load_model(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ckpt.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": checkpoint metadata is not JSON: " + e.what());
  }
  if (!meta.is_object() || meta.value("format", "") != "satire-model" || !meta.contains("model") ||
      !meta["model"].is_string() || !meta.contains("vocab") || !meta["vocab"].is_string()) {
    throw DataError(path.string() + ": not a model checkpoint (missing format, model or vocab metadata)");
  }
  TrainedModel out{Model<float>(ModelConfig::parse(meta["model"].get<std::string>())),
                   Vocab::from_json(meta["vocab"].get<std::string>()), std::nullopt};
  if (meta.contains("split")) {
    const auto& sp = meta["split"];
    if (!sp.is_object() || !sp.contains("ratio") || !sp["ratio"].is_number() || !sp.contains("seed") ||
        !sp["seed"].is_number_unsigned()) {
      throw DataError(path.string() + ": malformed split metadata");
    }
    out.split = SplitSpec{sp["ratio"].get<double>(), sp["seed"].get<std::uint64_t>()};
  }
  load_parameters(ckpt, out.model.params());
  return out;
}

}  // namespace satire

#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "satire/corpus.hpp"
#include "satire/ela.hpp"
#include "satire/errors.hpp"
#include "satire/metrics.hpp"
#include "satire/models.hpp"
#include "satire/train.hpp"

namespace satire {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

Rect parse_rect(const std::string& s) {
  Rect r;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%d,%d,%d,%d%c", &r.x, &r.y, &r.w, &r.h, &tail) != 4) {
    throw UsageError("--rect expects x,y,w,h, got '" + s + "'");
  }
  return r;
}

std::vector<int> labels_of(const std::vector<Article>& articles) {
  std::vector<int> out;
  out.reserve(articles.size());
  for (const auto& a : articles) out.push_back(static_cast<int>(a.label));
  return out;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  fs::path out;
  std::optional<fs::path> config;
  std::optional<int> n_satire, n_regular, image_size, host_quality, donor_quality;
  std::optional<double> splice_probability;
  std::optional<std::string> mode;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  CorpusConfig cfg = a.config ? load_corpus_config(*a.config) : CorpusConfig{};
  if (a.n_satire) cfg.n_satire = *a.n_satire;
  if (a.n_regular) cfg.n_regular = *a.n_regular;
  if (a.image_size) cfg.image_size = *a.image_size;
  if (a.host_quality) cfg.host_quality = *a.host_quality;
  if (a.donor_quality) cfg.donor_quality = *a.donor_quality;
  if (a.splice_probability) cfg.splice_probability = *a.splice_probability;
  if (a.mode) cfg.mode = *a.mode == "cross_modal" ? CorpusMode::cross_modal : CorpusMode::standard;
  cfg.seed = a.seed;
  cfg.validate();
  const auto articles = generate_synthetic_corpus(cfg, a.out);
  out << "wrote " << articles.size() << " articles (" << cfg.n_satire << " satire, " << cfg.n_regular
      << " regular) to " << (a.out / "manifest.jsonl").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- ela

struct ElaArgs {
  fs::path input, output;
  int quality = 90;
  double amplification = 10.0;
  bool raw = false;
};

int cmd_ela(const ElaArgs& a, std::ostream& out) {
  const ImageBuffer img = read_image(a.input);
  const ElaMap map = ela(img, a.quality, a.amplification);
  write_file(a.output, encode_png(a.raw ? ela_raw_image(map) : ela_to_image(map)));
  out << "mean_ela " << fixed4(map.mean()) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- splice

struct SpliceArgs {
  fs::path output;
  std::optional<fs::path> host, donor, mask;
  std::optional<std::string> rect;
  int size = 128;
  int host_quality = 95;
  int donor_quality = 60;
  int min_side = 24;
  std::uint64_t seed = 0;
};

int cmd_splice(const SpliceArgs& a, std::ostream& out) {
  if (a.host.has_value() != a.donor.has_value()) throw UsageError("--host and --donor must be given together");
  std::pair<ImageBuffer, SpliceRecord> result;
  if (a.host) {
    const ImageBuffer host = read_image(*a.host), donor = read_image(*a.donor);
    Rect r;
    if (a.rect) {
      r = parse_rect(*a.rect);
    } else {
      Rng rng(a.seed);
      const int hi = std::max(1, std::min(host.width, host.height) / 2);
      const int lo = std::min(a.min_side, hi);
      r.w = rng.range(lo, hi);
      r.h = rng.range(lo, hi);
      r.x = rng.range(0, host.width - r.w);
      r.y = rng.range(0, host.height - r.h);
    }
    result = synth_splice(host, donor, r, a.host_quality, a.donor_quality);
  } else {
    if (a.rect) throw UsageError("--rect needs --host and --donor");
    Rng rng(a.seed);
    result = random_splice(rng, a.size, a.host_quality, a.donor_quality, false, a.min_side);
  }
  const auto& [img, rec] = result;
  write_image(a.output, img, a.host_quality);
  if (a.mask) {
    ImageBuffer m(rec.mask.width, rec.mask.height, std::vector<std::uint8_t>(rec.mask.on.size() * 3));
    for (std::size_t i = 0; i < rec.mask.on.size(); ++i) {
      const std::uint8_t v = rec.mask.on[i] ? 255 : 0;
      m.pixels[i * 3] = m.pixels[i * 3 + 1] = m.pixels[i * 3 + 2] = v;
    }
    write_file(*a.mask, encode_png(m));
  }
  const auto stats = ela_region_stats(ela(img, 90), rec.mask);
  out << "rect " << rec.rect.x << "," << rec.rect.y << "," << rec.rect.w << "," << rec.rect.h << "\n"
      << "ela_mean_in " << fixed4(stats.mean_in) << "\n"
      << "ela_mean_out " << fixed4(stats.mean_out) << "\n"
      << "ela_ratio " << fixed4(stats.ratio) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  fs::path manifest, out;
  std::string model;
  std::optional<fs::path> model_config, train_config, history;
  std::optional<int> epochs, batch_size;
  std::optional<double> lr;
  bool finetune_schedule = false;
  double split_ratio = 0.8;
  int min_freq = 2;
  std::uint64_t seed = 0;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const ModelKind kind = parse_model_kind(a.model);
  ModelConfig mc = a.model_config ? ModelConfig::parse(read_text(*a.model_config)) : ModelConfig{};
  mc.kind = kind;
  TrainConfig tc = a.finetune_schedule ? TrainConfig::finetune(kind) : TrainConfig::toy(kind);
  if (a.train_config) tc = TrainConfig::parse(read_text(*a.train_config), tc);
  if (a.epochs) tc.epochs = *a.epochs;
  if (a.batch_size) tc.batch_size = *a.batch_size;
  if (a.lr) tc.lr = *a.lr;
  tc.seed = a.seed;
  tc.validate();
  if (!(a.split_ratio > 0.0 && a.split_ratio < 1.0)) throw UsageError("--split-ratio must be in (0, 1)");

  const auto articles = load_manifest(a.manifest);
  const Split sp = split(articles, a.split_ratio, a.seed);
  std::vector<std::string> headlines;
  for (const auto& art : sp.train) headlines.push_back(art.headline);
  const Vocab vocab = build_vocab(headlines, a.min_freq);
  mc.vocab_size = static_cast<int>(vocab.size());
  mc.init_seed = a.seed;
  mc.validate();

  const auto data = prepare_examples(sp.train, vocab, mc);
  Model<float> model(mc);
  if (!a.quiet) {
    out << "training " << model_kind_name(kind) << " on " << data.size() << " articles (" << model.params().count()
        << " parameters, lr " << tc.lr << ", " << tc.epochs << " epochs)\n";
  }
  const auto history = train(model, data, tc, [&](const EpochStats& s) {
    if (!a.quiet) {
      out << "epoch " << s.epoch << " loss " << fixed4(s.mean_loss) << " train_accuracy " << fixed2(s.train_accuracy)
          << "\n";
      out.flush();
    }
  });
  save_model(a.out, model, vocab, SplitSpec{a.split_ratio, a.seed});
  if (a.history) write_text(*a.history, history_table(history));
  out << "wrote " << a.out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval / report

struct EvalArgs {
  fs::path manifest;
  std::optional<fs::path> checkpoint, json, scores;
  bool majority = false;
  std::optional<double> split_ratio;
  std::optional<std::uint64_t> seed;
};

// Test partition: the checkpoint's split unless overridden by flags.
Split resolve_split(const std::vector<Article>& articles, const std::optional<SplitSpec>& stored,
                    std::optional<double> ratio, std::optional<std::uint64_t> seed) {
  SplitSpec s = stored.value_or(SplitSpec{});
  if (ratio) s.ratio = *ratio;
  if (seed) s.seed = *seed;
  if (!(s.ratio > 0.0 && s.ratio < 1.0)) throw UsageError("--split-ratio must be in (0, 1)");
  return split(articles, s.ratio, s.seed);
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.majority == a.checkpoint.has_value()) throw UsageError("give exactly one of --checkpoint or --majority");
  const auto articles = load_manifest(a.manifest);
  MetricsReport report;
  if (a.majority) {
    const Split sp = resolve_split(articles, std::nullopt, a.split_ratio, a.seed);
    report = majority_baseline(labels_of(sp.train), labels_of(sp.test));
    if (a.scores) {
      std::string text;
      for (const auto& art : sp.test) text += art.id + "\t" + label_name(art.label) + "\t0.500000\n";
      write_text(*a.scores, text);
    }
  } else {
    auto tm = load_model(*a.checkpoint);
    const Split sp = resolve_split(articles, tm.split, a.split_ratio, a.seed);
    const auto data = prepare_examples(sp.test, tm.vocab, tm.model.config());
    const auto prob = predict(tm.model, data);
    report = compute_metrics(prob, labels_of(sp.test));
    if (a.scores) {
      std::string text;
      for (std::size_t i = 0; i < sp.test.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", prob[i]);
        text += sp.test[i].id + "\t" + label_name(sp.test[i].label) + "\t" + buf + "\n";
      }
      write_text(*a.scores, text);
    }
  }
  out << metrics_text(report);
  if (a.json) write_text(*a.json, metrics_json(report));
  return kExitOk;
}

struct ReportArgs {
  fs::path manifest, checkpoint;
  std::optional<fs::path> out;
  double fraction = 0.2;
  std::optional<double> split_ratio;
  std::optional<std::uint64_t> split_seed;
  std::uint64_t seed = 0;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  const auto articles = load_manifest(a.manifest);
  auto tm = load_model(a.checkpoint);
  const Split sp = resolve_split(articles, tm.split, a.split_ratio, a.split_seed);
  const auto data = prepare_examples(sp.test, tm.vocab, tm.model.config());
  const auto records = misclassification_report(sp.test, predict(tm.model, data), a.fraction, a.seed);
  const auto text = misclassification_jsonl(records);
  if (a.out) {
    write_text(*a.out, text);
    out << "wrote " << records.size() << " records to " << a.out->string() << "\n";
  } else {
    out << text;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradArgs {
  std::string model;
  std::optional<fs::path> model_config;
  std::size_t coords = 16;
  std::size_t length = 8;
  std::uint64_t seed = 0;
};

int cmd_gradcheck(const GradArgs& a, std::ostream& out, std::ostream& err) {
  const ModelKind kind = parse_model_kind(a.model);
  ModelConfig mc = a.model_config ? ModelConfig::parse(read_text(*a.model_config)) : ModelConfig{};
  mc.kind = kind;
  if (!a.model_config) mc.vocab_size = 50;
  mc.init_seed = a.seed;
  mc.validate();
  Rng rng(a.seed);
  const Example ex = synthetic_example(mc, rng, a.length);
  GradCheckOptions opt;
  opt.coords_per_tensor = a.coords;
  opt.floor = kModelGradFloor;
  opt.seed = a.seed;
  if (kind == ModelKind::elacnn) opt.eps = kElaCnnGradEps;
  const auto r = check_model_gradients(mc, ex, opt);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", r.max_rel_error);
  out << model_kind_name(kind) << " max_rel_error " << buf << " at " << r.worst_param << "[" << r.worst_index
      << "] over " << r.coords_checked << " coordinates\n";
  if (!(r.max_rel_error < 1e-4)) {
    err << "error: gradient check failed (max relative error " << buf << " >= 1e-4)\n";
    return kExitNumeric;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Satire detection toolkit: synthetic corpora, error level analysis, models and metrics", "satire"};
  app.require_subcommand(1, 1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic multimodal corpus (images/ + manifest.jsonl)");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--config", synth.config, "Corpus config file (key = value); flags override it");
  s->add_option("--n-satire", synth.n_satire, "Number of satirical articles [400]");
  s->add_option("--n-regular", synth.n_regular, "Number of regular articles [600]");
  s->add_option("--image-size", synth.image_size, "Image side in pixels [128]");
  s->add_option("--splice-probability", synth.splice_probability,
                "Probability that a satirical image is spliced (standard mode) [1]");
  s->add_option("--host-quality", synth.host_quality, "JPEG quality of stored images and splice hosts [95]");
  s->add_option("--donor-quality", synth.donor_quality, "JPEG quality of splice donors [60]");
  s->add_option("--mode", synth.mode, "standard or cross_modal [standard]")
      ->check(CLI::IsMember({"standard", "cross_modal"}));
  s->add_option("--seed", synth.seed, "Random seed")->capture_default_str();

  ElaArgs ela_args;
  auto* e = app.add_subcommand("ela", "Write the error level analysis map of an image as PNG");
  e->add_option("--input", ela_args.input, "Input image (PNG or JPEG)")->required();
  e->add_option("--output", ela_args.output, "Output PNG")->required();
  e->add_option("--quality", ela_args.quality, "Resave JPEG quality")->capture_default_str()->check(CLI::Range(1, 100));
  e->add_option("--amplification", ela_args.amplification, "Multiplier applied before clamping to 255")
      ->capture_default_str();
  e->add_flag("--raw", ela_args.raw, "Write unamplified error levels");

  SpliceArgs splice_args;
  auto* sp = app.add_subcommand("splice", "Build a tampered image: donor patch pasted into a host");
  sp->add_option("--output", splice_args.output, "Spliced image (PNG, or JPEG at host quality)")->required();
  sp->add_option("--host", splice_args.host, "Host image (default: seeded texture)");
  sp->add_option("--donor", splice_args.donor, "Donor image (default: seeded texture)");
  sp->add_option("--rect", splice_args.rect, "Splice rectangle x,y,w,h (default: seeded)");
  sp->add_option("--mask", splice_args.mask, "Also write the splice mask as PNG");
  sp->add_option("--size", splice_args.size, "Side of synthesized host/donor textures")->capture_default_str();
  sp->add_option("--host-quality", splice_args.host_quality, "Host JPEG quality")->capture_default_str();
  sp->add_option("--donor-quality", splice_args.donor_quality, "Donor JPEG quality")->capture_default_str();
  sp->add_option("--min-side", splice_args.min_side, "Smallest seeded rectangle side")->capture_default_str();
  sp->add_option("--seed", splice_args.seed, "Random seed")->capture_default_str();

  TrainArgs train_args;
  auto* t = app.add_subcommand("train", "Train a model on the train partition of a manifest");
  t->add_option("--manifest", train_args.manifest, "manifest.jsonl")->required();
  t->add_option("--model", train_args.model, "elacnn | text | image | fuse-avg | fuse-concat | coattn")->required();
  t->add_option("--out", train_args.out, "Checkpoint to write")->required();
  t->add_option("--model-config", train_args.model_config, "Model config file (key = value)");
  t->add_option("--train-config", train_args.train_config, "Training config file (key = value)");
  t->add_option("--epochs", train_args.epochs, "Epochs (toy default: elacnn 7, others 12)");
  t->add_option("--lr", train_args.lr, "Learning rate (toy default: elacnn 1e-4, others 1e-3)");
  t->add_option("--batch-size", train_args.batch_size, "Batch size [32]");
  t->add_flag("--finetune-schedule", train_args.finetune_schedule,
              "Start from the fine-tuning schedule (coattn 5e-6 x 12, elacnn 1e-5 x 7)");
  t->add_option("--split-ratio", train_args.split_ratio, "Train fraction of the stratified split")
      ->capture_default_str();
  t->add_option("--min-freq", train_args.min_freq, "Minimum token frequency for the vocabulary")
      ->capture_default_str();
  t->add_option("--history", train_args.history, "Write the per-epoch history table here");
  t->add_option("--seed", train_args.seed, "Seed for split, initialization and shuffling")->capture_default_str();
  t->add_flag("--quiet", train_args.quiet, "Only print the final line");

  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint (or the majority baseline) on the test partition");
  ev->add_option("--manifest", eval_args.manifest, "manifest.jsonl")->required();
  ev->add_option("--checkpoint", eval_args.checkpoint, "Trained model");
  ev->add_flag("--majority", eval_args.majority, "Evaluate the majority-class baseline instead");
  ev->add_option("--json", eval_args.json, "Also write the metrics as JSON");
  ev->add_option("--scores", eval_args.scores, "Write id, label and satire probability per test article");
  ev->add_option("--split-ratio", eval_args.split_ratio, "Override the split ratio [checkpoint's, else 0.8]");
  ev->add_option("--seed", eval_args.seed, "Override the split seed [checkpoint's, else 0]");

  ReportArgs report_args;
  auto* rp = app.add_subcommand("report", "Sample misclassified test articles with ELA region statistics");
  rp->add_option("--manifest", report_args.manifest, "manifest.jsonl")->required();
  rp->add_option("--checkpoint", report_args.checkpoint, "Trained model")->required();
  rp->add_option("--fraction", report_args.fraction, "Fraction of misclassified articles to sample")
      ->capture_default_str();
  rp->add_option("--out", report_args.out, "Write JSON Lines here instead of standard output");
  rp->add_option("--split-ratio", report_args.split_ratio, "Override the split ratio [checkpoint's]");
  rp->add_option("--split-seed", report_args.split_seed, "Override the split seed [checkpoint's]");
  rp->add_option("--seed", report_args.seed, "Sampling seed")->capture_default_str();

  GradArgs grad_args;
  auto* g = app.add_subcommand("gradcheck", "Central-difference gradient check of a model in double precision");
  g->add_option("model", grad_args.model, "elacnn | text | image | fuse-avg | fuse-concat | coattn")->required();
  g->add_option("--model-config", grad_args.model_config, "Model config file (default: toy config)");
  g->add_option("--coords", grad_args.coords, "Sampled coordinates per parameter tensor")->capture_default_str();
  g->add_option("--length", grad_args.length, "Unmasked tokens in the synthetic headline")->capture_default_str();
  g->add_option("--seed", grad_args.seed, "Seed for initialization, inputs and sampling")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, out, err);
    return kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (e->parsed()) return cmd_ela(ela_args, out);
    if (sp->parsed()) return cmd_splice(splice_args, out);
    if (t->parsed()) return cmd_train(train_args, out);
    if (ev->parsed()) return cmd_eval(eval_args, out);
    if (rp->parsed()) return cmd_report(report_args, out);
    if (g->parsed()) return cmd_gradcheck(grad_args, out, err);
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& ex) {
    err << "configuration error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& ex) {
    err << "numeric error: " << ex.what() << "\n";
    return kExitNumeric;
  } catch (const Error& ex) {
    err << "data error: " << ex.what() << "\n";
    return kExitData;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace satire

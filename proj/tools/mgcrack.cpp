// mgcrack: dataset generation, training, evaluation and inference.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
// 3 data error (missing/malformed dataset, image or checkpoint).

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "mgcrack/harness.hpp"

namespace {

using namespace mgcrack;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

// "key=value" pairs from repeated --set flags.
std::pair<std::string, std::string> split_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + text + "'");
  return {text.substr(0, eq), text.substr(eq + 1)};
}

MGCrackNet load_checkpoint(const std::filesystem::path& dir, const std::optional<std::filesystem::path>& model_cfg) {
  std::optional<ModelConfig> expected;
  if (model_cfg) {
    const KeyValues kv = KeyValues::load(*model_cfg);
    expected = ModelConfig::read(kv);
    kv.reject_unknown();
  }
  try {
    return MGCrackNet::load(dir, expected ? &*expected : nullptr);
  } catch (const std::exception& e) {
    throw DataError("checkpoint " + dir.string() + ": " + e.what());
  }
}

struct GenArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

int run_gen(const GenArgs& a) {
  KeyValues kv = a.config.empty() ? KeyValues::parse("", "<defaults>") : KeyValues::load(a.config);
  for (const std::string& o : a.overrides) {
    auto [k, v] = split_override(o);
    kv.set(k, v);
  }
  if (a.seed) kv.set("seed", std::to_string(*a.seed));
  const GenConfig cfg = GenConfig::parse(kv.serialize(), a.config.empty() ? "<defaults>" : a.config);
  write_dataset(a.out, cfg);
  std::cout << "wrote " << cfg.train_count << " train + " << cfg.test_count << " test images to " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  std::string config;
  std::vector<std::pair<std::string, std::string>> flags;  // flag overrides in file-key form
  std::vector<std::string> overrides;
};

int run_train(const TrainArgs& a) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : TrainConfig::load(a.config);
  for (const auto& [k, v] : a.flags) cfg.set(k, v);
  for (const std::string& o : a.overrides) {
    auto [k, v] = split_override(o);
    cfg.set(k, v);
  }
  const TrainResult r = train(cfg, [](const EpochRecord& rec, const MGCrackNet&) {
    std::cout << format_log_row(rec) << '\n' << std::flush;
  });
  std::cout << "best epoch " << r.best_epoch << " ap " << format_number(r.best_ap) << "; checkpoints in "
            << cfg.output.string() << '\n';
  return 0;
}

struct EvalArgs {
  std::string checkpoint, data, split = "test", out, model_config;
  std::size_t batch_size = 16;
};

int run_eval(const EvalArgs& a) {
  const MGCrackNet net = load_checkpoint(
      a.checkpoint, a.model_config.empty() ? std::nullopt : std::optional<std::filesystem::path>(a.model_config));
  const std::vector<LabeledSample> samples = load_split(a.data, a.split);
  EvalResult r = evaluate(net, samples, a.batch_size);
  r.report.set("split", a.split);
  r.report.set("images", static_cast<double>(samples.size()));
  if (!a.out.empty()) write_eval(a.out, r);
  std::cout << r.report.text();
  return 0;
}

struct InferArgs {
  std::string checkpoint, image, out;
};

int run_infer(const InferArgs& a) {
  const MGCrackNet net = load_checkpoint(a.checkpoint, std::nullopt);
  const Inference r = infer(net, read_pnm(a.image));
  write_inference(a.out, r);
  std::size_t positive = 0;
  for (auto b : r.binary) positive += b;
  std::cout << r.rows << "x" << r.cols << " grid, " << positive << " crack patches; written to " << a.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Patch-level crack detection: data synthesis, training, evaluation, inference"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic dataset");
  gen_cmd->add_option("-c,--config", gen.config, "Generator config file");
  gen_cmd->add_option("-o,--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Override the dataset seed");
  gen_cmd->add_option("--set", gen.overrides, "Override a config key (key=value)");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model with the freeze schedule");
  train_cmd->add_option("-c,--config", tr.config, "Training config file");
  // Flags that mirror config keys; applied after the file.
  std::map<std::string, std::string> flag_values;
  const std::vector<std::pair<std::string, std::string>> mirrored{
      {"--data", "dataset"},          {"--out", "output"},
      {"--epochs", "epochs"},         {"--batch-size", "batch_size"},
      {"--lr", "lr"},                 {"--lr-decay", "lr_decay"},
      {"--lr-decay-start", "lr_decay_start"}, {"--lr-decay-every", "lr_decay_every"},
      {"--momentum", "momentum"},     {"--weight-decay", "weight_decay"},
      {"--freeze-training", "freeze_training"},
      {"--stage4-frozen-through", "stage4_frozen_through"},
      {"--stage3-frozen-through", "stage3_frozen_through"},
      {"--seed", "seed"},             {"--augment", "augment"},
      {"--augment-crop", "augment_crop"}, {"--channels", "channels"},
      {"--dilation-rates", "dilation_rates"}, {"--pooling", "pooling"},
      {"--variant", "variant"},       {"--input-channels", "input_channels"}};
  for (const auto& [flag, key] : mirrored) train_cmd->add_option(flag, flag_values[key], "Sets '" + key + "'");
  train_cmd->add_option("--set", tr.overrides, "Override a config key (key=value)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  eval_cmd->add_option("--data", ev.data, "Dataset directory")->required();
  eval_cmd->add_option("--split", ev.split, "train or test");
  eval_cmd->add_option("-o,--out", ev.out, "Directory for metrics.txt and PR curves");
  eval_cmd->add_option("--batch-size", ev.batch_size, "Images per forward pass");
  eval_cmd->add_option("--model-config", ev.model_config, "Reject checkpoints not matching this model config");

  InferArgs in;
  auto* infer_cmd = app.add_subcommand("infer", "Predict the patch grid of one image");
  infer_cmd->add_option("--checkpoint", in.checkpoint, "Checkpoint directory")->required();
  infer_cmd->add_option("--image", in.image, "Binary PGM/PPM image")->required();
  infer_cmd->add_option("-o,--out", in.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) {
      for (const auto& [flag, key] : mirrored)
        if (train_cmd->count(flag)) tr.flags.emplace_back(key, flag_values[key]);
      return run_train(tr);
    }
    if (*eval_cmd) return run_eval(ev);
    if (*infer_cmd) return run_infer(in);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

#include <charconv>
#include <cmath>
#include <sstream>

#include "mgcrack/harness.hpp"

namespace mgcrack {

namespace {

std::string shortest(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void positive(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("train config: " + what);
}

TrainConfig read(const KeyValues& kv, bool check) {
  TrainConfig c;
  c.dataset = kv.get_string("dataset", "");
  c.output = kv.get_string("output", "");
  c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
  c.batch_size = kv.get_uint("batch_size", c.batch_size);
  c.lr = kv.get_double("lr", c.lr);
  c.lr_decay = kv.get_double("lr_decay", c.lr_decay);
  c.lr_decay_start = static_cast<int>(kv.get_int("lr_decay_start", c.lr_decay_start));
  c.lr_decay_every = static_cast<int>(kv.get_int("lr_decay_every", c.lr_decay_every));
  c.momentum = kv.get_double("momentum", c.momentum);
  c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
  c.freeze_training = kv.get_bool("freeze_training", c.freeze_training);
  c.freeze.stage4_frozen_through =
      static_cast<int>(kv.get_int("stage4_frozen_through", c.freeze.stage4_frozen_through));
  c.freeze.stage3_frozen_through =
      static_cast<int>(kv.get_int("stage3_frozen_through", c.freeze.stage3_frozen_through));
  c.seed = kv.get_uint("seed", c.seed);
  c.augment = kv.get_bool("augment", c.augment);
  c.augment_crop = kv.get_uint("augment_crop", c.augment_crop);
  c.model = ModelConfig::read(kv);
  kv.reject_unknown();
  if (check) c.validate();
  return c;
}

}  // namespace

void TrainConfig::validate() const {
  positive(epochs >= 1, "epochs must be >= 1");
  positive(batch_size >= 1, "batch_size must be >= 1");
  positive(std::isfinite(lr) && lr > 0, "lr must be positive");
  positive(std::isfinite(lr_decay) && lr_decay > 0 && lr_decay <= 1, "lr_decay must be in (0, 1]");
  positive(lr_decay_start >= 0, "lr_decay_start must be >= 0");
  positive(lr_decay_every >= 1, "lr_decay_every must be >= 1");
  positive(std::isfinite(momentum) && momentum >= 0 && momentum < 1, "momentum must be in [0, 1)");
  positive(std::isfinite(weight_decay) && weight_decay >= 0, "weight_decay must be >= 0");
  if (freeze_training) {
    positive(freeze.stage4_frozen_through >= 0, "stage4_frozen_through must be >= 0");
    positive(freeze.stage4_frozen_through <= freeze.stage3_frozen_through,
             "stage4_frozen_through must not exceed stage3_frozen_through");
    positive(freeze.stage3_frozen_through <= epochs, "freeze boundaries must not exceed epochs");
  }
  positive(augment_crop % kPatchSize == 0, "augment_crop must be a multiple of 32");
  model.validate();
}

std::string TrainConfig::serialize() const {
  std::ostringstream os;
  os << "dataset = " << dataset.string() << "\noutput = " << output.string() << "\nepochs = " << epochs
     << "\nbatch_size = " << batch_size << "\nlr = " << shortest(lr) << "\nlr_decay = " << shortest(lr_decay)
     << "\nlr_decay_start = " << lr_decay_start << "\nlr_decay_every = " << lr_decay_every
     << "\nmomentum = " << shortest(momentum) << "\nweight_decay = " << shortest(weight_decay)
     << "\nfreeze_training = " << (freeze_training ? "true" : "false")
     << "\nstage4_frozen_through = " << freeze.stage4_frozen_through
     << "\nstage3_frozen_through = " << freeze.stage3_frozen_through << "\nseed = " << seed
     << "\naugment = " << (augment ? "true" : "false") << "\naugment_crop = " << augment_crop << '\n'
     << model.serialize();
  return os.str();
}

TrainConfig TrainConfig::parse(const std::string& text, const std::string& origin) {
  return read(KeyValues::parse(text, origin), true);
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) { return read(KeyValues::load(path), true); }

void TrainConfig::set(const std::string& key, const std::string& value) {
  KeyValues kv = KeyValues::parse(serialize(), "<override " + key + ">");
  if (!kv.has(key)) throw ConfigError("unknown train config key '" + key + "'");
  kv.set(key, value);
  *this = read(kv, false);
}

double learning_rate(const TrainConfig& cfg, int epoch) {
  if (epoch < 1) throw std::invalid_argument("learning_rate: epoch must be >= 1");
  if (epoch <= cfg.lr_decay_start) return cfg.lr;
  const int steps = (epoch - 1 - cfg.lr_decay_start) / cfg.lr_decay_every + 1;
  return cfg.lr * std::pow(cfg.lr_decay, steps);
}

FreezePlan plan_for_epoch(const TrainConfig& cfg, int epoch) {
  if (!cfg.freeze_training || cfg.model.variant != Variant::full) return kAllActive;
  return freeze_flags(epoch, cfg.freeze);
}

}  // namespace mgcrack

#include <sstream>
#include <stdexcept>

#include "mgcrack/keyvalue.hpp"
#include "mgcrack/model.hpp"

namespace mgcrack {

std::string to_string(PoolKind kind) { return kind == PoolKind::avg ? "avg" : "max"; }

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::full: return "full";
    case Variant::pdc_cg: return "pdc_cg";
    case Variant::pdc_only: return "pdc_only";
  }
  return "?";
}

PoolKind parse_pool_kind(const std::string& text) {
  if (text == "avg") return PoolKind::avg;
  if (text == "max") return PoolKind::max;
  throw ConfigError("pooling must be 'avg' or 'max', got '" + text + "'");
}

Variant parse_variant(const std::string& text) {
  if (text == "full") return Variant::full;
  if (text == "pdc_cg") return Variant::pdc_cg;
  if (text == "pdc_only") return Variant::pdc_only;
  throw ConfigError("variant must be one of full, pdc_cg, pdc_only; got '" + text + "'");
}

void ModelConfig::validate() const {
  for (std::size_t c : channels)
    if (c < 2) throw ConfigError("stage channels must be >= 2 (the classifier halves them)");
  for (std::size_t r : dilation_rates)
    if (r < 1) throw ConfigError("dilation rates must be positive");
  if (input_channels != 1 && input_channels != 3) throw ConfigError("input_channels must be 1 or 3");
}

namespace {

template <std::size_t N>
std::string join(const std::array<std::size_t, N>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < N; ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

template <std::size_t N>
std::array<std::size_t, N> to_array(const std::vector<std::size_t>& v, const char* key) {
  if (v.size() != N)
    throw ConfigError(std::string(key) + " needs exactly " + std::to_string(N) + " entries, got " +
                      std::to_string(v.size()));
  std::array<std::size_t, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = v[i];
  return out;
}

}  // namespace

std::string ModelConfig::serialize() const {
  std::ostringstream os;
  os << "channels = " << join(channels) << '\n'
     << "dilation_rates = " << join(dilation_rates) << '\n'
     << "pooling = " << to_string(pooling) << '\n'
     << "input_channels = " << input_channels << '\n'
     << "variant = " << to_string(variant) << '\n';
  return os.str();
}

ModelConfig ModelConfig::parse(const std::string& text, const std::string& origin) {
  const KeyValues kv = KeyValues::parse(text, origin);
  const ModelConfig cfg = read(kv);
  kv.reject_unknown();
  return cfg;
}

ModelConfig ModelConfig::read(const KeyValues& kv) {
  ModelConfig cfg;
  cfg.channels = to_array<kNumStages>(kv.get_sizes("channels", {cfg.channels.begin(), cfg.channels.end()}), "channels");
  cfg.dilation_rates = to_array<3>(
      kv.get_sizes("dilation_rates", {cfg.dilation_rates.begin(), cfg.dilation_rates.end()}), "dilation_rates");
  cfg.pooling = parse_pool_kind(kv.get_string("pooling", "avg"));
  cfg.input_channels = kv.get_uint("input_channels", 1);
  cfg.variant = parse_variant(kv.get_string("variant", "full"));
  cfg.validate();
  return cfg;
}

bool FreezePlan::is_monotone() const {
  if (stage3 == StageMode::cg && stage4 != StageMode::cg) return false;
  if (stage4 == StageMode::cg && stage5 != StageMode::cg) return false;
  return true;
}

FreezePlan freeze_flags(int epoch, const FreezeSchedule& schedule) {
  if (epoch < 1) throw std::invalid_argument("freeze_flags: epoch must be >= 1, got " + std::to_string(epoch));
  FreezePlan plan;
  plan.stage5 = StageMode::cg;
  plan.stage4 = epoch <= schedule.stage4_frozen_through ? StageMode::frozen : StageMode::cg;
  plan.stage3 = epoch <= schedule.stage3_frozen_through ? StageMode::frozen : StageMode::cg;
  return plan;
}

}  // namespace mgcrack

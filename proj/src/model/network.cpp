#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mgcrack/model.hpp"

namespace mgcrack {

namespace {

// Kaiming fan-in: N(0, gain / fan_in); gain 2 ahead of a ReLU, 1 otherwise.
ConvParams make_conv(std::mt19937_64& rng, std::size_t out, std::size_t in, std::size_t k, double gain,
                     std::size_t dilation = 1, std::size_t padding = 0) {
  ConvParams p;
  p.weight = Tensor::zeros({out, in, k, k}, true);
  p.bias = Tensor::zeros({out}, true);
  p.dilation = dilation;
  p.padding = padding;
  std::normal_distribution<double> dist(0.0, std::sqrt(gain / static_cast<double>(in * k * k)));
  for (double& w : p.weight.mutable_values()) w = dist(rng);
  return p;
}

ClassifierHead make_head(std::mt19937_64& rng, std::size_t channels) {
  ClassifierHead h;
  h.conv = make_conv(rng, channels, channels, 3, 2.0, 1, 1);
  h.hidden = make_conv(rng, channels / 2, channels, 1, 2.0);
  h.out = make_conv(rng, 1, channels / 2, 1, 1.0);
  return h;
}

}  // namespace

MGCrackNet::MGCrackNet(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  build(seed);
}

void MGCrackNet::build(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& ch = config_.channels;
  const bool full = config_.variant == Variant::full;
  const bool guided = config_.variant != Variant::pdc_only;

  auto add_conv = [this](const std::string& name, const ConvParams& p, ParamGroup g) {
    registry_.push_back({name + ".weight", p.weight, g});
    registry_.push_back({name + ".bias", p.bias, g});
  };
  auto add_head = [&](const std::string& name, const ClassifierHead& h, ParamGroup g) {
    add_conv(name + ".conv", h.conv, g);
    add_conv(name + ".hidden", h.hidden, g);
    add_conv(name + ".out", h.out, g);
  };

  std::size_t in = config_.input_channels;
  for (int i = 0; i < kNumStages; ++i) {
    const ParamGroup g = i < 3 ? ParamGroup::stage3_side : i == 3 ? ParamGroup::stage4_side : ParamGroup::stage5_side;
    const std::string prefix = "stage" + std::to_string(i + 1);
    PdcBlock& b = stages_[i];
    for (std::size_t k = 0; k < 3; ++k) {
      const std::size_t r = config_.dilation_rates[k];
      b.branches[k] = make_conv(rng, ch[i], in, 3, 2.0, r, r);
      add_conv(prefix + ".branch" + std::to_string(k), b.branches[k], g);
    }
    b.projection = make_conv(rng, ch[i], 3 * ch[i], 1, 1.0);
    add_conv(prefix + ".proj", b.projection, g);
    in = ch[i];
  }

  if (guided) {
    heat5_ = make_conv(rng, 1, ch[4], 1, 1.0);
    add_conv("heat5", *heat5_, ParamGroup::stage5_side);
    heat4_ = make_conv(rng, 1, ch[3], 1, 1.0);
    add_conv("heat4", *heat4_, ParamGroup::stage3_side);
    fuse54_ = make_conv(rng, ch[3], ch[4], 1, 1.0);
    add_conv("fuse54", *fuse54_, ParamGroup::stage4_side);
    fuse43_ = make_conv(rng, ch[2], ch[3], 1, 1.0);
    add_conv("fuse43", *fuse43_, ParamGroup::stage3_side);
    head3_ = make_head(rng, ch[2]);
    add_head("head3", *head3_, ParamGroup::stage3_side);
  }
  if (full) {
    head4_ = make_head(rng, ch[3]);
    add_head("head4", *head4_, ParamGroup::stage4_side);
  }
  if (full || !guided) {
    head5_ = make_head(rng, ch[4]);
    add_head("head5", *head5_, ParamGroup::stage5_side);
  }
}

Tensor MGCrackNet::input_check(const Tensor& image) const {
  if (!image.defined() || image.ndim() != 4)
    throw std::invalid_argument("MGCrackNet: input must be N x C x H x W");
  if (image.dim(1) != config_.input_channels)
    throw std::invalid_argument("MGCrackNet: expected " + std::to_string(config_.input_channels) +
                                " input channel(s), got " + std::to_string(image.dim(1)));
  if (image.dim(2) == 0 || image.dim(3) == 0 || image.dim(2) % kPatchSize != 0 || image.dim(3) % kPatchSize != 0)
    throw std::invalid_argument("MGCrackNet: spatial size " + std::to_string(image.dim(2)) + "x" +
                                std::to_string(image.dim(3)) + " is not a positive multiple of 32");
  return image;
}

std::vector<StageFeature> MGCrackNet::backbone(const Tensor& image) const {
  Tensor x = input_check(image);
  std::vector<StageFeature> feats;
  feats.reserve(kNumStages);
  for (int i = 0; i < kNumStages; ++i) {
    feats.push_back(stage_forward(x, i + 1, stages_[i]));
    x = feats.back().value;
  }
  return feats;
}

NetworkOutput MGCrackNet::forward(const Tensor& image, const FreezePlan& requested) const {
  const std::vector<StageFeature> feats = backbone(image);
  const Tensor& f3 = feats[2].value;
  const Tensor& f4 = feats[3].value;
  const Tensor& f5 = feats[4].value;
  NetworkOutput out;

  if (config_.variant == Variant::pdc_only) {
    out.y5 = mil_head(f5, 5, *head5_, config_.pooling);
    out.final_grid = *out.y5;
    out.supervised = {*out.y5};
    return out;
  }

  const FreezePlan plan = config_.variant == Variant::full ? requested : kAllActive;
  if (!plan.is_monotone()) throw std::invalid_argument("MGCrackNet: freeze plan re-enables a shallower stage first");

  std::optional<Heatmap> m5;
  Tensor deep5 = f5;
  if (plan.stage5 == StageMode::cg) {
    m5 = cg_heatmap(f5, 5, *heat5_);
    deep5 = self_refine(*m5, f5);
    out.heatmaps.push_back(*m5);
  }
  Tensor fused4 = f4;
  if (plan.stage4 == StageMode::cg) fused4 = fuse_add(deep5, guide_shallow(*m5, f4), *fuse54_);
  Tensor fused3 = f3;
  if (plan.stage3 == StageMode::cg) {
    Heatmap m4 = cg_heatmap(fused4, 4, *heat4_);
    out.heatmaps.push_back(m4);
    fused3 = fuse_add(self_refine(m4, fused4), guide_shallow(m4, f3), *fuse43_);
  }

  if (config_.variant == Variant::pdc_cg) {
    out.y3 = pooled_feature_head(fused3, 3, *head3_);
    out.final_grid = *out.y3;
    out.supervised = {*out.y3};
    return out;
  }

  out.y5 = mil_head(deep5, 5, *head5_, config_.pooling);
  out.y4 = mil_head(fused4, 4, *head4_, config_.pooling);
  out.y3 = mil_head(fused3, 3, *head3_, config_.pooling);
  out.final_grid = *out.y3;
  out.supervised = {*out.y3, *out.y4, *out.y5};
  return out;
}

void MGCrackNet::apply_plan(const FreezePlan& requested) {
  const FreezePlan plan = config_.variant == Variant::full ? requested : kAllActive;
  if (!plan.is_monotone()) throw std::invalid_argument("MGCrackNet: freeze plan re-enables a shallower stage first");
  for (Entry& e : registry_) {
    StageMode mode = plan.stage5;
    if (e.group == ParamGroup::stage3_side) mode = plan.stage3;
    if (e.group == ParamGroup::stage4_side) mode = plan.stage4;
    e.tensor.set_requires_grad(mode == StageMode::cg);
  }
}

std::vector<Tensor> MGCrackNet::parameters() const {
  std::vector<Tensor> out;
  for (const Entry& e : registry_) out.push_back(e.tensor);
  return out;
}

std::vector<Tensor> MGCrackNet::trainable_parameters() const {
  std::vector<Tensor> out;
  for (const Entry& e : registry_)
    if (e.tensor.requires_grad()) out.push_back(e.tensor);
  return out;
}

std::vector<Tensor> MGCrackNet::group_parameters(ParamGroup group) const {
  std::vector<Tensor> out;
  for (const Entry& e : registry_)
    if (e.group == group) out.push_back(e.tensor);
  return out;
}

std::vector<NamedTensor> MGCrackNet::named_parameters() const {
  std::vector<NamedTensor> out;
  for (const Entry& e : registry_) out.emplace_back(e.name, e.tensor);
  return out;
}

void MGCrackNet::save(const std::filesystem::path& dir) const {
  save_tensors(dir, named_parameters());
  std::ofstream cfg(dir / kModelConfigFile, std::ios::trunc);
  cfg << config_.serialize();
  if (!cfg) throw std::runtime_error("checkpoint: cannot write " + (dir / kModelConfigFile).string());
}

MGCrackNet MGCrackNet::load(const std::filesystem::path& dir, const ModelConfig* expected) {
  std::ifstream in(dir / kModelConfigFile);
  if (!in) throw std::runtime_error("checkpoint: missing " + (dir / kModelConfigFile).string());
  std::stringstream text;
  text << in.rdbuf();
  const ModelConfig cfg = ModelConfig::parse(text.str(), (dir / kModelConfigFile).string());
  if (expected && !(*expected == cfg))
    throw std::runtime_error("checkpoint: model config in " + dir.string() + " differs from the requested one");

  MGCrackNet net(cfg, 0);
  std::map<std::string, Tensor> stored;
  for (auto& [name, t] : load_tensors(dir))
    if (!stored.emplace(name, t).second) throw std::runtime_error("checkpoint: duplicate tensor '" + name + "'");
  if (stored.size() != net.registry_.size())
    throw std::runtime_error("checkpoint: holds " + std::to_string(stored.size()) + " tensors, architecture needs " +
                             std::to_string(net.registry_.size()));
  for (Entry& e : net.registry_) {
    auto it = stored.find(e.name);
    if (it == stored.end()) throw std::runtime_error("checkpoint: missing tensor '" + e.name + "'");
    if (it->second.shape() != e.tensor.shape())
      throw std::runtime_error("checkpoint: tensor '" + e.name + "' has shape " + shape_to_string(it->second.shape()) +
                               ", expected " + shape_to_string(e.tensor.shape()));
    auto dst = e.tensor.mutable_values();
    auto src = it->second.values();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return net;
}

}  // namespace mgcrack

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mgcrack/checkpoint.hpp"
#include "mgcrack/keyvalue.hpp"
#include "mgcrack/ops.hpp"

namespace mgcrack {

inline constexpr std::size_t kPatchSize = 32;
inline constexpr int kNumStages = 5;

enum class PoolKind { avg, max };

// Ablation layouts. `full` is the complete detector; `pdc_cg` keeps context
// guidance but classifies the fused stage-3 feature after pooling it to the
// patch grid (no instance-level scoring, single loss); `pdc_only` is the
// bare backbone with one patch classifier on stage 5.
enum class Variant { full, pdc_cg, pdc_only };

std::string to_string(PoolKind kind);
std::string to_string(Variant variant);
PoolKind parse_pool_kind(const std::string& text);
Variant parse_variant(const std::string& text);

struct ModelConfig {
  std::array<std::size_t, kNumStages> channels{32, 64, 128, 256, 256};
  std::array<std::size_t, 3> dilation_rates{1, 2, 5};
  PoolKind pooling = PoolKind::avg;
  std::size_t input_channels = 1;
  Variant variant = Variant::full;

  void validate() const;
  std::string serialize() const;
  static ModelConfig parse(const std::string& text, const std::string& origin = "<model config>");
  // Reads the model keys only; the caller decides about leftovers.
  static ModelConfig read(const KeyValues& kv);
  bool operator==(const ModelConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Freeze schedule

enum class StageMode { frozen, cg };

// Per-epoch mode of the three supervised stages.
struct FreezePlan {
  StageMode stage3 = StageMode::cg;
  StageMode stage4 = StageMode::cg;
  StageMode stage5 = StageMode::cg;

  bool operator==(const FreezePlan&) const = default;
  // Guidance flows 5 -> 4 -> 3, so a shallower stage can only be active
  // when every deeper one is.
  bool is_monotone() const;
};

inline constexpr FreezePlan kAllActive{};

// Epoch boundaries (inclusive) of the frozen phases.
struct FreezeSchedule {
  int stage4_frozen_through = 20;
  int stage3_frozen_through = 40;
};

// 1-based epoch. Throws std::invalid_argument for epoch < 1.
FreezePlan freeze_flags(int epoch, const FreezeSchedule& schedule = {});

// ---------------------------------------------------------------------------
// Typed feature maps

struct StageFeature {
  int stage = 0;
  Tensor value;  // N x C_i x H/2^i x W/2^i
};

struct Heatmap {
  int stage = 0;
  Tensor value;  // N x 1 x H_i x W_i, entries in [0, 1]
};

struct PredictionGrid {
  int stage = 0;
  Tensor value;  // N x 1 x H/32 x W/32
};

// ---------------------------------------------------------------------------
// Building blocks

/// Parallel dilated convolution: three 3x3 branches (one per rate, padding
/// equal to the rate so spatial size is kept), each followed by ReLU, their
/// concatenation in rate order, then a linear 1x1 projection back to C_i.
struct PdcBlock {
  std::array<ConvParams, 3> branches;
  ConvParams projection;
};

/// Patch classifier: 3x3 conv (C -> C) + ReLU, 1x1 (C -> C/2) + ReLU,
/// 1x1 (C/2 -> 1), sigmoid.
struct ClassifierHead {
  ConvParams conv;
  ConvParams hidden;
  ConvParams out;
};

Tensor pdc_forward(const Tensor& input, const PdcBlock& block);

// PDC followed by 2x2 max-pool with stride 2.
StageFeature stage_forward(const Tensor& input, int stage, const PdcBlock& block);

// 1x1 conv to a single channel followed by sigmoid.
Heatmap cg_heatmap(const Tensor& feature, int stage, const ConvParams& head);

// M broadcast over the channels of F.
Tensor self_refine(const Heatmap& heatmap, const Tensor& feature);

// up(M_i) broadcast over the channels of the stage i-1 feature.
Tensor guide_shallow(const Heatmap& heatmap, const Tensor& shallow_feature);

// up(proj(refined_deep)) + guided_shallow.
Tensor fuse_add(const Tensor& refined_deep, const Tensor& guided_shallow, const ConvParams& projection);

// Instance probabilities pooled to the patch grid; window = stride =
// {4, 2, 1} for stages {3, 4, 5}.
std::size_t mil_stride(int stage);
Tensor classifier_probabilities(const Tensor& feature, const ClassifierHead& head);
PredictionGrid mil_head(const Tensor& feature, int stage, const ClassifierHead& head, PoolKind pooling);

// Bag-level alternative: average the features down to the patch grid first,
// then classify once per patch.
PredictionGrid pooled_feature_head(const Tensor& feature, int stage, const ClassifierHead& head);

// Sum of BCE over the supplied grids against one patch label grid.
Tensor total_loss(const std::vector<PredictionGrid>& grids, const Tensor& labels);

// Entry-wise strict "> threshold".
std::vector<std::uint8_t> predict(const PredictionGrid& grid, double threshold = 0.5);

// ---------------------------------------------------------------------------
// Network

enum class ParamGroup {
  stage3_side,  // stages 1-3 backbone, stage-3 head, the 4->3 link
  stage4_side,  // stage-4 backbone and head, the 5->4 link
  stage5_side,  // stage-5 backbone, heatmap head and classifier
};

struct NetworkOutput {
  std::optional<PredictionGrid> y3, y4, y5;
  PredictionGrid final_grid;                // the reported prediction
  std::vector<PredictionGrid> supervised;   // grids entering the loss
  std::vector<Heatmap> heatmaps;            // context heatmaps that were computed
};

class MGCrackNet {
 public:
  MGCrackNet(ModelConfig config, std::uint64_t seed);
  // Parameters are shared handles, so copies would alias; moves only.
  MGCrackNet(const MGCrackNet&) = delete;
  MGCrackNet& operator=(const MGCrackNet&) = delete;
  MGCrackNet(MGCrackNet&&) = default;
  MGCrackNet& operator=(MGCrackNet&&) = default;

  const ModelConfig& config() const { return config_; }

  std::vector<StageFeature> backbone(const Tensor& image) const;
  NetworkOutput forward(const Tensor& image, const FreezePlan& plan = kAllActive) const;

  // Marks parameters of frozen groups as not requiring grad.
  void apply_plan(const FreezePlan& plan);
  std::vector<Tensor> parameters() const;
  std::vector<Tensor> trainable_parameters() const;
  std::vector<Tensor> group_parameters(ParamGroup group) const;
  std::vector<NamedTensor> named_parameters() const;

  void save(const std::filesystem::path& dir) const;
  // Rejects checkpoints whose config, tensor names or shapes disagree with
  // `expected` (when given) or with the architecture the config implies.
  static MGCrackNet load(const std::filesystem::path& dir, const ModelConfig* expected = nullptr);

 private:
  struct Entry {
    std::string name;
    Tensor tensor;
    ParamGroup group;
  };

  void build(std::uint64_t seed);
  Tensor input_check(const Tensor& image) const;

  ModelConfig config_;
  std::array<PdcBlock, kNumStages> stages_;
  std::optional<ConvParams> heat5_, heat4_, fuse54_, fuse43_;
  std::optional<ClassifierHead> head3_, head4_, head5_;
  std::vector<Entry> registry_;
};

inline constexpr const char* kModelConfigFile = "model.cfg";

}  // namespace mgcrack

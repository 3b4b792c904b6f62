#include <stdexcept>
#include <string>

#include "mgcrack/model.hpp"

namespace mgcrack {

namespace {

[[noreturn]] void reject(const std::string& op, const std::string& msg) {
  throw std::invalid_argument(op + ": " + msg);
}

void require_4d(const std::string& op, const Tensor& t) {
  if (!t.defined() || t.ndim() != 4) reject(op, "expected a 4-D tensor");
}

void require_stage(const std::string& op, int stage, int lo, int hi) {
  if (stage < lo || stage > hi)
    reject(op, "stage " + std::to_string(stage) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

}  // namespace

Tensor pdc_forward(const Tensor& input, const PdcBlock& block) {
  require_4d("pdc_forward", input);
  const std::size_t width = block.branches[0].out_channels();
  std::vector<Tensor> parts;
  parts.reserve(block.branches.size());
  for (const ConvParams& branch : block.branches) {
    if (branch.out_channels() != width) reject("pdc_forward", "branch channel counts differ");
    parts.push_back(relu(conv2d(input, branch)));
  }
  if (block.projection.in_channels() != width * block.branches.size())
    reject("pdc_forward", "projection expects " + std::to_string(block.projection.in_channels()) +
                              " channels, branches give " + std::to_string(width * block.branches.size()));
  return conv2d(concat_channels(parts), block.projection);
}

StageFeature stage_forward(const Tensor& input, int stage, const PdcBlock& block) {
  require_stage("stage_forward", stage, 1, kNumStages);
  require_4d("stage_forward", input);
  if (input.dim(2) % 2 != 0 || input.dim(3) % 2 != 0)
    reject("stage_forward", "odd spatial size " + shape_to_string(input.shape()));
  return {stage, max_pool2d(pdc_forward(input, block), 2, 2)};
}

Heatmap cg_heatmap(const Tensor& feature, int stage, const ConvParams& head) {
  require_stage("cg_heatmap", stage, 3, 5);
  if (head.out_channels() != 1) reject("cg_heatmap", "head must emit one channel");
  return {stage, sigmoid(conv2d(feature, head))};
}

Tensor self_refine(const Heatmap& heatmap, const Tensor& feature) {
  require_4d("self_refine", feature);
  const Tensor& m = heatmap.value;
  if (m.dim(2) != feature.dim(2) || m.dim(3) != feature.dim(3))
    reject("self_refine", "heatmap " + shape_to_string(m.shape()) + " vs feature " + shape_to_string(feature.shape()));
  return mul(feature, m);
}

Tensor guide_shallow(const Heatmap& heatmap, const Tensor& shallow_feature) {
  require_4d("guide_shallow", shallow_feature);
  require_stage("guide_shallow", heatmap.stage, 4, 5);
  Tensor up = upsample_bilinear(heatmap.value, 2);
  if (up.dim(2) != shallow_feature.dim(2) || up.dim(3) != shallow_feature.dim(3))
    reject("guide_shallow", "upsampled heatmap " + shape_to_string(up.shape()) + " vs feature " +
                                shape_to_string(shallow_feature.shape()));
  return mul(shallow_feature, up);
}

Tensor fuse_add(const Tensor& refined_deep, const Tensor& guided_shallow, const ConvParams& projection) {
  Tensor up = upsample_bilinear(conv2d(refined_deep, projection), 2);
  if (up.shape() != guided_shallow.shape())
    reject("fuse_add", "projected deep feature " + shape_to_string(up.shape()) + " vs shallow " +
                           shape_to_string(guided_shallow.shape()));
  return add(up, guided_shallow);
}

std::size_t mil_stride(int stage) {
  require_stage("mil_stride", stage, 3, 5);
  return std::size_t{1} << (5 - stage);
}

Tensor classifier_probabilities(const Tensor& feature, const ClassifierHead& head) {
  Tensor h = relu(conv2d(feature, head.conv));
  h = relu(conv2d(h, head.hidden));
  return sigmoid(conv2d(h, head.out));
}

PredictionGrid mil_head(const Tensor& feature, int stage, const ClassifierHead& head, PoolKind pooling) {
  const std::size_t s = mil_stride(stage);
  Tensor probs = classifier_probabilities(feature, head);
  Tensor grid = pooling == PoolKind::avg ? avg_pool2d(probs, s, s) : max_pool2d(probs, s, s);
  return {stage, grid};
}

PredictionGrid pooled_feature_head(const Tensor& feature, int stage, const ClassifierHead& head) {
  const std::size_t s = mil_stride(stage);
  return {stage, classifier_probabilities(avg_pool2d(feature, s, s), head)};
}

Tensor total_loss(const std::vector<PredictionGrid>& grids, const Tensor& labels) {
  if (grids.empty()) reject("total_loss", "no prediction grids");
  Tensor loss;
  for (const PredictionGrid& g : grids) {
    if (g.value.shape() != labels.shape())
      reject("total_loss", "grid " + shape_to_string(g.value.shape()) + " vs labels " +
                               shape_to_string(labels.shape()));
    Tensor term = bce_loss(g.value, labels);
    loss = loss.defined() ? add(loss, term) : term;
  }
  return loss;
}

std::vector<std::uint8_t> predict(const PredictionGrid& grid, double threshold) {
  std::vector<std::uint8_t> out;
  out.reserve(grid.value.numel());
  for (double p : grid.value.values()) out.push_back(p > threshold ? 1 : 0);
  return out;
}

}  // namespace mgcrack

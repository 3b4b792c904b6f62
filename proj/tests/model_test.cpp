#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "mgcrack/keyvalue.hpp"
#include "mgcrack/model.hpp"
#include "mgcrack/optim.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace mgcrack {
namespace {

using testing::check_gradients;
using testing::naive_conv2d;
using testing::random_tensor;
using testing::weighted_sum;

ConvParams random_conv(std::size_t out, std::size_t in, std::size_t k, std::size_t dilation, std::size_t pad,
                       std::mt19937_64& rng) {
  ConvParams p;
  p.weight = random_tensor({out, in, k, k}, rng);
  p.bias = random_tensor({out}, rng);
  p.dilation = dilation;
  p.padding = pad;
  return p;
}

PdcBlock random_block(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  PdcBlock b;
  const std::size_t rates[3] = {1, 2, 5};
  for (int k = 0; k < 3; ++k) b.branches[k] = random_conv(out, in, 3, rates[k], rates[k], rng);
  b.projection = random_conv(out, 3 * out, 1, 1, 0, rng);
  return b;
}

ClassifierHead random_head(std::size_t c, std::mt19937_64& rng) {
  return {random_conv(c, c, 3, 1, 1, rng), random_conv(c / 2, c, 1, 1, 0, rng), random_conv(1, c / 2, 1, 1, 0, rng)};
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.channels = {2, 2, 2, 2, 2};
  return cfg;
}

Tensor random_image(std::size_t h, std::size_t w, std::mt19937_64& rng, bool grad = false) {
  return random_tensor({1, 1, h, w}, rng, -1, 1, grad);
}

Tensor labels_for(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = coin(rng) ? 1.0 : 0.0;
  return Tensor::from({1, 1, rows, cols}, std::move(v));
}

// Zero-initialised biases put many ReLU inputs exactly on the kink, where
// finite differences see a half slope. Random biases move them off it.
MGCrackNet jittered_net(const ModelConfig& cfg, std::uint64_t seed) {
  MGCrackNet net(cfg, seed);
  std::mt19937_64 rng(seed + 1000);
  std::uniform_real_distribution<double> dist(0.05, 0.5);
  for (auto& [name, t] : net.named_parameters())
    if (name.ends_with(".bias"))
      for (double& b : t.mutable_values()) b = dist(rng);
  return net;
}

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.channels = {4, 4, 4, 4, 4};
  return cfg;
}

std::vector<double> copy_of(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

double grad_norm(const std::vector<Tensor>& params) {
  double s = 0;
  for (const Tensor& p : params)
    if (p.has_grad())
      for (double g : p.grad()) s += g * g;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------

TEST(ModelConfigTest, RoundTripAndRejects) {
  ModelConfig cfg;
  cfg.channels = {4, 8, 16, 32, 32};
  cfg.pooling = PoolKind::max;
  cfg.variant = Variant::pdc_cg;
  EXPECT_EQ(ModelConfig::parse(cfg.serialize()), cfg);
  EXPECT_THROW(ModelConfig::parse("channels = 1,2,3\n"), ConfigError);
  EXPECT_THROW(ModelConfig::parse("pooling = median\n"), ConfigError);
  EXPECT_THROW(ModelConfig::parse("depth = 3\n"), ConfigError);
  EXPECT_THROW(ModelConfig::parse("input_channels = 2\n"), ConfigError);
}

TEST(ShapeLadder, FullWidthStagesAndGrids) {
  NoGradGuard no_grad;
  MGCrackNet net(ModelConfig{}, 1);
  std::mt19937_64 rng(1);
  for (std::size_t side : {64u, 96u}) {
    const Tensor image = random_image(side, side, rng);
    const auto feats = net.backbone(image);
    const std::size_t ladder[5] = {32, 64, 128, 256, 256};
    for (int i = 0; i < 5; ++i) {
      EXPECT_EQ(feats[i].stage, i + 1);
      EXPECT_EQ(feats[i].value.shape(), (Shape{1, ladder[i], side >> (i + 1), side >> (i + 1)}));
    }
    const NetworkOutput out = net.forward(image);
    for (const auto& g : {*out.y3, *out.y4, *out.y5}) {
      EXPECT_EQ(g.value.shape(), (Shape{1, 1, side / 32, side / 32}));
      for (double p : g.value.values()) {
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
      }
    }
    EXPECT_EQ(out.final_grid.stage, 3);
  }
}

TEST(ShapeLadder, RejectsNonMultipleOf32) {
  NoGradGuard no_grad;
  MGCrackNet net(tiny_config(), 1);
  EXPECT_THROW(net.forward(Tensor::zeros({1, 1, 48, 64})), std::invalid_argument);
  EXPECT_THROW(net.forward(Tensor::zeros({1, 3, 64, 64})), std::invalid_argument);
}

TEST(Pdc, MatchesPerBranchOracle) {
  std::mt19937_64 rng(3);
  const PdcBlock block = random_block(2, 3, rng);
  const Tensor x = random_tensor({2, 2, 11, 9}, rng);
  const Tensor got = pdc_forward(x, block);
  ASSERT_EQ(got.shape(), (Shape{2, 3, 11, 9}));

  // relu(branch_k) concatenated in rate order, then 1x1 projection by hand.
  std::vector<std::vector<double>> branch;
  for (const auto& b : block.branches) {
    auto v = naive_conv2d(x, b);
    for (double& e : v) e = std::max(e, 0.0);
    branch.push_back(v);
  }
  const std::size_t plane = 11 * 9;
  const auto w = block.projection.weight.values();
  const auto bias = block.projection.bias.values();
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 3; ++o)
      for (std::size_t i = 0; i < plane; ++i) {
        double acc = 0;
        for (std::size_t k = 0; k < 3; ++k)
          for (std::size_t c = 0; c < 3; ++c) acc += w[o * 9 + k * 3 + c] * branch[k][(n * 3 + c) * plane + i];
        EXPECT_NEAR(got.values()[(n * 3 + o) * plane + i], acc + bias[o], 1e-12);
      }
}

TEST(Pdc, ZeroInputGivesProjectionBias) {
  std::mt19937_64 rng(4);
  PdcBlock block = random_block(2, 4, rng);
  for (auto& b : block.branches) b.bias = Tensor::zeros({4});
  const Tensor out = pdc_forward(Tensor::zeros({1, 2, 6, 6}), block);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 36; ++i) EXPECT_EQ(out.values()[c * 36 + i], block.projection.bias.values()[c]);
}

TEST(Pdc, RejectsMismatchedBranches) {
  std::mt19937_64 rng(5);
  PdcBlock block = random_block(2, 4, rng);
  block.branches[1] = random_conv(3, 2, 3, 2, 2, rng);
  EXPECT_THROW(pdc_forward(Tensor::zeros({1, 2, 6, 6}), block), std::invalid_argument);
}

TEST(Stage, HalvesAndRejectsOdd) {
  std::mt19937_64 rng(6);
  const PdcBlock block = random_block(1, 4, rng);
  const StageFeature f = stage_forward(Tensor::zeros({1, 1, 8, 6}), 2, block);
  EXPECT_EQ(f.stage, 2);
  EXPECT_EQ(f.value.shape(), (Shape{1, 4, 4, 3}));
  EXPECT_THROW(stage_forward(Tensor::zeros({1, 1, 7, 6}), 2, block), std::invalid_argument);
  EXPECT_THROW(stage_forward(Tensor::zeros({1, 1, 8, 6}), 6, block), std::invalid_argument);
}

TEST(Heatmap, ZeroGivesHalfAndKeepsSize) {
  ConvParams head{Tensor::zeros({1, 4, 1, 1}), Tensor::zeros({1})};
  const Heatmap m = cg_heatmap(Tensor::zeros({1, 4, 5, 7}), 5, head);
  EXPECT_EQ(m.value.shape(), (Shape{1, 1, 5, 7}));
  for (double v : m.value.values()) EXPECT_EQ(v, 0.5);

  std::mt19937_64 rng(7);
  const Heatmap r = cg_heatmap(random_tensor({1, 4, 5, 7}, rng, -3, 3), 4, random_conv(1, 4, 1, 1, 0, rng));
  for (double v : r.value.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(CgOps, SelfRefineExamples) {
  std::mt19937_64 rng(8);
  const Tensor f = random_tensor({2, 3, 4, 5}, rng);
  const Tensor ones = Tensor::full({2, 1, 4, 5}, 1.0);
  const Tensor zeros = Tensor::zeros({2, 1, 4, 5});
  EXPECT_EQ(self_refine({5, ones}, f).values()[17], f.values()[17]);
  const Tensor blanked = self_refine({5, zeros}, f);
  for (double v : blanked.values()) EXPECT_EQ(v, 0.0);

  const Tensor m = random_tensor({2, 1, 4, 5}, rng, 0, 1);
  const Tensor out = self_refine({5, m}, f);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 20; ++i)
        EXPECT_EQ(out.values()[(n * 3 + c) * 20 + i], m.values()[n * 20 + i] * f.values()[(n * 3 + c) * 20 + i]);
  EXPECT_THROW(self_refine({5, Tensor::zeros({2, 1, 4, 4})}, f), std::invalid_argument);
}

TEST(CgOps, GuideShallowExamples) {
  std::mt19937_64 rng(9);
  const Tensor f = random_tensor({1, 3, 8, 6}, rng);
  const Tensor out = guide_shallow({5, Tensor::full({1, 1, 4, 3}, 0.3)}, f);
  for (std::size_t i = 0; i < f.numel(); ++i) EXPECT_NEAR(out.values()[i], 0.3 * f.values()[i], 1e-15);

  const Tensor m = random_tensor({1, 1, 4, 3}, rng, 0, 1);
  const Tensor up = upsample_bilinear(m, 2);
  for (double v : up.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  const Tensor expect = mul(f, up);
  const Tensor got = guide_shallow({4, m}, f);
  for (std::size_t i = 0; i < f.numel(); ++i) EXPECT_EQ(got.values()[i], expect.values()[i]);

  EXPECT_THROW(guide_shallow({5, m}, random_tensor({1, 3, 8, 8}, rng)), std::invalid_argument);
  EXPECT_THROW(guide_shallow({3, m}, f), std::invalid_argument);
}

TEST(CgOps, FuseAddExamples) {
  std::mt19937_64 rng(10);
  const ConvParams proj = random_conv(2, 4, 1, 1, 0, rng);
  const Tensor deep = random_tensor({1, 4, 3, 3}, rng);
  const Tensor up = upsample_bilinear(conv2d(deep, proj), 2);

  const Tensor a = fuse_add(deep, Tensor::zeros({1, 2, 6, 6}), proj);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a.values()[i], up.values()[i]);

  ConvParams zero_bias = proj;
  zero_bias.bias = Tensor::zeros({2});
  const Tensor shallow = random_tensor({1, 2, 6, 6}, rng);
  const Tensor b = fuse_add(Tensor::zeros({1, 4, 3, 3}), shallow, zero_bias);
  for (std::size_t i = 0; i < b.numel(); ++i) EXPECT_EQ(b.values()[i], shallow.values()[i]);

  EXPECT_THROW(fuse_add(deep, Tensor::zeros({1, 3, 6, 6}), proj), std::invalid_argument);
}

TEST(CgOps, ProjectionPresentForEveryLink) {
  MGCrackNet net(ModelConfig{}, 1);
  bool saw54 = false, saw43 = false;
  for (const auto& [name, t] : net.named_parameters()) {
    if (name == "fuse54.weight") {
      saw54 = true;
      EXPECT_EQ(t.shape(), (Shape{256, 256, 1, 1}));
    }
    if (name == "fuse43.weight") {
      saw43 = true;
      EXPECT_EQ(t.shape(), (Shape{128, 256, 1, 1}));
    }
  }
  EXPECT_TRUE(saw54 && saw43);
}

TEST(Mil, StridesAndGridSize) {
  EXPECT_EQ(mil_stride(3), 4u);
  EXPECT_EQ(mil_stride(4), 2u);
  EXPECT_EQ(mil_stride(5), 1u);
  EXPECT_THROW(mil_stride(2), std::invalid_argument);

  std::mt19937_64 rng(11);
  const ClassifierHead head = random_head(4, rng);
  const Tensor f3 = random_tensor({1, 4, 32, 32}, rng);
  EXPECT_EQ(mil_head(f3, 3, head, PoolKind::avg).value.shape(), (Shape{1, 1, 8, 8}));
  EXPECT_EQ(mil_head(random_tensor({1, 4, 16, 16}, rng), 4, head, PoolKind::max).value.shape(),
            (Shape{1, 1, 8, 8}));
  EXPECT_THROW(mil_head(f3, 6, head, PoolKind::avg), std::invalid_argument);
}

TEST(Mil, ConstantProbabilityPoolsToItself) {
  std::mt19937_64 rng(12);
  ClassifierHead head = random_head(4, rng);
  head.out.weight = Tensor::zeros({1, 2, 1, 1});
  const double p = 0.73;
  head.out.bias = Tensor::full({1}, std::log(p / (1 - p)));
  for (PoolKind kind : {PoolKind::avg, PoolKind::max}) {
    const PredictionGrid g = mil_head(random_tensor({1, 4, 16, 16}, rng), 3, head, kind);
    for (double v : g.value.values()) EXPECT_NEAR(v, p, 1e-14);
  }
}

TEST(Mil, AvgPoolIsWindowMean) {
  std::mt19937_64 rng(13);
  const ClassifierHead head = random_head(4, rng);
  const Tensor f = random_tensor({1, 4, 8, 8}, rng);
  const Tensor probs = classifier_probabilities(f, head);
  const Tensor grid = mil_head(f, 3, head, PoolKind::avg).value;
  for (std::size_t gy = 0; gy < 2; ++gy)
    for (std::size_t gx = 0; gx < 2; ++gx) {
      double s = 0;
      for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) s += probs.values()[(gy * 4 + y) * 8 + gx * 4 + x];
      EXPECT_NEAR(grid.values()[gy * 2 + gx], s / 16, 1e-15);
    }
}

TEST(Loss, IdenticalGridsTriple) {
  std::mt19937_64 rng(14);
  const Tensor p = random_tensor({1, 1, 4, 4}, rng, 0.05, 0.95, false);
  const Tensor y = labels_for(4, 4, rng);
  const double single = bce_loss(p, y).item();
  EXPECT_NEAR(total_loss({{3, p}, {4, p}, {5, p}}, y).item(), 3 * single, 1e-14);
  EXPECT_THROW(total_loss({{3, p}, {4, Tensor::zeros({1, 1, 2, 2})}}, y), std::invalid_argument);
}

TEST(Loss, PerfectPredictionsHitClampFloor) {
  const Tensor y = Tensor::from({1, 1, 1, 2}, {1.0, 0.0});
  const double floor = -std::log(1 - kProbabilityClamp);
  EXPECT_NEAR(total_loss({{3, y}, {4, y}, {5, y}}, y).item(), 3 * floor, 1e-15);
}

TEST(Loss, GradientReachesEveryHead) {
  std::mt19937_64 rng(15);
  MGCrackNet net = jittered_net(small_config(), 15);
  const Tensor image = random_image(64, 64, rng);
  const NetworkOutput out = net.forward(image);
  total_loss(out.supervised, labels_for(2, 2, rng)).backward();
  for (const auto& prefix : {"head3.", "head4.", "head5."}) {
    std::vector<Tensor> head;
    for (const auto& [name, t] : net.named_parameters())
      if (name.rfind(prefix, 0) == 0) head.push_back(t);
    EXPECT_GT(grad_norm(head), 0.0) << prefix;
  }
}

TEST(Freeze, ScheduleExamples) {
  const FreezePlan p10 = freeze_flags(10), p30 = freeze_flags(30), p50 = freeze_flags(50);
  EXPECT_EQ(p10, (FreezePlan{StageMode::frozen, StageMode::frozen, StageMode::cg}));
  EXPECT_EQ(p30, (FreezePlan{StageMode::frozen, StageMode::cg, StageMode::cg}));
  EXPECT_EQ(p50, (FreezePlan{StageMode::cg, StageMode::cg, StageMode::cg}));
  EXPECT_EQ(freeze_flags(20).stage4, StageMode::frozen);
  EXPECT_EQ(freeze_flags(21).stage4, StageMode::cg);
  EXPECT_EQ(freeze_flags(40).stage3, StageMode::frozen);
  EXPECT_EQ(freeze_flags(41).stage3, StageMode::cg);
  EXPECT_THROW(freeze_flags(0), std::invalid_argument);
}

TEST(Freeze, UnfreezingIsMonotone) {
  FreezePlan prev = freeze_flags(1);
  for (int t = 1; t <= 200; ++t) {
    const FreezePlan p = freeze_flags(t);
    EXPECT_TRUE(p.is_monotone());
    if (prev.stage3 == StageMode::cg) {
      EXPECT_EQ(p.stage3, StageMode::cg);
    }
    if (prev.stage4 == StageMode::cg) {
      EXPECT_EQ(p.stage4, StageMode::cg);
    }
    prev = p;
  }
  EXPECT_FALSE((FreezePlan{StageMode::cg, StageMode::frozen, StageMode::cg}.is_monotone()));
}

TEST(Predict, StrictThreshold) {
  const PredictionGrid g{3, Tensor::from({1, 1, 1, 3}, {0.51, 0.5, 0.49})};
  EXPECT_EQ(predict(g), (std::vector<std::uint8_t>{1, 0, 0}));
}

TEST(Predict, ZeroNetIsAllNegative) {
  NoGradGuard no_grad;
  MGCrackNet net(tiny_config(), 2);
  for (const Tensor& p : net.parameters()) std::fill(p.impl()->values.begin(), p.impl()->values.end(), 0.0);
  const NetworkOutput out = net.forward(Tensor::zeros({1, 1, 64, 64}));
  for (double v : out.final_grid.value.values()) EXPECT_EQ(v, 0.5);
  for (auto b : predict(out.final_grid)) EXPECT_EQ(b, 0);
}

TEST(Properties, GatingMonotonicity) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor f = random_tensor({1, 3, 5, 5}, rng, -4, 4);
    const Tensor m = random_tensor({1, 1, 5, 5}, rng, 0, 1);
    const Tensor gated = self_refine({5, m}, f);
    Tensor shrunk = m.clone();
    std::uniform_int_distribution<std::size_t> pick(0, 24);
    const std::size_t at = pick(rng);
    shrunk.mutable_values()[at] *= 0.5;
    const Tensor gated2 = self_refine({5, shrunk}, f);
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t i = c * 25 + at;
      EXPECT_NEAR(std::abs(gated.values()[i]), m.values()[at] * std::abs(f.values()[i]), 1e-15);
      EXPECT_LE(std::abs(gated2.values()[i]), std::abs(gated.values()[i]));
    }
  }
}

TEST(Properties, FrozenStageGetsExactlyZeroGradient) {
  std::mt19937_64 rng(17);
  MGCrackNet net = jittered_net(small_config(), 17);
  const Tensor image = random_image(64, 64, rng);
  const Tensor labels = labels_for(2, 2, rng);

  const FreezePlan early = freeze_flags(10);
  net.apply_plan(early);
  total_loss(net.forward(image, early).supervised, labels).backward();
  for (const Tensor& p : net.group_parameters(ParamGroup::stage3_side)) EXPECT_FALSE(p.has_grad());
  for (const Tensor& p : net.group_parameters(ParamGroup::stage4_side)) EXPECT_FALSE(p.has_grad());
  std::vector<Tensor> heat5;
  for (const auto& [name, t] : net.named_parameters())
    if (name.rfind("heat5.", 0) == 0) heat5.push_back(t);
  EXPECT_GT(grad_norm(heat5), 0.0);

  zero_grads(net.parameters());
  const FreezePlan mid = freeze_flags(30);
  net.apply_plan(mid);
  total_loss(net.forward(image, mid).supervised, labels).backward();
  for (const Tensor& p : net.group_parameters(ParamGroup::stage3_side))
    for (double g : p.grad()) EXPECT_EQ(g, 0.0);
  EXPECT_GT(grad_norm(net.group_parameters(ParamGroup::stage4_side)), 0.0);
  EXPECT_GT(grad_norm(heat5), 0.0);
}

TEST(Properties, FrozenParametersUnchangedBySgd) {
  std::mt19937_64 rng(18);
  MGCrackNet net(tiny_config(), 18);
  const FreezePlan plan = freeze_flags(5);
  net.apply_plan(plan);
  std::vector<std::vector<double>> before;
  for (const Tensor& p : net.group_parameters(ParamGroup::stage3_side)) before.push_back(copy_of(p));
  OptimState opt;
  for (int step = 0; step < 3; ++step) {
    const auto params = net.parameters();
    zero_grads(params);
    total_loss(net.forward(random_image(64, 64, rng), plan).supervised, labels_for(2, 2, rng)).backward();
    sgd_step(params, opt);
  }
  const auto after = net.group_parameters(ParamGroup::stage3_side);
  for (std::size_t i = 0; i < after.size(); ++i) EXPECT_EQ(copy_of(after[i]), before[i]);
}

// Gradient of the gated feature w.r.t. a parameter shared by both factors
// equals the sum of the two single-path gradients.
TEST(Properties, GatedGradientSplitsIntoTwoPaths) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 5; ++trial) {
    const PdcBlock block = random_block(1, 3, rng);
    const ConvParams head = random_conv(1, 3, 1, 1, 0, rng);
    const Tensor x = random_tensor({1, 1, 8, 8}, rng, -1, 1, false);
    const Tensor w = random_tensor({1, 3, 4, 4}, rng, -1, 1, false);
    const Tensor& shared = block.branches[1].weight;

    auto grad_of = [&](int path) {
      zero_grads(std::vector<Tensor>{shared});
      const Tensor f = stage_forward(x, 1, block).value;
      Tensor gated;
      if (path == 0) gated = self_refine(cg_heatmap(f, 5, head), f);
      if (path == 1) gated = self_refine(cg_heatmap(f, 5, head), f.detach());
      if (path == 2) gated = self_refine({5, cg_heatmap(f, 5, head).value.detach()}, f);
      weighted_sum(gated, w).backward();
      return shared.grad();
    };
    const auto full = grad_of(0), via_heatmap = grad_of(1), via_feature = grad_of(2);
    for (std::size_t i = 0; i < full.size(); ++i) EXPECT_NEAR(full[i], via_heatmap[i] + via_feature[i], 1e-10);
  }
}

TEST(Properties, ComposedGraphGradientCheck) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    MGCrackNet net = jittered_net(tiny_config(), seed);
    std::mt19937_64 rng(seed);
    const Tensor image = random_image(32, 32, rng);
    const Tensor labels = labels_for(1, 1, rng);
    const auto r = check_gradients([&] { return total_loss(net.forward(image).supervised, labels); },
                                   net.parameters());
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed << ": " << r.worst;
  }
}

TEST(Properties, SameSeedSameParameters) {
  MGCrackNet a(tiny_config(), 42), b(tiny_config(), 42), c(tiny_config(), 43);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(copy_of(pa[i]), copy_of(pb[i]));
    any_diff |= copy_of(pa[i]) != copy_of(pc[i]);
  }
  EXPECT_TRUE(any_diff);
}

TEST(Variants, OutputsAndParameters) {
  NoGradGuard no_grad;
  std::mt19937_64 rng(20);
  const Tensor image = random_image(64, 64, rng);
  ModelConfig cfg = tiny_config();

  cfg.variant = Variant::pdc_cg;
  MGCrackNet cg(cfg, 1);
  const NetworkOutput a = cg.forward(image, freeze_flags(1));
  EXPECT_TRUE(a.y3 && !a.y4 && !a.y5);
  EXPECT_EQ(a.supervised.size(), 1u);
  EXPECT_EQ(a.heatmaps.size(), 2u);
  EXPECT_EQ(a.final_grid.value.shape(), (Shape{1, 1, 2, 2}));

  cfg.variant = Variant::pdc_only;
  MGCrackNet bare(cfg, 1);
  const NetworkOutput b = bare.forward(image);
  EXPECT_TRUE(!b.y3 && !b.y4 && b.y5);
  EXPECT_TRUE(b.heatmaps.empty());
  EXPECT_EQ(b.final_grid.value.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_LT(bare.parameters().size(), cg.parameters().size());
}

TEST(Checkpoint, RoundTripAndMismatch) {
  const auto dir = std::filesystem::temp_directory_path() / "mgcrack_model_ckpt";
  std::filesystem::remove_all(dir);
  MGCrackNet net(tiny_config(), 21);
  net.save(dir);
  const MGCrackNet back = MGCrackNet::load(dir);
  EXPECT_EQ(back.config(), net.config());
  const auto p = net.parameters(), q = back.parameters();
  ASSERT_EQ(p.size(), q.size());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(copy_of(p[i]), copy_of(q[i]));

  ModelConfig other = tiny_config();
  other.pooling = PoolKind::max;
  EXPECT_THROW(MGCrackNet::load(dir, &other), std::runtime_error);

  // Tensors from a wider net under this net's config.
  MGCrackNet wide(ModelConfig{.channels = {4, 4, 4, 4, 4}}, 1);
  save_tensors(dir, wide.named_parameters());
  EXPECT_THROW(MGCrackNet::load(dir), std::runtime_error);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace mgcrack

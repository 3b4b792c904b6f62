#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "mgcrack/harness.hpp"
#include "mgcrack/optim.hpp"

namespace mgcrack {

namespace {

constexpr double kMean = 0.5;
constexpr double kScale = 0.2;

void check_split(const std::vector<LabeledSample>& split, const std::string& name, const TrainConfig& cfg) {
  if (split.empty()) throw DataError("dataset split '" + name + "' is empty");
  const Image& first = split.front().image;
  for (const LabeledSample& s : split) {
    if (s.image.height != first.height || s.image.width != first.width || s.image.channels != first.channels)
      throw DataError("dataset split '" + name + "' mixes image shapes");
    if (s.labels.patch_size != kPatchSize || s.labels.rows * kPatchSize != s.image.height ||
        s.labels.cols * kPatchSize != s.image.width)
      throw DataError("dataset split '" + name + "': label grid does not tile the image in 32 px patches");
  }
  if (first.height % kPatchSize != 0 || first.width % kPatchSize != 0)
    throw DataError("dataset split '" + name + "': image sides must be multiples of 32");
  if (first.channels != cfg.model.input_channels)
    throw ConfigError("model expects " + std::to_string(cfg.model.input_channels) + " input channels, dataset has " +
                      std::to_string(first.channels));
}

void check_augmentation(const TrainConfig& cfg, const Image& shape) {
  if (!cfg.augment) return;
  if (cfg.augment_crop > std::min(shape.height, shape.width))
    throw ConfigError("augment_crop " + std::to_string(cfg.augment_crop) + " exceeds the image size");
  if (cfg.augment_crop == 0 && shape.height != shape.width)
    throw ConfigError("dihedral augmentation of non-square images needs a square augment_crop");
}

std::string format_cell(double v) { return std::isnan(v) ? "nan" : format_number(v); }

}  // namespace

Tensor to_batch(const std::vector<const Image*>& images) {
  if (images.empty()) throw std::invalid_argument("to_batch: no images");
  const Image& f = *images.front();
  std::vector<double> values;
  values.reserve(images.size() * f.pixels.size());
  for (const Image* im : images) {
    if (im->channels != f.channels || im->height != f.height || im->width != f.width)
      throw std::invalid_argument("to_batch: images differ in shape");
    for (double p : im->pixels) values.push_back((p - kMean) / kScale);
  }
  return Tensor::from({images.size(), f.channels, f.height, f.width}, std::move(values));
}

Tensor label_batch(const std::vector<const PatchLabelGrid*>& grids) {
  if (grids.empty()) throw std::invalid_argument("label_batch: no grids");
  const PatchLabelGrid& f = *grids.front();
  std::vector<double> values;
  values.reserve(grids.size() * f.cells.size());
  for (const PatchLabelGrid* g : grids) {
    if (g->rows != f.rows || g->cols != f.cols) throw std::invalid_argument("label_batch: grids differ in shape");
    for (std::uint8_t c : g->cells) values.push_back(c);
  }
  return Tensor::from({grids.size(), 1, f.rows, f.cols}, std::move(values));
}

std::string format_log_header() { return "epoch,lr,loss,ap3,ap4,ap5"; }

std::string format_log_row(const EpochRecord& r) {
  auto ap = [&](const char* key) {
    auto it = r.ap.find(key);
    return it == r.ap.end() ? std::string("nan") : format_cell(it->second);
  };
  return std::to_string(r.epoch) + "," + format_number(r.lr) + "," + format_number(r.loss) + "," + ap("ap3") + "," +
         ap("ap4") + "," + ap("ap5");
}

TrainResult train(const TrainConfig& cfg, const EpochHook& hook) {
  cfg.validate();
  if (cfg.dataset.empty()) throw ConfigError("train config: dataset path is not set");
  if (cfg.output.empty()) throw ConfigError("train config: output path is not set");

  const std::vector<LabeledSample> train_set = load_split(cfg.dataset, "train");
  const std::vector<LabeledSample> test_set = load_split(cfg.dataset, "test");
  check_split(train_set, "train", cfg);
  check_split(test_set, "test", cfg);
  check_augmentation(cfg, train_set.front().image);
  std::size_t test_positives = 0;
  for (const LabeledSample& s : test_set) test_positives += s.labels.positives();
  if (test_positives == 0) throw DataError("test split has no crack patches; AP-based selection is undefined");

  std::error_code ec;
  std::filesystem::create_directories(cfg.output, ec);
  if (ec) throw ConfigError("cannot create output directory " + cfg.output.string() + ": " + ec.message());
  {
    std::ofstream f(cfg.output / kTrainConfigFile);
    if (!f) throw ConfigError("cannot write to output directory " + cfg.output.string());
    f << cfg.serialize();
  }
  std::ofstream log(cfg.output / kTrainLogFile);
  log << format_log_header() << '\n';

  MGCrackNet net(cfg.model, cfg.seed);
  OptimState opt{cfg.lr, cfg.momentum, cfg.weight_decay, {}};
  std::mt19937_64 shuffle_rng(sample_seed(cfg.seed, 0x5eed));
  const AugmentConfig aug{true, cfg.augment_crop};
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = learning_rate(cfg, epoch);
    rec.plan = plan_for_epoch(cfg, epoch);
    net.apply_plan(rec.plan);
    opt.lr = rec.lr;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const std::uint64_t epoch_seed = sample_seed(cfg.seed, static_cast<std::size_t>(epoch));

    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<LabeledSample> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const LabeledSample& s = train_set[order[i]];
        batch.push_back(cfg.augment ? augment(s, sample_seed(epoch_seed, order[i]), aug) : s);
      }
      std::vector<const Image*> images;
      std::vector<const PatchLabelGrid*> grids;
      for (const LabeledSample& s : batch) {
        images.push_back(&s.image);
        grids.push_back(&s.labels);
      }
      const NetworkOutput out = net.forward(to_batch(images), rec.plan);
      const Tensor loss = total_loss(out.supervised, label_batch(grids));
      const double value = loss.item();
      if (!std::isfinite(value))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
      zero_grads(net.parameters());
      loss.backward();
      sgd_step(net.trainable_parameters(), opt);
      loss_sum += value * static_cast<double>(batch.size());
    }
    rec.loss = loss_sum / static_cast<double>(train_set.size());

    const GridScores scores = score_samples(net, test_set, cfg.batch_size);
    for (const char* g : {"y3", "y4", "y5"})
      if (auto it = scores.find(g); it != scores.end())
        rec.ap[std::string("ap") + g[1]] = average_precision(it->second);
    rec.selection_ap = average_precision(scores.at("final"));

    log << format_log_row(rec) << '\n' << std::flush;
    if (result.history.empty() || rec.selection_ap > result.best_ap) {
      result.best_ap = rec.selection_ap;
      result.best_epoch = epoch;
      net.save(cfg.output / kBestDir);
    }
    result.history.push_back(rec);
    if (hook) hook(rec, net);
  }
  zero_grads(net.parameters());
  net.save(cfg.output / kLastDir);
  return result;
}

}  // namespace mgcrack

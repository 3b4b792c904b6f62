#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mgcrack/data.hpp"
#include "mgcrack/keyvalue.hpp"
#include "mgcrack/metrics.hpp"
#include "mgcrack/model.hpp"

namespace mgcrack {

// ---------------------------------------------------------------------------
// Training configuration

struct TrainConfig {
  std::filesystem::path dataset;
  std::filesystem::path output;
  int epochs = 60;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double lr_decay = 0.1;
  int lr_decay_start = 40;  // last epoch at the initial rate
  int lr_decay_every = 20;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool freeze_training = true;
  FreezeSchedule freeze;
  std::uint64_t seed = 7;
  bool augment = true;
  std::size_t augment_crop = 0;
  ModelConfig model;

  // Throws ConfigError.
  void validate() const;
  std::string serialize() const;
  static TrainConfig parse(const std::string& text, const std::string& origin = "<train config>");
  static TrainConfig load(const std::filesystem::path& path);
  // Applies one "key=value" override with the same rules as the file. Field
  // checks wait for validate() so overrides can be applied in any order.
  void set(const std::string& key, const std::string& value);
};

// Rate in effect during a 1-based epoch.
double learning_rate(const TrainConfig& cfg, int epoch);

FreezePlan plan_for_epoch(const TrainConfig& cfg, int epoch);

// (pixel - 0.5) / 0.2, stacked N x C x H x W. All images must agree in shape.
Tensor to_batch(const std::vector<const Image*>& images);
// N x 1 x rows x cols of 0/1.
Tensor label_batch(const std::vector<const PatchLabelGrid*>& grids);

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
  int epoch = 0;
  double lr = 0;
  double loss = 0;  // sample-weighted mean of the summed supervised BCE
  FreezePlan plan;
  std::map<std::string, double> ap;  // "ap3", "ap4", "ap5" when present
  double selection_ap = 0;          // AP of the final grid on the test split
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_ap = 0;
};

// Called after each epoch with the updated model.
using EpochHook = std::function<void(const EpochRecord&, const MGCrackNet&)>;

inline constexpr const char* kTrainLogFile = "train_log.csv";
inline constexpr const char* kTrainConfigFile = "train.cfg";
inline constexpr const char* kBestDir = "best";
inline constexpr const char* kLastDir = "last";

// Validates config and dataset before the first epoch, then trains and
// writes <output>/train.cfg, train_log.csv, best/ and last/.
TrainResult train(const TrainConfig& cfg, const EpochHook& hook = {});

std::string format_log_header();
std::string format_log_row(const EpochRecord& record);

// ---------------------------------------------------------------------------
// Evaluation

// Scored patches per output grid, keyed "y3", "y4", "y5", "final".
using GridScores = std::map<std::string, ScoredPatches>;

GridScores score_samples(const MGCrackNet& net, const std::vector<LabeledSample>& samples,
                         std::size_t batch_size = 16);

// P/R/F1 at 0.5 and AP per grid; "<grid>.ap" is "nan" for a split without
// positives.
MetricsReport build_report(const GridScores& scores);

struct EvalResult {
  GridScores scores;
  MetricsReport report;
};

EvalResult evaluate(const MGCrackNet& net, const std::vector<LabeledSample>& samples, std::size_t batch_size = 16);

// metrics.txt plus pr_<grid>.csv / .svg for grids with positives.
void write_eval(const std::filesystem::path& dir, const EvalResult& result);

// ---------------------------------------------------------------------------
// Inference

// Mirror padding at the bottom and right edge up to a multiple of `multiple`;
// the edge row/column itself is not repeated.
Image reflect_pad(const Image& image, std::size_t multiple = kPatchSize);

struct Inference {
  std::size_t source_height = 0, source_width = 0;
  Image padded;
  std::size_t rows = 0, cols = 0;
  std::vector<double> probabilities;  // row-major final grid
  std::vector<std::uint8_t> binary;   // strict > 0.5
};

Inference infer(const MGCrackNet& net, const Image& image);

// grid.txt, grid_binary.txt, overlay.ppm, metadata.txt.
void write_inference(const std::filesystem::path& dir, const Inference& result);

}  // namespace mgcrack

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mgcrack {

inline constexpr std::size_t kDefaultPatch = 32;

// Channel-major intensities in [0, 1].
struct Image {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  static Image blank(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0);
  double& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const { return pixels[(c * height + y) * width + x]; }
  bool operator==(const Image&) const = default;
};

// Binary crack mask, row-major.
struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;

  static Mask blank(std::size_t height, std::size_t width);
  std::uint8_t& at(std::size_t y, std::size_t x) { return bits[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return bits[y * width + x]; }
  bool operator==(const Mask&) const = default;
};

// One 0/1 label per patch_size x patch_size patch, row-major.
struct PatchLabelGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t patch_size = kDefaultPatch;
  std::vector<std::uint8_t> cells;

  std::uint8_t at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
  std::size_t positives() const;
  bool operator==(const PatchLabelGrid&) const = default;
};

struct LabeledSample {
  Image image;
  Mask mask;
  PatchLabelGrid labels;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Generator

struct GenConfig {
  std::size_t height = 128;
  std::size_t width = 128;
  std::size_t channels = 1;
  double crack_probability = 0.6;   // chance that an image carries any crack
  std::size_t curves_min = 1;
  std::size_t curves_max = 3;
  double thickness = 2.0;           // stroke diameter, px
  double contrast = 0.25;           // darkening of crack pixels
  double gap_rate = 0.02;           // per-step chance of starting a gap
  double speckle_density = 0.001;   // crack-like distractor strokes per pixel
  double target_ratio = 16.0;       // background : crack patches
  double label_flip_rate = 0.0;     // synthetic label noise
  std::size_t min_pixels = 1;
  std::size_t train_count = 64;
  std::size_t test_count = 16;
  std::uint64_t seed = 7;

  void validate() const;
  std::string serialize() const;
  static GenConfig parse(const std::string& text, const std::string& origin = "<gen config>");
  static GenConfig load(const std::filesystem::path& path);
};

LabeledSample generate(std::uint64_t seed, const GenConfig& cfg);

// Seed of the index-th image of a dataset built from `base`.
std::uint64_t sample_seed(std::uint64_t base, std::size_t index);

// ---------------------------------------------------------------------------
// Geometry

PatchLabelGrid pixel_to_patch(const Mask& mask, std::size_t patch = kDefaultPatch, std::size_t min_pixels = 1);

// Element d of the dihedral group of the square: rotate (d & 3) quarter
// turns counter-clockwise, then mirror columns if d & 4.
inline constexpr int kDihedralCount = 8;

// Output is height x width when d is even, width x height when odd.
template <typename T>
std::vector<T> dihedral_plane(const std::vector<T>& plane, std::size_t height, std::size_t width, int d) {
  if (d < 0 || d >= kDihedralCount) throw std::invalid_argument("dihedral: element must be in [0, 8)");
  std::vector<T> cur = plane, next(plane.size());
  std::size_t h = height, w = width;
  for (int turn = 0; turn < (d & 3); ++turn) {
    // One quarter turn counter-clockwise: (y, x) -> (w - 1 - x, y).
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) next[(w - 1 - x) * h + y] = cur[y * w + x];
    std::swap(cur, next);
    std::swap(h, w);
  }
  if (d & 4)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w / 2; ++x) std::swap(cur[y * w + x], cur[y * w + w - 1 - x]);
  return cur;
}

Image transform(const Image& image, int d);
Mask transform(const Mask& mask, int d);
PatchLabelGrid transform(const PatchLabelGrid& grid, int d);
LabeledSample transform(const LabeledSample& sample, int d);

// Patch-aligned crop; the label grid is cut from the existing one.
LabeledSample crop(const LabeledSample& sample, std::size_t top, std::size_t left, std::size_t height,
                   std::size_t width);

// floor((extent - window) / stride) + 1 positions per axis, starting at 0.
std::size_t window_count(std::size_t extent, std::size_t window, std::size_t stride);

// Square crops; labels recomputed from each cropped mask.
std::vector<LabeledSample> sliding_window(const LabeledSample& sample, std::size_t window, std::size_t stride,
                                          std::size_t min_pixels = 1);

struct AugmentConfig {
  bool dihedral = true;
  std::size_t crop = 0;  // square crop side; 0 keeps the full image
};

LabeledSample augment(const LabeledSample& sample, std::uint64_t seed, const AugmentConfig& cfg = {});

// ---------------------------------------------------------------------------
// On-disk dataset
//
//   manifest.txt   "mgcrack-dataset 1", then "<split> <name> <seed>" per image
//   gen.cfg        generator settings
//   images/<name>.pgm (or .ppm), masks/<name>.pgm, labels/<name>.txt

// Malformed or missing dataset files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_pnm(const std::filesystem::path& path, const Image& image);
Image read_pnm(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Mask& mask);
Mask read_mask(const std::filesystem::path& path);

// Header "rows cols patch_size", then one row of space-separated 0/1 per line.
std::string format_label_grid(const PatchLabelGrid& grid);
PatchLabelGrid parse_label_grid(const std::string& text, const std::string& origin = "<labels>");

struct DatasetEntry {
  std::string split;
  std::string name;
  std::uint64_t seed = 0;
};

void write_dataset(const std::filesystem::path& dir, const GenConfig& cfg);
std::vector<DatasetEntry> read_manifest(const std::filesystem::path& dir);
std::vector<LabeledSample> load_split(const std::filesystem::path& dir, const std::string& split);

}  // namespace mgcrack

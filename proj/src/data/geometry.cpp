#include <random>
#include <stdexcept>
#include <string>

#include "mgcrack/data.hpp"

namespace mgcrack {

namespace {

[[noreturn]] void reject(const std::string& op, const std::string& msg) {
  throw std::invalid_argument(op + ": " + msg);
}

std::string dims(std::size_t h, std::size_t w) { return std::to_string(h) + "x" + std::to_string(w); }

}  // namespace

Image Image::blank(std::size_t channels, std::size_t height, std::size_t width, double fill) {
  return {channels, height, width, std::vector<double>(channels * height * width, fill)};
}

Mask Mask::blank(std::size_t height, std::size_t width) {
  return {height, width, std::vector<std::uint8_t>(height * width, 0)};
}

std::size_t PatchLabelGrid::positives() const {
  std::size_t n = 0;
  for (auto c : cells) n += c != 0;
  return n;
}

PatchLabelGrid pixel_to_patch(const Mask& mask, std::size_t patch, std::size_t min_pixels) {
  if (patch == 0) reject("pixel_to_patch", "patch size must be positive");
  if (mask.height % patch != 0 || mask.width % patch != 0)
    reject("pixel_to_patch", "mask " + dims(mask.height, mask.width) + " is not divisible by " + std::to_string(patch));
  PatchLabelGrid grid{mask.height / patch, mask.width / patch, patch, {}};
  std::vector<std::size_t> counts(grid.rows * grid.cols, 0);
  for (std::size_t y = 0; y < mask.height; ++y)
    for (std::size_t x = 0; x < mask.width; ++x)
      if (mask.at(y, x)) ++counts[(y / patch) * grid.cols + x / patch];
  grid.cells.reserve(counts.size());
  for (std::size_t c : counts) grid.cells.push_back(c >= min_pixels ? 1 : 0);
  return grid;
}

Image transform(const Image& image, int d) {
  Image out = image;
  if (d & 1) std::swap(out.height, out.width);
  const std::size_t plane = image.height * image.width;
  for (std::size_t c = 0; c < image.channels; ++c) {
    std::vector<double> src(image.pixels.begin() + c * plane, image.pixels.begin() + (c + 1) * plane);
    const auto dst = dihedral_plane(src, image.height, image.width, d);
    std::copy(dst.begin(), dst.end(), out.pixels.begin() + c * plane);
  }
  return out;
}

Mask transform(const Mask& mask, int d) {
  Mask out{mask.height, mask.width, dihedral_plane(mask.bits, mask.height, mask.width, d)};
  if (d & 1) std::swap(out.height, out.width);
  return out;
}

PatchLabelGrid transform(const PatchLabelGrid& grid, int d) {
  PatchLabelGrid out{grid.rows, grid.cols, grid.patch_size, dihedral_plane(grid.cells, grid.rows, grid.cols, d)};
  if (d & 1) std::swap(out.rows, out.cols);
  return out;
}

LabeledSample transform(const LabeledSample& sample, int d) {
  return {transform(sample.image, d), transform(sample.mask, d), transform(sample.labels, d), sample.seed};
}

LabeledSample crop(const LabeledSample& sample, std::size_t top, std::size_t left, std::size_t height,
                   std::size_t width) {
  const std::size_t p = sample.labels.patch_size;
  if (top % p || left % p || height % p || width % p || height == 0 || width == 0)
    reject("crop", "offsets and size must be positive multiples of " + std::to_string(p));
  if (top + height > sample.image.height || left + width > sample.image.width)
    reject("crop", "window " + dims(height, width) + " at (" + std::to_string(top) + ", " + std::to_string(left) +
                       ") exceeds image " + dims(sample.image.height, sample.image.width));
  LabeledSample out;
  out.seed = sample.seed;
  out.image = Image::blank(sample.image.channels, height, width);
  out.mask = Mask::blank(height, width);
  for (std::size_t c = 0; c < sample.image.channels; ++c)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) out.image.at(c, y, x) = sample.image.at(c, top + y, left + x);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) out.mask.at(y, x) = sample.mask.at(top + y, left + x);
  out.labels = {height / p, width / p, p, {}};
  for (std::size_t r = 0; r < out.labels.rows; ++r)
    for (std::size_t c = 0; c < out.labels.cols; ++c)
      out.labels.cells.push_back(sample.labels.at(top / p + r, left / p + c));
  return out;
}

std::size_t window_count(std::size_t extent, std::size_t window, std::size_t stride) {
  if (stride == 0) reject("sliding_window", "stride must be positive");
  if (window > extent) reject("sliding_window", "window " + std::to_string(window) + " exceeds extent " +
                                                    std::to_string(extent));
  return (extent - window) / stride + 1;
}

std::vector<LabeledSample> sliding_window(const LabeledSample& sample, std::size_t window, std::size_t stride,
                                          std::size_t min_pixels) {
  const std::size_t p = sample.labels.patch_size;
  if (window == 0 || window % p != 0) reject("sliding_window", "window must be a positive multiple of " + std::to_string(p));
  if (stride % p != 0) reject("sliding_window", "stride must be a multiple of " + std::to_string(p));
  const std::size_t ny = window_count(sample.image.height, window, stride);
  const std::size_t nx = window_count(sample.image.width, window, stride);
  std::vector<LabeledSample> out;
  out.reserve(ny * nx);
  for (std::size_t iy = 0; iy < ny; ++iy)
    for (std::size_t ix = 0; ix < nx; ++ix) {
      LabeledSample c = crop(sample, iy * stride, ix * stride, window, window);
      c.labels = pixel_to_patch(c.mask, p, min_pixels);
      out.push_back(std::move(c));
    }
  return out;
}

LabeledSample augment(const LabeledSample& sample, std::uint64_t seed, const AugmentConfig& cfg) {
  std::mt19937_64 rng(seed);
  const int d = cfg.dihedral ? static_cast<int>(std::uniform_int_distribution<int>(0, kDihedralCount - 1)(rng)) : 0;
  LabeledSample out = transform(sample, d);
  if (cfg.crop == 0) return out;
  const std::size_t p = out.labels.patch_size;
  if (cfg.crop % p != 0 || cfg.crop > out.image.height || cfg.crop > out.image.width)
    reject("augment", "crop " + std::to_string(cfg.crop) + " must be a multiple of " + std::to_string(p) +
                          " no larger than the image");
  const auto top = p * std::uniform_int_distribution<std::size_t>(0, (out.image.height - cfg.crop) / p)(rng);
  const auto left = p * std::uniform_int_distribution<std::size_t>(0, (out.image.width - cfg.crop) / p)(rng);
  return crop(out, top, left, cfg.crop, cfg.crop);
}

}  // namespace mgcrack

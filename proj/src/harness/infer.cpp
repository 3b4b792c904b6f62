#include <algorithm>
#include <fstream>
#include <sstream>

#include "mgcrack/harness.hpp"

namespace mgcrack {

namespace {

std::size_t round_up(std::size_t v, std::size_t m) { return (v + m - 1) / m * m; }

// Index into [0, n) under repeated mirroring about the last element.
std::size_t mirror(std::size_t i, std::size_t n) {
  if (n == 1) return 0;
  const std::size_t period = 2 * (n - 1);
  i %= period;
  return i < n ? i : period - i;
}

void put(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

Image reflect_pad(const Image& image, std::size_t multiple) {
  if (image.height == 0 || image.width == 0) throw DataError("reflect_pad: empty image");
  if (multiple == 0) throw std::invalid_argument("reflect_pad: multiple must be >= 1");
  const std::size_t h = round_up(image.height, multiple), w = round_up(image.width, multiple);
  if (h == image.height && w == image.width) return image;
  Image out = Image::blank(image.channels, h, w);
  for (std::size_t c = 0; c < image.channels; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = image.at(c, mirror(y, image.height), mirror(x, image.width));
  return out;
}

Inference infer(const MGCrackNet& net, const Image& image) {
  if (image.channels != net.config().input_channels)
    throw DataError("image has " + std::to_string(image.channels) + " channels, model expects " +
                    std::to_string(net.config().input_channels));
  Inference r;
  r.source_height = image.height;
  r.source_width = image.width;
  r.padded = reflect_pad(image);
  NoGradGuard no_grad;
  const NetworkOutput out = net.forward(to_batch({&r.padded}));
  r.rows = out.final_grid.value.dim(2);
  r.cols = out.final_grid.value.dim(3);
  const auto v = out.final_grid.value.values();
  r.probabilities.assign(v.begin(), v.end());
  r.binary = predict(out.final_grid, 0.5);
  return r;
}

void write_inference(const std::filesystem::path& dir, const Inference& r) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  std::ostringstream grid, binary;
  grid << r.rows << ' ' << r.cols << '\n';
  binary << r.rows << ' ' << r.cols << '\n';
  for (std::size_t i = 0; i < r.rows; ++i) {
    for (std::size_t j = 0; j < r.cols; ++j) {
      grid << (j ? " " : "") << format_number(r.probabilities[i * r.cols + j]);
      binary << (j ? " " : "") << int(r.binary[i * r.cols + j]);
    }
    grid << '\n';
    binary << '\n';
  }
  put(dir / "grid.txt", grid.str());
  put(dir / "grid_binary.txt", binary.str());

  // Grey image under a red wash proportional to each patch's probability.
  const Image& im = r.padded;
  Image overlay = Image::blank(3, im.height, im.width);
  const std::size_t patch = im.height / r.rows;
  for (std::size_t y = 0; y < im.height; ++y)
    for (std::size_t x = 0; x < im.width; ++x) {
      double grey = 0;
      for (std::size_t c = 0; c < im.channels; ++c) grey += im.at(c, y, x);
      grey /= static_cast<double>(im.channels);
      const double p = r.probabilities[(y / patch) * r.cols + x / patch];
      const double a = 0.6 * p;
      overlay.at(0, y, x) = (1 - a) * grey + a;
      overlay.at(1, y, x) = (1 - a) * grey;
      overlay.at(2, y, x) = (1 - a) * grey;
    }
  write_pnm(dir / "overlay.ppm", overlay);

  std::ostringstream meta;
  meta << "source_height = " << r.source_height << "\nsource_width = " << r.source_width
       << "\npadded_height = " << im.height << "\npadded_width = " << im.width
       << "\npadding = " << (im.height == r.source_height && im.width == r.source_width ? "none" : "reflect")
       << "\npad_bottom = " << im.height - r.source_height << "\npad_right = " << im.width - r.source_width
       << "\ngrid_rows = " << r.rows << "\ngrid_cols = " << r.cols << "\nthreshold = 0.5\n";
  put(dir / "metadata.txt", meta.str());
}

}  // namespace mgcrack

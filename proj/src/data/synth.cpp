#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "mgcrack/data.hpp"
#include "mgcrack/keyvalue.hpp"

namespace mgcrack {

namespace {

std::string shortest(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Smooth value noise: random lattice values every `cell` px, bilinearly
// interpolated.
void add_value_noise(std::vector<double>& plane, std::size_t h, std::size_t w, std::size_t cell, double amplitude,
                     std::mt19937_64& rng) {
  const std::size_t gh = h / cell + 2, gw = w / cell + 2;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> lattice(gh * gw);
  for (double& v : lattice) v = u(rng);
  for (std::size_t y = 0; y < h; ++y) {
    const double fy = static_cast<double>(y) / static_cast<double>(cell);
    const auto y0 = static_cast<std::size_t>(fy);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) / static_cast<double>(cell);
      const auto x0 = static_cast<std::size_t>(fx);
      const double tx = fx - static_cast<double>(x0);
      const double top = lattice[y0 * gw + x0] * (1 - tx) + lattice[y0 * gw + x0 + 1] * tx;
      const double bot = lattice[(y0 + 1) * gw + x0] * (1 - tx) + lattice[(y0 + 1) * gw + x0 + 1] * tx;
      plane[y * w + x] += amplitude * (top * (1 - ty) + bot * ty);
    }
  }
}

// Paints crack pixels while keeping the number of distinct positive patches
// within a budget; pixels that would open a patch beyond it are dropped.
class CrackPainter {
 public:
  CrackPainter(std::size_t h, std::size_t w, std::size_t budget)
      : h_(h), w_(w), cols_(w / kDefaultPatch), budget_(budget), used_((h / kDefaultPatch) * cols_, 0),
        mask_(Mask::blank(h, w)), darkness_(h * w, 0.0) {}

  void disk(double cy, double cx, double radius, double strength) {
    const auto lo_y = static_cast<long>(std::floor(cy - radius)), hi_y = static_cast<long>(std::ceil(cy + radius));
    const auto lo_x = static_cast<long>(std::floor(cx - radius)), hi_x = static_cast<long>(std::ceil(cx + radius));
    for (long y = lo_y; y <= hi_y; ++y)
      for (long x = lo_x; x <= hi_x; ++x) {
        const double dy = static_cast<double>(y) + 0.5 - cy, dx = static_cast<double>(x) + 0.5 - cx;
        if (dy * dy + dx * dx <= radius * radius) pixel(y, x, strength);
      }
  }

  bool full() const { return opened_ >= budget_; }
  Mask& mask() { return mask_; }
  std::vector<double>& darkness() { return darkness_; }

 private:
  void pixel(long y, long x, double strength) {
    if (y < 0 || x < 0 || y >= static_cast<long>(h_) || x >= static_cast<long>(w_)) return;
    const auto uy = static_cast<std::size_t>(y), ux = static_cast<std::size_t>(x);
    const std::size_t cell = (uy / kDefaultPatch) * cols_ + ux / kDefaultPatch;
    if (!used_[cell]) {
      if (opened_ >= budget_) return;
      used_[cell] = 1;
      ++opened_;
    }
    mask_.at(uy, ux) = 1;
    darkness_[uy * w_ + ux] = std::max(darkness_[uy * w_ + ux], strength);
  }

  std::size_t h_, w_, cols_, budget_, opened_ = 0;
  std::vector<std::uint8_t> used_;
  Mask mask_;
  std::vector<double> darkness_;
};

// Correlated random walk with gaps, painted through `painter`.
void draw_crack(CrackPainter& painter, const GenConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> wobble(0.0, 0.15), kink(0.0, 0.7);
  const double h = static_cast<double>(cfg.height), w = static_cast<double>(cfg.width);
  const double pi = std::acos(-1.0);
  double y = u01(rng) * h, x = u01(rng) * w, heading = u01(rng) * 2 * pi;
  const double base = cfg.contrast * (0.7 + 0.3 * u01(rng));
  const double phase = u01(rng) * 2 * pi;
  const double radius = cfg.thickness / 2;
  const std::size_t max_steps = 3 * (cfg.height + cfg.width);
  std::size_t gap_left = 0;
  std::uniform_int_distribution<std::size_t> gap_len(3, 8);
  for (std::size_t step = 0; step < max_steps; ++step) {
    if (y < 0 || x < 0 || y >= h || x >= w) break;
    if (gap_left > 0) {
      --gap_left;
    } else if (u01(rng) < cfg.gap_rate) {
      gap_left = gap_len(rng);
    } else {
      // Strength drifts along the curve: faint stretches break continuity too.
      const double s = base * (0.75 + 0.25 * std::sin(phase + 0.05 * static_cast<double>(step)));
      painter.disk(y, x, radius, s);
    }
    heading += wobble(rng);
    if (u01(rng) < 0.02) heading += kink(rng);
    y += std::sin(heading);
    x += std::cos(heading);
  }
}

void add_speckles(std::vector<double>& darkness, const GenConfig& cfg, std::mt19937_64& rng) {
  std::poisson_distribution<std::size_t> count(cfg.speckle_density * static_cast<double>(cfg.height * cfg.width));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> len(2, 5);
  const std::size_t n = count(rng);
  for (std::size_t i = 0; i < n; ++i) {
    double y = u01(rng) * static_cast<double>(cfg.height), x = u01(rng) * static_cast<double>(cfg.width);
    const double heading = u01(rng) * 2 * std::acos(-1.0);
    const double s = cfg.contrast * (0.5 + 0.5 * u01(rng));
    const int steps = len(rng);
    for (int k = 0; k < steps; ++k) {
      const auto iy = static_cast<long>(y), ix = static_cast<long>(x);
      if (iy >= 0 && ix >= 0 && iy < static_cast<long>(cfg.height) && ix < static_cast<long>(cfg.width)) {
        double& d = darkness[static_cast<std::size_t>(iy) * cfg.width + static_cast<std::size_t>(ix)];
        d = std::max(d, s);
      }
      y += std::sin(heading);
      x += std::cos(heading);
    }
  }
}

}  // namespace

void GenConfig::validate() const {
  if (height == 0 || width == 0 || height % kDefaultPatch || width % kDefaultPatch)
    throw ConfigError("image size " + std::to_string(height) + "x" + std::to_string(width) +
                      " must be a positive multiple of 32");
  if (channels != 1 && channels != 3) throw ConfigError("channels must be 1 or 3");
  if (!(crack_probability >= 0 && crack_probability <= 1)) throw ConfigError("crack_probability must lie in [0, 1]");
  if (curves_min > curves_max) throw ConfigError("curves_min exceeds curves_max");
  if (!(thickness > 0)) throw ConfigError("thickness must be positive");
  if (!(contrast > 0 && contrast <= 1)) throw ConfigError("contrast must lie in (0, 1]");
  if (!(gap_rate >= 0 && gap_rate < 1)) throw ConfigError("gap_rate must lie in [0, 1)");
  if (!(speckle_density >= 0)) throw ConfigError("speckle_density must be non-negative");
  if (!(target_ratio >= 1)) throw ConfigError("target_ratio must be >= 1");
  if (!(label_flip_rate >= 0 && label_flip_rate <= 1)) throw ConfigError("label_flip_rate must lie in [0, 1]");
  if (min_pixels == 0) throw ConfigError("min_pixels must be >= 1");
  if (train_count + test_count == 0) throw ConfigError("dataset must contain at least one image");
}

std::string GenConfig::serialize() const {
  std::ostringstream os;
  os << "height = " << height << "\nwidth = " << width << "\nchannels = " << channels
     << "\ncrack_probability = " << shortest(crack_probability) << "\ncurves_min = " << curves_min
     << "\ncurves_max = " << curves_max << "\nthickness = " << shortest(thickness)
     << "\ncontrast = " << shortest(contrast) << "\ngap_rate = " << shortest(gap_rate)
     << "\nspeckle_density = " << shortest(speckle_density) << "\ntarget_ratio = " << shortest(target_ratio)
     << "\nlabel_flip_rate = " << shortest(label_flip_rate) << "\nmin_pixels = " << min_pixels
     << "\ntrain_count = " << train_count << "\ntest_count = " << test_count << "\nseed = " << seed << '\n';
  return os.str();
}

GenConfig GenConfig::parse(const std::string& text, const std::string& origin) {
  const KeyValues kv = KeyValues::parse(text, origin);
  GenConfig c;
  c.height = kv.get_uint("height", c.height);
  c.width = kv.get_uint("width", c.width);
  c.channels = kv.get_uint("channels", c.channels);
  c.crack_probability = kv.get_double("crack_probability", c.crack_probability);
  c.curves_min = kv.get_uint("curves_min", c.curves_min);
  c.curves_max = kv.get_uint("curves_max", c.curves_max);
  c.thickness = kv.get_double("thickness", c.thickness);
  c.contrast = kv.get_double("contrast", c.contrast);
  c.gap_rate = kv.get_double("gap_rate", c.gap_rate);
  c.speckle_density = kv.get_double("speckle_density", c.speckle_density);
  c.target_ratio = kv.get_double("target_ratio", c.target_ratio);
  c.label_flip_rate = kv.get_double("label_flip_rate", c.label_flip_rate);
  c.min_pixels = kv.get_uint("min_pixels", c.min_pixels);
  c.train_count = kv.get_uint("train_count", c.train_count);
  c.test_count = kv.get_uint("test_count", c.test_count);
  c.seed = kv.get_uint("seed", c.seed);
  kv.reject_unknown();
  c.validate();
  return c;
}

GenConfig GenConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse(text.str(), path.string());
}

std::uint64_t sample_seed(std::uint64_t base, std::size_t index) {
  return splitmix64(splitmix64(base) + static_cast<std::uint64_t>(index));
}

LabeledSample generate(std::uint64_t seed, const GenConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const std::size_t h = cfg.height, w = cfg.width;

  std::vector<double> background(h * w, 0.5 + 0.1 * (u01(rng) - 0.5));
  const std::array<std::pair<std::size_t, double>, 4> octaves{{{32, 0.06}, {16, 0.04}, {8, 0.03}, {4, 0.015}}};
  for (const auto& [cell, amp] : octaves) add_value_noise(background, h, w, cell, amp, rng);
  std::normal_distribution<double> grain(0.0, 0.015);
  for (double& v : background) v += grain(rng);

  // Patch budget: an image is cracked with probability p and then gets
  // 1 + Binomial(n - 1, q) positive patches, so the expected positive
  // fraction is 1 / (ratio + 1).
  const std::size_t n = (h / kDefaultPatch) * (w / kDefaultPatch);
  const double expected = static_cast<double>(n) / (cfg.target_ratio + 1.0);
  const double p = std::min(cfg.crack_probability, expected);
  std::size_t budget = 0;
  if (p > 0 && u01(rng) < p) {
    const double q = n > 1 ? std::clamp((expected / p - 1.0) / static_cast<double>(n - 1), 0.0, 1.0) : 0.0;
    budget = 1 + std::binomial_distribution<std::size_t>(n - 1, q)(rng);
  }

  CrackPainter painter(h, w, budget);
  if (budget > 0) {
    const std::size_t curves = std::uniform_int_distribution<std::size_t>(cfg.curves_min, cfg.curves_max)(rng);
    for (std::size_t i = 0; i < curves; ++i) draw_crack(painter, cfg, rng);
    for (int extra = 0; extra < 40 && !painter.full(); ++extra) draw_crack(painter, cfg, rng);
  }
  add_speckles(painter.darkness(), cfg, rng);

  LabeledSample s;
  s.seed = seed;
  s.image = Image::blank(cfg.channels, h, w);
  const std::array<double, 3> tint{1.0, 0.97, 0.93};
  for (std::size_t c = 0; c < cfg.channels; ++c)
    for (std::size_t i = 0; i < h * w; ++i)
      s.image.pixels[c * h * w + i] =
          std::clamp((background[i] - painter.darkness()[i]) * (cfg.channels == 3 ? tint[c] : 1.0), 0.0, 1.0);
  s.mask = std::move(painter.mask());
  s.labels = pixel_to_patch(s.mask, kDefaultPatch, cfg.min_pixels);
  if (cfg.label_flip_rate > 0)
    for (auto& cell : s.labels.cells)
      if (u01(rng) < cfg.label_flip_rate) cell ^= 1;
  return s;
}

}  // namespace mgcrack

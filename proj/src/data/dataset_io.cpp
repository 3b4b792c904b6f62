#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mgcrack/data.hpp"

namespace mgcrack {

namespace {

constexpr const char* kManifestHeader = "mgcrack-dataset";
constexpr int kManifestVersion = 1;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

struct RawPnm {
  std::size_t channels = 0, height = 0, width = 0;
  std::string bytes;
};

// Binary P5 / P6 with maxval 255; '#' comments allowed in the header.
RawPnm parse_pnm(const std::string& data, const std::string& origin) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < data.size()) {
      if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(start, pos - start);
  };
  auto number = [&](const char* what) {
    const std::string t = token();
    std::size_t v = 0;
    auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || end != t.data() + t.size())
      throw DataError(origin + ": bad " + what + " '" + t + "'");
    return v;
  };
  RawPnm img;
  const std::string magic = token();
  if (magic == "P5") img.channels = 1;
  else if (magic == "P6") img.channels = 3;
  else throw DataError(origin + ": not a binary PGM/PPM (magic '" + magic + "')");
  img.width = number("width");
  img.height = number("height");
  if (number("maxval") != 255) throw DataError(origin + ": only 8-bit images are supported");
  ++pos;  // single whitespace before the raster
  const std::size_t n = img.channels * img.height * img.width;
  if (pos + n > data.size()) throw DataError(origin + ": truncated raster");
  img.bytes = data.substr(pos, n);
  return img;
}

std::string pnm_header(const char* magic, std::size_t width, std::size_t height) {
  return std::string(magic) + "\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
}

}  // namespace

void write_pnm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw DataError("write_pnm: 1 or 3 channels required");
  std::string out = pnm_header(image.channels == 1 ? "P5" : "P6", image.width, image.height);
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x)
      for (std::size_t c = 0; c < image.channels; ++c) out.push_back(static_cast<char>(quantize(image.at(c, y, x))));
  write_file(path, out);
}

Image read_pnm(const std::filesystem::path& path) {
  const RawPnm raw = parse_pnm(read_file(path), path.string());
  Image img = Image::blank(raw.channels, raw.height, raw.width);
  std::size_t i = 0;
  for (std::size_t y = 0; y < raw.height; ++y)
    for (std::size_t x = 0; x < raw.width; ++x)
      for (std::size_t c = 0; c < raw.channels; ++c)
        img.at(c, y, x) = static_cast<unsigned char>(raw.bytes[i++]) / 255.0;
  return img;
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  std::string out = pnm_header("P5", mask.width, mask.height);
  for (auto b : mask.bits) out.push_back(static_cast<char>(b ? 255 : 0));
  write_file(path, out);
}

Mask read_mask(const std::filesystem::path& path) {
  const RawPnm raw = parse_pnm(read_file(path), path.string());
  if (raw.channels != 1) throw DataError(path.string() + ": mask must be single-channel");
  Mask m = Mask::blank(raw.height, raw.width);
  for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = static_cast<unsigned char>(raw.bytes[i]) > 127 ? 1 : 0;
  return m;
}

std::string format_label_grid(const PatchLabelGrid& grid) {
  std::ostringstream os;
  os << grid.rows << ' ' << grid.cols << ' ' << grid.patch_size << '\n';
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) os << (c ? " " : "") << int(grid.at(r, c));
    os << '\n';
  }
  return os.str();
}

PatchLabelGrid parse_label_grid(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  PatchLabelGrid g;
  if (!(is >> g.rows >> g.cols >> g.patch_size) || g.patch_size == 0)
    throw DataError(origin + ": missing 'rows cols patch_size' header");
  g.cells.reserve(g.rows * g.cols);
  for (std::size_t i = 0; i < g.rows * g.cols; ++i) {
    int v = -1;
    if (!(is >> v) || (v != 0 && v != 1)) throw DataError(origin + ": expected " + std::to_string(g.rows * g.cols) +
                                                          " cells of 0/1");
    g.cells.push_back(static_cast<std::uint8_t>(v));
  }
  std::string extra;
  if (is >> extra) throw DataError(origin + ": trailing content '" + extra + "'");
  return g;
}

void write_dataset(const std::filesystem::path& dir, const GenConfig& cfg) {
  cfg.validate();
  std::error_code ec;
  for (const char* sub : {"images", "masks", "labels"}) {
    std::filesystem::create_directories(dir / sub, ec);
    if (ec) throw DataError("cannot create " + (dir / sub).string() + ": " + ec.message());
  }
  std::ostringstream manifest;
  manifest << kManifestHeader << ' ' << kManifestVersion << '\n';
  const char* ext = cfg.channels == 1 ? ".pgm" : ".ppm";
  const std::size_t total = cfg.train_count + cfg.test_count;
  for (std::size_t i = 0; i < total; ++i) {
    const bool train = i < cfg.train_count;
    const std::size_t local = train ? i : i - cfg.train_count;
    char name[32];
    std::snprintf(name, sizeof name, "%s_%04zu", train ? "train" : "test", local);
    const std::uint64_t seed = sample_seed(cfg.seed, i);
    const LabeledSample s = generate(seed, cfg);
    write_pnm(dir / "images" / (std::string(name) + ext), s.image);
    write_mask(dir / "masks" / (std::string(name) + ".pgm"), s.mask);
    write_file(dir / "labels" / (std::string(name) + ".txt"), format_label_grid(s.labels));
    manifest << (train ? "train" : "test") << ' ' << name << ' ' << seed << '\n';
  }
  write_file(dir / "gen.cfg", cfg.serialize());
  write_file(dir / "manifest.txt", manifest.str());
}

std::vector<DatasetEntry> read_manifest(const std::filesystem::path& dir) {
  std::istringstream is(read_file(dir / "manifest.txt"));
  std::string header;
  int version = 0;
  if (!(is >> header >> version) || header != kManifestHeader || version != kManifestVersion)
    throw DataError((dir / "manifest.txt").string() + ": not a dataset manifest");
  std::vector<DatasetEntry> out;
  DatasetEntry e;
  while (is >> e.split >> e.name >> e.seed) {
    if (e.split != "train" && e.split != "test")
      throw DataError((dir / "manifest.txt").string() + ": unknown split '" + e.split + "'");
    out.push_back(e);
  }
  if (!is.eof()) throw DataError((dir / "manifest.txt").string() + ": malformed entry");
  return out;
}

std::vector<LabeledSample> load_split(const std::filesystem::path& dir, const std::string& split) {
  std::vector<LabeledSample> out;
  for (const DatasetEntry& e : read_manifest(dir)) {
    if (e.split != split) continue;
    std::filesystem::path image = dir / "images" / (e.name + ".pgm");
    if (!std::filesystem::exists(image)) image = dir / "images" / (e.name + ".ppm");
    LabeledSample s;
    s.seed = e.seed;
    s.image = read_pnm(image);
    s.mask = read_mask(dir / "masks" / (e.name + ".pgm"));
    const auto label_path = dir / "labels" / (e.name + ".txt");
    s.labels = parse_label_grid(read_file(label_path), label_path.string());
    if (s.mask.height != s.image.height || s.mask.width != s.image.width)
      throw DataError(e.name + ": mask and image sizes differ");
    if (s.labels.patch_size != kDefaultPatch || s.labels.rows * kDefaultPatch != s.image.height ||
        s.labels.cols * kDefaultPatch != s.image.width)
      throw DataError(e.name + ": label grid does not tile the image with 32x32 patches");
    out.push_back(std::move(s));
  }
  if (out.empty()) throw DataError(dir.string() + ": split '" + split + "' is empty");
  return out;
}

}  // namespace mgcrack

#include "mgcrack/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mgcrack {

namespace {

constexpr const char* kMagic = "mgcrack-checkpoint";
constexpr int kVersion = 1;

void put_le(std::string& buf, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) buf.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_tensors(const std::filesystem::path& dir, const std::vector<NamedTensor>& tensors) {
  std::filesystem::create_directories(dir);
  std::ostringstream manifest;
  manifest << kMagic << ' ' << kVersion << '\n';
  std::string blob;
  for (const auto& [name, t] : tensors) {
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
      throw std::invalid_argument("checkpoint: invalid tensor name '" + name + "'");
    manifest << name << ' ' << t.ndim();
    for (std::size_t d : t.shape()) manifest << ' ' << d;
    manifest << ' ' << blob.size() << '\n';
    for (double v : t.values()) put_le(blob, v);
  }
  std::ofstream mf(dir / kManifestFile, std::ios::binary | std::ios::trunc);
  std::ofstream bf(dir / kTensorFile, std::ios::binary | std::ios::trunc);
  if (!mf || !bf) throw std::runtime_error("checkpoint: cannot write to " + dir.string());
  mf << manifest.str();
  bf.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!mf || !bf) throw std::runtime_error("checkpoint: write failed in " + dir.string());
}

std::vector<NamedTensor> load_tensors(const std::filesystem::path& dir) {
  std::ifstream mf(dir / kManifestFile);
  std::ifstream bf(dir / kTensorFile, std::ios::binary);
  if (!mf || !bf) throw std::runtime_error("checkpoint: missing manifest or tensor file in " + dir.string());
  std::string blob((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());

  std::string magic;
  int version = 0;
  if (!(mf >> magic >> version) || magic != kMagic || version != kVersion)
    throw std::runtime_error("checkpoint: unrecognised manifest header in " + dir.string());

  std::vector<NamedTensor> out;
  std::string line;
  std::getline(mf, line);
  while (std::getline(mf, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string name;
    std::size_t ndim = 0;
    if (!(is >> name >> ndim)) throw std::runtime_error("checkpoint: malformed manifest line '" + line + "'");
    Shape shape(ndim);
    for (auto& d : shape)
      if (!(is >> d)) throw std::runtime_error("checkpoint: malformed shape for '" + name + "'");
    std::size_t offset = 0;
    if (!(is >> offset)) throw std::runtime_error("checkpoint: missing offset for '" + name + "'");
    const std::size_t n = shape_numel(shape);
    if (offset % 8 != 0 || offset + 8 * n > blob.size())
      throw std::runtime_error("checkpoint: tensor '" + name + "' lies outside " + std::string(kTensorFile));
    std::vector<double> values(n);
    const auto* base = reinterpret_cast<const unsigned char*>(blob.data()) + offset;
    for (std::size_t i = 0; i < n; ++i) values[i] = get_le(base + 8 * i);
    out.emplace_back(name, Tensor::from(std::move(shape), std::move(values)));
  }
  return out;
}

}  // namespace mgcrack

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mgcrack/tensor.hpp"

namespace mgcrack {

using NamedTensor = std::pair<std::string, Tensor>;

// A checkpoint is a directory holding
//   manifest.txt : "mgcrack-checkpoint 1" then one line per tensor:
//                  <name> <ndim> <d0> ... <dn-1> <byte offset>
//   tensors.bin  : all values back to back as little-endian IEEE-754 f64
// Round-trips are bit-exact.
inline constexpr const char* kManifestFile = "manifest.txt";
inline constexpr const char* kTensorFile = "tensors.bin";

void save_tensors(const std::filesystem::path& dir, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_tensors(const std::filesystem::path& dir);

}  // namespace mgcrack

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mgcrack/ops.hpp"

namespace mgcrack::testing {

// Textbook nested-loop cross-correlation. Out-of-range taps are skipped;
// accumulation runs over (ci, kh, kw) in order and the bias is added last.
inline std::vector<double> naive_conv2d(const Tensor& x, const ConvParams& p) {
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = p.weight.dim(0), KH = p.weight.dim(2), KW = p.weight.dim(3);
  const std::size_t OH = (H + 2 * p.padding - ((KH - 1) * p.dilation + 1)) / p.stride + 1;
  const std::size_t OW = (W + 2 * p.padding - ((KW - 1) * p.dilation + 1)) / p.stride + 1;
  auto w = p.weight.values();
  auto b = p.bias.values();
  std::vector<double> out(N * O * OH * OW);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t oh = 0; oh < OH; ++oh)
        for (std::size_t ow = 0; ow < OW; ++ow) {
          double acc = 0.0;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < KH; ++i)
              for (std::size_t j = 0; j < KW; ++j) {
                const long ih = static_cast<long>(oh * p.stride + i * p.dilation) - static_cast<long>(p.padding);
                const long iw = static_cast<long>(ow * p.stride + j * p.dilation) - static_cast<long>(p.padding);
                if (ih < 0 || iw < 0 || ih >= static_cast<long>(H) || iw >= static_cast<long>(W)) continue;
                acc += w[((o * C + c) * KH + i) * KW + j] * x.at(n, c, static_cast<std::size_t>(ih),
                                                                   static_cast<std::size_t>(iw));
              }
          out[((n * O + o) * OH + oh) * OW + ow] = acc + b[o];
        }
  return out;
}

// Bilinear upsampling written as a tent-kernel sum over every source pixel:
// value = sum_k max(0, 1 - |s - k|) * x[k] with s the clamped half-pixel
// source coordinate.
inline std::vector<double> tent_upsample(const std::vector<double>& plane, std::size_t H, std::size_t W,
                                         std::size_t factor) {
  auto coord = [factor](std::size_t o, std::size_t len) {
    const double s = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(len - 1));
  };
  std::vector<double> out(H * factor * W * factor);
  for (std::size_t i = 0; i < H * factor; ++i)
    for (std::size_t j = 0; j < W * factor; ++j) {
      const double sy = coord(i, H), sx = coord(j, W);
      double v = 0.0;
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          const double wy = std::max(0.0, 1.0 - std::abs(sy - static_cast<double>(y)));
          const double wx = std::max(0.0, 1.0 - std::abs(sx - static_cast<double>(x)));
          v += wy * wx * plane[y * W + x];
        }
      out[i * W * factor + j] = v;
    }
  return out;
}

}  // namespace mgcrack::testing

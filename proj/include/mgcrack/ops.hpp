#pragma once

#include <vector>

#include "mgcrack/tensor.hpp"

namespace mgcrack {

/// Parameters of a 2-D (optionally dilated) convolution.
///
/// `weight` is out_ch x in_ch x kH x kW and `bias` has out_ch entries. Taps
/// are spaced `dilation` pixels apart, so the effective kernel extent is
/// (k - 1) * dilation + 1.
struct ConvParams {
  Tensor weight;
  Tensor bias;
  std::size_t dilation = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t effective_extent_h() const { return (weight.dim(2) - 1) * dilation + 1; }
  std::size_t effective_extent_w() const { return (weight.dim(3) - 1) * dilation + 1; }
};

/// Output length along one axis, or 0 if the kernel does not fit.
std::size_t conv_output_size(std::size_t input, std::size_t extent, std::size_t stride, std::size_t padding);

// Cross-correlation with holes; zero padding.
Tensor conv2d(const Tensor& input, const ConvParams& p);

Tensor max_pool2d(const Tensor& input, std::size_t window, std::size_t stride);
Tensor avg_pool2d(const Tensor& input, std::size_t window, std::size_t stride);

// Bilinear resize by an integer factor using half-pixel centres
// (align_corners = false); source coordinates are clamped at the border.
Tensor upsample_bilinear(const Tensor& input, std::size_t factor);

Tensor sigmoid(const Tensor& input);
Tensor relu(const Tensor& input);

enum class Elementwise { mul, add };

// Same-shape elementwise op, or `b` single-channel (N x 1 x H x W)
// broadcast over the channels of a 4-D `a`.
Tensor elementwise(const Tensor& a, const Tensor& b, Elementwise kind);
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, Elementwise::mul); }
inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, Elementwise::add); }

Tensor concat_channels(const std::vector<Tensor>& parts);

inline constexpr double kProbabilityClamp = 1e-7;

// Mean binary cross entropy. Probabilities are clamped to
// [kProbabilityClamp, 1 - kProbabilityClamp]; targets must be exactly 0 or 1.
Tensor bce_loss(const Tensor& pred, const Tensor& target);

Tensor sum(const Tensor& input);
Tensor scale(const Tensor& input, double factor);

}  // namespace mgcrack

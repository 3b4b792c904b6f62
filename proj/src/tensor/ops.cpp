#include "mgcrack/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mgcrack {

namespace {

struct Dims4 {
  std::size_t n, c, h, w;
};

Dims4 require_4d(const Tensor& t, const char* op, const char* what) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": " + what + " is undefined");
  if (t.ndim() != 4)
    throw std::invalid_argument(std::string(op) + ": " + what + " must be 4-D (NxCxHxW), got " +
                                shape_to_string(t.shape()));
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

[[noreturn]] void reject(const std::string& op, const std::string& msg) {
  throw std::invalid_argument(op + ": " + msg);
}

// C (M x N) += A (M x K) * B (K x N). A is addressed through strides so a
// transposed view needs no copy; B and C are dense row-major. Every C entry
// accumulates its K products in ascending k order regardless of blocking,
// which keeps results bit-reproducible and equal to a plain triple loop.
void gemm_accumulate(double* c, const double* a, std::size_t a_row_stride, std::size_t a_col_stride,
                     const double* b, std::size_t M, std::size_t K, std::size_t N) {
  constexpr std::size_t kColBlock = 256;
  for (std::size_t n0 = 0; n0 < N; n0 += kColBlock) {
    const std::size_t nb = std::min(kColBlock, N - n0);
    std::size_t m = 0;
    for (; m + 4 <= M; m += 4) {
      double* c0 = c + m * N + n0;
      double* c1 = c0 + N;
      double* c2 = c1 + N;
      double* c3 = c2 + N;
      for (std::size_t k = 0; k < K; ++k) {
        const double a0 = a[m * a_row_stride + k * a_col_stride];
        const double a1 = a[(m + 1) * a_row_stride + k * a_col_stride];
        const double a2 = a[(m + 2) * a_row_stride + k * a_col_stride];
        const double a3 = a[(m + 3) * a_row_stride + k * a_col_stride];
        const double* bk = b + k * N + n0;
        for (std::size_t j = 0; j < nb; ++j) {
          const double v = bk[j];
          c0[j] += a0 * v;
          c1[j] += a1 * v;
          c2[j] += a2 * v;
          c3[j] += a3 * v;
        }
      }
    }
    for (; m < M; ++m) {
      double* c0 = c + m * N + n0;
      for (std::size_t k = 0; k < K; ++k) {
        const double a0 = a[m * a_row_stride + k * a_col_stride];
        const double* bk = b + k * N + n0;
        for (std::size_t j = 0; j < nb; ++j) c0[j] += a0 * bk[j];
      }
    }
  }
}

void transpose(const double* src, std::size_t rows, std::size_t cols, std::vector<double>& dst) {
  dst.resize(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

struct ConvGeometry {
  Dims4 in;
  std::size_t out_ch, kh, kw, dilation, stride, pad, out_h, out_w;

  std::size_t k_size() const { return in.c * kh * kw; }
  std::size_t p_size() const { return out_h * out_w; }
  bool is_pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// col is (Cin*kH*kW) x (outH*outW) for a single image.
void im2col(const double* x, const ConvGeometry& g, std::vector<double>& col) {
  col.assign(g.k_size() * g.p_size(), 0.0);
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < g.in.c; ++ci) {
    const double* plane = x + ci * g.in.h * g.in.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j, ++row) {
        double* dst = col.data() + row * g.p_size();
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + i * g.dilation) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in.h)) continue;
          const double* src = plane + static_cast<std::size_t>(ih) * g.in.w;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + j * g.dilation) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.in.w)) dst[oh * g.out_w + ow] = src[iw];
          }
        }
      }
    }
  }
}

void col2im_add(const std::vector<double>& col, const ConvGeometry& g, double* dx) {
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < g.in.c; ++ci) {
    double* plane = dx + ci * g.in.h * g.in.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j, ++row) {
        const double* src = col.data() + row * g.p_size();
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + i * g.dilation) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in.h)) continue;
          double* dst = plane + static_cast<std::size_t>(ih) * g.in.w;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + j * g.dilation) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.in.w)) dst[iw] += src[oh * g.out_w + ow];
          }
        }
      }
    }
  }
}

class Conv2dNode final : public Node {
 public:
  Conv2dNode(const Tensor& input, const ConvParams& p, ConvGeometry geom)
      : input_(input), weight_(p.weight), bias_(p.bias), geom_(geom) {
    inputs_ = {input.impl(), p.weight.impl(), p.bias.impl()};
  }

  void backward(std::span<const double> grad_out) override {
    const auto& g = geom_;
    const std::size_t K = g.k_size(), P = g.p_size();
    const bool want_x = input_.requires_grad();
    const bool want_w = weight_.requires_grad();
    const bool want_b = bias_.requires_grad();
    const double* x = input_.values().data();
    const double* w = weight_.values().data();
    std::span<double> dx = want_x ? input_.impl()->grad_buffer() : std::span<double>{};
    std::span<double> dw = want_w ? weight_.impl()->grad_buffer() : std::span<double>{};
    std::span<double> db = want_b ? bias_.impl()->grad_buffer() : std::span<double>{};

    std::vector<double> col, col_t, dcol;
    for (std::size_t n = 0; n < g.in.n; ++n) {
      const double* gout = grad_out.data() + n * g.out_ch * P;
      const double* xn = x + n * g.in.c * g.in.h * g.in.w;
      if (want_b)
        for (std::size_t co = 0; co < g.out_ch; ++co) {
          double s = 0.0;
          for (std::size_t p = 0; p < P; ++p) s += gout[co * P + p];
          db[co] += s;
        }
      if (want_w) {
        const double* c = xn;
        if (!g.is_pointwise()) {
          im2col(xn, g, col);
          c = col.data();
        }
        // dW (Cout x K) += dY (Cout x P) * col^T (P x K)
        transpose(c, K, P, col_t);
        gemm_accumulate(dw.data(), gout, P, 1, col_t.data(), g.out_ch, P, K);
      }
      if (want_x) {
        double* dxn = dx.data() + n * g.in.c * g.in.h * g.in.w;
        // dcol (K x P) += W^T (K x Cout) * dY (Cout x P)
        if (g.is_pointwise()) {
          gemm_accumulate(dxn, w, 1, K, gout, K, g.out_ch, P);
        } else {
          dcol.assign(K * P, 0.0);
          gemm_accumulate(dcol.data(), w, 1, K, gout, K, g.out_ch, P);
          col2im_add(dcol, g, dxn);
        }
      }
    }
  }

 private:
  Tensor input_, weight_, bias_;
  ConvGeometry geom_;
};

template <typename Backward>
class LambdaNode final : public Node {
 public:
  LambdaNode(std::vector<std::shared_ptr<TensorImpl>> inputs, Backward fn) : fn_(std::move(fn)) {
    inputs_ = std::move(inputs);
  }
  void backward(std::span<const double> grad_out) override { fn_(grad_out); }

 private:
  Backward fn_;
};

template <typename Backward>
std::shared_ptr<Node> make_node(std::vector<std::shared_ptr<TensorImpl>> inputs, Backward fn) {
  return std::make_shared<LambdaNode<Backward>>(std::move(inputs), std::move(fn));
}

}  // namespace

std::size_t conv_output_size(std::size_t input, std::size_t extent, std::size_t stride, std::size_t padding) {
  if (stride == 0) return 0;
  const std::size_t padded = input + 2 * padding;
  if (padded < extent) return 0;
  return (padded - extent) / stride + 1;
}

Tensor conv2d(const Tensor& input, const ConvParams& p) {
  const Dims4 in = require_4d(input, "conv2d", "input");
  if (!p.weight.defined() || p.weight.ndim() != 4)
    reject("conv2d", "kernel must be 4-D (out x in x kH x kW)");
  if (p.dilation == 0) reject("conv2d", "dilation must be positive");
  if (p.stride == 0) reject("conv2d", "stride must be positive");
  if (p.weight.dim(1) != in.c)
    reject("conv2d", "input channel dimension " + std::to_string(in.c) + " does not match kernel in_ch " +
                         std::to_string(p.weight.dim(1)));
  if (!p.bias.defined() || p.bias.numel() != p.weight.dim(0))
    reject("conv2d", "bias must have out_ch = " + std::to_string(p.weight.dim(0)) + " entries");

  ConvGeometry g{in, p.weight.dim(0), p.weight.dim(2), p.weight.dim(3), p.dilation, p.stride, p.padding, 0, 0};
  g.out_h = conv_output_size(in.h, p.effective_extent_h(), p.stride, p.padding);
  g.out_w = conv_output_size(in.w, p.effective_extent_w(), p.stride, p.padding);
  if (g.out_h == 0)
    reject("conv2d", "height " + std::to_string(in.h) + " with padding " + std::to_string(p.padding) +
                         " is smaller than effective kernel extent " + std::to_string(p.effective_extent_h()));
  if (g.out_w == 0)
    reject("conv2d", "width " + std::to_string(in.w) + " with padding " + std::to_string(p.padding) +
                         " is smaller than effective kernel extent " + std::to_string(p.effective_extent_w()));

  const std::size_t K = g.k_size(), P = g.p_size();
  Tensor out = Tensor::zeros({in.n, g.out_ch, g.out_h, g.out_w});
  double* o = out.mutable_values().data();
  const double* x = input.values().data();
  const double* w = p.weight.values().data();
  const double* b = p.bias.values().data();
  std::vector<double> col;
  for (std::size_t n = 0; n < in.n; ++n) {
    const double* xn = x + n * in.c * in.h * in.w;
    const double* c = xn;
    if (!g.is_pointwise()) {
      im2col(xn, g, col);
      c = col.data();
    }
    double* on = o + n * g.out_ch * P;
    gemm_accumulate(on, w, K, 1, c, g.out_ch, K, P);
    for (std::size_t co = 0; co < g.out_ch; ++co)
      for (std::size_t pix = 0; pix < P; ++pix) on[co * P + pix] += b[co];
  }
  if (needs_grad({&input, &p.weight, &p.bias})) attach(out, std::make_shared<Conv2dNode>(input, p, g));
  return out;
}

namespace {

Dims4 check_pool(const Tensor& input, std::size_t window, std::size_t stride, const char* op) {
  const Dims4 d = require_4d(input, op, "input");
  if (window == 0 || stride == 0) reject(op, "window and stride must be positive");
  if (window > d.h || window > d.w)
    reject(op, "window " + std::to_string(window) + " exceeds spatial size " + std::to_string(d.h) + "x" +
                   std::to_string(d.w));
  if (window == stride && (d.h % stride != 0 || d.w % stride != 0))
    reject(op, "spatial size " + std::to_string(d.h) + "x" + std::to_string(d.w) + " is not divisible by stride " +
                   std::to_string(stride));
  return d;
}

}  // namespace

Tensor max_pool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  const Dims4 d = check_pool(input, window, stride, "max_pool2d");
  const std::size_t oh = (d.h - window) / stride + 1, ow = (d.w - window) / stride + 1;
  Tensor out = Tensor::zeros({d.n, d.c, oh, ow});
  std::vector<std::size_t> argmax(out.numel());
  const double* x = input.values().data();
  double* o = out.mutable_values().data();
  std::size_t idx = 0;
  for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
    const std::size_t base = nc * d.h * d.w;
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j, ++idx) {
        std::size_t best = base + (i * stride) * d.w + j * stride;
        for (std::size_t a = 0; a < window; ++a)
          for (std::size_t b = 0; b < window; ++b) {
            const std::size_t k = base + (i * stride + a) * d.w + (j * stride + b);
            if (x[k] > x[best]) best = k;  // strict: first maximum in row-major order wins
          }
        o[idx] = x[best];
        argmax[idx] = best;
      }
  }
  if (needs_grad({&input})) {
    auto in_impl = input.impl();
    attach(out, make_node({in_impl}, [in_impl, argmax = std::move(argmax)](std::span<const double> g) {
             auto dx = in_impl->grad_buffer();
             for (std::size_t i = 0; i < g.size(); ++i) dx[argmax[i]] += g[i];
           }));
  }
  return out;
}

Tensor avg_pool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  const Dims4 d = check_pool(input, window, stride, "avg_pool2d");
  const std::size_t oh = (d.h - window) / stride + 1, ow = (d.w - window) / stride + 1;
  const double inv = 1.0 / static_cast<double>(window * window);
  Tensor out = Tensor::zeros({d.n, d.c, oh, ow});
  const double* x = input.values().data();
  double* o = out.mutable_values().data();
  std::size_t idx = 0;
  for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
    const std::size_t base = nc * d.h * d.w;
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j, ++idx) {
        double s = 0.0;
        for (std::size_t a = 0; a < window; ++a)
          for (std::size_t b = 0; b < window; ++b) s += x[base + (i * stride + a) * d.w + (j * stride + b)];
        o[idx] = s * inv;
      }
  }
  if (needs_grad({&input})) {
    auto in_impl = input.impl();
    attach(out, make_node({in_impl}, [in_impl, d, oh, ow, window, stride, inv](std::span<const double> g) {
             auto dx = in_impl->grad_buffer();
             std::size_t idx = 0;
             for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
               const std::size_t base = nc * d.h * d.w;
               for (std::size_t i = 0; i < oh; ++i)
                 for (std::size_t j = 0; j < ow; ++j, ++idx) {
                   const double share = g[idx] * inv;
                   for (std::size_t a = 0; a < window; ++a)
                     for (std::size_t b = 0; b < window; ++b)
                       dx[base + (i * stride + a) * d.w + (j * stride + b)] += share;
                 }
             }
           }));
  }
  return out;
}

namespace {

struct LerpTap {
  std::size_t lo, hi;
  double w_lo, w_hi;
};

std::vector<LerpTap> bilinear_taps(std::size_t in, std::size_t factor) {
  std::vector<LerpTap> taps(in * factor);
  for (std::size_t o = 0; o < taps.size(); ++o) {
    double src = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
    if (src < 0.0) src = 0.0;
    auto lo = static_cast<std::size_t>(src);
    if (lo > in - 1) lo = in - 1;
    const std::size_t hi = std::min(lo + 1, in - 1);
    const double frac = src - static_cast<double>(lo);
    taps[o] = {lo, hi, 1.0 - frac, frac};
  }
  return taps;
}

}  // namespace

Tensor upsample_bilinear(const Tensor& input, std::size_t factor) {
  const Dims4 d = require_4d(input, "upsample_bilinear", "input");
  if (factor < 1) reject("upsample_bilinear", "factor must be >= 1, got " + std::to_string(factor));
  if (factor == 1) {
    // identity, but keep the graph edge so gradients still flow
    Tensor out = Tensor::from(input.shape(), std::vector<double>(input.values().begin(), input.values().end()));
    if (needs_grad({&input})) {
      auto in_impl = input.impl();
      attach(out, make_node({in_impl}, [in_impl](std::span<const double> g) { in_impl->accumulate_grad(g); }));
    }
    return out;
  }
  const std::size_t oh = d.h * factor, ow = d.w * factor;
  auto th = bilinear_taps(d.h, factor), tw = bilinear_taps(d.w, factor);
  Tensor out = Tensor::zeros({d.n, d.c, oh, ow});
  const double* x = input.values().data();
  double* o = out.mutable_values().data();
  for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
    const double* plane = x + nc * d.h * d.w;
    double* dst = o + nc * oh * ow;
    for (std::size_t i = 0; i < oh; ++i) {
      const LerpTap& a = th[i];
      for (std::size_t j = 0; j < ow; ++j) {
        const LerpTap& b = tw[j];
        const double top = b.w_lo * plane[a.lo * d.w + b.lo] + b.w_hi * plane[a.lo * d.w + b.hi];
        const double bot = b.w_lo * plane[a.hi * d.w + b.lo] + b.w_hi * plane[a.hi * d.w + b.hi];
        dst[i * ow + j] = a.w_lo * top + a.w_hi * bot;
      }
    }
  }
  if (needs_grad({&input})) {
    auto in_impl = input.impl();
    attach(out, make_node({in_impl}, [in_impl, d, oh, ow, th = std::move(th), tw = std::move(tw)](
                                         std::span<const double> g) {
             auto dx = in_impl->grad_buffer();
             for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
               double* plane = dx.data() + nc * d.h * d.w;
               const double* src = g.data() + nc * oh * ow;
               for (std::size_t i = 0; i < oh; ++i) {
                 const LerpTap& a = th[i];
                 for (std::size_t j = 0; j < ow; ++j) {
                   const LerpTap& b = tw[j];
                   const double v = src[i * ow + j];
                   plane[a.lo * d.w + b.lo] += a.w_lo * b.w_lo * v;
                   plane[a.lo * d.w + b.hi] += a.w_lo * b.w_hi * v;
                   plane[a.hi * d.w + b.lo] += a.w_hi * b.w_lo * v;
                   plane[a.hi * d.w + b.hi] += a.w_hi * b.w_hi * v;
                 }
               }
             }
           }));
  }
  return out;
}

Tensor sigmoid(const Tensor& input) {
  Tensor out = Tensor::zeros(input.shape());
  auto x = input.values();
  auto o = out.mutable_values();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] >= 0.0) {
      o[i] = 1.0 / (1.0 + std::exp(-x[i]));
    } else {
      const double e = std::exp(x[i]);
      o[i] = e / (1.0 + e);
    }
  }
  if (needs_grad({&input})) {
    auto in_impl = input.impl();
    std::weak_ptr<TensorImpl> out_ref = out.impl();
    // The output outlives its own node during backward, so a weak handle avoids a cycle.
    attach(out, make_node({in_impl}, [in_impl, out_ref](std::span<const double> g) {
             auto out_impl = out_ref.lock();
             auto dx = in_impl->grad_buffer();
             const auto& s = out_impl->values;
             for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * s[i] * (1.0 - s[i]);
           }));
  }
  return out;
}

Tensor relu(const Tensor& input) {
  Tensor out = Tensor::zeros(input.shape());
  auto x = input.values();
  auto o = out.mutable_values();
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = x[i] > 0.0 ? x[i] : 0.0;
  if (needs_grad({&input})) {
    auto in_impl = input.impl();
    attach(out, make_node({in_impl}, [in_impl](std::span<const double> g) {
             auto dx = in_impl->grad_buffer();
             const auto& v = in_impl->values;
             for (std::size_t i = 0; i < g.size(); ++i)
               if (v[i] > 0.0) dx[i] += g[i];
           }));
  }
  return out;
}

Tensor elementwise(const Tensor& a, const Tensor& b, Elementwise kind) {
  const char* op = kind == Elementwise::mul ? "elementwise(mul)" : "elementwise(add)";
  if (!a.defined() || !b.defined()) reject(op, "operand is undefined");
  const bool same = a.shape() == b.shape();
  bool broadcast = false;
  if (!same) {
    broadcast = a.ndim() == 4 && b.ndim() == 4 && b.dim(1) == 1 && a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) &&
                a.dim(3) == b.dim(3);
    if (!broadcast)
      reject(op, "incompatible shapes " + shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()) +
                     " (b must match a or be single-channel with equal N, H, W)");
  }
  const std::size_t channels = broadcast ? a.dim(1) : 1;
  const std::size_t plane = broadcast ? a.dim(2) * a.dim(3) : a.numel();
  const std::size_t batches = broadcast ? a.dim(0) : 1;

  Tensor out = Tensor::zeros(a.shape());
  auto av = a.values(), bv = b.values();
  auto o = out.mutable_values();
  for (std::size_t n = 0; n < batches; ++n)
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t ao = (n * channels + c) * plane, bo = n * plane;
      for (std::size_t i = 0; i < plane; ++i)
        o[ao + i] = kind == Elementwise::mul ? av[ao + i] * bv[bo + i] : av[ao + i] + bv[bo + i];
    }

  if (needs_grad({&a, &b})) {
    auto ai = a.impl(), bi = b.impl();
    attach(out, make_node({ai, bi}, [ai, bi, kind, batches, channels, plane](std::span<const double> g) {
             const bool want_a = ai->requires_grad, want_b = bi->requires_grad;
             std::span<double> da = want_a ? ai->grad_buffer() : std::span<double>{};
             std::span<double> db = want_b ? bi->grad_buffer() : std::span<double>{};
             for (std::size_t n = 0; n < batches; ++n)
               for (std::size_t c = 0; c < channels; ++c) {
                 const std::size_t ao = (n * channels + c) * plane, bo = n * plane;
                 for (std::size_t i = 0; i < plane; ++i) {
                   const double gi = g[ao + i];
                   if (kind == Elementwise::mul) {
                     if (want_a) da[ao + i] += gi * bi->values[bo + i];
                     if (want_b) db[bo + i] += gi * ai->values[ao + i];
                   } else {
                     if (want_a) da[ao + i] += gi;
                     if (want_b) db[bo + i] += gi;
                   }
                 }
               }
           }));
  }
  return out;
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) reject("concat_channels", "needs at least one part");
  const Dims4 first = require_4d(parts.front(), "concat_channels", "part 0");
  std::size_t total_c = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Dims4 d = require_4d(parts[i], "concat_channels", "part");
    if (d.n != first.n || d.h != first.h || d.w != first.w)
      reject("concat_channels", "part " + std::to_string(i) + " has shape " + shape_to_string(parts[i].shape()) +
                                    ", expected N, H, W of " + shape_to_string(parts.front().shape()));
    total_c += d.c;
  }
  const std::size_t plane = first.h * first.w;
  Tensor out = Tensor::zeros({first.n, total_c, first.h, first.w});
  auto o = out.mutable_values();
  for (std::size_t n = 0; n < first.n; ++n) {
    std::size_t c_off = 0;
    for (const Tensor& p : parts) {
      const std::size_t c = p.dim(1);
      auto src = p.values().subspan(n * c * plane, c * plane);
      std::copy(src.begin(), src.end(), o.begin() + static_cast<std::ptrdiff_t>((n * total_c + c_off) * plane));
      c_off += c;
    }
  }
  bool any = false;
  for (const Tensor& p : parts) any = any || p.requires_grad();
  if (grad_enabled() && any) {
    std::vector<std::shared_ptr<TensorImpl>> impls;
    for (const Tensor& p : parts) impls.push_back(p.impl());
    attach(out, make_node(impls, [impls, n_batch = first.n, total_c, plane](std::span<const double> g) {
             for (std::size_t n = 0; n < n_batch; ++n) {
               std::size_t c_off = 0;
               for (const auto& p : impls) {
                 const std::size_t c = p->shape[1];
                 if (p->requires_grad) {
                   auto dst = p->grad_buffer().subspan(n * c * plane, c * plane);
                   const double* src = g.data() + (n * total_c + c_off) * plane;
                   for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
                 }
                 c_off += c;
               }
             }
           }));
  }
  return out;
}

Tensor bce_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.defined() || !target.defined()) reject("bce_loss", "operand is undefined");
  if (pred.shape() != target.shape())
    reject("bce_loss", "prediction shape " + shape_to_string(pred.shape()) + " differs from target shape " +
                           shape_to_string(target.shape()));
  auto p = pred.values(), y = target.values();
  for (double v : y)
    if (v != 0.0 && v != 1.0) reject("bce_loss", "target entries must be 0 or 1, got " + std::to_string(v));
  const double lo = kProbabilityClamp, hi = 1.0 - kProbabilityClamp;
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], lo, hi);
    total -= y[i] == 1.0 ? std::log(pc) : std::log(1.0 - pc);
  }
  const double n = static_cast<double>(p.size());
  Tensor out = Tensor::scalar(total / n);
  if (needs_grad({&pred})) {
    auto pi = pred.impl(), ti = target.impl();
    // Gradient is taken at the clamped probability so saturated outputs still
    // receive a finite, non-zero signal.
    attach(out, make_node({pi}, [pi, ti, n, lo, hi](std::span<const double> g) {
             auto dp = pi->grad_buffer();
             for (std::size_t i = 0; i < dp.size(); ++i) {
               const double pc = std::clamp(pi->values[i], lo, hi);
               const double d = ti->values[i] == 1.0 ? -1.0 / pc : 1.0 / (1.0 - pc);
               dp[i] += g[0] * d / n;
             }
           }));
  }
  return out;
}

Tensor sum(const Tensor& input) {
  double s = 0.0;
  for (double v : input.values()) s += v;
  Tensor out = Tensor::scalar(s);
  if (needs_grad({&input})) {
    auto in_impl = input.impl();
    attach(out, make_node({in_impl}, [in_impl](std::span<const double> g) {
             auto dx = in_impl->grad_buffer();
             for (double& v : dx) v += g[0];
           }));
  }
  return out;
}

Tensor scale(const Tensor& input, double factor) {
  Tensor out = Tensor::zeros(input.shape());
  auto x = input.values();
  auto o = out.mutable_values();
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = x[i] * factor;
  if (needs_grad({&input})) {
    auto in_impl = input.impl();
    attach(out, make_node({in_impl}, [in_impl, factor](std::span<const double> g) {
             auto dx = in_impl->grad_buffer();
             for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * factor;
           }));
  }
  return out;
}

}  // namespace mgcrack

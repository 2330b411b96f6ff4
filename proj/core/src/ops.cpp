// ----------------------------------------------------------------------------
// Copyright 2026 The pairfuse Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ----------------------------------------------------------------------------

#include "pairfuse/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "pairfuse/error.hpp"

namespace pairfuse::ops {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, k, stride, pad, oh, ow;
  std::size_t rows() const { return cin * k * k; }
  std::size_t cols() const { return n * oh * ow; }
};

ConvGeometry conv_geometry(const Shape& x, const Shape& weight, std::size_t stride,
                           std::size_t pad) {
  if (weight.c != x.c || weight.h != weight.w) {
    raise(ErrorCode::shape_mismatch, "conv weight " + to_string(weight) +
                                         " incompatible with input " + to_string(x));
  }
  ConvGeometry g{x.n, x.c, x.h, x.w, weight.n, weight.h, stride, pad, 0, 0};
  g.oh = conv_output_extent(x.h, g.k, stride, pad);
  g.ow = conv_output_extent(x.w, g.k, stride, pad);
  if (g.oh == 0 || g.ow == 0) {
    raise(ErrorCode::shape_mismatch, "conv output collapses for input " + to_string(x));
  }
  return g;
}

// Column matrix (Cin*k*k) x (nb*oh*ow) for samples [n0, n0 + nb); column
// index is (n - n0)*oh*ow + oy*ow + ox.
void im2col(const Tensor& x, const ConvGeometry& g, std::size_t n0, std::size_t nb, RowMatrix& col) {
  const std::size_t plane_out = g.oh * g.ow;
  const std::size_t cols = nb * plane_out;
  col.resize(static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(cols));
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const auto w = static_cast<std::ptrdiff_t>(g.w);
  const auto st = static_cast<std::ptrdiff_t>(g.stride);
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const std::size_t row = (ci * g.k + ky) * g.k + kx;
        double* dst = col.data() + row * cols;
        // Output columns whose input x lands inside the image.
        const auto kxo = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::ptrdiff_t ox0 = kxo >= 0 ? 0 : (-kxo + st - 1) / st;
        const std::ptrdiff_t ox1 = std::clamp<std::ptrdiff_t>(
            w - kxo <= 0 ? 0 : (w - kxo + st - 1) / st, 0, static_cast<std::ptrdiff_t>(g.ow));
        for (std::size_t n = 0; n < nb; ++n) {
          const double* src = x.data() + ((n0 + n) * g.cin + ci) * g.h * g.w;
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            double* drow = dst + n * plane_out + oy * g.ow;
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h) || ox0 >= ox1) {
              std::fill_n(drow, g.ow, 0.0);
              continue;
            }
            const double* srow = src + static_cast<std::size_t>(iy) * g.w;
            std::fill(drow, drow + ox0, 0.0);
            if (g.stride == 1) {
              std::copy(srow + ox0 + kxo, srow + ox1 + kxo, drow + ox0);
            } else {
              for (std::ptrdiff_t ox = ox0; ox < ox1; ++ox) drow[ox] = srow[ox * st + kxo];
            }
            std::fill(drow + ox1, drow + g.ow, 0.0);
          }
        }
      }
    }
  }
}

void col2im(const RowMatrix& col, const ConvGeometry& g, std::size_t n0, std::size_t nb, Tensor& grad_x) {
  const std::size_t plane_out = g.oh * g.ow;
  const std::size_t cols = nb * plane_out;
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const std::size_t row = (ci * g.k + ky) * g.k + kx;
        const double* src = col.data() + row * cols;
        for (std::size_t n = 0; n < nb; ++n) {
          double* dst = grad_x.data() + ((n0 + n) * g.cin + ci) * g.h * g.w;
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
            const double* srow = src + n * plane_out + oy * g.ow;
            double* drow = dst + static_cast<std::size_t>(iy) * g.w;
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                        static_cast<std::ptrdiff_t>(g.pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
              drow[ix] += srow[ox];
            }
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeometry& g) { return g.k == 1 && g.stride == 1 && g.pad == 0; }

// (C) x (nb*P) <-> NCHW samples [n0, n0 + nb).
void gather_nchw(const Tensor& t, std::size_t c, std::size_t plane, std::size_t n0, std::size_t nb,
                 RowMatrix& m) {
  m.resize(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(nb * plane));
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::copy_n(t.data() + ((n0 + b) * c + ch) * plane, plane, m.data() + ch * nb * plane + b * plane);
    }
  }
}

void scatter_nchw(const RowMatrix& m, std::size_t c, std::size_t plane, std::size_t n0, std::size_t nb,
                  Tensor& t) {
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::copy_n(m.data() + ch * nb * plane + b * plane, plane, t.data() + ((n0 + b) * c + ch) * plane);
    }
  }
}

// Samples per GEMM, keeping the column buffer near 1 MB so it stays in cache.
std::size_t chunk_samples(const ConvGeometry& g) {
  const std::size_t per_sample = std::max<std::size_t>(g.rows() * g.oh * g.ow, 1);
  return std::clamp<std::size_t>((std::size_t{1} << 17) / per_sample, 1, std::max<std::size_t>(g.n, 1));
}

}  // namespace

std::size_t conv_output_extent(std::size_t extent, std::size_t kernel, std::size_t stride,
                               std::size_t pad) {
  if (stride == 0 || extent + 2 * pad < kernel) return 0;
  return (extent + 2 * pad - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  const ConvGeometry g = conv_geometry(x.shape(), weight.shape(), stride, pad);
  const std::size_t plane_out = g.oh * g.ow;
  ConstRowMap wmat(weight.data(), static_cast<Eigen::Index>(g.cout),
                   static_cast<Eigen::Index>(g.rows()));
  Tensor out(Shape{g.n, g.cout, g.oh, g.ow});
  RowMatrix col, y;
  const std::size_t chunk = chunk_samples(g);
  for (std::size_t n0 = 0; n0 < g.n; n0 += chunk) {
    const std::size_t nb = std::min(chunk, g.n - n0);
    if (is_pointwise(g)) {
      gather_nchw(x, g.cin, plane_out, n0, nb, col);
    } else {
      im2col(x, g, n0, nb, col);
    }
    y.noalias() = wmat * col;
    for (std::size_t co = 0; co < g.cout; ++co) {
      y.row(static_cast<Eigen::Index>(co)).array() += bias[co];
    }
    scatter_nchw(y, g.cout, plane_out, n0, nb, out);
  }
  return out;
}

void conv2d_backward(const Tensor& x, const Tensor& weight, std::size_t stride, std::size_t pad,
                     const Tensor& grad_y, Tensor* grad_x, Tensor& grad_weight,
                     Tensor& grad_bias) {
  const ConvGeometry g = conv_geometry(x.shape(), weight.shape(), stride, pad);
  const std::size_t plane_out = g.oh * g.ow;
  RowMap dw(grad_weight.data(), static_cast<Eigen::Index>(g.cout),
            static_cast<Eigen::Index>(g.rows()));
  ConstRowMap wmat(weight.data(), static_cast<Eigen::Index>(g.cout),
                   static_cast<Eigen::Index>(g.rows()));
  if (grad_x != nullptr) *grad_x = Tensor(x.shape());
  RowMatrix dy, col, dcol;
  const std::size_t chunk = chunk_samples(g);
  for (std::size_t n0 = 0; n0 < g.n; n0 += chunk) {
    const std::size_t nb = std::min(chunk, g.n - n0);
    gather_nchw(grad_y, g.cout, plane_out, n0, nb, dy);
    if (is_pointwise(g)) {
      gather_nchw(x, g.cin, plane_out, n0, nb, col);
    } else {
      im2col(x, g, n0, nb, col);
    }
    dw.noalias() += dy * col.transpose();
    for (std::size_t co = 0; co < g.cout; ++co) {
      grad_bias[co] += dy.row(static_cast<Eigen::Index>(co)).sum();
    }
    if (grad_x == nullptr) continue;
    dcol.noalias() = wmat.transpose() * dy;
    if (is_pointwise(g)) {
      scatter_nchw(dcol, g.cin, plane_out, n0, nb, *grad_x);
    } else {
      col2im(dcol, g, n0, nb, *grad_x);
    }
  }
}

Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& y, const Tensor& grad_y) {
  Tensor dx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] > 0.0 ? grad_y[i] : 0.0;
  return dx;
}

Tensor pool2(const Tensor& x, PoolKind kind, std::vector<std::uint32_t>* argmax) {
  const Shape& s = x.shape();
  if (kind == PoolKind::none) return x;
  const std::size_t oh = s.h / 2;
  const std::size_t ow = s.w / 2;
  if (oh == 0 || ow == 0) {
    raise(ErrorCode::shape_mismatch, "2x2 pool collapses input " + to_string(s));
  }
  Tensor y(Shape{s.n, s.c, oh, ow});
  if (kind == PoolKind::max2 && argmax != nullptr) argmax->assign(y.size(), 0);
  std::size_t o = 0;
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    const std::size_t base = p * s.plane();
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        const std::size_t i00 = base + (2 * oy) * s.w + 2 * ox;
        const std::size_t idx[4] = {i00, i00 + 1, i00 + s.w, i00 + s.w + 1};
        if (kind == PoolKind::avg2) {
          y[o] = 0.25 * (x[idx[0]] + x[idx[1]] + x[idx[2]] + x[idx[3]]);
        } else {
          std::size_t best = idx[0];
          for (int j = 1; j < 4; ++j) {
            if (x[idx[j]] > x[best]) best = idx[j];
          }
          y[o] = x[best];
          if (argmax != nullptr) (*argmax)[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  return y;
}

Tensor pool2_backward(const Shape& input_shape, PoolKind kind,
                      const std::vector<std::uint32_t>& argmax, const Tensor& grad_y) {
  if (kind == PoolKind::none) return grad_y;
  Tensor dx(input_shape);
  const Shape& so = grad_y.shape();
  if (kind == PoolKind::max2) {
    for (std::size_t o = 0; o < grad_y.size(); ++o) dx[argmax[o]] += grad_y[o];
    return dx;
  }
  std::size_t o = 0;
  for (std::size_t p = 0; p < so.n * so.c; ++p) {
    const std::size_t base = p * input_shape.plane();
    for (std::size_t oy = 0; oy < so.h; ++oy) {
      for (std::size_t ox = 0; ox < so.w; ++ox, ++o) {
        const std::size_t i00 = base + (2 * oy) * input_shape.w + 2 * ox;
        const double g = 0.25 * grad_y[o];
        dx[i00] += g;
        dx[i00 + 1] += g;
        dx[i00 + input_shape.w] += g;
        dx[i00 + input_shape.w + 1] += g;
      }
    }
  }
  return dx;
}

namespace {
std::size_t bin_start(std::size_t i, std::size_t in, std::size_t out) { return (i * in) / out; }
std::size_t bin_end(std::size_t i, std::size_t in, std::size_t out) {
  return ((i + 1) * in + out - 1) / out;
}
}  // namespace

Tensor adaptive_avg_pool(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  const Shape& s = x.shape();
  if (out_h == 0 || out_w == 0 || out_h > s.h || out_w > s.w) {
    raise(ErrorCode::shape_mismatch, "adaptive pool cannot map " + to_string(s) + " to " +
                                         std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  if (out_h == s.h && out_w == s.w) return x;
  Tensor y(Shape{s.n, s.c, out_h, out_w});
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    const double* src = x.data() + p * s.plane();
    double* dst = y.data() + p * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const std::size_t y0 = bin_start(oy, s.h, out_h), y1 = bin_end(oy, s.h, out_h);
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const std::size_t x0 = bin_start(ox, s.w, out_w), x1 = bin_end(ox, s.w, out_w);
        double sum = 0.0;
        for (std::size_t iy = y0; iy < y1; ++iy) {
          for (std::size_t ix = x0; ix < x1; ++ix) sum += src[iy * s.w + ix];
        }
        dst[oy * out_w + ox] = sum / static_cast<double>((y1 - y0) * (x1 - x0));
      }
    }
  }
  return y;
}

Tensor adaptive_avg_pool_backward(const Shape& input_shape, const Tensor& grad_y) {
  const Shape& so = grad_y.shape();
  if (so.h == input_shape.h && so.w == input_shape.w) return grad_y;
  Tensor dx(input_shape);
  for (std::size_t p = 0; p < so.n * so.c; ++p) {
    const double* src = grad_y.data() + p * so.plane();
    double* dst = dx.data() + p * input_shape.plane();
    for (std::size_t oy = 0; oy < so.h; ++oy) {
      const std::size_t y0 = bin_start(oy, input_shape.h, so.h);
      const std::size_t y1 = bin_end(oy, input_shape.h, so.h);
      for (std::size_t ox = 0; ox < so.w; ++ox) {
        const std::size_t x0 = bin_start(ox, input_shape.w, so.w);
        const std::size_t x1 = bin_end(ox, input_shape.w, so.w);
        const double g = src[oy * so.w + ox] / static_cast<double>((y1 - y0) * (x1 - x0));
        for (std::size_t iy = y0; iy < y1; ++iy) {
          for (std::size_t ix = x0; ix < x1; ++ix) dst[iy * input_shape.w + ix] += g;
        }
      }
    }
  }
  return dx;
}

Tensor concat_channels(std::span<const Tensor* const> parts) {
  if (parts.empty()) raise(ErrorCode::shape_mismatch, "concat of zero tensors");
  const Shape first = parts.front()->shape();
  std::size_t channels = 0;
  for (const Tensor* t : parts) {
    const Shape& s = t->shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      raise(ErrorCode::shape_mismatch,
            "concat inputs disagree: " + to_string(first) + " vs " + to_string(s));
    }
    channels += s.c;
  }
  Tensor y(Shape{first.n, channels, first.h, first.w});
  const std::size_t plane = first.plane();
  for (std::size_t n = 0; n < first.n; ++n) {
    double* dst = y.data() + n * channels * plane;
    for (const Tensor* t : parts) {
      const std::size_t block = t->shape().c * plane;
      dst = std::copy_n(t->data() + n * block, block, dst);
    }
  }
  return y;
}

void concat_channels_backward(const Tensor& grad_y, std::span<Tensor* const> grad_parts) {
  const Shape& s = grad_y.shape();
  const std::size_t plane = s.plane();
  for (std::size_t n = 0; n < s.n; ++n) {
    const double* src = grad_y.data() + n * s.c * plane;
    for (Tensor* g : grad_parts) {
      const std::size_t block = g->shape().c * plane;
      double* dst = g->data() + n * block;
      for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
      src += block;
    }
  }
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const std::size_t n = x.shape().n;
  const std::size_t in = x.shape().sample();
  const std::size_t out = weight.shape().n;
  if (weight.shape().c != in) {
    raise(ErrorCode::shape_mismatch, "linear layer expects width " +
                                         std::to_string(weight.shape().c) + ", got " +
                                         std::to_string(in));
  }
  ConstRowMap xm(x.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in));
  ConstRowMap wm(weight.data(), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  Tensor y(Shape{n, out, 1, 1});
  RowMap ym(y.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out));
  ym.noalias() = xm * wm.transpose();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < out; ++c) ym(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) += bias[c];
  }
  return y;
}

void linear_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_y, Tensor* grad_x,
                     Tensor& grad_weight, Tensor& grad_bias) {
  const std::size_t n = x.shape().n;
  const std::size_t in = x.shape().sample();
  const std::size_t out = weight.shape().n;
  ConstRowMap xm(x.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in));
  ConstRowMap wm(weight.data(), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  ConstRowMap gm(grad_y.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out));
  RowMap dw(grad_weight.data(), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  dw.noalias() += gm.transpose() * xm;
  for (std::size_t c = 0; c < out; ++c) grad_bias[c] += gm.col(static_cast<Eigen::Index>(c)).sum();
  if (grad_x != nullptr) {
    *grad_x = Tensor(x.shape());
    RowMap dx(grad_x->data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in));
    dx.noalias() = gm * wm;
  }
}

void accumulate(Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) {
    raise(ErrorCode::shape_mismatch,
          "cannot accumulate " + to_string(b.shape()) + " into " + to_string(a.shape()));
  }
  double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

}  // namespace pairfuse::ops

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

#include "pairfuse/fusion_kernels.hpp"

#include <Eigen/Core>
#include <cmath>

namespace pairfuse {
namespace {

using PlaneMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstPlaneMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

constexpr double kInvSqrt2 = 0.70710678118654752440;

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void require_valid(FuseFunctionId fid, const Tensor& a, const Tensor& b) {
  if (auto problem = validate_shapes(fid, a.shape(), b.shape())) {
    raise(problem->code, problem->message);
  }
  if (!a.all_finite() || !b.all_finite()) {
    raise(ErrorCode::non_finite_input,
          "fuse function " + std::to_string(fid.value()) + " given non-finite input");
  }
}

template <typename Op>
Tensor elementwise(const Tensor& a, const Tensor& b, Op op) {
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) po[i] = op(pa[i], pb[i]);
  return out;
}

// Per (batch, channel) plane product; transpose_b selects a @ b^T.
Tensor plane_product(const Tensor& a, const Tensor& b, bool transpose_b) {
  const Shape& s = a.shape();
  Tensor out(s);
  const auto dim = static_cast<Eigen::Index>(s.h);
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    ConstPlaneMap ma(a.data() + p * s.plane(), dim, dim);
    ConstPlaneMap mb(b.data() + p * s.plane(), dim, dim);
    PlaneMap mo(out.data() + p * s.plane(), dim, dim);
    if (transpose_b) {
      mo.noalias() = ma * mb.transpose();
    } else {
      mo.noalias() = ma * mb;
    }
  }
  return out;
}

}  // namespace

FuseFunctionId::FuseFunctionId(int id) : id_(id) {
  if (id < kMin || id > kMax) {
    raise(ErrorCode::invalid_config,
          "fuse function id " + std::to_string(id) + " outside [1, 13]");
  }
}

std::string_view FuseFunctionId::name() const noexcept {
  static constexpr std::array<std::string_view, 13> kNames = {
      "product", "abs_diff", "sqrt_abs_sq_diff", "matmul", "sum",
      "mean",    "max",      "min",              "abs_sq_product", "matmul_bt",
      "std",     "norm",     "variance"};
  return kNames[static_cast<std::size_t>(id_ - 1)];
}

std::array<FuseFunctionId, 13> FuseFunctionId::all() {
  return {FuseFunctionId(1), FuseFunctionId(2),  FuseFunctionId(3),  FuseFunctionId(4),
          FuseFunctionId(5), FuseFunctionId(6),  FuseFunctionId(7),  FuseFunctionId(8),
          FuseFunctionId(9), FuseFunctionId(10), FuseFunctionId(11), FuseFunctionId(12),
          FuseFunctionId(13)};
}

std::optional<ShapeProblem> validate_shapes(FuseFunctionId fid, const Shape& a, const Shape& b) {
  if (!(a == b)) {
    return ShapeProblem{ErrorCode::shape_mismatch,
                        "fuse inputs differ in shape: " + to_string(a) + " vs " + to_string(b)};
  }
  if (a.size() == 0) {
    return ShapeProblem{ErrorCode::shape_mismatch, "fuse inputs are empty"};
  }
  if (fid.square_spatial_only() && a.h != a.w) {
    return ShapeProblem{ErrorCode::non_square_spatial,
                        "fuse function " + std::to_string(fid.value()) +
                            " needs square planes, got " + to_string(a)};
  }
  return std::nullopt;
}

Tensor fuse_forward(FuseFunctionId fid, const Tensor& a, const Tensor& b) {
  require_valid(fid, a, b);
  switch (fid.value()) {
    case 1: return elementwise(a, b, [](double x, double y) { return x * y; });
    case 2: return elementwise(a, b, [](double x, double y) { return std::abs(x - y); });
    case 3:
      return elementwise(a, b, [](double x, double y) { return std::sqrt(std::abs(x * x - y * y)); });
    case 4: return plane_product(a, b, false);
    case 5: return elementwise(a, b, [](double x, double y) { return x + y; });
    case 6: return elementwise(a, b, [](double x, double y) { return 0.5 * (x + y); });
    case 7: return elementwise(a, b, [](double x, double y) { return x >= y ? x : y; });
    case 8: return elementwise(a, b, [](double x, double y) { return x <= y ? x : y; });
    case 9: return elementwise(a, b, [](double x, double y) { return std::abs((x * x) * (y * y)); });
    case 10: return plane_product(a, b, true);
    case 11:
      return elementwise(a, b, [](double x, double y) { return std::abs(x - y) * kInvSqrt2; });
    case 12: return elementwise(a, b, [](double x, double y) { return std::sqrt(x * x + y * y); });
    case 13:
      return elementwise(a, b, [](double x, double y) { return 0.5 * (x - y) * (x - y); });
    default: break;
  }
  raise(ErrorCode::invalid_config, "unreachable fuse function id");
}

FuseGradPair fuse_backward(FuseFunctionId fid, const Tensor& a, const Tensor& b,
                           const Tensor& upstream) {
  require_valid(fid, a, b);
  if (!(upstream.shape() == a.shape())) {
    raise(ErrorCode::shape_mismatch, "upstream gradient " + to_string(upstream.shape()) +
                                         " does not match fuse output " + to_string(a.shape()));
  }
  if (!upstream.all_finite()) {
    raise(ErrorCode::non_finite_input, "upstream gradient is not finite");
  }

  FuseGradPair grads{Tensor(a.shape()), Tensor(a.shape())};
  const int id = fid.value();

  if (id == 4 || id == 10) {
    const Shape& s = a.shape();
    const auto dim = static_cast<Eigen::Index>(s.h);
    for (std::size_t p = 0; p < s.n * s.c; ++p) {
      const std::size_t off = p * s.plane();
      ConstPlaneMap ma(a.data() + off, dim, dim);
      ConstPlaneMap mb(b.data() + off, dim, dim);
      ConstPlaneMap mg(upstream.data() + off, dim, dim);
      PlaneMap da(grads.grad_a.data() + off, dim, dim);
      PlaneMap db(grads.grad_b.data() + off, dim, dim);
      if (id == 4) {  // O = A B
        da.noalias() = mg * mb.transpose();
        db.noalias() = ma.transpose() * mg;
      } else {  // O = A B^T
        da.noalias() = mg * mb;
        db.noalias() = mg.transpose() * ma;
      }
    }
    return grads;
  }

  const double* pa = a.data();
  const double* pb = b.data();
  const double* pg = upstream.data();
  double* da = grads.grad_a.data();
  double* db = grads.grad_b.data();
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = pa[i];
    const double y = pb[i];
    const double g = pg[i];
    switch (id) {
      case 1: da[i] = g * y; db[i] = g * x; break;
      case 2: {
        const double s = sign(x - y);
        da[i] = g * s;
        db[i] = -g * s;
        break;
      }
      case 3: {
        const double u = x * x - y * y;
        const double scale = g * sign(u) / std::sqrt(std::abs(u) + kSqrtGradEpsilon);
        da[i] = scale * x;
        db[i] = -scale * y;
        break;
      }
      case 5: da[i] = g; db[i] = g; break;
      case 6: da[i] = 0.5 * g; db[i] = 0.5 * g; break;
      case 7:
        if (x >= y) { da[i] = g; db[i] = 0.0; } else { da[i] = 0.0; db[i] = g; }
        break;
      case 8:
        if (x <= y) { da[i] = g; db[i] = 0.0; } else { da[i] = 0.0; db[i] = g; }
        break;
      case 9:
        da[i] = g * 2.0 * x * y * y;
        db[i] = g * 2.0 * y * x * x;
        break;
      case 11: {
        const double s = sign(x - y) * kInvSqrt2;
        da[i] = g * s;
        db[i] = -g * s;
        break;
      }
      case 12: {
        const double scale = g / std::sqrt(x * x + y * y + kSqrtGradEpsilon);
        da[i] = scale * x;
        db[i] = scale * y;
        break;
      }
      case 13:
        da[i] = g * (x - y);
        db[i] = -g * (x - y);
        break;
      default: break;
    }
  }
  return grads;
}

}  // namespace pairfuse

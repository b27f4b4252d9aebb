// Copyright 2026  The dsvae Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "dsvae/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

namespace dsvae::ad {
namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

using Index = Eigen::Index;

Index ix(std::size_t v) { return static_cast<Index>(v); }

[[noreturn]] void dim_error(const std::string& op, const std::string& detail) {
  throw DimensionError(op + ": " + detail);
}

void require_rank(const std::string& op, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    dim_error(op, "expected rank " + std::to_string(rank) + ", got shape " +
                      shape_str(s));
  }
}

template <class T>
BasicTape<T>& tape_of(const BasicVar<T>& a) {
  if (!a.valid()) throw ContractError("unbound variable");
  return *a.tape();
}

template <class T>
BasicTape<T>& tape_of(const BasicVar<T>& a, const BasicVar<T>& b) {
  if (a.tape() != b.tape() || !a.valid()) {
    throw ContractError("operands recorded on different tapes");
  }
  return *a.tape();
}

// Gathers the receptive fields of `img` ([C, Hb, Wb]) for every position of
// the Hs x Ws output grid into columns [col_offset, col_offset + Hs*Ws) of
// the row-major matrix `cols` (C*K*K rows, leading dimension ld).
template <class T>
void im2col(const T* img, std::size_t channels, std::size_t hb, std::size_t wb,
            std::size_t k, std::size_t stride, std::size_t pad, std::size_t hs,
            std::size_t ws, T* cols, std::size_t ld, std::size_t col_offset) {
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = img + c * hb * wb;
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        T* row = cols + ((c * k + ki) * k + kj) * ld + col_offset;
        for (std::size_t oy = 0; oy < hs; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * stride + ki) -
                                   static_cast<std::ptrdiff_t>(pad);
          T* dst = row + oy * ws;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(hb)) {
            std::fill(dst, dst + ws, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(y) * wb;
          for (std::size_t ox = 0; ox < ws; ++ox) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * stride + kj) -
                                     static_cast<std::ptrdiff_t>(pad);
            dst[ox] = (x < 0 || x >= static_cast<std::ptrdiff_t>(wb))
                          ? T(0)
                          : src[x];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters columns back onto `img`, accumulating.
template <class T>
void col2im(const T* cols, std::size_t ld, std::size_t col_offset,
            std::size_t channels, std::size_t hb, std::size_t wb,
            std::size_t k, std::size_t stride, std::size_t pad, std::size_t hs,
            std::size_t ws, T* img) {
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = img + c * hb * wb;
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        const T* row = cols + ((c * k + ki) * k + kj) * ld + col_offset;
        for (std::size_t oy = 0; oy < hs; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * stride + ki) -
                                   static_cast<std::ptrdiff_t>(pad);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(hb)) continue;
          const T* src = row + oy * ws;
          T* dst = plane + static_cast<std::size_t>(y) * wb;
          for (std::size_t ox = 0; ox < ws; ++ox) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * stride + kj) -
                                     static_cast<std::ptrdiff_t>(pad);
            if (x >= 0 && x < static_cast<std::ptrdiff_t>(wb)) dst[x] += src[ox];
          }
        }
      }
    }
  }
}

// [N, C, P] <-> [C, N*P]
template <class T>
void batch_to_channel_major(const T* src, std::size_t n, std::size_t c,
                            std::size_t p, T* dst) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      std::copy_n(src + (i * c + ch) * p, p, dst + ch * n * p + i * p);
}

template <class T>
void channel_major_to_batch(const T* src, std::size_t n, std::size_t c,
                            std::size_t p, T* dst, bool accumulate) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* s = src + ch * n * p + i * p;
      T* d = dst + (i * c + ch) * p;
      if (accumulate) {
        for (std::size_t j = 0; j < p; ++j) d[j] += s[j];
      } else {
        std::copy_n(s, p, d);
      }
    }
}

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, k, ho, wo;
};

template <class T>
ConvGeometry conv_geometry(const Shape& x, const Shape& k, std::size_t stride,
                           std::size_t pad) {
  require_rank("conv2d input", x, 4);
  require_rank("conv2d kernel", k, 4);
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  if (x[1] != k[1] || k[2] != k[3]) {
    dim_error("conv2d", "input " + shape_str(x) + " incompatible with kernel " +
                            shape_str(k));
  }
  return {x[0], x[1], x[2], x[3], k[0], k[2],
          conv_output_extent(x[2], k[2], stride, pad),
          conv_output_extent(x[3], k[2], stride, pad)};
}

template <class T>
ConvGeometry conv_transpose_geometry(const Shape& x, const Shape& k,
                                     std::size_t stride, std::size_t pad) {
  require_rank("conv2d_transpose input", x, 4);
  require_rank("conv2d_transpose kernel", k, 4);
  if (stride == 0) {
    throw ContractError("conv2d_transpose: stride must be positive");
  }
  if (x[1] != k[0] || k[2] != k[3]) {
    dim_error("conv2d_transpose", "input " + shape_str(x) +
                                      " incompatible with kernel " +
                                      shape_str(k));
  }
  return {x[0], x[1], x[2], x[3], k[1], k[2],
          conv_transpose_output_extent(x[2], k[2], stride, pad),
          conv_transpose_output_extent(x[3], k[2], stride, pad)};
}

template <class T>
T sigmoid_value(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// Maps each input flat index to the flat index of the reduced output.
std::vector<std::size_t> reduction_map(const Shape& in,
                                       const std::vector<bool>& reduced) {
  const std::size_t rank = in.size();
  std::vector<std::size_t> out_stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t a = rank; a-- > 0;) {
    if (!reduced[a]) {
      out_stride[a] = s;
      s *= in[a];
    }
  }
  std::vector<std::size_t> map(shape_numel(in));
  std::vector<std::size_t> idx(rank, 0);
  std::size_t out = 0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    map[i] = out;
    for (std::size_t a = rank; a-- > 0;) {
      ++idx[a];
      out += out_stride[a];
      if (idx[a] < in[a]) break;
      out -= out_stride[a] * idx[a];
      idx[a] = 0;
    }
  }
  return map;
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel,
                               std::size_t stride, std::size_t padding) {
  const auto span = static_cast<std::ptrdiff_t>(in + 2 * padding) -
                    static_cast<std::ptrdiff_t>(kernel);
  if (span < 0 || stride == 0) {
    throw DimensionError("conv2d: non-positive output extent for input " +
                         std::to_string(in) + ", kernel " +
                         std::to_string(kernel) + ", padding " +
                         std::to_string(padding));
  }
  return static_cast<std::size_t>(span) / stride + 1;
}

std::size_t conv_transpose_output_extent(std::size_t in, std::size_t kernel,
                                         std::size_t stride,
                                         std::size_t padding) {
  const auto out = static_cast<std::ptrdiff_t>((in - 1) * stride + kernel) -
                   static_cast<std::ptrdiff_t>(2 * padding);
  if (in == 0 || out < 1) {
    throw DimensionError("conv2d_transpose: non-positive output extent for input " +
                         std::to_string(in) + ", kernel " +
                         std::to_string(kernel) + ", padding " +
                         std::to_string(padding));
  }
  return static_cast<std::size_t>(out);
}

template <class T>
BasicVar<T> matmul(const BasicVar<T>& a, const BasicVar<T>& b) {
  auto& tape = tape_of(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  require_rank("matmul lhs", sa, 2);
  require_rank("matmul rhs", sb, 2);
  if (sa[1] != sb[0]) {
    dim_error("matmul", "shapes " + shape_str(sa) + " and " + shape_str(sb) +
                            " do not chain");
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  BasicTensor<T> out({m, n});
  MatMap<T>(out.raw(), ix(m), ix(n)).noalias() =
      ConstMatMap<T>(a.value().raw(), ix(m), ix(k)) *
      ConstMatMap<T>(b.value().raw(), ix(k), ix(n));
  return tape.record(
      OpKind::kMatmul, std::move(out), {a, b},
      [m, k, n](const BackwardContext<T>& c) {
        ConstMatMap<T> g(c.grad_out.raw(), ix(m), ix(n));
        if (c.input_grads[0]) {
          MatMap<T>(c.input_grads[0]->raw(), ix(m), ix(k)).noalias() +=
              g * ConstMatMap<T>(c.inputs[1]->raw(), ix(k), ix(n)).transpose();
        }
        if (c.input_grads[1]) {
          MatMap<T>(c.input_grads[1]->raw(), ix(k), ix(n)).noalias() +=
              ConstMatMap<T>(c.inputs[0]->raw(), ix(m), ix(k)).transpose() * g;
        }
      });
}

template <class T>
BasicVar<T> transpose(const BasicVar<T>& a) {
  auto& tape = tape_of(a);
  require_rank("transpose", a.shape(), 2);
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  BasicTensor<T> out({c, r});
  MatMap<T>(out.raw(), ix(c), ix(r)) =
      ConstMatMap<T>(a.value().raw(), ix(r), ix(c)).transpose();
  return tape.record(OpKind::kTranspose, std::move(out), {a},
                     [r, c](const BackwardContext<T>& ctx) {
                       MatMap<T>(ctx.input_grads[0]->raw(), ix(r), ix(c)) +=
                           ConstMatMap<T>(ctx.grad_out.raw(), ix(c), ix(r))
                               .transpose();
                     });
}

template <class T>
BasicVar<T> conv2d(const BasicVar<T>& input, const BasicVar<T>& kernel,
                   std::size_t stride, std::size_t padding) {
  auto& tape = tape_of(input, kernel);
  const ConvGeometry g =
      conv_geometry<T>(input.shape(), kernel.shape(), stride, padding);
  const std::size_t p = g.ho * g.wo;
  const std::size_t np = g.n * p;
  const std::size_t ckk = g.cin * g.k * g.k;

  std::vector<T> cols(ckk * np);
  const T* x = input.value().raw();
  for (std::size_t i = 0; i < g.n; ++i) {
    im2col(x + i * g.cin * g.h * g.w, g.cin, g.h, g.w, g.k, stride, padding,
           g.ho, g.wo, cols.data(), np, i * p);
  }
  std::vector<T> prod(g.cout * np);
  MatMap<T>(prod.data(), ix(g.cout), ix(np)).noalias() =
      ConstMatMap<T>(kernel.value().raw(), ix(g.cout), ix(ckk)) *
      ConstMatMap<T>(cols.data(), ix(ckk), ix(np));
  BasicTensor<T> out({g.n, g.cout, g.ho, g.wo});
  channel_major_to_batch(prod.data(), g.n, g.cout, p, out.raw(), false);

  return tape.record(
      OpKind::kConv2d, std::move(out), {input, kernel},
      [g, stride, padding, p, np, ckk](const BackwardContext<T>& c) {
        std::vector<T> gmat(g.cout * np);
        batch_to_channel_major(c.grad_out.raw(), g.n, g.cout, p, gmat.data());
        ConstMatMap<T> gm(gmat.data(), ix(g.cout), ix(np));
        const T* x = c.inputs[0]->raw();
        if (c.input_grads[1]) {
          std::vector<T> cols(ckk * np);
          for (std::size_t i = 0; i < g.n; ++i) {
            im2col(x + i * g.cin * g.h * g.w, g.cin, g.h, g.w, g.k, stride,
                   padding, g.ho, g.wo, cols.data(), np, i * p);
          }
          MatMap<T>(c.input_grads[1]->raw(), ix(g.cout), ix(ckk)).noalias() +=
              gm * ConstMatMap<T>(cols.data(), ix(ckk), ix(np)).transpose();
        }
        if (c.input_grads[0]) {
          std::vector<T> dcols(ckk * np);
          MatMap<T>(dcols.data(), ix(ckk), ix(np)).noalias() =
              ConstMatMap<T>(c.inputs[1]->raw(), ix(g.cout), ix(ckk))
                  .transpose() *
              gm;
          T* dx = c.input_grads[0]->raw();
          for (std::size_t i = 0; i < g.n; ++i) {
            col2im(dcols.data(), np, i * p, g.cin, g.h, g.w, g.k, stride,
                   padding, g.ho, g.wo, dx + i * g.cin * g.h * g.w);
          }
        }
      });
}

template <class T>
BasicVar<T> conv2d_transpose(const BasicVar<T>& input,
                             const BasicVar<T>& kernel, std::size_t stride,
                             std::size_t padding) {
  auto& tape = tape_of(input, kernel);
  const ConvGeometry g =
      conv_transpose_geometry<T>(input.shape(), kernel.shape(), stride, padding);
  const std::size_t p = g.h * g.w;  // input positions
  const std::size_t np = g.n * p;
  const std::size_t ckk = g.cout * g.k * g.k;

  std::vector<T> xmat(g.cin * np);
  batch_to_channel_major(input.value().raw(), g.n, g.cin, p, xmat.data());
  std::vector<T> cols(ckk * np);
  MatMap<T>(cols.data(), ix(ckk), ix(np)).noalias() =
      ConstMatMap<T>(kernel.value().raw(), ix(g.cin), ix(ckk)).transpose() *
      ConstMatMap<T>(xmat.data(), ix(g.cin), ix(np));
  BasicTensor<T> out({g.n, g.cout, g.ho, g.wo});
  T* o = out.raw();
  for (std::size_t i = 0; i < g.n; ++i) {
    col2im(cols.data(), np, i * p, g.cout, g.ho, g.wo, g.k, stride, padding,
           g.h, g.w, o + i * g.cout * g.ho * g.wo);
  }

  return tape.record(
      OpKind::kConvTranspose2d, std::move(out), {input, kernel},
      [g, stride, padding, p, np, ckk](const BackwardContext<T>& c) {
        std::vector<T> dcols(ckk * np);
        const T* go = c.grad_out.raw();
        for (std::size_t i = 0; i < g.n; ++i) {
          im2col(go + i * g.cout * g.ho * g.wo, g.cout, g.ho, g.wo, g.k,
                 stride, padding, g.h, g.w, dcols.data(), np, i * p);
        }
        ConstMatMap<T> dc(dcols.data(), ix(ckk), ix(np));
        if (c.input_grads[1]) {
          std::vector<T> xmat(g.cin * np);
          batch_to_channel_major(c.inputs[0]->raw(), g.n, g.cin, p,
                                 xmat.data());
          MatMap<T>(c.input_grads[1]->raw(), ix(g.cin), ix(ckk)).noalias() +=
              ConstMatMap<T>(xmat.data(), ix(g.cin), ix(np)) * dc.transpose();
        }
        if (c.input_grads[0]) {
          std::vector<T> dx(g.cin * np);
          MatMap<T>(dx.data(), ix(g.cin), ix(np)).noalias() =
              ConstMatMap<T>(c.inputs[1]->raw(), ix(g.cin), ix(ckk)) * dc;
          channel_major_to_batch(dx.data(), g.n, g.cin, p,
                                 c.input_grads[0]->raw(), true);
        }
      });
}

template <class T>
BasicVar<T> map_unary(UnaryOp op, const BasicVar<T>& x) {
  auto& tape = tape_of(x);
  const auto in = x.value().data();
  BasicTensor<T> out(x.shape());
  auto y = out.data();
  const T a = static_cast<T>(op.param);
  const T b = static_cast<T>(op.param2);
  const T floor = static_cast<T>(kLogFloor);
  switch (op.kind) {
    case UnaryKind::kRelu:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = in[i] > T(0) ? in[i] : T(0);
      break;
    case UnaryKind::kLeakyRelu:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = in[i] > T(0) ? in[i] : a * in[i];
      break;
    case UnaryKind::kSigmoid:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = sigmoid_value(in[i]);
      break;
    case UnaryKind::kExp:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::exp(in[i]);
      break;
    case UnaryKind::kLog:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::log(std::max(in[i], floor));
      break;
    case UnaryKind::kSquare:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = in[i] * in[i];
      break;
    case UnaryKind::kSqrt:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::sqrt(std::max(in[i], floor));
      break;
    case UnaryKind::kNegate:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = -in[i];
      break;
    case UnaryKind::kScale:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = a * in[i];
      break;
    case UnaryKind::kAddScalar:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = in[i] + a;
      break;
    case UnaryKind::kAbs:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::abs(in[i]);
      break;
    case UnaryKind::kClamp:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::clamp(in[i], a, b);
      break;
  }
  return tape.record(
      OpKind::kUnary, std::move(out), {x},
      [op, a, b, floor](const BackwardContext<T>& c) {
        const auto g = c.grad_out.data();
        const auto xv = c.inputs[0]->data();
        const auto yv = c.out.data();
        auto gx = c.input_grads[0]->data();
        for (std::size_t i = 0; i < gx.size(); ++i) {
          T d;
          switch (op.kind) {
            case UnaryKind::kRelu: d = xv[i] > T(0) ? T(1) : T(0); break;
            case UnaryKind::kLeakyRelu: d = xv[i] > T(0) ? T(1) : a; break;
            case UnaryKind::kSigmoid: d = yv[i] * (T(1) - yv[i]); break;
            case UnaryKind::kExp: d = yv[i]; break;
            case UnaryKind::kLog: d = xv[i] > floor ? T(1) / xv[i] : T(0); break;
            case UnaryKind::kSquare: d = T(2) * xv[i]; break;
            case UnaryKind::kSqrt: d = xv[i] > floor ? T(0.5) / yv[i] : T(0); break;
            case UnaryKind::kNegate: d = T(-1); break;
            case UnaryKind::kScale: d = a; break;
            case UnaryKind::kAddScalar: d = T(1); break;
            case UnaryKind::kAbs:
              d = xv[i] > T(0) ? T(1) : (xv[i] < T(0) ? T(-1) : T(0));
              break;
            case UnaryKind::kClamp:
              d = (xv[i] > a && xv[i] < b) ? T(1) : T(0);
              break;
            default: d = T(0);
          }
          gx[i] += g[i] * d;
        }
      });
}

template <class T>
BasicVar<T> zip_binary(BinaryKind kind, const BasicVar<T>& a,
                       const BasicVar<T>& b) {
  auto& tape = tape_of(a, b);
  const auto& ta = a.value();
  const auto& tb = b.value();
  const bool a_scalar = ta.numel() == 1 && tb.numel() != 1;
  const bool b_scalar = tb.numel() == 1 && ta.numel() != 1;
  if (!a_scalar && !b_scalar && ta.shape() != tb.shape()) {
    dim_error("zip_binary", "shapes " + shape_str(ta.shape()) + " and " +
                                shape_str(tb.shape()) + " differ");
  }
  const Shape out_shape = a_scalar ? tb.shape() : ta.shape();
  BasicTensor<T> out(out_shape);
  auto y = out.data();
  const auto av = ta.data();
  const auto bv = tb.data();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const T u = av[a_scalar ? 0 : i];
    const T v = bv[b_scalar ? 0 : i];
    switch (kind) {
      case BinaryKind::kAdd: y[i] = u + v; break;
      case BinaryKind::kSub: y[i] = u - v; break;
      case BinaryKind::kMul: y[i] = u * v; break;
      case BinaryKind::kDiv: y[i] = u / v; break;
    }
  }
  return tape.record(
      OpKind::kBinary, std::move(out), {a, b},
      [kind, a_scalar, b_scalar](const BackwardContext<T>& c) {
        const auto g = c.grad_out.data();
        const auto av = c.inputs[0]->data();
        const auto bv = c.inputs[1]->data();
        BasicTensor<T>* ga = c.input_grads[0];
        BasicTensor<T>* gb = c.input_grads[1];
        for (std::size_t i = 0; i < g.size(); ++i) {
          const std::size_t ia = a_scalar ? 0 : i;
          const std::size_t ib = b_scalar ? 0 : i;
          T da, db;
          switch (kind) {
            case BinaryKind::kAdd: da = T(1); db = T(1); break;
            case BinaryKind::kSub: da = T(1); db = T(-1); break;
            case BinaryKind::kMul: da = bv[ib]; db = av[ia]; break;
            case BinaryKind::kDiv:
              da = T(1) / bv[ib];
              db = -av[ia] / (bv[ib] * bv[ib]);
              break;
            default: da = db = T(0);
          }
          if (ga) (*ga)[ia] += g[i] * da;
          if (gb) (*gb)[ib] += g[i] * db;
        }
      });
}

template <class T>
BasicVar<T> reduce(ReduceKind kind, const BasicVar<T>& x,
                   std::optional<std::vector<std::size_t>> axes) {
  auto& tape = tape_of(x);
  const Shape& in = x.shape();
  std::vector<bool> reduced(in.size(), !axes.has_value());
  if (axes) {
    for (std::size_t a : *axes) {
      if (a >= in.size()) {
        dim_error("reduce", "axis " + std::to_string(a) +
                                " invalid for shape " + shape_str(in));
      }
      reduced[a] = true;
    }
  }
  Shape out_shape;
  std::size_t count = 1;
  for (std::size_t a = 0; a < in.size(); ++a) {
    if (reduced[a]) {
      count *= in[a];
    } else {
      out_shape.push_back(in[a]);
    }
  }
  const auto map = reduction_map(in, reduced);
  std::vector<double> acc(shape_numel(out_shape), 0.0);
  const auto xv = x.value().data();
  for (std::size_t i = 0; i < xv.size(); ++i) acc[map[i]] += xv[i];
  BasicTensor<T> out(out_shape);
  const double div = kind == ReduceKind::kMean ? static_cast<double>(count) : 1.0;
  for (std::size_t j = 0; j < acc.size(); ++j) {
    out[j] = static_cast<T>(acc[j] / div);
  }
  return tape.record(OpKind::kReduce, std::move(out), {x},
                     [reduced, div](const BackwardContext<T>& c) {
                       const auto map =
                           reduction_map(c.inputs[0]->shape(), reduced);
                       const auto g = c.grad_out.data();
                       auto gx = c.input_grads[0]->data();
                       const T inv = static_cast<T>(1.0 / div);
                       for (std::size_t i = 0; i < gx.size(); ++i) {
                         gx[i] += g[map[i]] * inv;
                       }
                     });
}

template <class T>
BasicVar<T> reshape(const BasicVar<T>& x, Shape shape) {
  auto& tape = tape_of(x);
  if (shape_numel(shape) != x.value().numel()) {
    dim_error("reshape", "cannot view " + shape_str(x.shape()) + " as " +
                             shape_str(shape));
  }
  return tape.record(OpKind::kReshape, x.value().reshaped(std::move(shape)),
                     {x}, [](const BackwardContext<T>& c) {
                       auto gx = c.input_grads[0]->data();
                       const auto g = c.grad_out.data();
                       for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
                     });
}

template <class T>
BasicVar<T> add_bias(const BasicVar<T>& x, const BasicVar<T>& b) {
  auto& tape = tape_of(x, b);
  const Shape& s = x.shape();
  if (s.size() < 2 || b.shape().size() != 1 || b.shape()[0] != s[1]) {
    dim_error("add_bias", "bias " + shape_str(b.shape()) +
                              " does not match axis 1 of " + shape_str(s));
  }
  const std::size_t outer = s[0], ch = s[1];
  const std::size_t inner = x.value().numel() / (outer * ch);
  BasicTensor<T> out = x.value();
  const auto bv = b.value().data();
  T* y = out.raw();
  for (std::size_t i = 0; i < outer; ++i)
    for (std::size_t c = 0; c < ch; ++c) {
      T* row = y + (i * ch + c) * inner;
      for (std::size_t j = 0; j < inner; ++j) row[j] += bv[c];
    }
  return tape.record(OpKind::kAddBias, std::move(out), {x, b},
                     [outer, ch, inner](const BackwardContext<T>& c) {
                       const T* g = c.grad_out.raw();
                       if (c.input_grads[0]) {
                         auto gx = c.input_grads[0]->data();
                         for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
                       }
                       if (c.input_grads[1]) {
                         T* gb = c.input_grads[1]->raw();
                         for (std::size_t i = 0; i < outer; ++i)
                           for (std::size_t k = 0; k < ch; ++k) {
                             const T* row = g + (i * ch + k) * inner;
                             double acc = 0.0;
                             for (std::size_t j = 0; j < inner; ++j) acc += row[j];
                             gb[k] += static_cast<T>(acc);
                           }
                       }
                     });
}

template <class T>
BasicVar<T> concat(const BasicVar<T>& a, const BasicVar<T>& b,
                   std::size_t axis) {
  auto& tape = tape_of(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  bool ok = sa.size() == sb.size() && axis < sa.size();
  for (std::size_t i = 0; ok && i < sa.size(); ++i) {
    ok = i == axis || sa[i] == sb[i];
  }
  if (!ok) {
    dim_error("concat", "shapes " + shape_str(sa) + " and " + shape_str(sb) +
                            " cannot be joined on axis " + std::to_string(axis));
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= sa[i];
  const std::size_t ia = a.value().numel() / outer;
  const std::size_t ib = b.value().numel() / outer;
  Shape so = sa;
  so[axis] += sb[axis];
  BasicTensor<T> out(so);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(a.value().raw() + o * ia, ia, out.raw() + o * (ia + ib));
    std::copy_n(b.value().raw() + o * ib, ib, out.raw() + o * (ia + ib) + ia);
  }
  return tape.record(OpKind::kConcat, std::move(out), {a, b},
                     [outer, ia, ib](const BackwardContext<T>& c) {
                       const T* g = c.grad_out.raw();
                       for (std::size_t o = 0; o < outer; ++o) {
                         if (c.input_grads[0]) {
                           T* d = c.input_grads[0]->raw() + o * ia;
                           const T* s = g + o * (ia + ib);
                           for (std::size_t j = 0; j < ia; ++j) d[j] += s[j];
                         }
                         if (c.input_grads[1]) {
                           T* d = c.input_grads[1]->raw() + o * ib;
                           const T* s = g + o * (ia + ib) + ia;
                           for (std::size_t j = 0; j < ib; ++j) d[j] += s[j];
                         }
                       }
                     });
}

template <class T>
BasicVar<T> normalize_rows(const BasicVar<T>& x, double eps) {
  auto& tape = tape_of(x);
  require_rank("normalize_rows", x.shape(), 2);
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  std::vector<T> norms(rows);
  std::vector<bool> floored(rows);
  BasicTensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.value().raw() + r * cols;
    double ss = 0.0;
    for (std::size_t j = 0; j < cols; ++j) ss += double(xr[j]) * xr[j];
    const double n = std::sqrt(ss);
    floored[r] = n < eps;
    norms[r] = static_cast<T>(floored[r] ? eps : n);
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = xr[j] / norms[r];
  }
  return tape.record(
      OpKind::kNormalizeRows, std::move(out), {x},
      [rows, cols, norms, floored](const BackwardContext<T>& c) {
        for (std::size_t r = 0; r < rows; ++r) {
          const T* g = c.grad_out.raw() + r * cols;
          const T* y = c.out.raw() + r * cols;
          T* gx = c.input_grads[0]->raw() + r * cols;
          double dot = 0.0;
          if (!floored[r]) {
            for (std::size_t j = 0; j < cols; ++j) dot += double(y[j]) * g[j];
          }
          for (std::size_t j = 0; j < cols; ++j) {
            gx[j] += (g[j] - static_cast<T>(dot) * y[j]) / norms[r];
          }
        }
      });
}

template <class T>
BasicVar<T> cross_entropy(const BasicVar<T>& logits,
                          std::span<const int> labels) {
  auto& tape = tape_of(logits);
  require_rank("cross_entropy", logits.shape(), 2);
  const std::size_t rows = logits.shape()[0], classes = logits.shape()[1];
  if (labels.size() != rows) {
    dim_error("cross_entropy", std::to_string(labels.size()) +
                                   " labels for logits " +
                                   shape_str(logits.shape()));
  }
  std::vector<int> y(labels.begin(), labels.end());
  for (int l : y) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      throw ContractError("cross_entropy: label " + std::to_string(l) +
                          " out of range");
    }
  }
  BasicTensor<T> probs({rows, classes});
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* l = logits.value().raw() + r * classes;
    const T mx = *std::max_element(l, l + classes);
    double z = 0.0;
    for (std::size_t j = 0; j < classes; ++j) z += std::exp(double(l[j] - mx));
    for (std::size_t j = 0; j < classes; ++j) {
      probs[r * classes + j] = static_cast<T>(std::exp(double(l[j] - mx)) / z);
    }
    total += std::log(z) + double(mx) - double(l[y[r]]);
  }
  BasicTensor<T> out = BasicTensor<T>::scalar(static_cast<T>(total / double(rows)));
  return tape.record(
      OpKind::kCrossEntropy, std::move(out), {logits},
      [rows, classes, y, probs](const BackwardContext<T>& c) {
        const T g = c.grad_out[0] / static_cast<T>(rows);
        T* gx = c.input_grads[0]->raw();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < classes; ++j) {
            const T onehot = static_cast<std::size_t>(y[r]) == j ? T(1) : T(0);
            gx[r * classes + j] += g * (probs[r * classes + j] - onehot);
          }
      });
}

#define DSVAE_INSTANTIATE_OPS(T)                                              \
  template BasicVar<T> matmul(const BasicVar<T>&, const BasicVar<T>&);        \
  template BasicVar<T> transpose(const BasicVar<T>&);                         \
  template BasicVar<T> conv2d(const BasicVar<T>&, const BasicVar<T>&,         \
                              std::size_t, std::size_t);                      \
  template BasicVar<T> conv2d_transpose(const BasicVar<T>&,                   \
                                        const BasicVar<T>&, std::size_t,      \
                                        std::size_t);                         \
  template BasicVar<T> map_unary(UnaryOp, const BasicVar<T>&);                \
  template BasicVar<T> zip_binary(BinaryKind, const BasicVar<T>&,             \
                                  const BasicVar<T>&);                        \
  template BasicVar<T> reduce(ReduceKind, const BasicVar<T>&,                 \
                              std::optional<std::vector<std::size_t>>);       \
  template BasicVar<T> reshape(const BasicVar<T>&, Shape);                    \
  template BasicVar<T> add_bias(const BasicVar<T>&, const BasicVar<T>&);      \
  template BasicVar<T> concat(const BasicVar<T>&, const BasicVar<T>&,         \
                              std::size_t);                                   \
  template BasicVar<T> normalize_rows(const BasicVar<T>&, double);            \
  template BasicVar<T> cross_entropy(const BasicVar<T>&, std::span<const int>);

DSVAE_INSTANTIATE_OPS(float)
DSVAE_INSTANTIATE_OPS(double)

#undef DSVAE_INSTANTIATE_OPS

}  // namespace dsvae::ad

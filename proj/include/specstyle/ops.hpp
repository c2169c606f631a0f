// include/specstyle/ops.hpp
//
// Differentiable tensor ops over nn::Tape. Layout conventions:
//   activations        [B, C, H, W] row-major
//   conv weights       [Cout, Cin, kH, kW]
//   deconv weights     [Cin, Cout, kH, kW]
// Convolutions lower to im2col / col2im plus the matmul kernels; the column
// matrices are recomputed during backward instead of being cached, trading a
// memory-bound copy for several hundred MB of activation storage.

#pragma once

#include <algorithm>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "specstyle/kernels.hpp"
#include "specstyle/tensor.hpp"

namespace specstyle::nn {

namespace detail {

template <typename T>
inline void require_same_tape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.tape == nullptr || b.tape == nullptr || a.tape != b.tape) {
    throw ValueError(std::string(op) + ": operands must live on the same tape");
  }
}

template <typename T>
inline void require_shape_eq(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape != b.shape) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
  }
}

template <typename T>
inline void require_rank4(const Tensor<T>& t, const char* op, const char* role) {
  if (t.shape.size() != 4) {
    throw ShapeError(std::string(op) + ": " + role + " must be rank 4, got " +
                     shape_str(t.shape));
  }
}

// Gather input patches into col[(Ci*kh*kw) x (gridH*gridW)].
// col[(ci*kh+u)*kw+v][gy*gridW+gx] = x[ci][gy*stride - pad + u][gx*stride - pad + v]
// with zero padding outside [0,H) x [0,W).
template <typename T>
void im2col(const T* x, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
            int64_t stride, int64_t pad, int64_t grid_h, int64_t grid_w, T* col) {
  const int64_t L = grid_h * grid_w;
  for (int64_t ci = 0; ci < C; ++ci) {
    const T* xc = x + ci * H * W;
    for (int64_t u = 0; u < kh; ++u) {
      for (int64_t v = 0; v < kw; ++v) {
        T* row = col + ((ci * kh + u) * kw + v) * L;
        for (int64_t gy = 0; gy < grid_h; ++gy) {
          const int64_t iy = gy * stride - pad + u;
          T* dst = row + gy * grid_w;
          if (iy < 0 || iy >= H) {
            std::fill(dst, dst + grid_w, T(0));
            continue;
          }
          const T* src = xc + iy * W;
          for (int64_t gx = 0; gx < grid_w; ++gx) {
            const int64_t ix = gx * stride - pad + v;
            dst[gx] = (ix >= 0 && ix < W) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back onto the [C x H x W] canvas.
template <typename T>
void col2im_accum(const T* col, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
                  int64_t stride, int64_t pad, int64_t grid_h, int64_t grid_w, T* x) {
  const int64_t L = grid_h * grid_w;
  for (int64_t ci = 0; ci < C; ++ci) {
    T* xc = x + ci * H * W;
    for (int64_t u = 0; u < kh; ++u) {
      for (int64_t v = 0; v < kw; ++v) {
        const T* row = col + ((ci * kh + u) * kw + v) * L;
        for (int64_t gy = 0; gy < grid_h; ++gy) {
          const int64_t iy = gy * stride - pad + u;
          if (iy < 0 || iy >= H) continue;
          T* dst = xc + iy * W;
          const T* src = row + gy * grid_w;
          for (int64_t gx = 0; gx < grid_w; ++gx) {
            const int64_t ix = gx * stride - pad + v;
            if (ix >= 0 && ix < W) dst[ix] += src[gx];
          }
        }
      }
    }
  }
}

template <typename T>
void transpose(const T* a, int64_t rows, int64_t cols, T* out) {
  for (int64_t i = 0; i < rows; ++i) {
    for (int64_t j = 0; j < cols; ++j) {
      out[j * rows + i] = a[i * cols + j];
    }
  }
}

}  // namespace detail

// ---- elementwise -----------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_tape(a, b, "add");
  detail::require_shape_eq(a, b, "add");
  const size_t n = size_t(a.numel());
  std::vector<T> out(n);
  kernels::add(a.ptr(), b.ptr(), out.data(), n);
  throw_if_not_finite(out, "add");
  const bool needs = a.requires_grad || b.requires_grad;
  const int na = a.node, nb = b.node;
  const bool ga = a.requires_grad, gb = b.requires_grad;
  return a.tape->result(a.shape, std::move(out), needs,
                        [na, nb, ga, gb, n](Tape<T>& tape, const std::vector<T>& gout) {
                          if (ga) kernels::axpy(T(1), gout.data(), tape.grad(na).data(), n);
                          if (gb) kernels::axpy(T(1), gout.data(), tape.grad(nb).data(), n);
                        });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  if (a.tape == nullptr) throw ValueError("scale: operand is not attached to a tape");
  const size_t n = size_t(a.numel());
  std::vector<T> out(n);
  kernels::scale(s, a.ptr(), out.data(), n);
  throw_if_not_finite(out, "scale");
  const int na = a.node;
  const bool ga = a.requires_grad;
  return a.tape->result(a.shape, std::move(out), ga,
                        [na, ga, s, n](Tape<T>& tape, const std::vector<T>& gout) {
                          if (ga) kernels::axpy(s, gout.data(), tape.grad(na).data(), n);
                        });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  if (a.tape == nullptr) throw ValueError("sum: operand is not attached to a tape");
  const size_t n = size_t(a.numel());
  std::vector<T> out{kernels::sum(a.ptr(), n)};
  throw_if_not_finite(out, "sum");
  const int na = a.node;
  const bool ga = a.requires_grad;
  return a.tape->result({1}, std::move(out), ga,
                        [na, ga, n](Tape<T>& tape, const std::vector<T>& gout) {
                          if (!ga) return;
                          std::vector<T>& g = tape.grad(na);
                          const T up = gout[0];
                          for (size_t i = 0; i < n; ++i) g[i] += up;
                        });
}

// Mean squared error over all elements; shapes must match exactly.
template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_tape(a, b, "mse");
  detail::require_shape_eq(a, b, "mse");
  const size_t n = size_t(a.numel());
  if (n == 0) throw ShapeError("mse: empty tensors");
  std::vector<T> out{kernels::sumsq_diff(a.ptr(), b.ptr(), n) / T(n)};
  throw_if_not_finite(out, "mse");
  const bool needs = a.requires_grad || b.requires_grad;
  auto da = a.data;
  auto db = b.data;
  const int na = a.node, nb = b.node;
  const bool ga = a.requires_grad, gb = b.requires_grad;
  return a.tape->result(
      {1}, std::move(out), needs,
      [da, db, na, nb, ga, gb, n](Tape<T>& tape, const std::vector<T>& gout) {
        std::vector<T> diff(n);
        kernels::sub(da->data(), db->data(), diff.data(), n);
        const T s = T(2) * gout[0] / T(n);
        if (ga) kernels::axpy(s, diff.data(), tape.grad(na).data(), n);
        if (gb) kernels::axpy(-s, diff.data(), tape.grad(nb).data(), n);
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  if (x.tape == nullptr) throw ValueError("relu: operand is not attached to a tape");
  const size_t n = size_t(x.numel());
  std::vector<T> out(n);
  kernels::relu(x.ptr(), out.data(), n);
  throw_if_not_finite(out, "relu");
  auto dx = x.data;
  const int nx = x.node;
  const bool gx = x.requires_grad;
  return x.tape->result(x.shape, std::move(out), gx,
                        [dx, nx, gx, n](Tape<T>& tape, const std::vector<T>& gout) {
                          if (gx) {
                            kernels::relu_backward(dx->data(), gout.data(),
                                                   tape.grad(nx).data(), n);
                          }
                        });
}

// ---- Gram matrices ---------------------------------------------------------

// Per-item Gram matrix of a feature map: out[b] = F F^T with F the [C x H*W]
// flattening of item b, scaled by 1 / (C*H*W). Output shape [B, C, C].
template <typename T>
Tensor<T> gram(const Tensor<T>& x) {
  detail::require_rank4(x, "gram", "input");
  const int64_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  const int64_t HW = H * W;
  if (C < 1 || HW < 1) throw ShapeError("gram: empty feature map " + shape_str(x.shape));
  const T norm = T(1) / (T(C) * T(HW));
  std::vector<T> out(size_t(B * C * C), T(0));
  for (int64_t b = 0; b < B; ++b) {
    const T* f = x.ptr() + b * C * HW;
    T* g = out.data() + b * C * C;
    kernels::matmul_nt_accum(g, f, f, size_t(C), size_t(HW), size_t(C));
    kernels::scale(norm, g, g, size_t(C * C));
  }
  throw_if_not_finite(out, "gram");
  auto dx = x.data;
  const int nx = x.node;
  const bool gx = x.requires_grad;
  return x.tape->result(
      {B, C, C}, std::move(out), gx,
      [dx, nx, gx, B, C, HW, norm](Tape<T>& tape, const std::vector<T>& gout) {
        if (!gx) return;
        std::vector<T>& gin = tape.grad(nx);
        std::vector<T> sym(size_t(C * C));
        for (int64_t b = 0; b < B; ++b) {
          const T* gg = gout.data() + b * C * C;
          // d/dF of F F^T contracts both factors: gin += (G + G^T) F * norm.
          for (int64_t i = 0; i < C; ++i) {
            for (int64_t j = 0; j < C; ++j) {
              sym[size_t(i * C + j)] = (gg[i * C + j] + gg[j * C + i]) * norm;
            }
          }
          kernels::matmul_nn_accum(gin.data() + b * C * HW, sym.data(),
                                   dx->data() + b * C * HW, size_t(C), size_t(C),
                                   size_t(HW));
        }
      });
}

// ---- convolutions ----------------------------------------------------------

inline int64_t conv_out_dim(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

inline int64_t deconv_out_dim(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  return (in - 1) * stride - 2 * pad + k;
}

// Strided 2-d convolution with zero padding. x [B,Ci,H,W], w [Co,Ci,kh,kw],
// bias [Co] -> [B,Co,OH,OW].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 int64_t stride, int64_t pad) {
  detail::require_same_tape(x, w, "conv2d");
  detail::require_same_tape(x, bias, "conv2d");
  detail::require_rank4(x, "conv2d", "input");
  detail::require_rank4(w, "conv2d", "weight");
  if (stride < 1 || pad < 0) throw ValueError("conv2d: invalid stride/padding");
  const int64_t B = x.shape[0], Ci = x.shape[1], H = x.shape[2], W = x.shape[3];
  const int64_t Co = w.shape[0], kh = w.shape[2], kw = w.shape[3];
  if (w.shape[1] != Ci) {
    throw ShapeError("conv2d: weight expects " + std::to_string(w.shape[1]) +
                     " input channels, input has " + std::to_string(Ci));
  }
  if (bias.shape != std::vector<int64_t>{Co}) {
    throw ShapeError("conv2d: bias must have shape [" + std::to_string(Co) + "], got " +
                     shape_str(bias.shape));
  }
  const int64_t OH = conv_out_dim(H, kh, stride, pad);
  const int64_t OW = conv_out_dim(W, kw, stride, pad);
  if (OH < 1 || OW < 1) {
    throw ShapeError("conv2d: output would be empty for input " + shape_str(x.shape));
  }
  const int64_t R = Ci * kh * kw;
  const int64_t L = OH * OW;

  std::vector<T> out(size_t(B * Co * L));
  std::vector<T> col(size_t(R * L));
  for (int64_t b = 0; b < B; ++b) {
    detail::im2col(x.ptr() + b * Ci * H * W, Ci, H, W, kh, kw, stride, pad, OH, OW,
                   col.data());
    T* ob = out.data() + b * Co * L;
    for (int64_t co = 0; co < Co; ++co) {
      std::fill(ob + co * L, ob + (co + 1) * L, bias.ptr()[co]);
    }
    kernels::matmul_nn_accum(ob, w.ptr(), col.data(), size_t(Co), size_t(R), size_t(L));
  }
  throw_if_not_finite(out, "conv2d");

  const bool needs = x.requires_grad || w.requires_grad || bias.requires_grad;
  auto dx = x.data;
  auto dw = w.data;
  const int nx = x.node, nw = w.node, nb = bias.node;
  const bool gx = x.requires_grad, gw = w.requires_grad, gb = bias.requires_grad;
  return x.tape->result(
      {B, Co, OH, OW}, std::move(out), needs,
      [dx, dw, nx, nw, nb, gx, gw, gb, B, Ci, H, W, Co, kh, kw, stride, pad, OH, OW, R,
       L](Tape<T>& tape, const std::vector<T>& gout) {
        std::vector<T> col(size_t(R * L));
        std::vector<T> wt;
        if (gx) {
          wt.resize(size_t(R * Co));
          detail::transpose(dw->data(), Co, R, wt.data());
        }
        std::vector<T> gcol(gx ? size_t(R * L) : 0);
        for (int64_t b = 0; b < B; ++b) {
          const T* go = gout.data() + b * Co * L;
          if (gw || gx) {
            detail::im2col(dx->data() + b * Ci * H * W, Ci, H, W, kh, kw, stride, pad, OH,
                           OW, col.data());
          }
          if (gw) {
            // dL/dW[co][r] += dot(gout row co, col row r)
            kernels::matmul_nt_accum(tape.grad(nw).data(), go, col.data(), size_t(Co),
                                     size_t(L), size_t(R));
          }
          if (gb) {
            std::vector<T>& gbias = tape.grad(nb);
            for (int64_t co = 0; co < Co; ++co) {
              gbias[size_t(co)] += kernels::sum(go + co * L, size_t(L));
            }
          }
          if (gx) {
            std::fill(gcol.begin(), gcol.end(), T(0));
            kernels::matmul_nn_accum(gcol.data(), wt.data(), go, size_t(R), size_t(Co),
                                     size_t(L));
            detail::col2im_accum(gcol.data(), Ci, H, W, kh, kw, stride, pad, OH, OW,
                                 tape.grad(nx).data() + b * Ci * H * W);
          }
        }
      });
}

// Strided transposed convolution (the adjoint map of conv2d with the same
// geometry). x [B,Ci,H,W], w [Ci,Co,kh,kw], bias [Co] -> [B,Co,OH,OW] with
// OH = (H-1)*stride - 2*pad + kh.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                           int64_t stride, int64_t pad) {
  detail::require_same_tape(x, w, "conv_transpose2d");
  detail::require_same_tape(x, bias, "conv_transpose2d");
  detail::require_rank4(x, "conv_transpose2d", "input");
  detail::require_rank4(w, "conv_transpose2d", "weight");
  if (stride < 1 || pad < 0) throw ValueError("conv_transpose2d: invalid stride/padding");
  const int64_t B = x.shape[0], Ci = x.shape[1], H = x.shape[2], W = x.shape[3];
  const int64_t Co = w.shape[1], kh = w.shape[2], kw = w.shape[3];
  if (w.shape[0] != Ci) {
    throw ShapeError("conv_transpose2d: weight expects " + std::to_string(w.shape[0]) +
                     " input channels, input has " + std::to_string(Ci));
  }
  if (bias.shape != std::vector<int64_t>{Co}) {
    throw ShapeError("conv_transpose2d: bias must have shape [" + std::to_string(Co) +
                     "], got " + shape_str(bias.shape));
  }
  const int64_t OH = deconv_out_dim(H, kh, stride, pad);
  const int64_t OW = deconv_out_dim(W, kw, stride, pad);
  if (OH < 1 || OW < 1) {
    throw ShapeError("conv_transpose2d: output would be empty for input " +
                     shape_str(x.shape));
  }
  const int64_t R = Co * kh * kw;  // col rows for the output-side patches
  const int64_t L = H * W;         // input grid positions

  // wq[(co*kh+u)*kw+v][ci]: weight viewed with the output patch index as rows.
  std::vector<T> wq(size_t(R * Ci));
  for (int64_t ci = 0; ci < Ci; ++ci) {
    for (int64_t r = 0; r < R; ++r) {
      wq[size_t(r * Ci + ci)] = w.ptr()[ci * R + r];
    }
  }

  std::vector<T> out(size_t(B * Co * OH * OW));
  std::vector<T> colo(size_t(R * L));
  for (int64_t b = 0; b < B; ++b) {
    std::fill(colo.begin(), colo.end(), T(0));
    kernels::matmul_nn_accum(colo.data(), wq.data(), x.ptr() + b * Ci * L, size_t(R),
                             size_t(Ci), size_t(L));
    T* ob = out.data() + b * Co * OH * OW;
    for (int64_t co = 0; co < Co; ++co) {
      std::fill(ob + co * OH * OW, ob + (co + 1) * OH * OW, bias.ptr()[co]);
    }
    detail::col2im_accum(colo.data(), Co, OH, OW, kh, kw, stride, pad, H, W, ob);
  }
  throw_if_not_finite(out, "conv_transpose2d");

  const bool needs = x.requires_grad || w.requires_grad || bias.requires_grad;
  auto dx = x.data;
  auto dw = w.data;
  const int nx = x.node, nw = w.node, nb = bias.node;
  const bool gx = x.requires_grad, gw = w.requires_grad, gb = bias.requires_grad;
  return x.tape->result(
      {B, Co, OH, OW}, std::move(out), needs,
      [dx, dw, nx, nw, nb, gx, gw, gb, B, Ci, H, W, Co, kh, kw, stride, pad, OH, OW, R,
       L](Tape<T>& tape, const std::vector<T>& gout) {
        std::vector<T> gcolo(size_t(R * L));
        for (int64_t b = 0; b < B; ++b) {
          const T* go = gout.data() + b * Co * OH * OW;
          // Patches of the upstream gradient over the output canvas.
          detail::im2col(go, Co, OH, OW, kh, kw, stride, pad, H, W, gcolo.data());
          if (gw) {
            // dL/dW[ci][r] += dot(x row ci, gcolo row r); accumulate via the
            // [Ci x R] view, which is exactly the stored weight layout.
            kernels::matmul_nt_accum(tape.grad(nw).data(), dx->data() + b * Ci * L,
                                     gcolo.data(), size_t(Ci), size_t(L), size_t(R));
          }
          if (gb) {
            std::vector<T>& gbias = tape.grad(nb);
            for (int64_t co = 0; co < Co; ++co) {
              gbias[size_t(co)] += kernels::sum(go + co * OH * OW, size_t(OH * OW));
            }
          }
          if (gx) {
            // dL/dx = W (viewed [Ci x R]) * gcolo.
            kernels::matmul_nn_accum(tape.grad(nx).data() + b * Ci * L, dw->data(),
                                     gcolo.data(), size_t(Ci), size_t(R), size_t(L));
          }
        }
      });
}

// ---- batch normalization ---------------------------------------------------

enum class BnMode { train, eval };

// Running statistics owned by the caller (the layer), updated in train mode.
template <typename T>
struct BnStats {
  std::shared_ptr<std::vector<T>> running_mean;
  std::shared_ptr<std::vector<T>> running_var;
};

// Per-channel batch normalization of [B,C,H,W] with learnable scale/shift
// ([C] each). Train mode normalizes by biased batch statistics and folds the
// unbiased variance into the running estimates with the given momentum; eval
// mode normalizes by the running statistics.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& scale_t, const Tensor<T>& shift_t,
                      BnStats<T>& stats, BnMode mode, T momentum, T eps) {
  detail::require_same_tape(x, scale_t, "batchnorm2d");
  detail::require_same_tape(x, shift_t, "batchnorm2d");
  detail::require_rank4(x, "batchnorm2d", "input");
  const int64_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  if (scale_t.shape != std::vector<int64_t>{C} || shift_t.shape != std::vector<int64_t>{C}) {
    throw ShapeError("batchnorm2d: scale/shift must have shape [" + std::to_string(C) + "]");
  }
  if (!stats.running_mean || !stats.running_var ||
      stats.running_mean->size() != size_t(C) || stats.running_var->size() != size_t(C)) {
    throw ShapeError("batchnorm2d: running statistics must have length " + std::to_string(C));
  }
  const int64_t HW = H * W;
  const int64_t n = B * HW;  // samples per channel
  if (mode == BnMode::train && n < 2) {
    throw ShapeError("batchnorm2d: train mode needs at least 2 samples per channel, got " +
                     std::to_string(n));
  }

  std::vector<T> mean(static_cast<size_t>(C));
  std::vector<T> invstd(static_cast<size_t>(C));
  if (mode == BnMode::train) {
    for (int64_t c = 0; c < C; ++c) {
      T acc = T(0);
      for (int64_t b = 0; b < B; ++b) {
        acc += kernels::sum(x.ptr() + (b * C + c) * HW, size_t(HW));
      }
      const T m = acc / T(n);
      T var_acc = T(0);
      for (int64_t b = 0; b < B; ++b) {
        const T* xc = x.ptr() + (b * C + c) * HW;
        for (int64_t i = 0; i < HW; ++i) {
          const T d = xc[i] - m;
          var_acc += d * d;
        }
      }
      const T var_biased = var_acc / T(n);
      const T var_unbiased = var_acc / T(n - 1);
      mean[size_t(c)] = m;
      invstd[size_t(c)] = T(1) / std::sqrt(var_biased + eps);
      T& rm = (*stats.running_mean)[size_t(c)];
      T& rv = (*stats.running_var)[size_t(c)];
      rm = (T(1) - momentum) * rm + momentum * m;
      rv = (T(1) - momentum) * rv + momentum * var_unbiased;
    }
  } else {
    for (int64_t c = 0; c < C; ++c) {
      mean[size_t(c)] = (*stats.running_mean)[size_t(c)];
      invstd[size_t(c)] = T(1) / std::sqrt((*stats.running_var)[size_t(c)] + eps);
    }
  }

  std::vector<T> out(size_t(B * C * HW));
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t c = 0; c < C; ++c) {
      const T* xc = x.ptr() + (b * C + c) * HW;
      T* oc = out.data() + (b * C + c) * HW;
      const T m = mean[size_t(c)], is = invstd[size_t(c)];
      const T g = scale_t.ptr()[c], sh = shift_t.ptr()[c];
      for (int64_t i = 0; i < HW; ++i) {
        oc[i] = g * (xc[i] - m) * is + sh;
      }
    }
  }
  throw_if_not_finite(out, "batchnorm2d");

  const bool needs = x.requires_grad || scale_t.requires_grad || shift_t.requires_grad;
  auto dx = x.data;
  auto dscale = scale_t.data;
  const int nx = x.node, ns = scale_t.node, nsh = shift_t.node;
  const bool gx = x.requires_grad, gs = scale_t.requires_grad, gsh = shift_t.requires_grad;
  const bool train = (mode == BnMode::train);
  return x.tape->result(
      x.shape, std::move(out), needs,
      [dx, dscale, nx, ns, nsh, gx, gs, gsh, B, C, HW, n, mean, invstd,
       train](Tape<T>& tape, const std::vector<T>& gout) {
        for (int64_t c = 0; c < C; ++c) {
          const T m = mean[size_t(c)], is = invstd[size_t(c)];
          T sum_g = T(0), sum_gx = T(0);
          for (int64_t b = 0; b < B; ++b) {
            const T* go = gout.data() + (b * C + c) * HW;
            const T* xc = dx->data() + (b * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i) {
              sum_g += go[i];
              sum_gx += go[i] * (xc[i] - m) * is;
            }
          }
          if (gsh) tape.grad(nsh)[size_t(c)] += sum_g;
          if (gs) tape.grad(ns)[size_t(c)] += sum_gx;
          if (!gx) continue;
          const T g = (*dscale)[size_t(c)];
          if (train) {
            // Batch statistics depend on x, so their derivatives feed back:
            // dL/dx = g*is * (gout - mean(gout) - xhat * mean(gout*xhat)).
            const T mg = sum_g / T(n);
            const T mgx = sum_gx / T(n);
            for (int64_t b = 0; b < B; ++b) {
              const T* go = gout.data() + (b * C + c) * HW;
              const T* xc = dx->data() + (b * C + c) * HW;
              T* gi = tape.grad(nx).data() + (b * C + c) * HW;
              for (int64_t i = 0; i < HW; ++i) {
                const T xhat = (xc[i] - m) * is;
                gi[i] += g * is * (go[i] - mg - xhat * mgx);
              }
            }
          } else {
            for (int64_t b = 0; b < B; ++b) {
              const T* go = gout.data() + (b * C + c) * HW;
              T* gi = tape.grad(nx).data() + (b * C + c) * HW;
              for (int64_t i = 0; i < HW; ++i) gi[i] += g * is * go[i];
            }
          }
        }
      });
}

}  // namespace specstyle::nn

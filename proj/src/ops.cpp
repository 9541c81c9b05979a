#include "motionguide/ops.hpp"

#include <memory>
#include <stdexcept>
#include <string>

namespace mg {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void check_finite(const char* op, const Tensor& t, const char* which) {
  if (!t.array().isFinite().all())
    fail(std::string(op) + ": non-finite values in " + which);
}

void check_rank(const char* op, const Tensor& t, int rank, const char* which) {
  if (t.rank() != rank)
    fail(std::string(op) + ": " + which + " must have rank " + std::to_string(rank) +
         ", got " + shape_str(t.shape()));
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    fail(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
         shape_str(b.shape()));
}

Tensor finish(const char* op, Shape shape, Eigen::ArrayXd values, bool requires_grad) {
  Tensor out = Tensor::from(std::move(shape), std::move(values));
  if (!out.array().isFinite().all())
    throw std::runtime_error(std::string(op) + ": produced non-finite values");
  out.set_requires_grad(requires_grad);
  return out;
}

void maybe_record(const char* op, std::vector<std::shared_ptr<TensorData>> inputs,
                  const Tensor& out, Tape::PullFn pull) {
  Tape* tape = active_tape();
  if (!tape || !out.requires_grad()) return;
  tape->record({std::move(inputs), out.impl(), std::move(pull), op});
}

Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& x) { return 1.0 / (1.0 + (-x).exp()); }

struct ConvDims {
  long B, C, Hs, Ws;  // source grid
  int KH, KW, stride, pad;
  long Hr, Wr;  // reduced grid: position (hr,wr) touches source hr*stride+kh-pad
};

// Patch matrix per batch item: block b is a (C*KH*KW) x (Hr*Wr) row-major
// matrix, blocks concatenated along b. Out-of-range source reads are zero.
Eigen::ArrayXd im2col(const double* src, const ConvDims& d) {
  const long R = static_cast<long>(d.C) * d.KH * d.KW;
  const long cols_per_b = d.Hr * d.Wr;
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(d.B * R * cols_per_b);
  for (long b = 0; b < d.B; ++b) {
    double* block = out.data() + b * R * cols_per_b;
    for (long c = 0; c < d.C; ++c) {
      const double* plane = src + (b * d.C + c) * d.Hs * d.Ws;
      for (int kh = 0; kh < d.KH; ++kh) {
        for (int kw = 0; kw < d.KW; ++kw) {
          double* row = block + ((c * d.KH + kh) * d.KW + kw) * cols_per_b;
          for (long hr = 0; hr < d.Hr; ++hr) {
            long h = hr * d.stride + kh - d.pad;
            if (h < 0 || h >= d.Hs) continue;
            const double* src_row = plane + h * d.Ws;
            double* dst_row = row + hr * d.Wr;
            for (long wr = 0; wr < d.Wr; ++wr) {
              long w = wr * d.stride + kw - d.pad;
              if (w >= 0 && w < d.Ws) dst_row[wr] = src_row[w];
            }
          }
        }
      }
    }
  }
  return out;
}

// Adjoint of im2col: scatter-adds patches back onto the source grid.
void col2im(const double* cols, const ConvDims& d, double* dst) {
  const long R = static_cast<long>(d.C) * d.KH * d.KW;
  const long cols_per_b = d.Hr * d.Wr;
  for (long b = 0; b < d.B; ++b) {
    const double* block = cols + b * R * cols_per_b;
    for (long c = 0; c < d.C; ++c) {
      double* plane = dst + (b * d.C + c) * d.Hs * d.Ws;
      for (int kh = 0; kh < d.KH; ++kh) {
        for (int kw = 0; kw < d.KW; ++kw) {
          const double* row = block + ((c * d.KH + kh) * d.KW + kw) * cols_per_b;
          for (long hr = 0; hr < d.Hr; ++hr) {
            long h = hr * d.stride + kh - d.pad;
            if (h < 0 || h >= d.Hs) continue;
            double* dst_row = plane + h * d.Ws;
            const double* src_row = row + hr * d.Wr;
            for (long wr = 0; wr < d.Wr; ++wr) {
              long w = wr * d.stride + kw - d.pad;
              if (w >= 0 && w < d.Ws) dst_row[w] += src_row[wr];
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  check_finite("add", a, "lhs");
  check_finite("add", b, "rhs");
  Tensor out = finish("add", a.shape(), a.array() + b.array(),
                      a.requires_grad() || b.requires_grad());
  maybe_record("add", {a.impl(), b.impl()}, out,
               [](const Eigen::ArrayXd& g, const std::vector<Eigen::ArrayXd*>& in) {
                 if (in[0]) *in[0] += g;
                 if (in[1]) *in[1] += g;
               });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  check_finite("mul", a, "lhs");
  check_finite("mul", b, "rhs");
  Tensor out = finish("mul", a.shape(), a.array() * b.array(),
                      a.requires_grad() || b.requires_grad());
  auto da = a.impl();
  auto db = b.impl();
  maybe_record("mul", {da, db}, out,
               [da, db](const Eigen::ArrayXd& g, const std::vector<Eigen::ArrayXd*>& in) {
                 if (in[0]) *in[0] += g * db->values;
                 if (in[1]) *in[1] += g * da->values;
               });
  return out;
}

Tensor scale(const Tensor& x, double c) {
  check_finite("scale", x, "input");
  if (!std::isfinite(c)) fail("scale: non-finite factor");
  Tensor out = finish("scale", x.shape(), x.array() * c, x.requires_grad());
  maybe_record("scale", {x.impl()}, out,
               [c](const Eigen::ArrayXd& g, const std::vector<Eigen::ArrayXd*>& in) {
                 if (in[0]) *in[0] += g * c;
               });
  return out;
}

Tensor sum(const Tensor& x) {
  check_finite("sum", x, "input");
  Eigen::ArrayXd v(1);
  v[0] = x.array().sum();
  Tensor out = finish("sum", {1}, std::move(v), x.requires_grad());
  maybe_record("sum", {x.impl()}, out,
               [](const Eigen::ArrayXd& g, const std::vector<Eigen::ArrayXd*>& in) {
                 if (in[0]) *in[0] += g[0];
               });
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size())
    fail("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  check_finite("reshape", x, "input");
  Tensor out = finish("reshape", std::move(shape), x.array(), x.requires_grad());
  maybe_record("reshape", {x.impl()}, out,
               [](const Eigen::ArrayXd& g, const std::vector<Eigen::ArrayXd*>& in) {
                 if (in[0]) *in[0] += g;
               });
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_rank("matmul", a, 2, "lhs");
  check_rank("matmul", b, 2, "rhs");
  if (a.dim(1) != b.dim(0))
    fail("matmul: inner dimensions differ: " + shape_str(a.shape()) + " x " +
         shape_str(b.shape()));
  check_finite("matmul", a, "lhs");
  check_finite("matmul", b, "rhs");
  const long m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Eigen::ArrayXd v(m * n);
  MapRM(v.data(), m, n).noalias() =
      CMapRM(a.array().data(), m, k) * CMapRM(b.array().data(), k, n);
  Tensor out = finish("matmul", {m, n}, std::move(v), a.requires_grad() || b.requires_grad());
  auto da = a.impl();
  auto db = b.impl();
  maybe_record("matmul", {da, db}, out,
               [da, db, m, k, n](const Eigen::ArrayXd& g, const std::vector<Eigen::ArrayXd*>& in) {
                 CMapRM gm(g.data(), m, n);
                 if (in[0])
                   MapRM(in[0]->data(), m, k).noalias() +=
                       gm * CMapRM(db->values.data(), k, n).transpose();
                 if (in[1])
                   MapRM(in[1]->data(), k, n).noalias() +=
                       CMapRM(da->values.data(), m, k).transpose() * gm;
               });
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_rank("linear", x, 2, "input");
  check_rank("linear", w, 2, "weight");
  check_rank("linear", b, 1, "bias");
  if (x.dim(1) != w.dim(0) || w.dim(1) != b.dim(0))
    fail("linear: incompatible shapes " + shape_str(x.shape()) + ", " + shape_str(w.shape()) +
         ", " + shape_str(b.shape()));
  check_finite("linear", x, "input");
  check_finite("linear", w, "weight");
  check_finite("linear", b, "bias");
  const long n = x.dim(0), d = x.dim(1), m = w.dim(1);
  Eigen::ArrayXd v(n * m);
  MapRM out_m(v.data(), n, m);
  out_m.noalias() = CMapRM(x.array().data(), n, d) * CMapRM(w.array().data(), d, m);
  out_m.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.array().data(), m);
  Tensor out = finish("linear", {n, m}, std::move(v),
                      x.requires_grad() || w.requires_grad() || b.requires_grad());
  auto dx = x.impl();
  auto dw = w.impl();
  maybe_record("linear", {dx, dw, b.impl()}, out,
               [dx, dw, n, d, m](const Eigen::ArrayXd& g, const std::vector<Eigen::ArrayXd*>& in) {
                 CMapRM gm(g.data(), n, m);
                 if (in[0])
                   MapRM(in[0]->data(), n, d).noalias() +=
                       gm * CMapRM(dw->values.data(), d, m).transpose();
                 if (in[1])
                   MapRM(in[1]->data(), d, m).noalias() +=
                       CMapRM(dx->values.data(), n, d).transpose() * gm;
                 if (in[2])
                   Eigen::Map<Eigen::RowVectorXd>(in[2]->data(), m) += gm.colwise().sum();
               });
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, int stride, int padding) {
  check_rank("conv2d", x, 4, "input");
  check_rank("conv2d", kernel, 4, "kernel");
  if (stride < 1) fail("conv2d: stride must be >= 1");
  if (padding < 0) fail("conv2d: padding must be >= 0");
  const long B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const long Co = kernel.dim(0), Ci = kernel.dim(1);
  const int KH = static_cast<int>(kernel.dim(2)), KW = static_cast<int>(kernel.dim(3));
  if (Ci != C)
    fail("conv2d: input channels " + shape_str(x.shape()) + " do not match kernel " +
         shape_str(kernel.shape()));
  if (H + 2 * padding < KH || W + 2 * padding < KW)
    fail("conv2d: kernel " + shape_str(kernel.shape()) + " larger than padded input " +
         shape_str(x.shape()));
  check_finite("conv2d", x, "input");
  check_finite("conv2d", kernel, "kernel");

  ConvDims dims{B, C, H, W, KH, KW, stride, padding, 0, 0};
  dims.Hr = (H + 2 * padding - KH) / stride + 1;
  dims.Wr = (W + 2 * padding - KW) / stride + 1;
  const long R = C * KH * KW;
  const long P = dims.Hr * dims.Wr;

  auto cols = std::make_shared<Eigen::ArrayXd>(im2col(x.array().data(), dims));
  Eigen::ArrayXd v(B * Co * P);
  CMapRM kmat(kernel.array().data(), Co, R);
  for (long b = 0; b < B; ++b) {
    MapRM(v.data() + b * Co * P, Co, P).noalias() =
        kmat * CMapRM(cols->data() + b * R * P, R, P);
  }
  Tensor out = finish("conv2d", {B, Co, dims.Hr, dims.Wr}, std::move(v),
                      x.requires_grad() || kernel.requires_grad());
  auto dk = kernel.impl();
  maybe_record(
      "conv2d", {x.impl(), dk}, out,
      [dk, cols, dims, B, Co, R, P](const Eigen::ArrayXd& g,
                                    const std::vector<Eigen::ArrayXd*>& in) {
        if (in[1]) {
          MapRM dkm(in[1]->data(), Co, R);
          for (long b = 0; b < B; ++b)
            dkm.noalias() += CMapRM(g.data() + b * Co * P, Co, P) *
                             CMapRM(cols->data() + b * R * P, R, P).transpose();
        }
        if (in[0]) {
          Eigen::ArrayXd dcols(B * R * P);
          CMapRM kmat(dk->values.data(), Co, R);
          for (long b = 0; b < B; ++b)
            MapRM(dcols.data() + b * R * P, R, P).noalias() =
                kmat.transpose() * CMapRM(g.data() + b * Co * P, Co, P);
          col2im(dcols.data(), dims, in[0]->data());
        }
      });
  return out;
}

Tensor conv2d_transpose(const Tensor& x, const Tensor& kernel, int stride, int padding,
                        int out_padding) {
  check_rank("conv2d_transpose", x, 4, "input");
  check_rank("conv2d_transpose", kernel, 4, "kernel");
  if (stride < 1) fail("conv2d_transpose: stride must be >= 1");
  if (padding < 0) fail("conv2d_transpose: padding must be >= 0");
  if (out_padding < 0 || out_padding >= stride)
    fail("conv2d_transpose: out_padding must lie in [0, stride)");
  const long B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const long Ci = kernel.dim(0), Co = kernel.dim(1);
  const int KH = static_cast<int>(kernel.dim(2)), KW = static_cast<int>(kernel.dim(3));
  if (Ci != C)
    fail("conv2d_transpose: input channels " + shape_str(x.shape()) + " do not match kernel " +
         shape_str(kernel.shape()));
  const long Ho = (H - 1) * stride + KH - 2 * padding + out_padding;
  const long Wo = (W - 1) * stride + KW - 2 * padding + out_padding;
  if (Ho < 1 || Wo < 1) fail("conv2d_transpose: empty output for input " + shape_str(x.shape()));
  check_finite("conv2d_transpose", x, "input");
  check_finite("conv2d_transpose", kernel, "kernel");

  // The reduced grid is the input; col2im scatters patches onto the output.
  ConvDims dims{B, Co, Ho, Wo, KH, KW, stride, padding, H, W};
  const long R = Co * KH * KW;
  const long P = H * W;

  Eigen::ArrayXd cols(B * R * P);
  CMapRM kmat(kernel.array().data(), Ci, R);
  for (long b = 0; b < B; ++b) {
    MapRM(cols.data() + b * R * P, R, P).noalias() =
        kmat.transpose() * CMapRM(x.array().data() + b * Ci * P, Ci, P);
  }
  Eigen::ArrayXd v = Eigen::ArrayXd::Zero(B * Co * Ho * Wo);
  col2im(cols.data(), dims, v.data());
  Tensor out = finish("conv2d_transpose", {B, Co, Ho, Wo}, std::move(v),
                      x.requires_grad() || kernel.requires_grad());
  auto dx_impl = x.impl();
  auto dk = kernel.impl();
  maybe_record(
      "conv2d_transpose", {dx_impl, dk}, out,
      [dx_impl, dk, dims, B, Ci, R, P](const Eigen::ArrayXd& g,
                                       const std::vector<Eigen::ArrayXd*>& in) {
        Eigen::ArrayXd gcols = im2col(g.data(), dims);
        CMapRM kmat(dk->values.data(), Ci, R);
        for (long b = 0; b < B; ++b) {
          CMapRM gc(gcols.data() + b * R * P, R, P);
          if (in[0])
            MapRM(in[0]->data() + b * Ci * P, Ci, P).noalias() += kmat * gc;
          if (in[1])
            MapRM(in[1]->data(), Ci, R).noalias() +=
                CMapRM(dx_impl->values.data() + b * Ci * P, Ci, P) * gc.transpose();
        }
      });
  return out;
}

Tensor avg_pool2d(const Tensor& x, int window) {
  check_rank("avg_pool2d", x, 4, "input");
  if (window < 1) fail("avg_pool2d: window must be >= 1");
  const long B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % window != 0 || W % window != 0)
    fail("avg_pool2d: window " + std::to_string(window) + " does not divide " +
         shape_str(x.shape()));
  check_finite("avg_pool2d", x, "input");
  const long Ho = H / window, Wo = W / window;
  const double inv = 1.0 / (static_cast<double>(window) * window);
  Eigen::ArrayXd v = Eigen::ArrayXd::Zero(B * C * Ho * Wo);
  const double* src = x.array().data();
  for (long bc = 0; bc < B * C; ++bc) {
    const double* plane = src + bc * H * W;
    double* opl = v.data() + bc * Ho * Wo;
    for (long ho = 0; ho < Ho; ++ho)
      for (long wo = 0; wo < Wo; ++wo) {
        double acc = 0;
        for (int dh = 0; dh < window; ++dh)
          for (int dw = 0; dw < window; ++dw)
            acc += plane[(ho * window + dh) * W + wo * window + dw];
        opl[ho * Wo + wo] = acc * inv;
      }
  }
  Tensor out = finish("avg_pool2d", {B, C, Ho, Wo}, std::move(v), x.requires_grad());
  maybe_record("avg_pool2d", {x.impl()}, out,
               [B, C, H, W, Ho, Wo, window, inv](const Eigen::ArrayXd& g,
                                                 const std::vector<Eigen::ArrayXd*>& in) {
                 if (!in[0]) return;
                 double* dst = in[0]->data();
                 for (long bc = 0; bc < B * C; ++bc) {
                   double* plane = dst + bc * H * W;
                   const double* gpl = g.data() + bc * Ho * Wo;
                   for (long ho = 0; ho < Ho; ++ho)
                     for (long wo = 0; wo < Wo; ++wo) {
                       double val = gpl[ho * Wo + wo] * inv;
                       for (int dh = 0; dh < window; ++dh)
                         for (int dw = 0; dw < window; ++dw)
                           plane[(ho * window + dh) * W + wo * window + dw] += val;
                     }
                 }
               });
  return out;
}

Tensor group_norm(const Tensor& x, int groups, double eps) {
  check_rank("group_norm", x, 4, "input");
  if (groups < 1) fail("group_norm: groups must be >= 1");
  const long B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (C % groups != 0)
    fail("group_norm: " + std::to_string(groups) + " groups do not divide C=" +
         std::to_string(C));
  if (!(eps > 0.0)) fail("group_norm: eps must be > 0");
  check_finite("group_norm", x, "input");
  const long seg = (C / groups) * H * W;  // one group is contiguous in memory
  const long n_seg = B * groups;
  Eigen::ArrayXd v(x.size());
  for (long s = 0; s < n_seg; ++s) {
    auto xs = x.array().segment(s * seg, seg);
    double mu = xs.mean();
    double var = (xs - mu).square().mean();
    v.segment(s * seg, seg) = (xs - mu) / std::sqrt(var + eps);
  }
  Tensor out = finish("group_norm", x.shape(), std::move(v), x.requires_grad());
  auto dx = x.impl();
  maybe_record("group_norm", {dx}, out,
               [dx, seg, n_seg, eps](const Eigen::ArrayXd& g,
                                     const std::vector<Eigen::ArrayXd*>& in) {
                 if (!in[0]) return;
                 for (long s = 0; s < n_seg; ++s) {
                   auto xs = dx->values.segment(s * seg, seg);
                   auto gs = g.segment(s * seg, seg);
                   double mu = xs.mean();
                   double var = (xs - mu).square().mean();
                   double inv_s = 1.0 / std::sqrt(var + eps);
                   Eigen::ArrayXd xhat = (xs - mu) * inv_s;
                   double gm = gs.mean();
                   double gxm = (gs * xhat).mean();
                   in[0]->segment(s * seg, seg) += inv_s * (gs - gm - xhat * gxm);
                 }
               });
  return out;
}

Tensor add_chan(const Tensor& x, const Tensor& b) {
  check_rank("add_chan", x, 4, "input");
  check_rank("add_chan", b, 1, "bias");
  const long B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (b.dim(0) != C)
    fail("add_chan: bias " + shape_str(b.shape()) + " does not match channels of " +
         shape_str(x.shape()));
  check_finite("add_chan", x, "input");
  check_finite("add_chan", b, "bias");
  Eigen::ArrayXd v = x.array();
  const long hw = H * W;
  for (long bb = 0; bb < B; ++bb)
    for (long c = 0; c < C; ++c)
      Eigen::Map<Eigen::ArrayXd>(v.data() + (bb * C + c) * hw, hw) += b.array()[c];
  Tensor out = finish("add_chan", x.shape(), std::move(v),
                      x.requires_grad() || b.requires_grad());
  maybe_record("add_chan", {x.impl(), b.impl()}, out,
               [B, C, hw](const Eigen::ArrayXd& g, const std::vector<Eigen::ArrayXd*>& in) {
                 if (in[0]) *in[0] += g;
                 if (in[1])
                   for (long bb = 0; bb < B; ++bb)
                     for (long c = 0; c < C; ++c)
                       (*in[1])[c] +=
                           Eigen::Map<const Eigen::ArrayXd>(g.data() + (bb * C + c) * hw, hw).sum();
               });
  return out;
}

Tensor add_rowchan(const Tensor& x, const Tensor& b) {
  check_rank("add_rowchan", x, 4, "input");
  check_rank("add_rowchan", b, 2, "bias");
  const long B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (b.dim(0) != B || b.dim(1) != C)
    fail("add_rowchan: bias " + shape_str(b.shape()) + " does not match " + shape_str(x.shape()));
  check_finite("add_rowchan", x, "input");
  check_finite("add_rowchan", b, "bias");
  Eigen::ArrayXd v = x.array();
  const long hw = H * W;
  for (long bc = 0; bc < B * C; ++bc)
    Eigen::Map<Eigen::ArrayXd>(v.data() + bc * hw, hw) += b.array()[bc];
  Tensor out = finish("add_rowchan", x.shape(), std::move(v),
                      x.requires_grad() || b.requires_grad());
  maybe_record("add_rowchan", {x.impl(), b.impl()}, out,
               [B, C, hw](const Eigen::ArrayXd& g, const std::vector<Eigen::ArrayXd*>& in) {
                 if (in[0]) *in[0] += g;
                 if (in[1])
                   for (long bc = 0; bc < B * C; ++bc)
                     (*in[1])[bc] +=
                         Eigen::Map<const Eigen::ArrayXd>(g.data() + bc * hw, hw).sum();
               });
  return out;
}

Tensor silu(const Tensor& x) {
  check_finite("silu", x, "input");
  Eigen::ArrayXd s = sigmoid(x.array());
  Tensor out = finish("silu", x.shape(), x.array() * s, x.requires_grad());
  auto dx = x.impl();
  maybe_record("silu", {dx}, out,
               [dx](const Eigen::ArrayXd& g, const std::vector<Eigen::ArrayXd*>& in) {
                 if (!in[0]) return;
                 Eigen::ArrayXd s = sigmoid(dx->values);
                 *in[0] += g * s * (1.0 + dx->values * (1.0 - s));
               });
  return out;
}

Tensor log_sigmoid(const Tensor& x) {
  check_finite("log_sigmoid", x, "input");
  // min(x,0) - log1p(exp(-|x|)) is stable across the whole range
  Eigen::ArrayXd v = x.array().min(0.0) - (-x.array().abs()).exp().log1p();
  Tensor out = finish("log_sigmoid", x.shape(), std::move(v), x.requires_grad());
  auto dx = x.impl();
  maybe_record("log_sigmoid", {dx}, out,
               [dx](const Eigen::ArrayXd& g, const std::vector<Eigen::ArrayXd*>& in) {
                 if (in[0]) *in[0] += g * sigmoid(-dx->values);
               });
  return out;
}

Tensor mse(const Tensor& a, const Tensor& b) {
  check_same_shape("mse", a, b);
  check_finite("mse", a, "lhs");
  check_finite("mse", b, "rhs");
  const double n = static_cast<double>(a.size());
  Eigen::ArrayXd v(1);
  v[0] = (a.array() - b.array()).square().sum() / n;
  Tensor out = finish("mse", {1}, std::move(v), a.requires_grad() || b.requires_grad());
  auto da = a.impl();
  auto db = b.impl();
  maybe_record("mse", {da, db}, out,
               [da, db, n](const Eigen::ArrayXd& g, const std::vector<Eigen::ArrayXd*>& in) {
                 Eigen::ArrayXd d = (2.0 / n) * g[0] * (da->values - db->values);
                 if (in[0]) *in[0] += d;
                 if (in[1]) *in[1] -= d;
               });
  return out;
}

}  // namespace mg

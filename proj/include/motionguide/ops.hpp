#pragma once

#include "motionguide/tensor.hpp"

namespace mg {

// Differentiable primitives. Every op validates shapes and finiteness, and
// records itself on the active tape when any input requires grad. Backward
// rules work from saved inputs; see tests for the finite-difference checks.

Tensor add(const Tensor& a, const Tensor& b);        // elementwise, same shape
Tensor mul(const Tensor& a, const Tensor& b);        // elementwise, same shape
Tensor scale(const Tensor& x, double c);
Tensor sum(const Tensor& x);                         // scalar
Tensor reshape(const Tensor& x, Shape shape);        // same element count

Tensor matmul(const Tensor& a, const Tensor& b);     // (m,k)x(k,n) -> (m,n)
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);  // (n,d),(d,m),(m)

// x (B,C,H,W). Kernels carry their own channel layout; stride/padding apply
// to both spatial axes. conv2d_transpose takes kernels as (C_in,C_out,KH,KW)
// and an output padding to pin the upsampled size.
Tensor conv2d(const Tensor& x, const Tensor& kernel, int stride, int padding);
Tensor conv2d_transpose(const Tensor& x, const Tensor& kernel, int stride, int padding,
                        int out_padding);
Tensor avg_pool2d(const Tensor& x, int window);      // window divides H and W
Tensor group_norm(const Tensor& x, int groups, double eps = 1e-5);  // per (b, group) over C/G,H,W

Tensor add_chan(const Tensor& x, const Tensor& b);     // + b[c]     over (B,C,H,W)
Tensor add_rowchan(const Tensor& x, const Tensor& b);  // + b[b,c]   over (B,C,H,W)

Tensor silu(const Tensor& x);
Tensor log_sigmoid(const Tensor& x);
Tensor mse(const Tensor& a, const Tensor& b);        // scalar mean squared error

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double c, const Tensor& x) { return scale(x, c); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

}  // namespace mg

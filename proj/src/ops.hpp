#pragma once

#include "tensor.hpp"

namespace tpdr {

// Elementwise; shapes must match exactly (no general broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor mul_scalar(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n] -> [m,n]
// [r,c] + [c], bias broadcast over rows.
Tensor add_rowvec(const Tensor& x, const Tensor& bias);

// x: [Cin,H,W], w: [Cout,Cin,kh,kw], bias: [Cout] or undefined. Zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad);

Tensor leaky_relu(const Tensor& x, double alpha = 0.2);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor abs(const Tensor& x);

Tensor upsample2x_nearest(const Tensor& x);  // [C,H,W] -> [C,2H,2W]

Tensor concat(const std::vector<Tensor>& parts, int dim);
// Channel-wise concatenation of [C_i,H,W] maps.
Tensor concat_channels(const std::vector<Tensor>& parts);

Tensor reshape(const Tensor& x, Shape new_shape);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1);  // x [r,c] -> [r,c1-c0]
Tensor slice_dim0(const Tensor& x, int64_t i0, int64_t i1);  // contiguous slab along dim 0
Tensor gather_rows(const Tensor& x, std::vector<int64_t> rows);

// [3N,H,W] channel layout (x1,y1,z1,x2,...) -> [(H*W*N),3] rows ordered by
// (h,w,sample). Inverse of the position-encoder input layout.
Tensor chw_points_to_rows(const Tensor& x, int64_t n_samples);

}  // namespace tpdr

#pragma once

#include "bundlecodec/rng.hpp"
#include "bundlecodec/tensor.hpp"

namespace bundlecodec::diff {

// Elementwise. Shapes must match exactly; the only broadcast is scalar-tensor
// via scale/add_const.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double c);
Tensor add_const(Tape& tape, const Tensor& a, double c);
Tensor relu(Tape& tape, const Tensor& a);
Tensor exp_elem(Tape& tape, const Tensor& a);

// Shape and reductions.
Tensor reshape(Tape& tape, const Tensor& a, Shape shape);
Tensor sum(Tape& tape, const Tensor& a);
Tensor mean(Tape& tape, const Tensor& a);

// mean((a-b)^2) over all elements.
Tensor mse_loss(Tape& tape, const Tensor& a, const Tensor& b);

// Temperature softmax over the last axis (1-D vector or 2-D rows), computed
// with max-subtraction. tau must be positive.
Tensor softmax_temp(Tape& tape, const Tensor& logits, double tau);

// a:[m,k] x b:[k,n] -> [m,n]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
// a:[m,n] x v:[n] -> [m]
Tensor matvec(Tape& tape, const Tensor& a, const Tensor& v);
// x:[N,in], w:[out,in], b:[out] (pass undefined Tensor for no bias) -> [N,out]
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b);

// Cross-correlation with zero padding (no kernel flip).
// x:[N,Cin,L] or [Cin,L]; w:[Cout,Cin,K]; bias:[Cout] optional.
// L_out = floor((L + 2*padding - K)/stride) + 1.
Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int padding);

// Transposed convolution (gradient of conv1d w.r.t. its input as a forward op).
// x:[N,Cin,L] or [Cin,L]; w:[Cin,Cout,K]; L_out = (L-1)*stride - 2*padding + K.
Tensor conv1d_transpose(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias,
                        int stride, int padding);

// z:[S,d], e:[k,d] -> [S,k] with out[s,i] = ||z_s - e_i||^2.
Tensor sqdist_rows(Tape& tape, const Tensor& z, const Tensor& e);

// Gradient stop: shares the forward values, blocks the backward path.
Tensor detach(const Tensor& a);

// Leaf constants sampled elementwise in flat index order.
Tensor sample_gumbel(Rng& rng, Shape shape);
Tensor sample_normal(Rng& rng, Shape shape);

} // namespace bundlecodec::diff

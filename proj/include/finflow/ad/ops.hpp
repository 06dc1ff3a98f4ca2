#pragma once

#include "finflow/ad/tape.hpp"
#include "finflow/core/cholesky.hpp"

#include <vector>

namespace finflow::ad {

// Field-level differentiable primitives. Binary arithmetic accepts equal
// shapes, a scalar (1,1,1) on either side, a w-broadcast (c,h,1 against
// c,h,w), or an h-broadcast (c,1,w against c,h,w). Each op has a hand-written
// vector-Jacobian product; test_autodiff.cpp checks every one against central
// finite differences.

DiffVar add(Tape& t, const DiffVar& a, const DiffVar& b);
DiffVar sub(Tape& t, const DiffVar& a, const DiffVar& b);
DiffVar mul(Tape& t, const DiffVar& a, const DiffVar& b);
DiffVar div(Tape& t, const DiffVar& a, const DiffVar& b);
DiffVar scale(Tape& t, const DiffVar& a, double s);
DiffVar add_scalar(Tape& t, const DiffVar& a, double s);
DiffVar neg(Tape& t, const DiffVar& a);

DiffVar vexp(Tape& t, const DiffVar& a);
DiffVar vsqrt(Tape& t, const DiffVar& a);
DiffVar vsigmoid(Tape& t, const DiffVar& a);
DiffVar vsin(Tape& t, const DiffVar& a);
DiffVar vcos(Tape& t, const DiffVar& a);
DiffVar vatan2(Tape& t, const DiffVar& y, const DiffVar& x);
DiffVar silu(Tape& t, const DiffVar& a);

DiffVar reduce_sum(Tape& t, const DiffVar& a);                 // -> (1,1,1)
DiffVar reduce_mean(Tape& t, const DiffVar& a);
DiffVar rowsum_w(Tape& t, const DiffVar& a);                   // (c,h,w) -> (c,h,1)
DiffVar reduce_rows_sum(Tape& t, const DiffVar& a);            // (1,h,w) -> (1,1,w)
DiffVar broadcast_rows(Tape& t, const DiffVar& a, int h);      // (1,1,w) -> (1,h,w)

DiffVar reshape(Tape& t, const DiffVar& a, Shape s);
DiffVar crop(Tape& t, const DiffVar& a, int c0, int cn, int j0, int jn, int i0, int in);
DiffVar pad2d(Tape& t, const DiffVar& a, int top, int bottom, int left, int right); // zero pad rows/cols
DiffVar concat_ch(Tape& t, const DiffVar& a, const DiffVar& b);
DiffVar concat_w(Tape& t, const DiffVar& a, const DiffVar& b); // along w

DiffVar gather_rows(Tape& t, const DiffVar& a, std::vector<int> idx);            // (1,n,w) -> (1,|idx|,w)
DiffVar scatter_add_rows(Tape& t, const DiffVar& a, std::vector<int> idx, int n); // (1,|idx|,w) -> (1,n,w)

// softmin over the w dimension of d/temp, numerically stabilized; weights of
// each row sum to 1 exactly up to rounding
DiffVar softmin_rows(Tape& t, const DiffVar& d, double temp);

// D[m,k] = |pts_m - q_k|^2 ; pts constant, q differentiable (1,K,2)
DiffVar sqdist_points_rows(Tape& t, const Tensor& pts, const DiffVar& q); // -> (1,M,K)
DiffVar sqdist_rows_points(Tape& t, const DiffVar& q, const Tensor& pts); // -> (1,K,M)

// 3x3 convolution stack: x (C,H,W), w (O,C,9), bias (O,1,1) or undefined
DiffVar conv3x3(Tape& t, const DiffVar& x, const DiffVar& w, const DiffVar& bias, kern::Pad pad);
DiffVar avgpool2(Tape& t, const DiffVar& x);
// separable bilinear x2, half-pixel centers; edges clamp (zero-pad nets) or
// wrap (periodic nets, preserving translation equivariance)
DiffVar upsample2(Tape& t, const DiffVar& x, kern::Pad pad = kern::Pad::Zero);

// MAC staggering helpers: cell-centered (1,ny,nx) to face fields
DiffVar center_to_facex(Tape& t, const DiffVar& a); // -> (1,ny,nx+1)
DiffVar center_to_facey(Tape& t, const DiffVar& a); // -> (1,ny+1,nx)

// x = A^{-1} rhs with A symmetric positive definite (prefactored); the VJP is
// a solve with the same factor
DiffVar solve_spd(Tape& t, const Chol& chol, const DiffVar& rhs);

DiffVar detach(const DiffVar& a);

// round storage to f32 precision (precision-emulation mode for the fluid net)
DiffVar round_f32(Tape& t, const DiffVar& a);

} // namespace finflow::ad

#pragma once

#include "pmfno/tensor.hpp"

namespace pmfno {

// Iterative radix-2 transform, in place. Forward kernel is e^{-2*pi*i*k*n/N};
// the inverse applies the conjugate kernel and the 1/N factor. N must be a
// power of two.
void fft_pow2(cplx* x, Index n, bool inverse);

// Rank-1 convenience wrapper.
ComplexTensor fft_1d(const ComplexTensor& x, bool inverse);

// Transform along one axis of an n-d tensor, in place.
void fft_axis(ComplexTensor& x, Index axis, bool inverse);

// Real-input transform along the last axis; keeps bins 0..n/2 (the rest are
// conjugate-redundant). Output shape replaces the last dimension n by n/2+1.
ComplexTensor rfft_last_axis(const Tensor& x);

// Inverse of rfft_last_axis for a target last-axis length n (power of two).
// Reconstructs the full spectrum line by Hermitian symmetry -- forcing the
// DC and Nyquist bins real -- so the result is exactly real.
Tensor irfft_last_axis(const ComplexTensor& x, Index n_last);

}  // namespace pmfno

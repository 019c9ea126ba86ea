#pragma once

// Independent quadratic-time oracle for the fast convolution layer. The
// layer's parameters define a kernel per channel pair as the inverse discrete
// Fourier transform of its per-bin mixing spectrum over the zero-padded grid;
// this header recovers those kernels with naive DFT sums (no FFT) and applies
// them as explicit spatial convolution sums, so agreement checks the entire
// pad / transform / mix / inverse / truncate pipeline against the definition.

#include <complex>
#include <numbers>
#include <vector>

#include "pmfno/layers.hpp"
#include "pmfno/tensor.hpp"

namespace convoracle {

using pmfno::cplx;
using pmfno::FastConv;
using pmfno::Index;
using pmfno::Tensor;

// Full spectrum of length p from stored bins 0..p/2 (real-signal symmetry).
inline std::vector<cplx> hermitian_extend(const cplx* bins, Index p) {
  std::vector<cplx> full(static_cast<std::size_t>(p));
  for (Index b = 0; b <= p / 2; ++b) full[static_cast<std::size_t>(b)] = bins[b];
  for (Index b = p / 2 + 1; b < p; ++b)
    full[static_cast<std::size_t>(b)] = std::conj(bins[p - b]);
  return full;
}

// Naive inverse DFT (1/p normalization), real part.
inline std::vector<double> naive_inverse(const std::vector<cplx>& full) {
  const Index p = static_cast<Index>(full.size());
  std::vector<double> out(static_cast<std::size_t>(p));
  for (Index t = 0; t < p; ++t) {
    cplx acc = 0.0;
    for (Index b = 0; b < p; ++b) {
      const double ang = 2.0 * std::numbers::pi * static_cast<double>(b * t % p) /
                         static_cast<double>(p);
      acc += full[static_cast<std::size_t>(b)] * cplx(std::cos(ang), std::sin(ang));
    }
    out[static_cast<std::size_t>(t)] = acc.real() / static_cast<double>(p);
  }
  return out;
}

// Naive forward DFT of a real sequence, keeping bins 0..p/2.
inline std::vector<cplx> naive_forward_bins(const std::vector<double>& x) {
  const Index p = static_cast<Index>(x.size());
  std::vector<cplx> bins(static_cast<std::size_t>(p / 2 + 1));
  for (Index b = 0; b <= p / 2; ++b) {
    cplx acc = 0.0;
    for (Index t = 0; t < p; ++t) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(b * t % p) /
                         static_cast<double>(p);
      acc += x[static_cast<std::size_t>(t)] * cplx(std::cos(ang), std::sin(ang));
    }
    bins[static_cast<std::size_t>(b)] = acc;
  }
  return bins;
}

// ---- 1D ------------------------------------------------------------------

// Spatial kernel of the (v,k) channel pair on the padded circle of length 2n.
inline std::vector<double> kernel_1d(const FastConv& conv, Index v, Index k) {
  const Index nb = conv.bin_count();
  const Index p = 2 * conv.spatial()[0];
  return naive_inverse(hermitian_extend(conv.a.data() + (v * conv.c_in() + k) * nb, p));
}

inline std::vector<double> bias_field_1d(const FastConv& conv, Index v) {
  const Index p = 2 * conv.spatial()[0];
  return naive_inverse(hermitian_extend(conv.b.data() + v * conv.bin_count(), p));
}

// Direct evaluation: cyclic convolution of each kernel with the zero-padded
// input on the 2n circle, truncated to the first n samples, plus the bias
// field. Quadratic in the grid size, no FFTs.
inline Tensor direct_conv_1d(const FastConv& conv, const Tensor& h) {
  const Index n = conv.spatial()[0];
  const Index p = 2 * n;
  Tensor y(pmfno::Shape{conv.c_out(), n});
  for (Index v = 0; v < conv.c_out(); ++v) {
    const std::vector<double> bias = bias_field_1d(conv, v);
    for (Index i = 0; i < n; ++i) y.at(v, i) = bias[static_cast<std::size_t>(i)];
    for (Index k = 0; k < conv.c_in(); ++k) {
      const std::vector<double> g = kernel_1d(conv, v, k);
      for (Index i = 0; i < n; ++i) {
        double acc = 0.0;
        for (Index j = 0; j < n; ++j)
          acc += g[static_cast<std::size_t>(((i - j) % p + p) % p)] * h.at(k, j);
        y.at(v, i) += acc;
      }
    }
  }
  return y;
}

// ---- 2D ------------------------------------------------------------------

// Full padded spectrum [p1 x p2] from the stored [p1 x (n2+1)] bins using the
// 2D real-signal symmetry, then separable naive inverse DFTs per axis.
inline std::vector<double> kernel_2d_from_bins(const cplx* bins, Index p1, Index p2) {
  const Index nb2 = p2 / 2 + 1;
  std::vector<cplx> full(static_cast<std::size_t>(p1 * p2));
  for (Index b1 = 0; b1 < p1; ++b1)
    for (Index b2 = 0; b2 < p2; ++b2) {
      cplx val;
      if (b2 < nb2)
        val = bins[b1 * nb2 + b2];
      else
        val = std::conj(bins[((p1 - b1) % p1) * nb2 + (p2 - b2)]);
      full[static_cast<std::size_t>(b1 * p2 + b2)] = val;
    }

  // Inverse along axis 1 (rows), then axis 0 (columns).
  std::vector<cplx> rows(static_cast<std::size_t>(p1 * p2));
  for (Index b1 = 0; b1 < p1; ++b1)
    for (Index t2 = 0; t2 < p2; ++t2) {
      cplx acc = 0.0;
      for (Index b2 = 0; b2 < p2; ++b2) {
        const double ang = 2.0 * std::numbers::pi * static_cast<double>(b2 * t2 % p2) /
                           static_cast<double>(p2);
        acc += full[static_cast<std::size_t>(b1 * p2 + b2)] * cplx(std::cos(ang), std::sin(ang));
      }
      rows[static_cast<std::size_t>(b1 * p2 + t2)] = acc / static_cast<double>(p2);
    }
  std::vector<double> out(static_cast<std::size_t>(p1 * p2));
  for (Index t2 = 0; t2 < p2; ++t2)
    for (Index t1 = 0; t1 < p1; ++t1) {
      cplx acc = 0.0;
      for (Index b1 = 0; b1 < p1; ++b1) {
        const double ang = 2.0 * std::numbers::pi * static_cast<double>(b1 * t1 % p1) /
                           static_cast<double>(p1);
        acc += rows[static_cast<std::size_t>(b1 * p2 + t2)] * cplx(std::cos(ang), std::sin(ang));
      }
      out[static_cast<std::size_t>(t1 * p2 + t2)] = acc.real() / static_cast<double>(p1);
    }
  return out;
}

inline Tensor direct_conv_2d(const FastConv& conv, const Tensor& h) {
  const Index n1 = conv.spatial()[0], n2 = conv.spatial()[1];
  const Index p1 = 2 * n1, p2 = 2 * n2;
  const Index nb = conv.bin_count();
  Tensor y(pmfno::Shape{conv.c_out(), n1, n2});
  for (Index v = 0; v < conv.c_out(); ++v) {
    const std::vector<double> bias = kernel_2d_from_bins(conv.b.data() + v * nb, p1, p2);
    for (Index i1 = 0; i1 < n1; ++i1)
      for (Index i2 = 0; i2 < n2; ++i2)
        y.at(v, i1, i2) = bias[static_cast<std::size_t>(i1 * p2 + i2)];
    for (Index k = 0; k < conv.c_in(); ++k) {
      const std::vector<double> g =
          kernel_2d_from_bins(conv.a.data() + (v * conv.c_in() + k) * nb, p1, p2);
      for (Index i1 = 0; i1 < n1; ++i1)
        for (Index i2 = 0; i2 < n2; ++i2) {
          double acc = 0.0;
          for (Index j1 = 0; j1 < n1; ++j1) {
            const Index t1 = ((i1 - j1) % p1 + p1) % p1;
            for (Index j2 = 0; j2 < n2; ++j2) {
              const Index t2 = ((i2 - j2) % p2 + p2) % p2;
              acc += g[static_cast<std::size_t>(t1 * p2 + t2)] * h.at(k, j1, j2);
            }
          }
          y.at(v, i1, i2) += acc;
        }
    }
  }
  return y;
}

inline double max_rel_diff(const Tensor& a, const Tensor& b) {
  double scale = 0.0;
  for (Index i = 0; i < a.size(); ++i)
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  if (scale == 0.0) return 0.0;
  double rel = 0.0;
  for (Index i = 0; i < a.size(); ++i) rel = std::max(rel, std::abs(a[i] - b[i]) / scale);
  return rel;
}

}  // namespace convoracle

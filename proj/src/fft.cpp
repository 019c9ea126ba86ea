#include "pmfno/fft.hpp"

#include <cmath>
#include <numbers>
#include <unordered_map>

namespace pmfno {

namespace {

// Forward twiddles w^k = e^{-2*pi*i*k/n} for k < n/2, cached per size.
const std::vector<cplx>& twiddles(Index n) {
  thread_local std::unordered_map<Index, std::vector<cplx>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<cplx> tw(static_cast<std::size_t>(n / 2));
  for (Index k = 0; k < n / 2; ++k) {
    const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    tw[static_cast<std::size_t>(k)] = {std::cos(a), std::sin(a)};
  }
  return cache.emplace(n, std::move(tw)).first->second;
}

}  // namespace

void fft_pow2(cplx* x, Index n, bool inverse) {
  if (!is_pow2(n))
    throw Error(Error::Code::config,
                "transform length " + std::to_string(n) + " is not a power of two");
  if (n == 1) return;

  for (Index i = 1, j = 0; i < n; ++i) {
    Index bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }

  const auto& tw = twiddles(n);
  for (Index len = 2; len <= n; len <<= 1) {
    const Index half = len >> 1;
    const Index step = n / len;
    for (Index base = 0; base < n; base += len) {
      for (Index k = 0; k < half; ++k) {
        cplx w = tw[static_cast<std::size_t>(k * step)];
        if (inverse) w = std::conj(w);
        const cplx u = x[base + k];
        const cplx v = x[base + k + half] * w;
        x[base + k] = u + v;
        x[base + k + half] = u - v;
      }
    }
  }

  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (Index i = 0; i < n; ++i) x[i] *= inv_n;
  }
}

ComplexTensor fft_1d(const ComplexTensor& x, bool inverse) {
  if (x.rank() != 1)
    throw Error(Error::Code::config, "fft_1d expects a rank-1 tensor");
  ComplexTensor y = x;
  fft_pow2(y.data(), y.size(), inverse);
  return y;
}

void fft_axis(ComplexTensor& x, Index axis, bool inverse) {
  if (axis < 0 || axis >= x.rank())
    throw Error(Error::Code::config, "fft_axis: axis out of range");
  const Index n = x.dim(axis);
  if (!is_pow2(n))
    throw Error(Error::Code::config,
                "transform length " + std::to_string(n) + " is not a power of two");

  const Index stride = x.stride(axis);
  if (stride == 1) {
    for (Index base = 0; base < x.size(); base += n) fft_pow2(x.data() + base, n, inverse);
    return;
  }

  // Strided lines: gather, transform, scatter.
  std::vector<cplx> line(static_cast<std::size_t>(n));
  const Index block = n * stride;  // elements spanned by one axis sweep
  for (Index outer = 0; outer < x.size(); outer += block) {
    for (Index inner = 0; inner < stride; ++inner) {
      cplx* base = x.data() + outer + inner;
      for (Index k = 0; k < n; ++k) line[static_cast<std::size_t>(k)] = base[k * stride];
      fft_pow2(line.data(), n, inverse);
      for (Index k = 0; k < n; ++k) base[k * stride] = line[static_cast<std::size_t>(k)];
    }
  }
}

ComplexTensor rfft_last_axis(const Tensor& x) {
  const Index n = x.dim(x.rank() - 1);
  if (!is_pow2(n))
    throw Error(Error::Code::config,
                "transform length " + std::to_string(n) + " is not a power of two");
  Shape out_shape = x.shape();
  out_shape.back() = n / 2 + 1;
  ComplexTensor out(out_shape);

  const Index lines = x.size() / n;
  const Index nb = n / 2 + 1;
  std::vector<cplx> buf(static_cast<std::size_t>(n));
  for (Index l = 0; l < lines; ++l) {
    const double* src = x.data() + l * n;
    for (Index k = 0; k < n; ++k) buf[static_cast<std::size_t>(k)] = {src[k], 0.0};
    fft_pow2(buf.data(), n, false);
    cplx* dst = out.data() + l * nb;
    for (Index k = 0; k < nb; ++k) dst[k] = buf[static_cast<std::size_t>(k)];
  }
  return out;
}

Tensor irfft_last_axis(const ComplexTensor& x, Index n_last) {
  if (!is_pow2(n_last))
    throw Error(Error::Code::config,
                "transform length " + std::to_string(n_last) + " is not a power of two");
  const Index nb = x.dim(x.rank() - 1);
  if (nb != n_last / 2 + 1)
    throw Error(Error::Code::config,
                "irfft_last_axis: " + std::to_string(nb) + " bins do not match target length " +
                    std::to_string(n_last));
  Shape out_shape = x.shape();
  out_shape.back() = n_last;
  Tensor out(out_shape);

  const Index lines = x.size() / nb;
  std::vector<cplx> buf(static_cast<std::size_t>(n_last));
  for (Index l = 0; l < lines; ++l) {
    const cplx* src = x.data() + l * nb;
    buf[0] = {src[0].real(), 0.0};
    buf[static_cast<std::size_t>(n_last / 2)] = {src[n_last / 2].real(), 0.0};
    for (Index k = 1; k < n_last / 2; ++k) {
      buf[static_cast<std::size_t>(k)] = src[k];
      buf[static_cast<std::size_t>(n_last - k)] = std::conj(src[k]);
    }
    fft_pow2(buf.data(), n_last, true);
    double* dst = out.data() + l * n_last;
    for (Index k = 0; k < n_last; ++k) dst[k] = buf[static_cast<std::size_t>(k)].real();
  }
  return out;
}

}  // namespace pmfno

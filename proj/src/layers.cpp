#include "pmfno/layers.hpp"

#include "pmfno/fft.hpp"

#include <cmath>

namespace pmfno {

void ParamStore::add_entry(Entry e) {
  for (const auto& have : entries_)
    if (have.name == e.name)
      throw Error(Error::Code::config, "duplicate parameter name '" + e.name + "'");
  total_ += e.count;
  entries_.push_back(std::move(e));
}

void ParamStore::add_real(const std::string& name, std::vector<double>& value,
                          std::vector<double>& grad, Shape shape) {
  if (value.size() != grad.size() || static_cast<Index>(value.size()) != shape_size(shape))
    throw Error(Error::Code::config, "parameter '" + name + "' has incongruent shapes");
  Entry e;
  e.name = name;
  e.value = value.data();
  e.grad = grad.data();
  e.count = static_cast<Index>(value.size());
  e.shape = std::move(shape);
  add_entry(std::move(e));
}

void ParamStore::add_complex(const std::string& name, std::vector<cplx>& value,
                             std::vector<cplx>& grad, Shape shape) {
  if (value.size() != grad.size() || static_cast<Index>(value.size()) != shape_size(shape))
    throw Error(Error::Code::config, "parameter '" + name + "' has incongruent shapes");
  Entry e;
  e.name = name;
  // std::complex<double> is layout-compatible with double[2].
  e.value = reinterpret_cast<double*>(value.data());
  e.grad = reinterpret_cast<double*>(grad.data());
  e.count = static_cast<Index>(2 * value.size());
  e.shape = std::move(shape);
  e.shape.push_back(2);
  e.is_complex = true;
  add_entry(std::move(e));
}

void ParamStore::zero_grads() {
  for (auto& e : entries_) std::fill(e.grad, e.grad + e.count, 0.0);
}

const ParamStore::Entry& ParamStore::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw Error(Error::Code::config, "no parameter named '" + name + "'");
}

void ParamStore::clear() {
  entries_.clear();
  total_ = 0;
}

// ---------------------------------------------------------------------------
// FastConv

FastConv::FastConv(std::string name, Index c_in, Index c_out, Shape spatial)
    : name_(std::move(name)), c_in_(c_in), c_out_(c_out), spatial_(std::move(spatial)) {
  if (c_in_ < 1 || c_out_ < 1 || spatial_.empty())
    throw Error(Error::Code::config, "fastconv '" + name_ + "': bad channel or grid config");
  for (Index d : spatial_)
    if (!is_pow2(d))
      throw Error(Error::Code::config,
                  "fastconv '" + name_ + "': spatial lengths must be powers of two");
  padded_ = spatial_;
  for (auto& d : padded_) d *= 2;
  bins_ = padded_;
  bins_.back() = padded_.back() / 2 + 1;
  bin_count_ = shape_size(bins_);

  a.assign(static_cast<std::size_t>(c_out_ * c_in_ * bin_count_), cplx{});
  b.assign(static_cast<std::size_t>(c_out_ * bin_count_), cplx{});
  da = a;
  db = b;
}

void FastConv::init_random(Rng& rng) {
  const double std_dev = 1.0 / (static_cast<double>(c_in_) *
                                std::sqrt(static_cast<double>(bin_count_)));
  for (auto& v : a) v = {std_dev * rng.normal(), std_dev * rng.normal()};
  std::fill(b.begin(), b.end(), cplx{});
}

void FastConv::register_params(ParamStore& ps) {
  ps.add_complex(name_ + ".A", a, da, {c_out_, c_in_, bin_count_});
  ps.add_complex(name_ + ".b", b, db, {c_out_, bin_count_});
}

ComplexTensor FastConv::spectrum_(const Tensor& h) const {
  // Zero-pad every spatial axis to 2n.
  Shape pshape{c_in_};
  for (Index d : padded_) pshape.push_back(d);
  Tensor hp(pshape);

  const Index sd = static_cast<Index>(spatial_.size());
  const Index in_last = spatial_.back();
  const Index lines = h.size() / in_last;       // channel * leading-spatial lines
  std::vector<Index> odo(static_cast<std::size_t>(sd), 0);  // [channel?] no: per channel loop
  for (Index line = 0; line < lines; ++line) {
    // Decompose line index into channel + leading spatial coordinates.
    Index rem = line;
    Index dst = 0;
    for (Index ax = sd - 2; ax >= 0; --ax) {
      odo[static_cast<std::size_t>(ax)] = rem % spatial_[static_cast<std::size_t>(ax)];
      rem /= spatial_[static_cast<std::size_t>(ax)];
    }
    const Index ch = rem;
    dst = ch;
    for (Index ax = 0; ax < sd - 1; ++ax)
      dst = dst * padded_[static_cast<std::size_t>(ax)] + odo[static_cast<std::size_t>(ax)];
    dst = dst * padded_.back();
    std::copy(h.data() + line * in_last, h.data() + (line + 1) * in_last, hp.data() + dst);
  }

  ComplexTensor spec = rfft_last_axis(hp);
  for (Index ax = 1; ax < sd; ++ax) fft_axis(spec, ax, false);
  return spec;
}

Tensor FastConv::inverse_spectrum_(ComplexTensor y_hat) const {
  const Index sd = static_cast<Index>(spatial_.size());
  for (Index ax = 1; ax < sd; ++ax) fft_axis(y_hat, ax, true);
  const Tensor yp = irfft_last_axis(y_hat, padded_.back());

  Shape oshape{c_out_};
  for (Index d : spatial_) oshape.push_back(d);
  Tensor y(oshape);
  const Index out_last = spatial_.back();
  const Index lines = y.size() / out_last;
  std::vector<Index> odo(static_cast<std::size_t>(sd), 0);
  for (Index line = 0; line < lines; ++line) {
    Index rem = line;
    for (Index ax = sd - 2; ax >= 0; --ax) {
      odo[static_cast<std::size_t>(ax)] = rem % spatial_[static_cast<std::size_t>(ax)];
      rem /= spatial_[static_cast<std::size_t>(ax)];
    }
    const Index ch = rem;
    Index src = ch;
    for (Index ax = 0; ax < sd - 1; ++ax)
      src = src * padded_[static_cast<std::size_t>(ax)] + odo[static_cast<std::size_t>(ax)];
    src = src * padded_.back();
    std::copy(yp.data() + src, yp.data() + src + out_last, y.data() + line * out_last);
  }
  return y;
}

Tensor FastConv::forward(const Tensor& h, Cache* cache) const {
  Shape want{c_in_};
  for (Index d : spatial_) want.push_back(d);
  if (h.shape() != want)
    throw Error(Error::Code::config, "fastconv '" + name_ + "': input shape " +
                                         shape_str(h.shape()) + " != " + shape_str(want));

  ComplexTensor h_hat = spectrum_(h);

  Shape yshape{c_out_};
  for (Index d : bins_) yshape.push_back(d);
  ComplexTensor y_hat(yshape);
  const Index nb = bin_count_;
  for (Index v = 0; v < c_out_; ++v) {
    cplx* yrow = y_hat.data() + v * nb;
    std::copy(b.data() + v * nb, b.data() + (v + 1) * nb, yrow);
    for (Index k = 0; k < c_in_; ++k) {
      const cplx* arow = a.data() + (v * c_in_ + k) * nb;
      const cplx* hrow = h_hat.data() + k * nb;
      for (Index j = 0; j < nb; ++j) yrow[j] += arow[j] * hrow[j];
    }
  }

  if (cache) {
    cache->h_hat = std::move(h_hat);
    cache->valid = true;
  }
  return inverse_spectrum_(std::move(y_hat));
}

Tensor FastConv::backward(const Cache& cache, const Tensor& dy) {
  if (!cache.valid)
    throw Error(Error::Code::config, "fastconv '" + name_ + "': backward without forward cache");
  Shape want{c_out_};
  for (Index d : spatial_) want.push_back(d);
  if (dy.shape() != want)
    throw Error(Error::Code::config, "fastconv '" + name_ + "': cotangent shape mismatch");

  const Index sd = static_cast<Index>(spatial_.size());
  const Index nb = bin_count_;
  const Index np_last = padded_.back();

  // Adjoint of truncate = zero-extend; adjoint of the inverse transforms:
  // (1/N) * forward FFT per axis, with the last-axis Hermitian fold.
  Shape pshape{c_out_};
  for (Index d : padded_) pshape.push_back(d);
  Tensor dyp(pshape);
  {
    const Index out_last = spatial_.back();
    const Index lines = dy.size() / out_last;
    std::vector<Index> odo(static_cast<std::size_t>(sd), 0);
    for (Index line = 0; line < lines; ++line) {
      Index rem = line;
      for (Index ax = sd - 2; ax >= 0; --ax) {
        odo[static_cast<std::size_t>(ax)] = rem % spatial_[static_cast<std::size_t>(ax)];
        rem /= spatial_[static_cast<std::size_t>(ax)];
      }
      Index dst = rem;
      for (Index ax = 0; ax < sd - 1; ++ax)
        dst = dst * padded_[static_cast<std::size_t>(ax)] + odo[static_cast<std::size_t>(ax)];
      dst = dst * np_last;
      std::copy(dy.data() + line * out_last, dy.data() + (line + 1) * out_last,
                dyp.data() + dst);
    }
  }

  Shape hshape{c_out_};
  for (Index d : bins_) hshape.push_back(d);
  ComplexTensor dy_hat(hshape);
  {
    const Index lines = dyp.size() / np_last;
    std::vector<cplx> buf(static_cast<std::size_t>(np_last));
    const double inv_np = 1.0 / static_cast<double>(np_last);
    for (Index l = 0; l < lines; ++l) {
      const double* src = dyp.data() + l * np_last;
      for (Index j = 0; j < np_last; ++j) buf[static_cast<std::size_t>(j)] = {src[j], 0.0};
      fft_pow2(buf.data(), np_last, false);
      cplx* dst = dy_hat.data() + l * (np_last / 2 + 1);
      dst[0] = {buf[0].real() * inv_np, 0.0};
      dst[np_last / 2] = {buf[static_cast<std::size_t>(np_last / 2)].real() * inv_np, 0.0};
      for (Index j = 1; j < np_last / 2; ++j)
        dst[j] = inv_np * (buf[static_cast<std::size_t>(j)] +
                           std::conj(buf[static_cast<std::size_t>(np_last - j)]));
    }
    for (Index ax = 1; ax < sd; ++ax) {
      fft_axis(dy_hat, ax, false);
      const double inv_n = 1.0 / static_cast<double>(padded_[static_cast<std::size_t>(ax - 1)]);
      for (Index i = 0; i < dy_hat.size(); ++i) dy_hat[i] *= inv_n;
    }
  }

  // Mix adjoints.
  ComplexTensor dh_hat(Shape{c_in_, nb});  // flat bins view is enough here
  for (Index k = 0; k < c_in_; ++k) {
    cplx* drow = dh_hat.data() + k * nb;
    for (Index v = 0; v < c_out_; ++v) {
      const cplx* arow = a.data() + (v * c_in_ + k) * nb;
      const cplx* dyrow = dy_hat.data() + v * nb;
      for (Index j = 0; j < nb; ++j) drow[j] += std::conj(arow[j]) * dyrow[j];
    }
  }
  for (Index v = 0; v < c_out_; ++v) {
    const cplx* dyrow = dy_hat.data() + v * nb;
    cplx* dbrow = db.data() + v * nb;
    for (Index j = 0; j < nb; ++j) dbrow[j] += dyrow[j];
    for (Index k = 0; k < c_in_; ++k) {
      cplx* darow = da.data() + (v * c_in_ + k) * nb;
      const cplx* hrow = cache.h_hat.data() + k * nb;
      for (Index j = 0; j < nb; ++j) darow[j] += dyrow[j] * std::conj(hrow[j]);
    }
  }

  // Adjoint of the input transforms: N * inverse FFT per leading axis, then
  // per-line zero-extend + Np * inverse FFT + real part on the last axis.
  Shape dspec_shape{c_in_};
  for (Index d : bins_) dspec_shape.push_back(d);
  ComplexTensor dspec(dspec_shape, std::move(dh_hat.storage()));
  for (Index ax = 1; ax < sd; ++ax) {
    fft_axis(dspec, ax, true);
    const double n_ax = static_cast<double>(padded_[static_cast<std::size_t>(ax - 1)]);
    for (Index i = 0; i < dspec.size(); ++i) dspec[i] *= n_ax;
  }

  Shape dhp_shape{c_in_};
  for (Index d : padded_) dhp_shape.push_back(d);
  Tensor dhp(dhp_shape);
  {
    const Index nb_last = np_last / 2 + 1;
    const Index lines = dspec.size() / nb_last;
    std::vector<cplx> buf(static_cast<std::size_t>(np_last));
    for (Index l = 0; l < lines; ++l) {
      const cplx* src = dspec.data() + l * nb_last;
      std::fill(buf.begin(), buf.end(), cplx{});
      for (Index j = 0; j < nb_last; ++j) buf[static_cast<std::size_t>(j)] = src[j];
      fft_pow2(buf.data(), np_last, true);
      double* dst = dhp.data() + l * np_last;
      const double np_d = static_cast<double>(np_last);
      for (Index j = 0; j < np_last; ++j) dst[j] = np_d * buf[static_cast<std::size_t>(j)].real();
    }
  }

  // Truncate the padding (adjoint of zero-padding).
  Shape want_in{c_in_};
  for (Index d : spatial_) want_in.push_back(d);
  Tensor dh(want_in);
  {
    const Index in_last = spatial_.back();
    const Index lines = dh.size() / in_last;
    std::vector<Index> odo(static_cast<std::size_t>(sd), 0);
    for (Index line = 0; line < lines; ++line) {
      Index rem = line;
      for (Index ax = sd - 2; ax >= 0; --ax) {
        odo[static_cast<std::size_t>(ax)] = rem % spatial_[static_cast<std::size_t>(ax)];
        rem /= spatial_[static_cast<std::size_t>(ax)];
      }
      Index src = rem;
      for (Index ax = 0; ax < sd - 1; ++ax)
        src = src * padded_[static_cast<std::size_t>(ax)] + odo[static_cast<std::size_t>(ax)];
      src = src * np_last;
      std::copy(dhp.data() + src, dhp.data() + src + in_last, dh.data() + line * in_last);
    }
  }
  return dh;
}

// ---------------------------------------------------------------------------
// ChannelAffine

ChannelAffine::ChannelAffine(std::string name, Index c_in, Index c_out)
    : name_(std::move(name)), c_in_(c_in), c_out_(c_out) {
  if (c_in_ < 1 || c_out_ < 1)
    throw Error(Error::Code::config, "channel map '" + name_ + "': bad channel counts");
  w.assign(static_cast<std::size_t>(c_out_ * c_in_), 0.0);
  bias.assign(static_cast<std::size_t>(c_out_), 0.0);
  dw = w;
  dbias = bias;
}

void ChannelAffine::init_identity() {
  if (c_in_ != c_out_)
    throw Error(Error::Code::config, "channel map '" + name_ + "': identity needs square map");
  std::fill(w.begin(), w.end(), 0.0);
  for (Index i = 0; i < c_in_; ++i) w[static_cast<std::size_t>(i * c_in_ + i)] = 1.0;
  std::fill(bias.begin(), bias.end(), 0.0);
}

void ChannelAffine::init_random(Rng& rng) {
  const double std_dev = 1.0 / std::sqrt(static_cast<double>(c_in_));
  for (auto& v : w) v = std_dev * rng.normal();
  std::fill(bias.begin(), bias.end(), 0.0);
}

void ChannelAffine::register_params(ParamStore& ps) {
  ps.add_real(name_ + ".W", w, dw, {c_out_, c_in_});
  ps.add_real(name_ + ".b", bias, dbias, {c_out_});
}

Tensor ChannelAffine::forward(const Tensor& h) const {
  if (h.rank() < 2 || h.dim(0) != c_in_)
    throw Error(Error::Code::config, "channel map '" + name_ + "': input channel mismatch");
  const Index sp = h.size() / c_in_;
  Shape oshape = h.shape();
  oshape[0] = c_out_;
  Tensor y(oshape);
  auto hm = as_mat(h, c_in_, sp);
  auto ym = as_mat(y, c_out_, sp);
  Eigen::Map<const RowMajorMat<double>> wm(w.data(), c_out_, c_in_);
  ym.noalias() = wm * hm;
  for (Index v = 0; v < c_out_; ++v) ym.row(v).array() += bias[static_cast<std::size_t>(v)];
  return y;
}

Tensor ChannelAffine::backward(const Tensor& h_in, const Tensor& dy) {
  if (h_in.dim(0) != c_in_ || dy.dim(0) != c_out_)
    throw Error(Error::Code::config, "channel map '" + name_ + "': backward shape mismatch");
  const Index sp = h_in.size() / c_in_;
  if (dy.size() != c_out_ * sp)
    throw Error(Error::Code::config, "channel map '" + name_ + "': cotangent size mismatch");

  auto hm = as_mat(h_in, c_in_, sp);
  auto dym = as_mat(dy, c_out_, sp);
  Eigen::Map<const RowMajorMat<double>> wm(w.data(), c_out_, c_in_);
  Eigen::Map<RowMajorMat<double>> dwm(dw.data(), c_out_, c_in_);

  Tensor dh(h_in.shape());
  auto dhm = as_mat(dh, c_in_, sp);
  dhm.noalias() = wm.transpose() * dym;
  dwm.noalias() += dym * hm.transpose();
  for (Index v = 0; v < c_out_; ++v) dbias[static_cast<std::size_t>(v)] += dym.row(v).sum();
  return dh;
}

// ---------------------------------------------------------------------------
// Activations

Act act_from_name(const std::string& name) {
  if (name == "tanh") return Act::tanh_fn;
  if (name == "relu") return Act::relu;
  if (name == "sigmoid") return Act::sigmoid;
  if (name == "identity") return Act::identity;
  throw Error(Error::Code::config, "unknown activation '" + name + "'");
}

std::string act_name(Act a) {
  switch (a) {
    case Act::identity: return "identity";
    case Act::tanh_fn: return "tanh";
    case Act::relu: return "relu";
    case Act::sigmoid: return "sigmoid";
  }
  return "?";
}

Tensor act_forward(Act a, const Tensor& x) {
  Tensor y = x;
  switch (a) {
    case Act::identity:
      break;
    case Act::tanh_fn:
      for (Index i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i]);
      break;
    case Act::relu:
      for (Index i = 0; i < y.size(); ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
      break;
    case Act::sigmoid:
      for (Index i = 0; i < y.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-y[i]));
      break;
  }
  return y;
}

Tensor act_backward(Act a, const Tensor& y_out, const Tensor& dy) {
  if (!y_out.same_shape(dy))
    throw Error(Error::Code::config, "activation backward shape mismatch");
  Tensor dx = dy;
  switch (a) {
    case Act::identity:
      break;
    case Act::tanh_fn:
      for (Index i = 0; i < dx.size(); ++i) dx[i] *= 1.0 - y_out[i] * y_out[i];
      break;
    case Act::relu:
      for (Index i = 0; i < dx.size(); ++i) dx[i] = y_out[i] > 0.0 ? dx[i] : 0.0;
      break;
    case Act::sigmoid:
      for (Index i = 0; i < dx.size(); ++i) dx[i] *= y_out[i] * (1.0 - y_out[i]);
      break;
  }
  return dx;
}

}  // namespace pmfno

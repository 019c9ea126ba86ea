#pragma once

#include "pmfno/rng.hpp"
#include "pmfno/tensor.hpp"

namespace pmfno {

// Registry of named real parameter arrays with congruent gradient arrays.
// Complex parameters are registered as interleaved (re, im) real pairs, so
// the optimizer treats every parameter as real scalars. Views point into
// layer-owned storage; rebuild after copying a model.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    double* value = nullptr;
    double* grad = nullptr;
    Index count = 0;  // real scalars
    Shape shape;      // logical shape; complex arrays carry a trailing 2
    bool is_complex = false;
  };

  void add_real(const std::string& name, std::vector<double>& value, std::vector<double>& grad,
                Shape shape);
  void add_complex(const std::string& name, std::vector<cplx>& value, std::vector<cplx>& grad,
                   Shape shape);

  const std::vector<Entry>& entries() const { return entries_; }
  Index total() const { return total_; }
  void zero_grads();
  const Entry& find(const std::string& name) const;
  void clear();

 private:
  void add_entry(Entry e);
  std::vector<Entry> entries_;
  Index total_ = 0;
};

// Fast convolution layer: zero-pad each spatial axis n -> 2n, forward FFT on
// all spatial axes (real-input on the last, keeping bins 0..n), dense per-bin
// channel mix Y[v] = sum_k A[v,k] H[k] + b[v], Hermitian inverse transform,
// truncate back to n per axis. Kernel support equals the domain width, and no
// spectral bins are zeroed.
class FastConv {
 public:
  FastConv() = default;
  FastConv(std::string name, Index c_in, Index c_out, Shape spatial);

  // A entries complex-normal with std 1/(c_in*sqrt(bins)); b zero.
  void init_random(Rng& rng);
  void register_params(ParamStore& ps);

  struct Cache {
    ComplexTensor h_hat;  // input spectrum [c_in, bins...]
    bool valid = false;
  };

  Tensor forward(const Tensor& h, Cache* cache) const;
  // Returns dH and accumulates dA, db.
  Tensor backward(const Cache& cache, const Tensor& dy);

  Index c_in() const { return c_in_; }
  Index c_out() const { return c_out_; }
  const Shape& spatial() const { return spatial_; }
  const Shape& bins() const { return bins_; }
  Index bin_count() const { return bin_count_; }
  const std::string& name() const { return name_; }

  std::vector<cplx> a, b, da, db;  // a: [c_out][c_in][bins], b: [c_out][bins]

 private:
  ComplexTensor spectrum_(const Tensor& h) const;       // pad + forward transforms
  Tensor inverse_spectrum_(ComplexTensor y_hat) const;  // inverse transforms + truncate

  std::string name_;
  Index c_in_ = 0, c_out_ = 0;
  Shape spatial_, padded_, bins_;
  Index bin_count_ = 0;
};

// Pointwise-in-space, dense-across-channels affine map. Serves as the
// weighted skip connection, the soft state-matching maps, and the reference
// model's lift/project layers.
class ChannelAffine {
 public:
  ChannelAffine() = default;
  ChannelAffine(std::string name, Index c_in, Index c_out);

  void init_identity();            // square only
  void init_random(Rng& rng);      // normal, std 1/sqrt(c_in); bias zero
  void register_params(ParamStore& ps);

  Tensor forward(const Tensor& h) const;
  // Needs the forward input; returns dH and accumulates dW, db.
  Tensor backward(const Tensor& h_in, const Tensor& dy);

  Index c_in() const { return c_in_; }
  Index c_out() const { return c_out_; }
  const std::string& name() const { return name_; }

  std::vector<double> w, bias, dw, dbias;  // w: [c_out][c_in]

 private:
  std::string name_;
  Index c_in_ = 0, c_out_ = 0;
};

enum class Act { identity, tanh_fn, relu, sigmoid };

Act act_from_name(const std::string& name);
std::string act_name(Act a);

Tensor act_forward(Act a, const Tensor& x);
// Backward from cached outputs: tanh' = 1-y^2, sigmoid' = y(1-y), relu' = [y>0].
Tensor act_backward(Act a, const Tensor& y_out, const Tensor& dy);

}  // namespace pmfno

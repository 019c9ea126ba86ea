#pragma once

#include "pmfno/layers.hpp"

namespace pmfno {

enum class Arch { frnn, fgru, fno_ref };

Arch arch_from_name(const std::string& name);
std::string arch_name(Arch a);

struct ModelConfig {
  Arch arch = Arch::fgru;
  Index c_h = 8;                   // latent channels
  Index blocks = 3;                // frnn / fno_ref stacked blocks (fgru: fixed 3 gates)
  Act activation = Act::tanh_fn;   // block activation for frnn / fno_ref
  Shape grid;                      // spatial shape (powers of two)
  Index c_u = 0;                   // physical state channels
  std::uint64_t init_seed = 7;
};

// The three recurrent architectures over the fast-convolution layer.
//   frnn:    H' = F_M(...F_1(H)), F_m(H) = act(conv_m(H)) + skip_m(H)
//   fgru:    Z = sig(conv_z H), R = sig(conv_r H), Hc = tanh(conv_h(R.H)),
//            H' = (1-Z).H + Z.Hc
//   fno_ref: U' = project(blocks(lift(U))) -- physical state carried between
//            steps, lift/project inside each step.
// frnn/fgru wrap the latent recurrence with per-grid-point affine state maps.
class Model {
 public:
  Model() = default;
  explicit Model(const ModelConfig& cfg);
  Model(const Model& o);
  Model& operator=(const Model& o);
  // Moves transfer the layers' heap buffers wholesale, so the registered
  // parameter pointers stay valid.
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  Index param_count() const { return store_.total(); }
  Index spectral_param_count() const;

  struct StepCache {
    std::vector<FastConv::Cache> conv;
    std::vector<Tensor> block_in;  // input of each block
    std::vector<Tensor> act_out;   // activation output of each block
    Tensor h_in, z, r, hc;         // fgru intermediates
    Tensor lift_in, proj_in;       // fno_ref intermediates
  };

  struct RolloutCache {
    std::vector<StepCache> steps;  // transition t -> t+1 at index t
    std::vector<Tensor> latents;   // H^0..H^K (frnn/fgru only)
    Tensor u0;
  };

  // One cell application: latent state for frnn/fgru, physical for fno_ref.
  Tensor step(const Tensor& state, StepCache* cache) const;
  // Adjoint of one cell; accumulates parameter gradients, returns d(state).
  Tensor step_backward(const StepCache& cache, const Tensor& d_next);

  // Trajectory [K+1, C_u, grid...]. frnn/fgru emit frame k as
  // map_out(H^k) with H^0 = map_in(U^0); fno_ref emits U^0 verbatim.
  Tensor rollout(const Tensor& u0, Index steps, RolloutCache* cache = nullptr) const;
  // BPTT: reverse iteration over the cached steps; gradients accumulate into
  // the parameter store.
  void rollout_backward(const RolloutCache& cache, const Tensor& d_traj);

  std::vector<FastConv> convs;       // frnn/fno: per block; fgru: {z, r, h}
  std::vector<ChannelAffine> skips;  // frnn/fno only
  ChannelAffine map_in, map_out;     // state maps (frnn/fgru) or lift/project (fno_ref)

 private:
  void build_();
  void register_params_();
  Shape state_field_shape_(Index channels) const;

  ModelConfig cfg_;
  ParamStore store_;
};

}  // namespace pmfno

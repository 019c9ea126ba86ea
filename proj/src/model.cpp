#include "pmfno/model.hpp"

namespace pmfno {

namespace {

void add_into(Tensor& dst, const Tensor& src) {
  if (!dst.same_shape(src)) throw Error(Error::Code::config, "tensor sum shape mismatch");
  for (Index i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor frame_slice(const Tensor& traj, Index k, const Shape& field_shape) {
  const Index n = shape_size(field_shape);
  Tensor out(field_shape);
  std::copy(traj.data() + k * n, traj.data() + (k + 1) * n, out.data());
  return out;
}

}  // namespace

Arch arch_from_name(const std::string& name) {
  if (name == "frnn") return Arch::frnn;
  if (name == "fgru") return Arch::fgru;
  if (name == "fno_ref") return Arch::fno_ref;
  throw Error(Error::Code::config, "unknown architecture '" + name + "'");
}

std::string arch_name(Arch a) {
  switch (a) {
    case Arch::frnn: return "frnn";
    case Arch::fgru: return "fgru";
    case Arch::fno_ref: return "fno_ref";
  }
  return "?";
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
  if (cfg_.c_u < 1 || cfg_.c_h < 1 || cfg_.blocks < 1 || cfg_.grid.empty())
    throw Error(Error::Code::config, "model config: channels, blocks, and grid are required");
  build_();

  Rng rng(cfg_.init_seed);
  map_in.init_random(rng);
  map_out.init_random(rng);
  for (auto& c : convs) c.init_random(rng);
  for (auto& s : skips) s.init_identity();
  register_params_();
}

Model::Model(const Model& o)
    : convs(o.convs), skips(o.skips), map_in(o.map_in), map_out(o.map_out), cfg_(o.cfg_) {
  register_params_();
}

Model& Model::operator=(const Model& o) {
  if (this == &o) return *this;
  cfg_ = o.cfg_;
  convs = o.convs;
  skips = o.skips;
  map_in = o.map_in;
  map_out = o.map_out;
  register_params_();
  return *this;
}

void Model::build_() {
  const std::string tag = arch_name(cfg_.arch);
  convs.clear();
  skips.clear();
  switch (cfg_.arch) {
    case Arch::frnn:
    case Arch::fno_ref:
      for (Index m = 0; m < cfg_.blocks; ++m) {
        const std::string base = tag + ".block" + std::to_string(m);
        convs.emplace_back(base + ".conv", cfg_.c_h, cfg_.c_h, cfg_.grid);
        skips.emplace_back(base + ".skip", cfg_.c_h, cfg_.c_h);
      }
      break;
    case Arch::fgru:
      convs.emplace_back(tag + ".gate_z.conv", cfg_.c_h, cfg_.c_h, cfg_.grid);
      convs.emplace_back(tag + ".gate_r.conv", cfg_.c_h, cfg_.c_h, cfg_.grid);
      convs.emplace_back(tag + ".cand_h.conv", cfg_.c_h, cfg_.c_h, cfg_.grid);
      break;
  }
  if (cfg_.arch == Arch::fno_ref) {
    map_in = ChannelAffine(tag + ".lift", cfg_.c_u, cfg_.c_h);
    map_out = ChannelAffine(tag + ".project", cfg_.c_h, cfg_.c_u);
  } else {
    map_in = ChannelAffine(tag + ".map_in", cfg_.c_u, cfg_.c_h);
    map_out = ChannelAffine(tag + ".map_out", cfg_.c_h, cfg_.c_u);
  }
}

void Model::register_params_() {
  store_.clear();
  map_in.register_params(store_);
  map_out.register_params(store_);
  for (std::size_t m = 0; m < convs.size(); ++m) {
    convs[m].register_params(store_);
    if (m < skips.size()) skips[m].register_params(store_);
  }
}

Index Model::spectral_param_count() const {
  Index n = 0;
  for (const auto& c : convs) n += static_cast<Index>(2 * (c.a.size() + c.b.size()));
  return n;
}

Shape Model::state_field_shape_(Index channels) const {
  Shape s{channels};
  for (Index d : cfg_.grid) s.push_back(d);
  return s;
}

Tensor Model::step(const Tensor& state, StepCache* cache) const {
  switch (cfg_.arch) {
    case Arch::frnn: {
      Tensor x = state;
      if (cache) {
        cache->conv.resize(convs.size());
        cache->block_in.resize(convs.size());
        cache->act_out.resize(convs.size());
      }
      for (std::size_t m = 0; m < convs.size(); ++m) {
        Tensor s = convs[m].forward(x, cache ? &cache->conv[m] : nullptr);
        Tensor a = act_forward(cfg_.activation, s);
        Tensor next = skips[m].forward(x);
        add_into(next, a);
        if (cache) {
          cache->block_in[m] = std::move(x);
          cache->act_out[m] = std::move(a);
        }
        x = std::move(next);
      }
      return x;
    }
    case Arch::fgru: {
      const Tensor& h = state;
      if (cache && cache->conv.size() != 3) cache->conv.resize(3);
      Tensor z = act_forward(Act::sigmoid, convs[0].forward(h, cache ? &cache->conv[0] : nullptr));
      Tensor r = act_forward(Act::sigmoid, convs[1].forward(h, cache ? &cache->conv[1] : nullptr));
      Tensor rh = r;
      for (Index i = 0; i < rh.size(); ++i) rh[i] *= h[i];
      Tensor hc =
          act_forward(Act::tanh_fn, convs[2].forward(rh, cache ? &cache->conv[2] : nullptr));
      Tensor out(h.shape());
      for (Index i = 0; i < out.size(); ++i)
        out[i] = (1.0 - z[i]) * h[i] + z[i] * hc[i];
      if (cache) {
        cache->h_in = h;
        cache->z = std::move(z);
        cache->r = std::move(r);
        cache->hc = std::move(hc);
      }
      return out;
    }
    case Arch::fno_ref: {
      Tensor x = map_in.forward(state);
      if (cache) {
        cache->conv.resize(convs.size());
        cache->block_in.resize(convs.size());
        cache->act_out.resize(convs.size());
        cache->lift_in = state;
      }
      for (std::size_t m = 0; m < convs.size(); ++m) {
        Tensor s = convs[m].forward(x, cache ? &cache->conv[m] : nullptr);
        Tensor a = act_forward(cfg_.activation, s);
        Tensor next = skips[m].forward(x);
        add_into(next, a);
        if (cache) {
          cache->block_in[m] = std::move(x);
          cache->act_out[m] = std::move(a);
        }
        x = std::move(next);
      }
      if (cache) cache->proj_in = x;
      return map_out.forward(x);
    }
  }
  throw Error(Error::Code::config, "unknown architecture");
}

Tensor Model::step_backward(const StepCache& cache, const Tensor& d_next) {
  switch (cfg_.arch) {
    case Arch::frnn: {
      if (cache.block_in.size() != convs.size())
        throw Error(Error::Code::config, "step cache does not match model blocks");
      Tensor dx = d_next;
      for (std::size_t m = convs.size(); m-- > 0;) {
        Tensor da = act_backward(cfg_.activation, cache.act_out[m], dx);
        Tensor dxm = convs[m].backward(cache.conv[m], da);
        add_into(dxm, skips[m].backward(cache.block_in[m], dx));
        dx = std::move(dxm);
      }
      return dx;
    }
    case Arch::fgru: {
      const Tensor& h = cache.h_in;
      const Tensor& z = cache.z;
      const Tensor& r = cache.r;
      const Tensor& hc = cache.hc;
      Tensor dz(z.shape()), dhc(z.shape()), dh(z.shape());
      for (Index i = 0; i < dz.size(); ++i) {
        dz[i] = d_next[i] * (hc[i] - h[i]);
        dhc[i] = d_next[i] * z[i];
        dh[i] = d_next[i] * (1.0 - z[i]);
      }
      Tensor dah = act_backward(Act::tanh_fn, hc, dhc);
      Tensor drh = convs[2].backward(cache.conv[2], dah);
      Tensor dr(r.shape());
      for (Index i = 0; i < dr.size(); ++i) {
        dr[i] = drh[i] * h[i];
        dh[i] += drh[i] * r[i];
      }
      Tensor dar = act_backward(Act::sigmoid, r, dr);
      add_into(dh, convs[1].backward(cache.conv[1], dar));
      Tensor daz = act_backward(Act::sigmoid, z, dz);
      add_into(dh, convs[0].backward(cache.conv[0], daz));
      return dh;
    }
    case Arch::fno_ref: {
      Tensor dx = map_out.backward(cache.proj_in, d_next);
      for (std::size_t m = convs.size(); m-- > 0;) {
        Tensor da = act_backward(cfg_.activation, cache.act_out[m], dx);
        Tensor dxm = convs[m].backward(cache.conv[m], da);
        add_into(dxm, skips[m].backward(cache.block_in[m], dx));
        dx = std::move(dxm);
      }
      return map_in.backward(cache.lift_in, dx);
    }
  }
  throw Error(Error::Code::config, "unknown architecture");
}

Tensor Model::rollout(const Tensor& u0, Index steps, RolloutCache* cache) const {
  if (steps < 1) throw Error(Error::Code::config, "rollout requires at least one step");
  const Shape field = state_field_shape_(cfg_.c_u);
  if (u0.shape() != field)
    throw Error(Error::Code::config, "rollout: initial field shape " + shape_str(u0.shape()) +
                                         " != " + shape_str(field));

  Shape tshape{steps + 1};
  for (Index d : field) tshape.push_back(d);
  Tensor traj(tshape);
  const Index n = shape_size(field);

  const auto emit = [&](Index k, const Tensor& frame) {
    if (!all_finite(frame))
      throw Error(Error::Code::numeric, "non-finite state at rollout step " + std::to_string(k));
    std::copy(frame.data(), frame.data() + n, traj.data() + k * n);
  };

  if (cache) {
    cache->steps.clear();
    cache->latents.clear();
    cache->steps.resize(static_cast<std::size_t>(steps));
    cache->u0 = u0;
  }

  if (cfg_.arch == Arch::fno_ref) {
    Tensor state = u0;
    emit(0, state);
    for (Index k = 1; k <= steps; ++k) {
      state = step(state, cache ? &cache->steps[static_cast<std::size_t>(k - 1)] : nullptr);
      emit(k, state);
    }
  } else {
    Tensor h = map_in.forward(u0);
    if (cache) cache->latents.reserve(static_cast<std::size_t>(steps) + 1);
    if (cache) cache->latents.push_back(h);
    emit(0, map_out.forward(h));
    for (Index k = 1; k <= steps; ++k) {
      h = step(h, cache ? &cache->steps[static_cast<std::size_t>(k - 1)] : nullptr);
      if (!all_finite(h))
        throw Error(Error::Code::numeric,
                    "non-finite latent state at rollout step " + std::to_string(k));
      if (cache) cache->latents.push_back(h);
      emit(k, map_out.forward(h));
    }
  }
  return traj;
}

void Model::rollout_backward(const RolloutCache& cache, const Tensor& d_traj) {
  const Index steps = static_cast<Index>(cache.steps.size());
  if (steps < 1) throw Error(Error::Code::config, "rollout cache is empty");
  const Shape field = state_field_shape_(cfg_.c_u);
  Shape tshape{steps + 1};
  for (Index d : field) tshape.push_back(d);
  if (d_traj.shape() != tshape)
    throw Error(Error::Code::config, "rollout_backward: cotangent shape mismatch");

  if (cfg_.arch == Arch::fno_ref) {
    Tensor carry = frame_slice(d_traj, steps, field);
    for (Index t = steps - 1; t >= 0; --t) {
      carry = step_backward(cache.steps[static_cast<std::size_t>(t)], carry);
      if (t > 0) add_into(carry, frame_slice(d_traj, t, field));
    }
    // Frame 0 is the input itself: no parameters touched.
    return;
  }

  if (cache.latents.size() != static_cast<std::size_t>(steps) + 1)
    throw Error(Error::Code::config, "rollout cache latents missing");
  Tensor carry;  // d(H^k) accumulated from steps k+1..K
  for (Index k = steps; k >= 1; --k) {
    Tensor dh = map_out.backward(cache.latents[static_cast<std::size_t>(k)],
                                 frame_slice(d_traj, k, field));
    if (carry.size() > 0) add_into(dh, carry);
    carry = step_backward(cache.steps[static_cast<std::size_t>(k - 1)], dh);
  }
  Tensor dh0 = map_out.backward(cache.latents[0], frame_slice(d_traj, 0, field));
  add_into(dh0, carry);
  map_in.backward(cache.u0, dh0);
}

}  // namespace pmfno

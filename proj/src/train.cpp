#include "pmfno/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <numeric>
#include <thread>

namespace pmfno {

namespace {

double f32_round(double x) { return static_cast<double>(static_cast<float>(x)); }

std::string model_desc(const ModelConfig& mc) {
  return std::string(arch_name(mc.arch)) + " c_h=" + std::to_string(mc.c_h) +
         " blocks=" + std::to_string(mc.blocks) + " field [" + std::to_string(mc.c_u) + "] x " +
         shape_str(mc.grid);
}

}  // namespace

std::pair<double, Tensor> mse_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target))
    throw Error(Error::Code::config, "mse_loss: shape mismatch " + shape_str(pred.shape()) +
                                         " vs " + shape_str(target.shape()));
  const Index n = pred.size();
  Tensor grad(pred.shape());
  const double* p = pred.data();
  const double* t = target.data();
  double* g = grad.data();
  const double inv = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double d = p[i] - t[i];
    sum += d * d;
    g[i] = 2.0 * d * inv;
  }
  return {sum * inv, std::move(grad)};
}

double mse_value(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target))
    throw Error(Error::Code::config, "mse_value: shape mismatch " + shape_str(pred.shape()) +
                                         " vs " + shape_str(target.shape()));
  const Index n = pred.size();
  const double* p = pred.data();
  const double* t = target.data();
  double sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double d = p[i] - t[i];
    sum += d * d;
  }
  return sum / static_cast<double>(n);
}

double one_cycle_lr(std::int64_t step, std::int64_t total_steps, double lr_min, double lr_max) {
  if (total_steps < 1) return lr_min;
  const double s =
      std::clamp(static_cast<double>(step), 0.0, static_cast<double>(total_steps));
  const double peak = 0.3 * static_cast<double>(total_steps);
  const double span = lr_max - lr_min;
  if (s <= peak) {
    const double t = peak > 0.0 ? s / peak : 1.0;
    return lr_min + span * 0.5 * (1.0 - std::cos(std::numbers::pi * t));
  }
  const double t = (s - peak) / (static_cast<double>(total_steps) - peak);
  return lr_min + span * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void adamw_step(ParamStore& ps, AdamState& state, double lr, const TrainConfig& cfg) {
  const std::size_t n = static_cast<std::size_t>(ps.total());
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  if (state.m.size() != n || state.v.size() != n)
    throw Error(Error::Code::config, "adamw_step: optimizer state size disagrees with the store");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  std::size_t off = 0;
  for (const auto& e : ps.entries()) {
    for (Index i = 0; i < e.count; ++i) {
      const std::size_t k = off + static_cast<std::size_t>(i);
      const double g = e.grad[i];
      const double m = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
      const double v = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      const double p = e.value[i];
      const double updated =
          p - lr * cfg.weight_decay * p - lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
      // Parameters and moments are held at f32 precision so the in-memory
      // state round-trips through f32 checkpoints exactly and a reloaded run
      // continues bitwise.
      e.value[i] = f32_round(updated);
      state.m[k] = f32_round(m);
      state.v[k] = f32_round(v);
    }
    off += static_cast<std::size_t>(e.count);
  }
}

std::vector<double> dump_params(const ParamStore& ps) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(ps.total()));
  for (const auto& e : ps.entries()) out.insert(out.end(), e.value, e.value + e.count);
  return out;
}

void load_params(ParamStore& ps, const std::vector<double>& flat) {
  if (static_cast<Index>(flat.size()) != ps.total())
    throw Error(Error::Code::config,
                "parameter vector length " + std::to_string(flat.size()) +
                    " disagrees with the store (" + std::to_string(ps.total()) + ")");
  std::size_t off = 0;
  for (const auto& e : ps.entries()) {
    std::copy_n(flat.data() + off, static_cast<std::size_t>(e.count), e.value);
    off += static_cast<std::size_t>(e.count);
  }
}

json model_config_to_json(const ModelConfig& mc) {
  json j;
  j["arch"] = arch_name(mc.arch);
  j["c_h"] = mc.c_h;
  j["blocks"] = mc.blocks;
  j["activation"] = act_name(mc.activation);
  j["grid"] = mc.grid;
  j["c_u"] = mc.c_u;
  j["init_seed"] = mc.init_seed;
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig mc;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "arch") {
      mc.arch = arch_from_name(it.value().get<std::string>());
    } else if (k == "c_h") {
      mc.c_h = it.value().get<Index>();
    } else if (k == "blocks") {
      mc.blocks = it.value().get<Index>();
    } else if (k == "activation") {
      mc.activation = act_from_name(it.value().get<std::string>());
    } else if (k == "grid") {
      mc.grid = it.value().get<Shape>();
    } else if (k == "c_u") {
      mc.c_u = it.value().get<Index>();
    } else if (k == "init_seed") {
      mc.init_seed = it.value().get<std::uint64_t>();
    } else {
      throw Error(Error::Code::config, "unknown model key '" + k + "'");
    }
  }
  return mc;
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck) {
  Model layout(ck.model);
  const Index total = layout.param_count();
  for (const auto* arr : {&ck.params, &ck.m, &ck.v, &ck.best_params})
    if (static_cast<Index>(arr->size()) != total)
      throw Error(Error::Code::config,
                  "checkpoint arrays must all hold " + std::to_string(total) + " scalars");

  std::vector<float> payload;
  payload.reserve(static_cast<std::size_t>(4 * total));
  for (const auto* arr : {&ck.params, &ck.m, &ck.v, &ck.best_params})
    for (double v : *arr) payload.push_back(to_stored(v));

  json man;
  man["format_version"] = kContainerVersion;
  man["kind"] = "checkpoint";
  man["system"] = ck.system;
  man["physical_params"] = ck.physical_params;
  man["k_train"] = ck.k_train;
  man["model"] = model_config_to_json(ck.model);
  json arrays = json::array();
  for (const auto& e : layout.params().entries())
    arrays.push_back(json{{"name", e.name}, {"shape", e.shape}});
  man["parameters"] = arrays;
  man["param_count"] = total;
  man["step"] = ck.step;
  man["next_epoch"] = ck.next_epoch;
  man["seed"] = ck.seed;
  man["best_epoch"] = ck.best_epoch;
  man["best_val"] = f64_to_string(ck.best_val);
  man["scale"] = f64_to_string(ck.scale);
  man["payload_hash"] = hash_hex(fnv1a64(payload.data(), payload.size() * sizeof(float)));

  std::filesystem::create_directories(dir);
  write_pmfn_blob(dir / "data.bin", payload);
  write_manifest(dir, man);
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const json man = read_manifest(dir);
  try {
    if (man.at("format_version").get<int>() != kContainerVersion)
      throw Error(Error::Code::config, "unsupported checkpoint format version");
    if (man.at("kind").get<std::string>() != "checkpoint")
      throw Error(Error::Code::config, "manifest kind '" + man.at("kind").get<std::string>() +
                                           "' is not 'checkpoint'");
    Checkpoint ck;
    ck.model = model_config_from_json(man.at("model"));
    ck.system = man.at("system").get<std::string>();
    ck.physical_params = man.at("physical_params");
    ck.k_train = man.at("k_train").get<Index>();
    ck.step = man.at("step").get<std::int64_t>();
    ck.next_epoch = man.at("next_epoch").get<Index>();
    ck.seed = man.at("seed").get<std::uint64_t>();
    ck.best_epoch = man.at("best_epoch").get<Index>();
    ck.best_val = f64_from_string(man.at("best_val").get<std::string>());
    ck.scale = f64_from_string(man.at("scale").get<std::string>());

    Model layout(ck.model);
    const Index total = layout.param_count();
    if (man.at("param_count").get<Index>() != total)
      throw Error(Error::Code::config,
                  "manifest param_count disagrees with the model configuration");
    const json& arrays = man.at("parameters");
    const auto& entries = layout.params().entries();
    if (arrays.size() != entries.size())
      throw Error(Error::Code::config, "checkpoint parameter list length disagrees with the model");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const std::string name = arrays[i].at("name").get<std::string>();
      if (name != entries[i].name)
        throw Error(Error::Code::config, "checkpoint parameter layout disagrees with the model: '" +
                                             name + "' vs '" + entries[i].name + "'");
    }

    const std::vector<float> payload = read_pmfn_blob(dir / "data.bin");
    if (static_cast<Index>(payload.size()) != 4 * total)
      throw Error(Error::Code::config,
                  "checkpoint blob length disagrees with the manifest parameter count");
    if (hash_hex(fnv1a64(payload.data(), payload.size() * sizeof(float))) !=
        man.at("payload_hash").get<std::string>())
      throw Error(Error::Code::config, "checkpoint payload hash mismatch (corrupt data)");

    auto take = [&](std::size_t part) {
      std::vector<double> out(static_cast<std::size_t>(total));
      const std::size_t base = part * static_cast<std::size_t>(total);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = from_stored(payload[base + i]);
      return out;
    };
    ck.params = take(0);
    ck.m = take(1);
    ck.v = take(2);
    ck.best_params = take(3);
    return ck;
  } catch (const json::exception& e) {
    throw Error(Error::Code::config, std::string("checkpoint manifest malformed: ") + e.what());
  }
}

namespace {

struct ChunkOutcome {
  double loss_sum = 0.0;
  std::int64_t count = 0;
  std::exception_ptr error;
};

}  // namespace

TrainResult train(Model& model, const TrajectoryDataset& ds, const TrainConfig& cfg,
                  const Checkpoint* resume) {
  if (cfg.epochs < 1) throw Error(Error::Code::config, "train: epochs must be >= 1");
  if (cfg.stop_epoch < 0 || cfg.stop_epoch > cfg.epochs)
    throw Error(Error::Code::config, "train: stop_epoch must lie in [0, epochs]");
  if (cfg.batch < 1) throw Error(Error::Code::config, "train: batch must be >= 1");
  if (!(cfg.lr_min > 0.0 && cfg.lr_min < cfg.lr_max))
    throw Error(Error::Code::config, "train: need 0 < lr_min < lr_max");
  if (cfg.k_train < 1) throw Error(Error::Code::config, "train: k_train must be >= 1");
  if (cfg.k_train > ds.steps)
    throw Error(Error::Code::config, "train: k_train " + std::to_string(cfg.k_train) +
                                         " exceeds the dataset horizon " +
                                         std::to_string(ds.steps));
  if (cfg.threads < 1) throw Error(Error::Code::config, "train: threads must be >= 1");
  if (cfg.clip_norm < 0.0) throw Error(Error::Code::config, "train: clip_norm must be >= 0");
  if (ds.train_count() < 1)
    throw Error(Error::Code::config, "train: dataset has no training samples");
  const ModelConfig& mc = model.config();
  if (mc.grid != ds.grid || mc.c_u != ds.num_states)
    throw Error(Error::Code::config, "train: model field [" + std::to_string(mc.c_u) + "] x " +
                                         shape_str(mc.grid) + " disagrees with dataset [" +
                                         std::to_string(ds.num_states) + "] x " +
                                         shape_str(ds.grid));

  ParamStore& store = model.params();
  const Index n_train = ds.train_count();
  const Index n_total = ds.sample_count();
  const Index n_val = n_total - n_train;
  const Index steps_per_epoch = (n_train + cfg.batch - 1) / cfg.batch;
  const std::int64_t total_steps = static_cast<std::int64_t>(cfg.epochs) * steps_per_epoch;

  AdamState adam;
  Index start_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  Index best_epoch = -1;
  std::vector<double> best_params;

  if (resume) {
    const Checkpoint& ck = *resume;
    if (ck.model.arch != mc.arch || ck.model.c_h != mc.c_h || ck.model.blocks != mc.blocks ||
        ck.model.activation != mc.activation || ck.model.grid != mc.grid ||
        ck.model.c_u != mc.c_u)
      throw Error(Error::Code::config, "resume: checkpoint model (" + model_desc(ck.model) +
                                           ") disagrees with the requested model (" +
                                           model_desc(mc) + ")");
    if (ck.seed != cfg.seed)
      throw Error(Error::Code::config, "resume: checkpoint seed disagrees with the configured seed");
    if (ck.system != ds.system)
      throw Error(Error::Code::config, "resume: checkpoint system '" + ck.system +
                                           "' disagrees with dataset '" + ds.system + "'");
    if (ck.scale != ds.scale)
      throw Error(Error::Code::config,
                  "resume: checkpoint normalization scale disagrees with the dataset");
    const Index total = store.total();
    if (static_cast<Index>(ck.params.size()) != total ||
        static_cast<Index>(ck.m.size()) != total || static_cast<Index>(ck.v.size()) != total ||
        static_cast<Index>(ck.best_params.size()) != total)
      throw Error(Error::Code::config,
                  "resume: checkpoint parameter arrays disagree with the model size");
    if (ck.k_train != cfg.k_train)
      throw Error(Error::Code::config,
                  "resume: checkpoint k_train disagrees with the configured horizon");
    if (ck.next_epoch > cfg.epochs)
      throw Error(Error::Code::config, "resume: checkpoint is ahead of the requested epoch count");
    if (ck.step != static_cast<std::int64_t>(ck.next_epoch) * steps_per_epoch)
      throw Error(Error::Code::config,
                  "resume: checkpoint step count disagrees with the schedule"
                  " (batch size or training split changed?)");
    load_params(store, ck.params);
    adam.m = ck.m;
    adam.v = ck.v;
    adam.t = ck.step;
    start_epoch = ck.next_epoch;
    best_val = ck.best_val;
    best_epoch = ck.best_epoch;
    best_params = ck.best_params;
  } else {
    best_params = dump_params(store);
  }

  // Worker contexts: index 0 is the live model, the rest deep copies that see
  // parameter broadcasts after every optimizer step.
  const int n_workers = cfg.threads;
  std::vector<std::unique_ptr<Model>> clones;
  std::vector<Model*> ctx(static_cast<std::size_t>(n_workers));
  ctx[0] = &model;
  for (int w = 1; w < n_workers; ++w) {
    clones.emplace_back(std::make_unique<Model>(model));
    ctx[static_cast<std::size_t>(w)] = clones.back().get();
  }

  auto broadcast_params = [&]() {
    const auto& me = store.entries();
    for (int w = 1; w < n_workers; ++w) {
      const auto& we = ctx[static_cast<std::size_t>(w)]->params().entries();
      for (std::size_t i = 0; i < me.size(); ++i)
        std::copy_n(me[i].value, static_cast<std::size_t>(me[i].count), we[i].value);
    }
  };

  auto run_chunk = [&](Model& mdl, const std::vector<Index>& order, Index lo, Index hi, Index nb,
                       ChunkOutcome& out) {
    try {
      for (Index i = lo; i < hi; ++i) {
        const Tensor& sample = ds.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        Tensor u0 = frame_at(sample, 0);
        Tensor target = leading_frames(sample, cfg.k_train + 1);
        Model::RolloutCache cache;
        Tensor traj = mdl.rollout(u0, cfg.k_train, &cache);
        auto [loss, grad] = mse_loss(traj, target);
        as_vec(grad) /= static_cast<double>(nb);  // batch-mean objective
        mdl.rollout_backward(cache, grad);
        out.loss_sum += loss;
        ++out.count;
      }
    } catch (...) {
      out.error = std::current_exception();
    }
  };

  auto val_chunk = [&](const Model& mdl, Index lo, Index hi, ChunkOutcome& out) {
    try {
      for (Index i = lo; i < hi; ++i) {
        const Tensor& sample = ds.samples[static_cast<std::size_t>(i)];
        Tensor u0 = frame_at(sample, 0);
        Tensor target = leading_frames(sample, cfg.k_train + 1);
        Tensor traj = mdl.rollout(u0, cfg.k_train, nullptr);
        out.loss_sum += mse_value(traj, target);
      }
    } catch (...) {
      out.error = std::current_exception();
    }
  };

  auto rethrow_tagged = [](const ChunkOutcome& out, const std::string& where) {
    if (!out.error) return;
    try {
      std::rethrow_exception(out.error);
    } catch (const Error& e) {
      throw Error(e.code, where + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(Error::Code::numeric, where + ": " + e.what());
    }
  };

  TrainResult res;
  std::vector<Index> order(static_cast<std::size_t>(n_train));

  // An early stop point truncates the run without touching the learning-rate
  // schedule, so a checkpointed prefix continues bitwise as the full run.
  const Index end_epoch = cfg.stop_epoch > 0 ? cfg.stop_epoch : cfg.epochs;

  for (Index epoch = start_epoch; epoch < end_epoch; ++epoch) {
    std::iota(order.begin(), order.end(), Index{0});
    Rng shuffler = Rng::stream(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch));
    shuffler.shuffle(order);

    double epoch_loss = 0.0;
    double lr_last = cfg.lr_min;
    for (Index b = 0; b < steps_per_epoch; ++b) {
      const Index i0 = b * cfg.batch;
      const Index i1 = std::min(n_train, i0 + cfg.batch);
      const Index nb = i1 - i0;
      const double lr = one_cycle_lr(adam.t, total_steps, cfg.lr_min, cfg.lr_max);
      const std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(b);

      for (int w = 0; w < n_workers; ++w) ctx[static_cast<std::size_t>(w)]->params().zero_grads();
      std::vector<ChunkOutcome> outs(static_cast<std::size_t>(n_workers));
      if (n_workers == 1) {
        run_chunk(model, order, i0, i1, nb, outs[0]);
      } else {
        const Index len = (nb + n_workers - 1) / n_workers;
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) {
          const Index lo = std::min(i1, i0 + w * len);
          const Index hi = std::min(i1, lo + len);
          pool.emplace_back([&, w, lo, hi]() {
            run_chunk(*ctx[static_cast<std::size_t>(w)], order, lo, hi, nb,
                      outs[static_cast<std::size_t>(w)]);
          });
        }
        for (auto& th : pool) th.join();
      }

      double batch_loss = 0.0;
      for (int w = 0; w < n_workers; ++w) {
        rethrow_tagged(outs[static_cast<std::size_t>(w)], where);
        batch_loss += outs[static_cast<std::size_t>(w)].loss_sum;
        res.grad_samples += outs[static_cast<std::size_t>(w)].count;
      }
      if (n_workers > 1) {  // reduce gradients in fixed worker order
        const auto& me = store.entries();
        for (int w = 1; w < n_workers; ++w) {
          const auto& we = ctx[static_cast<std::size_t>(w)]->params().entries();
          for (std::size_t i = 0; i < me.size(); ++i)
            for (Index j = 0; j < me[i].count; ++j) me[i].grad[j] += we[i].grad[j];
        }
      }
      if (!std::isfinite(batch_loss))
        throw Error(Error::Code::numeric, where + ": non-finite training loss");

      if (cfg.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& e : store.entries())
          for (Index j = 0; j < e.count; ++j) sq += e.grad[j] * e.grad[j];
        const double norm = std::sqrt(sq);
        if (norm > cfg.clip_norm) {
          const double sc = cfg.clip_norm / norm;
          for (const auto& e : store.entries())
            for (Index j = 0; j < e.count; ++j) e.grad[j] *= sc;
        }
      }

      adamw_step(store, adam, lr, cfg);
      broadcast_params();
      epoch_loss += batch_loss;
      lr_last = lr;
    }

    const double train_mse = epoch_loss / static_cast<double>(n_train);
    double val_mse = train_mse;  // stands in when no samples are held out
    if (n_val > 0) {
      const std::string where = "epoch " + std::to_string(epoch) + ", validation";
      std::vector<ChunkOutcome> outs(static_cast<std::size_t>(n_workers));
      if (n_workers == 1) {
        val_chunk(model, n_train, n_total, outs[0]);
      } else {
        const Index len = (n_val + n_workers - 1) / n_workers;
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) {
          const Index lo = std::min(n_total, n_train + w * len);
          const Index hi = std::min(n_total, lo + len);
          pool.emplace_back([&, w, lo, hi]() {
            val_chunk(*ctx[static_cast<std::size_t>(w)], lo, hi,
                      outs[static_cast<std::size_t>(w)]);
          });
        }
        for (auto& th : pool) th.join();
      }
      double vsum = 0.0;
      for (int w = 0; w < n_workers; ++w) {
        rethrow_tagged(outs[static_cast<std::size_t>(w)], where);
        vsum += outs[static_cast<std::size_t>(w)].loss_sum;
      }
      val_mse = vsum / static_cast<double>(n_val);
    }

    if (val_mse < best_val) {
      best_val = val_mse;
      best_epoch = epoch;
      best_params = dump_params(store);
    }
    res.log.push_back({epoch, train_mse, val_mse, lr_last});

    if (!cfg.checkpoint_dir.empty()) {
      Checkpoint ck;
      ck.model = mc;
      ck.system = ds.system;
      ck.physical_params = ds.physical_params;
      ck.k_train = cfg.k_train;
      ck.params = dump_params(store);
      ck.m = adam.m;
      ck.v = adam.v;
      ck.best_params = best_params;
      ck.step = adam.t;
      ck.next_epoch = epoch + 1;
      ck.seed = cfg.seed;
      ck.best_val = best_val;
      ck.best_epoch = best_epoch;
      ck.scale = ds.scale;
      save_checkpoint(cfg.checkpoint_dir, ck);
    }
    if (cfg.verbose)
      std::fprintf(stderr, "epoch %lld/%lld  train %.6e  val %.6e  lr %.3e\n",
                   static_cast<long long>(epoch + 1), static_cast<long long>(cfg.epochs),
                   train_mse, val_mse, lr_last);
  }

  load_params(store, best_params);
  res.best_val = best_val;
  res.best_epoch = best_epoch;
  return res;
}

}  // namespace pmfno

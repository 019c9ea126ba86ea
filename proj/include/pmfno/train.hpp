#pragma once

#include <filesystem>
#include <limits>
#include <utility>

#include "pmfno/dataset.hpp"
#include "pmfno/model.hpp"

namespace pmfno {

struct TrainConfig {
  Index epochs = 300;
  Index stop_epoch = 0;  // halt after this many epochs while still scheduling
                         // the learning rate over all `epochs` (0 = run to the end)
  Index batch = 16;
  double lr_min = 1e-4;
  double lr_max = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::uint64_t seed = 1234;
  Index k_train = 64;      // rollout horizon per training sequence
  double clip_norm = 0.0;  // global-norm gradient clip; 0 disables
  int threads = 1;
  std::string checkpoint_dir;  // write a checkpoint after every epoch when set
  bool verbose = false;        // per-epoch progress on stderr
};

// Mean over all elements of (pred-target)^2, and its gradient 2*(pred-target)/count.
std::pair<double, Tensor> mse_loss(const Tensor& pred, const Tensor& target);
double mse_value(const Tensor& pred, const Tensor& target);

// Cosine rise lr_min -> lr_max over the first 30% of steps, cosine anneal back
// over the remainder. step 0 maps to lr_min, step 0.3*total to lr_max.
double one_cycle_lr(std::int64_t step, std::int64_t total_steps, double lr_min, double lr_max);

struct AdamState {
  std::vector<double> m, v;  // first/second moments, flat across ParamStore entries
  std::int64_t t = 0;        // completed optimizer steps
};

// Decoupled-weight-decay Adam with bias correction. Updated parameters and
// moments are rounded to their f32 values on every step, so the optimizer
// state is always exactly representable in checkpoints and a reloaded run
// continues bitwise.
void adamw_step(ParamStore& ps, AdamState& state, double lr, const TrainConfig& cfg);

// Flat parameter vector in ParamStore entry order (complex entries interleaved
// re/im), and its inverse.
std::vector<double> dump_params(const ParamStore& ps);
void load_params(ParamStore& ps, const std::vector<double>& flat);

json model_config_to_json(const ModelConfig& mc);
ModelConfig model_config_from_json(const json& j);

struct Checkpoint {
  ModelConfig model;
  std::string system;      // dataset system name
  json physical_params;    // the dataset's physical parameter map
  Index k_train = 0;       // training rollout horizon
  std::vector<double> params, m, v, best_params;
  std::int64_t step = 0;   // optimizer steps taken (== Adam t)
  Index next_epoch = 0;    // first epoch a resumed run executes
  std::uint64_t seed = 0;  // shuffle-stream seed the run was started with
  double best_val = std::numeric_limits<double>::infinity();
  Index best_epoch = -1;
  double scale = 1.0;  // dataset normalization divisor the run was trained with
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

struct EpochLog {
  Index epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double lr_last = 0.0;  // learning rate of the epoch's final optimizer step
};

struct TrainResult {
  std::vector<EpochLog> log;
  double best_val = std::numeric_limits<double>::infinity();
  Index best_epoch = -1;
  std::int64_t grad_samples = 0;  // samples that contributed gradients
};

// Sequence-MSE training over the dataset's training split: per epoch, a seeded
// shuffle, batched rollout + backprop-through-time, one optimizer step per
// batch with the scheduled learning rate, then a no-gradient validation pass
// over the held-out split. The model is left holding the parameters of the
// best-validation epoch. When the dataset reserves no validation samples
// (fewer than ten samples total), the training MSE stands in as the selection
// metric and is logged as val_mse. `resume` continues a checkpointed run
// bitwise; the caller must pass the same dataset and config.
TrainResult train(Model& model, const TrajectoryDataset& ds, const TrainConfig& cfg,
                  const Checkpoint* resume = nullptr);

}  // namespace pmfno

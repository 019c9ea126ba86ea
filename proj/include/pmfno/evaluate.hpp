#pragma once

#include <filesystem>
#include <functional>

#include "pmfno/dataset.hpp"
#include "pmfno/linalg.hpp"
#include "pmfno/model.hpp"

namespace pmfno {

// One continuous-time pole recovered from a discrete eigenvalue lambda:
// s = ln|lambda|/T + i*arg(lambda)/T. Only nonnegative-frequency members of
// conjugate pairs are reported.
struct Pole {
  double freq_hz = 0.0;    // arg(lambda) / (2*pi*T)
  double magnitude = 0.0;  // |lambda|, per sample step
  double re_s = 0.0;
  double im_s = 0.0;
};

struct PoleSet {
  std::string source;       // "ground_truth" or a model name
  std::vector<Pole> poles;  // sorted by frequency
};

// Snapshot count used for the transition fit when the caller does not choose:
// min(available frames, 4 * flattened state dimension).
Index default_pole_frames(Index state_dim, Index available_frames);

// Least-squares one-step transition matrix G minimizing ||U_next - G*U_prev||_F
// over the leading `frames` snapshots of a [K+1, C, grid...] trajectory
// (frames = 0 picks the default). Channels are balanced to unit RMS before the
// fit — a diagonal similarity that preserves the eigenvalues while keeping
// mixed-unit states (displacement vs. velocity) well conditioned.
Eigen::MatrixXd estimate_transition(const Tensor& trajectory, Index frames = 0);

PoleSet poles_from_transition(const Eigen::MatrixXd& g, double sample_interval,
                              std::string source);

PoleSet estimate_poles(const Tensor& trajectory, double sample_interval, std::string source,
                       Index frames = 0);

// Greedy nearest-frequency pairing with a relative frequency gate; unmatched
// poles are reported, not errored.
struct PoleMatch {
  Index ref_index = -1;
  Index est_index = -1;
  double rel_freq_error = 0.0;
  double rel_s_error = 0.0;  // |s_ref - s_est| / |s_ref|
};

struct PoleComparison {
  std::vector<PoleMatch> matches;
  std::vector<Index> unmatched_ref, unmatched_est;
  double max_rel_s_error = 0.0;  // over matches; 0 when none
};

PoleComparison match_poles(const PoleSet& reference, const PoleSet& estimate,
                           double freq_gate = 0.02);

// A trajectory producer: full rollout [steps+1, C, grid...] from a (normalized)
// initial field. `sample_index` lets oracle wrappers look up stored data.
using RolloutFn = std::function<Tensor(Index sample_index, const Tensor& u0, Index steps)>;

RolloutFn model_rollout_fn(const Model& model);
// Ground truth as a model: returns the stored frames (horizon must fit).
RolloutFn oracle_rollout_fn(const TrajectoryDataset& ds);

struct EvalReport {
  Index horizon = 0;
  Index train_samples = 0, val_samples = 0;
  double train_mse = 0.0, val_mse = 0.0;
};

// Mean sequence MSE per split at the given horizon (default: the dataset's
// stored horizon). Horizons beyond the stored trajectories require `resynth`,
// the system description used to extend ground truth on demand; stored fields
// are de-normalized by ds.scale, re-synthesized, and normalized back.
EvalReport eval_mse(const RolloutFn& fn, const TrajectoryDataset& ds, Index horizon = 0,
                    const SystemSpec* resynth = nullptr);

// Long-horizon comparison against freshly synthesized ground truth, plus pole
// sets for both trajectories. Fields are physical; step MSE is computed on
// scale-normalized fields (the training metric).
struct RolloutBundle {
  Tensor truth, prediction;      // [steps+1, C, grid...], physical units
  std::vector<double> step_mse;  // per-frame spatial MSE, normalized fields
  PoleSet truth_poles, model_poles;
  double sample_interval = 0.0;
};

RolloutBundle rollout_report(const Model& model, double scale, const SystemSpec& sys,
                             const ExcitationSpec& exc, Index steps, Index pole_frames = 0);

// CSV/JSON emission. Pole CSV header is exactly
// "freq_hz,magnitude,re_s,im_s,source".
void write_pole_csv(const std::filesystem::path& file, const std::vector<PoleSet>& sets);
void write_step_mse_csv(const std::filesystem::path& file, const std::vector<double>& step_mse);
void write_trajectory_csv(const std::filesystem::path& file, const Tensor& trajectory);
void write_rollout_bundle(const std::filesystem::path& dir, const RolloutBundle& bundle);

}  // namespace pmfno

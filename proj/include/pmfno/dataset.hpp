#pragma once

#include "pmfno/container.hpp"
#include "pmfno/modal.hpp"
#include "pmfno/nlstring.hpp"

namespace pmfno {

// Which physical system backs a dataset, with its parameters.
struct SystemSpec {
  enum class Kind { string, wave2d, nlstring };
  Kind kind = Kind::string;
  StringParams string;
  Wave2DParams wave2d;
  NlStringParams nlstring;

  std::string name() const;
  static Kind kind_from_name(const std::string& name);
};

struct ExcitationSpec {
  enum class Kind { impulse, pluck, random };
  Kind kind = Kind::impulse;
  std::vector<double> position;  // fraction of the domain per spatial axis, in (0,1)
  double amplitude = 1e-3;       // m (string) or Pa (wave2d)
  double width = 0.1;            // pluck half-width as a fraction of the domain
  Index mode_cutoff = 0;         // random fields: keep this many modes (0 = all representable)
};

struct DatasetParams {
  Index samples = 256;  // even: half impulsive, half random fields
  Index steps = 64;     // trajectory length K (stored frames: K+1)
  std::uint64_t seed = 1234;
  double amp_min = 1e-4;  // log-uniform amplitude range
  double amp_max = 2e-3;
  double pluck_width = 0.1;
  Index random_mode_cutoff = 0;
};

struct TrajectoryDataset {
  std::string system;
  Index steps = 0;       // K
  Index num_states = 0;  // C
  Shape grid;
  std::vector<Tensor> samples;  // [K+1, C, grid...] each; normalized, f32-representable
  double scale = 1.0;           // training-portion standard deviation divided out
  Index split = 0;              // first validation sample index
  std::uint64_t seed = 0;
  json physical_params;
  std::vector<std::uint64_t> sample_hashes;  // FNV-1a over each sample's f32 bytes

  Index sample_count() const { return static_cast<Index>(samples.size()); }
  Index train_count() const { return split; }
  Shape sample_shape() const;
  Shape full_shape() const;  // [S, K+1, C, grid...]
};

json system_params_json(const SystemSpec& sys);

// [C, grid...] of the system's state field, audio rate, and a single
// ground-truth trajectory [steps+1, C, grid...] from a raw excitation field.
Shape system_state_shape(const SystemSpec& sys);
double system_sample_rate(const SystemSpec& sys);
Tensor synthesize_trajectory(const SystemSpec& sys, const Tensor& field, Index steps);

// The raw excitation field [C, grid...]. Impulses and plucks are returned
// verbatim (velocities zero); random fields are drawn per grid point and then
// projected onto the representable modal span (mean-removed for wave2d, where
// the DC mode is excluded).
Tensor make_initial_condition(const SystemSpec& sys, const ExcitationSpec& spec);

// Deterministic dataset synthesis: samples [0, S/2) are impulses or plucks,
// [S/2, S) random fields; every sample draws from Rng::stream(seed, index).
// All frames are divided by the training-portion standard deviation and
// quantized to their stored f32 values.
TrajectoryDataset generate(const SystemSpec& sys, const DatasetParams& dp);

void save_dataset(const TrajectoryDataset& ds, const std::filesystem::path& dir);
TrajectoryDataset load_dataset(const std::filesystem::path& dir);

}  // namespace pmfno

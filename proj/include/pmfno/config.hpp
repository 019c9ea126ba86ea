#pragma once

#include <filesystem>

#include "pmfno/dataset.hpp"
#include "pmfno/model.hpp"
#include "pmfno/train.hpp"

namespace pmfno {

struct EvalConfig {
  Index horizon = 0;      // 0 = the dataset's stored horizon
  Index pole_frames = 0;  // 0 = min(frames, 4 * state dimension)
};

// One JSON document with sections system / dataset / model / train / eval.
// Parsing is fail-closed: unknown keys are rejected, types must match the
// defaults. `doc` holds the fully merged document for copying into outputs.
struct RunConfig {
  SystemSpec system;
  DatasetParams dataset;
  ModelConfig model;  // grid / c_u are derived from the system, not config keys
  TrainConfig train;
  EvalConfig eval;
  json doc;
};

json default_config();
RunConfig config_from_json(const json& user);
RunConfig load_config(const std::filesystem::path& file);

// Dotted key -> default value (serialized), in document order; drives --help.
std::vector<std::pair<std::string, std::string>> config_keys();

// Model config with grid and channel count filled in from the system.
ModelConfig resolved_model_config(const RunConfig& rc);

// Rebuild a system description from a dataset manifest's flat parameter map.
SystemSpec system_spec_from_json(const std::string& name, const json& params);

// Fail-closed excitation description: {"kind": "impulse|pluck|random",
// "position": [fractions...], "amplitude": a, "width": w, "mode_cutoff": n}.
ExcitationSpec excitation_from_json(const json& j);

}  // namespace pmfno

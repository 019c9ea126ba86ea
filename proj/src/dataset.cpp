#include "pmfno/dataset.hpp"

#include "pmfno/rng.hpp"

#include <cmath>
#include <numbers>

namespace pmfno {

namespace {

constexpr double kPi = std::numbers::pi;

void require(bool ok, Error::Code code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

Shape state_shape(const SystemSpec& sys) {
  switch (sys.kind) {
    case SystemSpec::Kind::string:
      return {2, sys.string.with_defaults().grid_points};
    case SystemSpec::Kind::nlstring:
      return {2, sys.nlstring.with_defaults().base.grid_points};
    case SystemSpec::Kind::wave2d: {
      const Wave2DParams p = sys.wave2d.with_defaults();
      return {3, p.nx, p.ny};
    }
  }
  throw Error(Error::Code::config, "unknown system kind");
}

// Interior grid: fraction -> nearest point index of x_n = (n+1)L/(N+1).
Index interior_index(double frac, Index n) {
  const auto i = static_cast<Index>(std::llround(frac * static_cast<double>(n + 1))) - 1;
  return std::clamp<Index>(i, 0, n - 1);
}

// Boundary-inclusive grid: fraction -> nearest point of x_m = m*L/(M-1).
Index inclusive_index(double frac, Index m) {
  const auto i = static_cast<Index>(std::llround(frac * static_cast<double>(m - 1)));
  return std::clamp<Index>(i, 0, m - 1);
}

void check_positions(const ExcitationSpec& spec, std::size_t want) {
  require(spec.position.size() == want, Error::Code::config,
          "excitation needs " + std::to_string(want) + " position fraction(s)");
  for (double f : spec.position)
    require(f > 0.0 && f < 1.0, Error::Code::config, "excitation position must lie in (0,1)");
  require(spec.amplitude > 0.0, Error::Code::config, "excitation amplitude must be > 0");
}

Tensor string_initial_condition(const StringParams& p, Index modes, const ExcitationSpec& spec,
                                Rng* rng) {
  const Index n = p.grid_points;
  Tensor field({2, n});
  switch (spec.kind) {
    case ExcitationSpec::Kind::impulse: {
      check_positions(spec, 1);
      field.at(0, interior_index(spec.position[0], n)) = spec.amplitude;
      break;
    }
    case ExcitationSpec::Kind::pluck: {
      check_positions(spec, 1);
      require(spec.width > 0.0, Error::Code::config, "pluck width must be > 0");
      const double x0 = spec.position[0];
      require(x0 - spec.width >= 0.0 && x0 + spec.width <= 1.0, Error::Code::config,
              "pluck support exceeds the domain");
      for (Index g = 0; g < n; ++g) {
        const double x = static_cast<double>(g + 1) / static_cast<double>(n + 1);
        if (std::abs(x - x0) < spec.width)
          field.at(0, g) = 0.5 * spec.amplitude * (1.0 + std::cos(kPi * (x - x0) / spec.width));
      }
      break;
    }
    case ExcitationSpec::Kind::random: {
      require(rng != nullptr, Error::Code::config, "random excitation needs an RNG");
      require(spec.amplitude > 0.0, Error::Code::config, "excitation amplitude must be > 0");
      Index keep = modes;
      if (spec.mode_cutoff > 0) keep = std::min(keep, spec.mode_cutoff);
      Eigen::VectorXd raw(n);
      for (Index g = 0; g < n; ++g) raw[g] = rng->normal();
      const Eigen::VectorXd proj = spec.amplitude * project_onto_sine_modes(p.length, keep, raw);
      for (Index g = 0; g < n; ++g) field.at(0, g) = proj[g];
      break;
    }
  }
  return field;
}

Tensor wave2d_initial_condition(const Wave2DParams& p, const ExcitationSpec& spec, Rng* rng) {
  Tensor field({3, p.nx, p.ny});
  switch (spec.kind) {
    case ExcitationSpec::Kind::impulse: {
      check_positions(spec, 2);
      field.at(0, inclusive_index(spec.position[0], p.nx),
               inclusive_index(spec.position[1], p.ny)) = spec.amplitude;
      break;
    }
    case ExcitationSpec::Kind::pluck:
      throw Error(Error::Code::config, "wave2d uses impulse or random excitations");
    case ExcitationSpec::Kind::random: {
      require(rng != nullptr, Error::Code::config, "random excitation needs an RNG");
      require(spec.amplitude > 0.0, Error::Code::config, "excitation amplitude must be > 0");
      Wave2DParams q = p;
      if (spec.mode_cutoff > 0) {
        q.qx = std::min(q.qx, spec.mode_cutoff);
        q.qy = std::min(q.qy, spec.mode_cutoff);
      }
      Eigen::MatrixXd raw(p.nx, p.ny);
      for (Index m = 0; m < p.nx; ++m)
        for (Index g = 0; g < p.ny; ++g) raw(m, g) = rng->normal();
      const Eigen::MatrixXd proj = spec.amplitude * project_onto_cos_modes(q, raw);
      for (Index m = 0; m < p.nx; ++m)
        for (Index g = 0; g < p.ny; ++g) field.at(0, m, g) = proj(m, g);
      break;
    }
  }
  return field;
}

}  // namespace

std::string SystemSpec::name() const {
  switch (kind) {
    case Kind::string: return "string";
    case Kind::wave2d: return "wave2d";
    case Kind::nlstring: return "nlstring";
  }
  return "?";
}

SystemSpec::Kind SystemSpec::kind_from_name(const std::string& name) {
  if (name == "string") return Kind::string;
  if (name == "wave2d") return Kind::wave2d;
  if (name == "nlstring") return Kind::nlstring;
  throw Error(Error::Code::config, "unknown system '" + name + "'");
}

Shape TrajectoryDataset::sample_shape() const {
  Shape s{steps + 1, num_states};
  for (Index d : grid) s.push_back(d);
  return s;
}

Shape TrajectoryDataset::full_shape() const {
  Shape s{sample_count()};
  for (Index d : sample_shape()) s.push_back(d);
  return s;
}

json system_params_json(const SystemSpec& sys) {
  json j;
  const auto string_fields = [](const StringParams& p) {
    json s;
    s["length"] = p.length;
    s["density"] = p.density;
    s["cross_section"] = p.cross_section;
    s["youngs_modulus"] = p.youngs_modulus;
    s["moment_inertia"] = p.moment_inertia;
    s["tension"] = p.tension;
    s["d1"] = p.d1;
    s["d3"] = p.d3;
    s["grid_points"] = p.grid_points;
    s["modes"] = p.modes;
    s["sample_rate"] = p.sample_rate;
    return s;
  };
  switch (sys.kind) {
    case SystemSpec::Kind::string:
      j = string_fields(sys.string.with_defaults());
      break;
    case SystemSpec::Kind::nlstring: {
      const NlStringParams p = sys.nlstring.with_defaults();
      j = string_fields(p.base);
      j["modes_m"] = p.modes_m;
      j["oversample"] = p.oversample;
      break;
    }
    case SystemSpec::Kind::wave2d: {
      const Wave2DParams p = sys.wave2d.with_defaults();
      j["lx"] = p.lx;
      j["ly"] = p.ly;
      j["rho0"] = p.rho0;
      j["c0"] = p.c0;
      j["nx"] = p.nx;
      j["ny"] = p.ny;
      j["qx"] = p.qx;
      j["qy"] = p.qy;
      j["sample_rate"] = p.sample_rate;
      break;
    }
  }
  return j;
}

Tensor make_initial_condition(const SystemSpec& sys, const ExcitationSpec& spec) {
  Rng rng(spec.kind == ExcitationSpec::Kind::random ? 0x9d5ecu : 0u);
  switch (sys.kind) {
    case SystemSpec::Kind::string: {
      const StringParams p = sys.string.with_defaults();
      return string_initial_condition(p, p.modes, spec, &rng);
    }
    case SystemSpec::Kind::nlstring: {
      const NlStringParams p = sys.nlstring.with_defaults();
      return string_initial_condition(p.base, p.modes_m, spec, &rng);
    }
    case SystemSpec::Kind::wave2d:
      return wave2d_initial_condition(sys.wave2d.with_defaults(), spec, &rng);
  }
  throw Error(Error::Code::config, "unknown system kind");
}

Shape system_state_shape(const SystemSpec& sys) { return state_shape(sys); }

double system_sample_rate(const SystemSpec& sys) {
  switch (sys.kind) {
    case SystemSpec::Kind::string:
      return sys.string.with_defaults().sample_rate;
    case SystemSpec::Kind::nlstring:
      return sys.nlstring.with_defaults().base.sample_rate;
    case SystemSpec::Kind::wave2d:
      return sys.wave2d.with_defaults().sample_rate;
  }
  throw Error(Error::Code::config, "unknown system kind");
}

Tensor synthesize_trajectory(const SystemSpec& sys, const Tensor& field, Index steps) {
  switch (sys.kind) {
    case SystemSpec::Kind::string:
      return synthesize(string_modal_system(sys.string), field, steps);
    case SystemSpec::Kind::wave2d:
      return synthesize(wave2d_modal_system(sys.wave2d), field, steps);
    case SystemSpec::Kind::nlstring: {
      const NlStringParams nl = sys.nlstring.with_defaults();
      return nlstring_integrate(nl, project_to_modes(nl, field), steps);
    }
  }
  throw Error(Error::Code::config, "unknown system kind");
}

TrajectoryDataset generate(const SystemSpec& sys, const DatasetParams& dp) {
  require(dp.samples >= 2 && dp.samples % 2 == 0, Error::Code::config,
          "sample count must be even (half impulsive, half random)");
  require(dp.steps >= 1, Error::Code::config, "trajectory steps must be >= 1");
  require(dp.amp_min > 0 && dp.amp_max >= dp.amp_min, Error::Code::config,
          "amplitude range must satisfy 0 < min <= max");
  require(dp.pluck_width > 0 && dp.pluck_width < 0.5, Error::Code::config,
          "pluck width fraction must lie in (0, 0.5)");

  TrajectoryDataset ds;
  ds.system = sys.name();
  ds.steps = dp.steps;
  ds.seed = dp.seed;
  ds.physical_params = system_params_json(sys);

  const Shape field_shape = state_shape(sys);
  ds.num_states = field_shape[0];
  ds.grid.assign(field_shape.begin() + 1, field_shape.end());

  ModalSystem modal;
  NlStringParams nl;
  if (sys.kind == SystemSpec::Kind::string)
    modal = string_modal_system(sys.string);
  else if (sys.kind == SystemSpec::Kind::wave2d)
    modal = wave2d_modal_system(sys.wave2d);
  else
    nl = sys.nlstring.with_defaults();

  const Index s_count = dp.samples;
  ds.samples.reserve(static_cast<std::size_t>(s_count));
  const std::size_t spatial_rank = ds.grid.size();

  for (Index i = 0; i < s_count; ++i) {
    Rng rng = Rng::stream(dp.seed, static_cast<std::uint64_t>(i));

    ExcitationSpec spec;
    if (i < s_count / 2) {
      // String systems alternate impulses and plucks by coin flip; the 2d
      // wave uses point impulses only.
      const bool pluck = sys.kind != SystemSpec::Kind::wave2d && rng.below(2) == 1;
      spec.kind = pluck ? ExcitationSpec::Kind::pluck : ExcitationSpec::Kind::impulse;
    } else {
      spec.kind = ExcitationSpec::Kind::random;
    }
    spec.width = dp.pluck_width;
    spec.mode_cutoff = dp.random_mode_cutoff;
    spec.position.resize(spatial_rank);
    for (std::size_t a = 0; a < spatial_rank; ++a) {
      const double lo = spec.kind == ExcitationSpec::Kind::pluck ? dp.pluck_width : 0.02;
      spec.position[a] = rng.uniform(lo, 1.0 - lo);
    }
    spec.amplitude = std::exp(rng.uniform(std::log(dp.amp_min), std::log(dp.amp_max)));

    try {
      Tensor field;
      switch (sys.kind) {
        case SystemSpec::Kind::string:
          field = string_initial_condition(sys.string.with_defaults(),
                                           sys.string.with_defaults().modes, spec, &rng);
          ds.samples.push_back(synthesize(modal, field, dp.steps));
          break;
        case SystemSpec::Kind::wave2d:
          field = wave2d_initial_condition(sys.wave2d.with_defaults(), spec, &rng);
          ds.samples.push_back(synthesize(modal, field, dp.steps));
          break;
        case SystemSpec::Kind::nlstring:
          field = string_initial_condition(nl.base, nl.modes_m, spec, &rng);
          ds.samples.push_back(nlstring_integrate(nl, project_to_modes(nl, field), dp.steps));
          break;
      }
    } catch (const Error& e) {
      throw Error(e.code, "sample " + std::to_string(i) + ": " + e.what());
    }
  }

  ds.split = s_count - s_count / 10;

  // Global scalar normalization by the training-portion standard deviation.
  double sum = 0.0, sum_sq = 0.0;
  Index count = 0;
  for (Index i = 0; i < ds.split; ++i) {
    for (Index k = 0; k < ds.samples[static_cast<std::size_t>(i)].size(); ++k) {
      const double v = ds.samples[static_cast<std::size_t>(i)][k];
      sum += v;
      sum_sq += v * v;
    }
    count += ds.samples[static_cast<std::size_t>(i)].size();
  }
  const double mean = sum / static_cast<double>(count);
  const double var = sum_sq / static_cast<double>(count) - mean * mean;
  require(var > 0.0, Error::Code::numeric, "training portion has zero variance");
  ds.scale = std::sqrt(var);

  ds.sample_hashes.reserve(ds.samples.size());
  std::vector<float> stored;
  for (auto& sample : ds.samples) {
    stored.resize(static_cast<std::size_t>(sample.size()));
    for (Index k = 0; k < sample.size(); ++k) {
      stored[static_cast<std::size_t>(k)] = to_stored(sample[k] / ds.scale);
      sample[k] = from_stored(stored[static_cast<std::size_t>(k)]);
    }
    ds.sample_hashes.push_back(fnv1a64(stored.data(), stored.size() * sizeof(float)));
  }
  return ds;
}

void save_dataset(const TrajectoryDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  json manifest;
  manifest["format_version"] = 1;
  manifest["system"] = ds.system;
  manifest["shape"] = ds.full_shape();
  manifest["dtype"] = "f32le";
  manifest["scale"] = f64_to_string(ds.scale);
  manifest["split"] = ds.split;
  manifest["seed"] = ds.seed;
  manifest["physical_params"] = ds.physical_params;
  json hashes = json::array();
  for (std::uint64_t h : ds.sample_hashes) hashes.push_back(hash_hex(h));
  manifest["sample_hashes"] = hashes;
  write_manifest(dir, manifest);

  std::vector<float> payload;
  payload.reserve(static_cast<std::size_t>(shape_size(ds.full_shape())));
  for (const auto& sample : ds.samples)
    for (Index k = 0; k < sample.size(); ++k) payload.push_back(to_stored(sample[k]));
  write_pmfn_blob(dir / "data.bin", payload);
}

TrajectoryDataset load_dataset(const std::filesystem::path& dir) {
  const json manifest = read_manifest(dir);
  const auto need = [&](const char* key) -> const json& {
    if (!manifest.contains(key))
      throw Error(Error::Code::config, "manifest missing field '" + std::string(key) + "'");
    return manifest.at(key);
  };

  if (need("format_version").get<int>() != 1)
    throw Error(Error::Code::config, "unsupported dataset format_version");
  if (need("dtype").get<std::string>() != "f32le")
    throw Error(Error::Code::config, "unsupported dtype (expected f32le)");

  TrajectoryDataset ds;
  ds.system = need("system").get<std::string>();
  SystemSpec::kind_from_name(ds.system);  // validates
  const auto shape = need("shape").get<std::vector<Index>>();
  if (shape.size() < 4)
    throw Error(Error::Code::config, "dataset shape must be [S, K+1, C, grid...]");
  const Index s_count = shape[0];
  ds.steps = shape[1] - 1;
  ds.num_states = shape[2];
  ds.grid.assign(shape.begin() + 3, shape.end());
  ds.scale = f64_from_string(need("scale").get<std::string>());
  ds.split = need("split").get<Index>();
  ds.seed = need("seed").get<std::uint64_t>();
  ds.physical_params = need("physical_params");
  if (ds.split < 0 || ds.split > s_count)
    throw Error(Error::Code::config, "dataset split index out of range");

  const auto hex_hashes = need("sample_hashes").get<std::vector<std::string>>();
  if (static_cast<Index>(hex_hashes.size()) != s_count)
    throw Error(Error::Code::config, "sample_hashes count does not match sample count");

  const std::vector<float> payload = read_pmfn_blob(dir / "data.bin");
  const Index per_sample = shape_size(ds.sample_shape());
  if (static_cast<Index>(payload.size()) != s_count * per_sample)
    throw Error(Error::Code::config,
                "blob length disagrees with manifest shape " + shape_str(ds.full_shape()));

  ds.samples.reserve(static_cast<std::size_t>(s_count));
  ds.sample_hashes.reserve(static_cast<std::size_t>(s_count));
  for (Index i = 0; i < s_count; ++i) {
    const float* base = payload.data() + i * per_sample;
    const std::uint64_t h = fnv1a64(base, static_cast<std::size_t>(per_sample) * sizeof(float));
    if (hash_hex(h) != hex_hashes[static_cast<std::size_t>(i)])
      throw Error(Error::Code::config,
                  "sample " + std::to_string(i) + " hash mismatch (corrupt or reordered data)");
    Tensor sample(ds.sample_shape());
    for (Index k = 0; k < per_sample; ++k) sample[k] = from_stored(base[k]);
    ds.samples.push_back(std::move(sample));
    ds.sample_hashes.push_back(h);
  }
  return ds;
}

}  // namespace pmfno

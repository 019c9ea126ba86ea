#include "pmfno/config.hpp"

#include <fstream>

namespace pmfno {

namespace {

json string_section(const StringParams& p) {
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
}

void read_string_section(const json& s, StringParams& p) {
  p.length = s.at("length").get<double>();
  p.density = s.at("density").get<double>();
  p.cross_section = s.at("cross_section").get<double>();
  p.youngs_modulus = s.at("youngs_modulus").get<double>();
  p.moment_inertia = s.at("moment_inertia").get<double>();
  p.tension = s.at("tension").get<double>();
  p.d1 = s.at("d1").get<double>();
  p.d3 = s.at("d3").get<double>();
  p.grid_points = s.at("grid_points").get<Index>();
  p.modes = s.at("modes").get<Index>();
  p.sample_rate = s.at("sample_rate").get<double>();
}

void merge_into(json& base, const json& user, const std::string& path) {
  if (!user.is_object())
    throw Error(Error::Code::config,
                "config section '" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string p = path.empty() ? it.key() : path + "." + it.key();
    auto bit = base.find(it.key());
    if (bit == base.end())
      throw Error(Error::Code::config, "unknown config key '" + p + "'");
    if (bit->is_object()) {
      merge_into(*bit, it.value(), p);
      continue;
    }
    const json& v = it.value();
    if (v.is_object() || v.is_array())
      throw Error(Error::Code::config, "config key '" + p + "' must be a scalar");
    if (bit->is_string() != v.is_string() || bit->is_number() != v.is_number())
      throw Error(Error::Code::config, "config key '" + p + "' has the wrong type");
    *bit = v;
  }
}

void flatten_keys(const json& node, const std::string& path,
                  std::vector<std::pair<std::string, std::string>>& out) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string p = path.empty() ? it.key() : path + "." + it.key();
    if (it->is_object())
      flatten_keys(*it, p, out);
    else
      out.emplace_back(p, it->dump());
  }
}

}  // namespace

json default_config() {
  const SystemSpec sys{};
  const DatasetParams dp{};
  const ModelConfig mc{};
  const TrainConfig tc{};
  const EvalConfig ec{};

  json doc;
  json system;
  system["kind"] = sys.name();
  system["string"] = string_section(sys.string);
  json w;
  w["lx"] = sys.wave2d.lx;
  w["ly"] = sys.wave2d.ly;
  w["rho0"] = sys.wave2d.rho0;
  w["c0"] = sys.wave2d.c0;
  w["nx"] = sys.wave2d.nx;
  w["ny"] = sys.wave2d.ny;
  w["qx"] = sys.wave2d.qx;
  w["qy"] = sys.wave2d.qy;
  w["sample_rate"] = sys.wave2d.sample_rate;
  system["wave2d"] = w;
  json nl;  // shares the "string" section as its base physics
  nl["modes_m"] = sys.nlstring.modes_m;
  nl["oversample"] = sys.nlstring.oversample;
  system["nlstring"] = nl;
  doc["system"] = system;

  json dataset;
  dataset["samples"] = dp.samples;
  dataset["steps"] = dp.steps;
  dataset["seed"] = dp.seed;
  dataset["amp_min"] = dp.amp_min;
  dataset["amp_max"] = dp.amp_max;
  dataset["pluck_width"] = dp.pluck_width;
  dataset["random_mode_cutoff"] = dp.random_mode_cutoff;
  doc["dataset"] = dataset;

  json model;
  model["arch"] = arch_name(mc.arch);
  model["c_h"] = mc.c_h;
  model["blocks"] = mc.blocks;
  model["activation"] = act_name(mc.activation);
  model["init_seed"] = mc.init_seed;
  doc["model"] = model;

  json train;
  train["epochs"] = tc.epochs;
  train["stop_epoch"] = tc.stop_epoch;
  train["batch"] = tc.batch;
  train["lr_min"] = tc.lr_min;
  train["lr_max"] = tc.lr_max;
  train["beta1"] = tc.beta1;
  train["beta2"] = tc.beta2;
  train["eps"] = tc.eps;
  train["weight_decay"] = tc.weight_decay;
  train["seed"] = tc.seed;
  train["k_train"] = tc.k_train;
  train["clip_norm"] = tc.clip_norm;
  train["threads"] = tc.threads;
  doc["train"] = train;

  json eval;
  eval["horizon"] = ec.horizon;
  eval["pole_frames"] = ec.pole_frames;
  doc["eval"] = eval;
  return doc;
}

RunConfig config_from_json(const json& user) {
  json doc = default_config();
  merge_into(doc, user, "");

  RunConfig rc;
  rc.doc = doc;
  try {
    const json& s = doc.at("system");
    rc.system.kind = SystemSpec::kind_from_name(s.at("kind").get<std::string>());
    read_string_section(s.at("string"), rc.system.string);
    const json& w = s.at("wave2d");
    rc.system.wave2d.lx = w.at("lx").get<double>();
    rc.system.wave2d.ly = w.at("ly").get<double>();
    rc.system.wave2d.rho0 = w.at("rho0").get<double>();
    rc.system.wave2d.c0 = w.at("c0").get<double>();
    rc.system.wave2d.nx = w.at("nx").get<Index>();
    rc.system.wave2d.ny = w.at("ny").get<Index>();
    rc.system.wave2d.qx = w.at("qx").get<Index>();
    rc.system.wave2d.qy = w.at("qy").get<Index>();
    rc.system.wave2d.sample_rate = w.at("sample_rate").get<double>();
    const json& nl = s.at("nlstring");
    rc.system.nlstring.base = rc.system.string;
    rc.system.nlstring.modes_m = nl.at("modes_m").get<Index>();
    rc.system.nlstring.oversample = nl.at("oversample").get<Index>();

    const json& d = doc.at("dataset");
    rc.dataset.samples = d.at("samples").get<Index>();
    rc.dataset.steps = d.at("steps").get<Index>();
    rc.dataset.seed = d.at("seed").get<std::uint64_t>();
    rc.dataset.amp_min = d.at("amp_min").get<double>();
    rc.dataset.amp_max = d.at("amp_max").get<double>();
    rc.dataset.pluck_width = d.at("pluck_width").get<double>();
    rc.dataset.random_mode_cutoff = d.at("random_mode_cutoff").get<Index>();

    const json& m = doc.at("model");
    rc.model.arch = arch_from_name(m.at("arch").get<std::string>());
    rc.model.c_h = m.at("c_h").get<Index>();
    rc.model.blocks = m.at("blocks").get<Index>();
    rc.model.activation = act_from_name(m.at("activation").get<std::string>());
    rc.model.init_seed = m.at("init_seed").get<std::uint64_t>();

    const json& t = doc.at("train");
    rc.train.epochs = t.at("epochs").get<Index>();
    rc.train.stop_epoch = t.at("stop_epoch").get<Index>();
    rc.train.batch = t.at("batch").get<Index>();
    rc.train.lr_min = t.at("lr_min").get<double>();
    rc.train.lr_max = t.at("lr_max").get<double>();
    rc.train.beta1 = t.at("beta1").get<double>();
    rc.train.beta2 = t.at("beta2").get<double>();
    rc.train.eps = t.at("eps").get<double>();
    rc.train.weight_decay = t.at("weight_decay").get<double>();
    rc.train.seed = t.at("seed").get<std::uint64_t>();
    rc.train.k_train = t.at("k_train").get<Index>();
    rc.train.clip_norm = t.at("clip_norm").get<double>();
    rc.train.threads = t.at("threads").get<int>();

    const json& e = doc.at("eval");
    rc.eval.horizon = e.at("horizon").get<Index>();
    rc.eval.pole_frames = e.at("pole_frames").get<Index>();
  } catch (const json::exception& ex) {
    throw Error(Error::Code::config, std::string("config document malformed: ") + ex.what());
  }
  return rc;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(Error::Code::config, "cannot open config file '" + file.string() + "'");
  json user;
  try {
    user = json::parse(in);
  } catch (const json::exception& ex) {
    throw Error(Error::Code::config,
                "config file '" + file.string() + "' is not valid JSON: " + ex.what());
  }
  return config_from_json(user);
}

std::vector<std::pair<std::string, std::string>> config_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  flatten_keys(default_config(), "", out);
  return out;
}

ModelConfig resolved_model_config(const RunConfig& rc) {
  ModelConfig mc = rc.model;
  const Shape field = system_state_shape(rc.system);
  mc.c_u = field[0];
  mc.grid.assign(field.begin() + 1, field.end());
  return mc;
}

SystemSpec system_spec_from_json(const std::string& name, const json& params) {
  SystemSpec sys;
  sys.kind = SystemSpec::kind_from_name(name);
  try {
    switch (sys.kind) {
      case SystemSpec::Kind::string:
        read_string_section(params, sys.string);
        break;
      case SystemSpec::Kind::nlstring:
        read_string_section(params, sys.nlstring.base);
        sys.nlstring.modes_m = params.at("modes_m").get<Index>();
        sys.nlstring.oversample = params.at("oversample").get<Index>();
        break;
      case SystemSpec::Kind::wave2d:
        sys.wave2d.lx = params.at("lx").get<double>();
        sys.wave2d.ly = params.at("ly").get<double>();
        sys.wave2d.rho0 = params.at("rho0").get<double>();
        sys.wave2d.c0 = params.at("c0").get<double>();
        sys.wave2d.nx = params.at("nx").get<Index>();
        sys.wave2d.ny = params.at("ny").get<Index>();
        sys.wave2d.qx = params.at("qx").get<Index>();
        sys.wave2d.qy = params.at("qy").get<Index>();
        sys.wave2d.sample_rate = params.at("sample_rate").get<double>();
        break;
    }
  } catch (const json::exception& ex) {
    throw Error(Error::Code::config,
                "system parameters for '" + name + "' malformed: " + ex.what());
  }
  return sys;
}

ExcitationSpec excitation_from_json(const json& j) {
  if (!j.is_object())
    throw Error(Error::Code::config, "excitation description must be a JSON object");
  ExcitationSpec e;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      if (k == "kind") {
        const std::string v = it.value().get<std::string>();
        if (v == "impulse")
          e.kind = ExcitationSpec::Kind::impulse;
        else if (v == "pluck")
          e.kind = ExcitationSpec::Kind::pluck;
        else if (v == "random")
          e.kind = ExcitationSpec::Kind::random;
        else
          throw Error(Error::Code::config, "unknown excitation kind '" + v + "'");
      } else if (k == "position") {
        e.position = it.value().get<std::vector<double>>();
      } else if (k == "amplitude") {
        e.amplitude = it.value().get<double>();
      } else if (k == "width") {
        e.width = it.value().get<double>();
      } else if (k == "mode_cutoff") {
        e.mode_cutoff = it.value().get<Index>();
      } else {
        throw Error(Error::Code::config, "unknown excitation key '" + k + "'");
      }
    }
  } catch (const json::exception& ex) {
    throw Error(Error::Code::config, std::string("excitation description malformed: ") + ex.what());
  }
  return e;
}

}  // namespace pmfno

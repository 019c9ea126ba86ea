// pmfno: dataset synthesis, training, and evaluation for FFT-domain recurrent
// networks over modal physical models.
//
// Exit codes: 0 ok, 2 configuration error, 3 synthesis failure, 4 numerical
// failure.

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iostream>

#include "pmfno/config.hpp"
#include "pmfno/evaluate.hpp"

namespace {

using namespace pmfno;

int exit_code(Error::Code c) {
  switch (c) {
    case Error::Code::config: return 2;
    case Error::Code::synthesis: return 3;
    case Error::Code::numeric: return 4;
  }
  return 1;
}

Index parse_count(std::string text, Index base, const std::string& what) {
  bool mult = false;
  if (!text.empty() && (text.back() == 'x' || text.back() == 'X')) {
    mult = true;
    text.pop_back();
  }
  long long v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size() || v < 1)
    throw Error(Error::Code::config,
                what + " must be a positive integer or '<n>x', got '" + text + "'");
  return mult ? static_cast<Index>(v) * base : static_cast<Index>(v);
}

json read_json_file(const std::filesystem::path& file, const std::string& what) {
  std::ifstream in(file);
  if (!in) throw Error(Error::Code::config, "cannot open " + what + " '" + file.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& ex) {
    throw Error(Error::Code::config,
                what + " '" + file.string() + "' is not valid JSON: " + ex.what());
  }
}

void write_json_file(const std::filesystem::path& file, const json& doc) {
  std::ofstream out(file);
  if (!out) throw Error(Error::Code::config, "cannot open '" + file.string() + "' for writing");
  out << doc.dump(2) << '\n';
}

Model best_model_from(const Checkpoint& ck) {
  Model model(ck.model);
  load_params(model.params(), ck.best_params);
  return model;
}

void write_loss_log(const std::filesystem::path& file, const std::vector<EpochLog>& log,
                    bool append) {
  std::ofstream out(file, append ? std::ios::app : std::ios::trunc);
  if (!out) throw Error(Error::Code::config, "cannot open '" + file.string() + "' for writing");
  if (!append) out << "epoch,train_mse,val_mse,lr\n";
  char buf[128];
  for (const EpochLog& row : log) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(row.epoch), row.train_mse, row.val_mse, row.lr_last);
    out << buf;
  }
}

std::string footer_text() {
  std::string text =
      "Configuration keys (JSON --config document), key = default:\n";
  for (const auto& [key, value] : config_keys()) text += "  " + key + " = " + value + "\n";
  text +=
      "\nThe model's grid and state channels are derived from the system section.\n"
      "Exit codes: 0 ok, 2 configuration error, 3 synthesis failure, 4 numerical failure.\n";
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "pmfno: modal physical-model datasets and FFT-domain recurrent network "
      "training/evaluation"};
  app.require_subcommand(1);
  app.footer(footer_text());

  // ---- dataset ----
  auto* cmd_dataset = app.add_subcommand("dataset", "Synthesize a trajectory dataset directory");
  std::string ds_config, ds_out;
  cmd_dataset->add_option("--config", ds_config, "run config JSON file")->required();
  cmd_dataset->add_option("--out", ds_out, "output dataset directory")->required();
  cmd_dataset->callback([&]() {
    const RunConfig rc = load_config(ds_config);
    const TrajectoryDataset ds = generate(rc.system, rc.dataset);
    save_dataset(ds, ds_out);
    std::cout << "dataset " << ds.system << " shape " << shape_str(ds.full_shape()) << " split "
              << ds.split << " scale " << f64_to_string(ds.scale) << " -> " << ds_out << "\n";
  });

  // ---- train ----
  auto* cmd_train = app.add_subcommand("train", "Train a model on a dataset directory");
  std::string tr_config, tr_dataset, tr_out;
  bool tr_resume = false, tr_quiet = false;
  int tr_threads = 0;
  cmd_train->add_option("--config", tr_config, "run config JSON file")->required();
  cmd_train->add_option("--dataset", tr_dataset, "dataset directory")->required();
  cmd_train->add_option("--out", tr_out, "checkpoint output directory")->required();
  cmd_train->add_flag("--resume", tr_resume, "continue from the checkpoint in --out");
  cmd_train->add_flag("--quiet", tr_quiet, "suppress per-epoch progress");
  cmd_train->add_option("--threads", tr_threads, "worker threads (overrides config)");
  cmd_train->callback([&]() {
    RunConfig rc = load_config(tr_config);
    const TrajectoryDataset ds = load_dataset(tr_dataset);
    ModelConfig mc = rc.model;
    mc.c_u = ds.num_states;
    mc.grid = ds.grid;
    Model model(mc);
    TrainConfig tc = rc.train;
    tc.checkpoint_dir = tr_out;
    tc.verbose = !tr_quiet;
    if (tr_threads > 0) tc.threads = tr_threads;
    rc.doc["train"]["threads"] = tc.threads;

    Checkpoint ck;
    const Checkpoint* resume = nullptr;
    if (tr_resume) {
      ck = load_checkpoint(tr_out);
      resume = &ck;
    }
    const TrainResult result = train(model, ds, tc, resume);
    write_loss_log(std::filesystem::path(tr_out) / "loss_log.csv", result.log, tr_resume);
    write_json_file(std::filesystem::path(tr_out) / "config.json", rc.doc);
    std::cout << "trained " << arch_name(mc.arch) << " on " << ds.system << ": best epoch "
              << result.best_epoch << " val_mse " << f64_to_string(result.best_val) << " -> "
              << tr_out << "\n";
  });

  // ---- eval ----
  auto* cmd_eval = app.add_subcommand("eval", "Validation MSE of a checkpoint on a dataset");
  std::string ev_ckpt, ev_dataset, ev_horizon, ev_out, ev_config;
  Index ev_frames = 0;
  cmd_eval->add_option("--ckpt", ev_ckpt, "checkpoint directory")->required();
  cmd_eval->add_option("--dataset", ev_dataset, "dataset directory")->required();
  cmd_eval->add_option("--horizon", ev_horizon,
                       "evaluation horizon: frames or '<n>x' the training horizon");
  cmd_eval->add_option("--config", ev_config, "run config JSON (eval section defaults)");
  cmd_eval->add_option("--out", ev_out, "also write the JSON report here");
  cmd_eval->callback([&]() {
    const Checkpoint ck = load_checkpoint(ev_ckpt);
    const TrajectoryDataset ds = load_dataset(ev_dataset);
    if (ck.system != ds.system)
      throw Error(Error::Code::config, "checkpoint system '" + ck.system +
                                           "' disagrees with dataset '" + ds.system + "'");
    if (ck.scale != ds.scale)
      throw Error(Error::Code::config,
                  "checkpoint was trained under a different normalization scale than this dataset");
    Index horizon = ck.k_train;
    Index frames = ev_frames;
    if (!ev_config.empty()) {
      const RunConfig rc = load_config(ev_config);
      if (rc.eval.horizon > 0) horizon = rc.eval.horizon;
      if (rc.eval.pole_frames > 0) frames = rc.eval.pole_frames;
    }
    (void)frames;  // pole frames are used by the poles/rollout commands
    if (!ev_horizon.empty()) horizon = parse_count(ev_horizon, ck.k_train, "--horizon");
    const Model model = best_model_from(ck);
    const SystemSpec sys = system_spec_from_json(ds.system, ds.physical_params);
    const EvalReport rep = eval_mse(model_rollout_fn(model), ds, horizon, &sys);

    json doc;
    doc["system"] = ds.system;
    doc["arch"] = arch_name(ck.model.arch);
    doc["horizon"] = rep.horizon;
    doc["train_samples"] = rep.train_samples;
    doc["val_samples"] = rep.val_samples;
    doc["train_mse"] = rep.train_mse;
    doc["val_mse"] = rep.val_mse;
    std::cout << doc.dump(2) << "\n";
    if (!ev_out.empty()) write_json_file(ev_out, doc);
  });

  // ---- poles ----
  auto* cmd_poles = app.add_subcommand(
      "poles", "Recover continuous-time poles from a trajectory or a model rollout");
  std::string po_dataset, po_ckpt, po_excitation, po_steps, po_out, po_config;
  Index po_sample = 0, po_frames = 0;
  cmd_poles->add_option("--dataset", po_dataset, "dataset directory (stored-trajectory mode)");
  cmd_poles->add_option("--sample", po_sample, "sample index within --dataset");
  cmd_poles->add_option("--ckpt", po_ckpt, "checkpoint directory (model-rollout mode)");
  cmd_poles->add_option("--excitation", po_excitation, "excitation JSON file (with --ckpt)");
  cmd_poles->add_option("--steps", po_steps, "rollout steps: frames or '<n>x' training horizon");
  cmd_poles->add_option("--frames", po_frames, "snapshot frames for the transition fit");
  cmd_poles->add_option("--config", po_config, "run config JSON (eval section defaults)");
  cmd_poles->add_option("--out", po_out, "output CSV file")->required();
  cmd_poles->callback([&]() {
    Index frames = po_frames;
    if (!po_config.empty()) {
      const RunConfig rc = load_config(po_config);
      if (frames == 0 && rc.eval.pole_frames > 0) frames = rc.eval.pole_frames;
    }
    if (po_dataset.empty() == po_ckpt.empty())
      throw Error(Error::Code::config, "pass exactly one of --dataset or --ckpt");
    if (!po_dataset.empty()) {
      const TrajectoryDataset ds = load_dataset(po_dataset);
      if (po_sample < 0 || po_sample >= ds.sample_count())
        throw Error(Error::Code::config, "--sample out of range");
      const SystemSpec sys = system_spec_from_json(ds.system, ds.physical_params);
      const double interval = 1.0 / system_sample_rate(sys);
      const PoleSet set = estimate_poles(ds.samples[static_cast<std::size_t>(po_sample)],
                                         interval, "ground_truth", frames);
      write_pole_csv(po_out, {set});
      std::cout << set.poles.size() << " poles (" << set.source << ") -> " << po_out << "\n";
    } else {
      if (po_excitation.empty())
        throw Error(Error::Code::config, "--ckpt mode requires --excitation");
      const Checkpoint ck = load_checkpoint(po_ckpt);
      const Model model = best_model_from(ck);
      const SystemSpec sys = system_spec_from_json(ck.system, ck.physical_params);
      const ExcitationSpec exc =
          excitation_from_json(read_json_file(po_excitation, "excitation file"));
      const Index steps =
          po_steps.empty() ? ck.k_train : parse_count(po_steps, ck.k_train, "--steps");
      const RolloutBundle bundle = rollout_report(model, ck.scale, sys, exc, steps, frames);
      write_pole_csv(po_out, {bundle.truth_poles, bundle.model_poles});
      std::cout << bundle.truth_poles.poles.size() << " ground-truth / "
                << bundle.model_poles.poles.size() << " model poles -> " << po_out << "\n";
    }
  });

  // ---- rollout ----
  auto* cmd_rollout =
      app.add_subcommand("rollout", "Long-horizon rollout vs. fresh ground truth (CSV bundle)");
  std::string ro_ckpt, ro_excitation, ro_steps = "10x", ro_out, ro_config;
  Index ro_frames = 0;
  cmd_rollout->add_option("--ckpt", ro_ckpt, "checkpoint directory")->required();
  cmd_rollout->add_option("--excitation", ro_excitation, "excitation JSON file")->required();
  cmd_rollout->add_option("--steps", ro_steps,
                          "rollout steps: frames or '<n>x' training horizon (default 10x)");
  cmd_rollout->add_option("--frames", ro_frames, "snapshot frames for the pole fits");
  cmd_rollout->add_option("--config", ro_config, "run config JSON (eval section defaults)");
  cmd_rollout->add_option("--out", ro_out, "output directory")->required();
  cmd_rollout->callback([&]() {
    Index frames = ro_frames;
    if (!ro_config.empty()) {
      const RunConfig rc = load_config(ro_config);
      if (frames == 0 && rc.eval.pole_frames > 0) frames = rc.eval.pole_frames;
    }
    const Checkpoint ck = load_checkpoint(ro_ckpt);
    const Model model = best_model_from(ck);
    const SystemSpec sys = system_spec_from_json(ck.system, ck.physical_params);
    const json exc_doc = read_json_file(ro_excitation, "excitation file");
    const ExcitationSpec exc = excitation_from_json(exc_doc);
    const Index steps = parse_count(ro_steps, ck.k_train, "--steps");
    const RolloutBundle bundle = rollout_report(model, ck.scale, sys, exc, steps, frames);
    write_rollout_bundle(ro_out, bundle);
    json run;
    run["system"] = ck.system;
    run["arch"] = arch_name(ck.model.arch);
    run["scale"] = f64_to_string(ck.scale);
    run["steps"] = steps;
    run["excitation"] = exc_doc;
    write_json_file(std::filesystem::path(ro_out) / "run.json", run);
    std::cout << "rollout " << steps << " steps, final step mse "
              << f64_to_string(bundle.step_mse.back()) << " -> " << ro_out << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

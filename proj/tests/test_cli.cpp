// End-to-end exercises of the pmfno binary: subcommand wiring, exit codes,
// emitted artifacts, and the stdout contracts scripts depend on.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pmfno/config.hpp"
#include "pmfno/dataset.hpp"
#include "pmfno/modal.hpp"
#include "pmfno/train.hpp"

namespace fs = std::filesystem;
using namespace pmfno;

namespace {

const fs::path& base_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("pmfno_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing file: " << file.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> read_lines(const fs::path& file) {
  std::istringstream is(read_text(file));
  std::vector<std::string> lines;
  for (std::string line; std::getline(is, line);) lines.push_back(line);
  return lines;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  out << text;
  REQUIRE(out.good());
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the binary through the shell, capturing exit code and both streams.
RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out_file = base_dir() / ("stdout_" + std::to_string(counter));
  const fs::path err_file = base_dir() / ("stderr_" + std::to_string(counter));
  ++counter;
  const std::string cmd = std::string(PMFNO_BIN) + " " + args + " > '" + out_file.string() +
                          "' 2> '" + err_file.string() + "'";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text(out_file);
  r.err = read_text(err_file);
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Small, fast string setup: 8 grid points, 4 modes, 12 samples of 8 steps.
json tiny_cfg() {
  json cfg;
  cfg["system"]["kind"] = "string";
  cfg["system"]["string"]["grid_points"] = 8;
  cfg["system"]["string"]["modes"] = 4;
  cfg["dataset"]["samples"] = 12;
  cfg["dataset"]["steps"] = 8;
  cfg["dataset"]["seed"] = 5;
  cfg["model"]["arch"] = "fgru";
  cfg["model"]["c_h"] = 2;
  cfg["model"]["blocks"] = 2;
  cfg["train"]["epochs"] = 3;
  cfg["train"]["batch"] = 4;
  cfg["train"]["k_train"] = 4;
  cfg["train"]["seed"] = 9;
  return cfg;
}

fs::path write_cfg(const std::string& name, const json& cfg) {
  const fs::path file = base_dir() / name;
  write_text(file, cfg.dump(2) + "\n");
  return file;
}

const fs::path& tiny_dataset() {
  static const fs::path dir = [] {
    const fs::path d = base_dir() / "tiny_ds";
    const RunResult r =
        run_cli("dataset --config " + q(write_cfg("tiny.json", tiny_cfg())) + " --out " + q(d));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return d;
  }();
  return dir;
}

const fs::path& tiny_ckpt() {
  static const fs::path dir = [] {
    const fs::path d = base_dir() / "tiny_ckpt";
    const RunResult r = run_cli("train --config " + q(write_cfg("tiny.json", tiny_cfg())) +
                                " --dataset " + q(tiny_dataset()) + " --out " + q(d) + " --quiet");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return d;
  }();
  return dir;
}

const fs::path& impulse_json() {
  static const fs::path file = [] {
    const fs::path f = base_dir() / "impulse.json";
    json exc;
    exc["kind"] = "impulse";
    exc["position"] = {0.3};
    exc["amplitude"] = 1e-3;
    write_text(f, exc.dump() + "\n");
    return f;
  }();
  return file;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream is(line);
  for (std::string f; std::getline(is, f, ',');) fields.push_back(f);
  return fields;
}

}  // namespace

TEST_CASE("help enumerates every configuration key with its default") {
  const RunResult r = run_cli("--help");
  CHECK(r.code == 0);
  CHECK(r.out.find("Configuration keys (JSON --config document), key = default:") !=
        std::string::npos);
  for (const auto& [key, value] : config_keys()) {
    const std::string line = "  " + key + " = " + value + "\n";
    CHECK_MESSAGE(r.out.find(line) != std::string::npos, "help is missing: " << line);
  }
  CHECK(r.out.find("Exit codes: 0 ok, 2 configuration error") != std::string::npos);
}

TEST_CASE("dataset command materializes the default string corpus") {
  const fs::path dir = base_dir() / "desk_ds";
  const RunResult r =
      run_cli("dataset --config " + q(write_cfg("empty.json", json::object())) + " --out " + q(dir));
  CHECK(r.code == 0);
  CHECK(r.out.find("dataset string shape [256, 65, 2, 64] split 231") != std::string::npos);
  CHECK(r.out.find(dir.string()) != std::string::npos);

  const json manifest = json::parse(read_text(dir / "manifest.json"));
  CHECK(manifest.at("shape").get<std::vector<Index>>() == std::vector<Index>{256, 65, 2, 64});
  CHECK(manifest.at("system").get<std::string>() == "string");
  CHECK(manifest.at("sample_hashes").size() == 256);
  CHECK(fs::exists(dir / "data.bin"));
}

TEST_CASE("dataset command emits three wave-equation state channels") {
  json cfg;
  cfg["system"]["kind"] = "wave2d";
  cfg["system"]["wave2d"]["nx"] = 8;
  cfg["system"]["wave2d"]["ny"] = 8;
  cfg["system"]["wave2d"]["qx"] = 4;
  cfg["system"]["wave2d"]["qy"] = 4;
  cfg["dataset"]["samples"] = 4;
  cfg["dataset"]["steps"] = 6;
  const fs::path dir = base_dir() / "wave_ds";
  const RunResult r =
      run_cli("dataset --config " + q(write_cfg("wave.json", cfg)) + " --out " + q(dir));
  CHECK(r.code == 0);
  CHECK(r.out.find("shape [4, 7, 3, 8, 8]") != std::string::npos);
  const json manifest = json::parse(read_text(dir / "manifest.json"));
  CHECK(manifest.at("shape").get<std::vector<Index>>() == std::vector<Index>{4, 7, 3, 8, 8});
}

TEST_CASE("same seed produces identical dataset bytes") {
  json cfg = tiny_cfg();
  cfg["system"]["string"]["grid_points"] = 16;
  cfg["system"]["string"]["modes"] = 8;
  cfg["dataset"]["samples"] = 4;
  cfg["dataset"]["seed"] = 77;
  const fs::path cfg_file = write_cfg("repeat.json", cfg);
  const fs::path a = base_dir() / "repeat_a";
  const fs::path b = base_dir() / "repeat_b";
  REQUIRE(run_cli("dataset --config " + q(cfg_file) + " --out " + q(a)).code == 0);
  REQUIRE(run_cli("dataset --config " + q(cfg_file) + " --out " + q(b)).code == 0);
  CHECK(read_text(a / "data.bin") == read_text(b / "data.bin"));
  CHECK(read_text(a / "manifest.json") == read_text(b / "manifest.json"));
}

TEST_CASE("train writes a loss log row per epoch and a loadable checkpoint") {
  const std::string dataset_before = read_text(tiny_dataset() / "data.bin");
  const fs::path out = tiny_ckpt();  // trains on first use

  const std::vector<std::string> log = read_lines(out / "loss_log.csv");
  REQUIRE(log.size() == 4);  // header + one row per epoch
  CHECK(log[0] == "epoch,train_mse,val_mse,lr");
  for (std::size_t i = 1; i < log.size(); ++i)
    CHECK(split_csv(log[i])[0] == std::to_string(i - 1));

  const json cfg_copy = json::parse(read_text(out / "config.json"));
  CHECK(cfg_copy.at("train").at("epochs").get<Index>() == 3);
  CHECK(cfg_copy.at("model").at("arch").get<std::string>() == "fgru");

  const Checkpoint ck = load_checkpoint(out);
  CHECK(ck.system == "string");
  CHECK(ck.k_train == 4);

  // Read paths are never mutated by a run.
  CHECK(read_text(tiny_dataset() / "data.bin") == dataset_before);
}

TEST_CASE("train announces the best epoch on stdout") {
  const fs::path out = base_dir() / "tiny_ckpt_loud";
  const RunResult r = run_cli("train --config " + q(write_cfg("tiny.json", tiny_cfg())) +
                              " --dataset " + q(tiny_dataset()) + " --out " + q(out));
  CHECK(r.code == 0);
  CHECK(r.out.find("trained fgru on string: best epoch ") != std::string::npos);
  CHECK(r.out.find("val_mse") != std::string::npos);
}

TEST_CASE("interrupted training resumes to the uninterrupted result") {
  json full = tiny_cfg();
  full["train"]["epochs"] = 4;
  json stopped = full;
  stopped["train"]["stop_epoch"] = 2;
  const fs::path cfg_full = write_cfg("resume_full.json", full);
  const fs::path cfg_stop = write_cfg("resume_stop.json", stopped);
  const fs::path one_shot = base_dir() / "ckpt_one_shot";
  const fs::path resumed = base_dir() / "ckpt_resumed";

  REQUIRE(run_cli("train --config " + q(cfg_full) + " --dataset " + q(tiny_dataset()) + " --out " +
                  q(one_shot) + " --quiet")
              .code == 0);
  REQUIRE(run_cli("train --config " + q(cfg_stop) + " --dataset " + q(tiny_dataset()) + " --out " +
                  q(resumed) + " --quiet")
              .code == 0);
  const RunResult second = run_cli("train --config " + q(cfg_full) + " --dataset " +
                                   q(tiny_dataset()) + " --out " + q(resumed) +
                                   " --resume --quiet");
  CHECK_MESSAGE(second.code == 0, second.err);

  CHECK(read_text(resumed / "loss_log.csv") == read_text(one_shot / "loss_log.csv"));
  CHECK(read_text(resumed / "data.bin") == read_text(one_shot / "data.bin"));
}

TEST_CASE("resuming against a mismatched dataset names both grids") {
  json cfg = tiny_cfg();
  cfg["system"]["string"]["grid_points"] = 16;
  cfg["system"]["string"]["modes"] = 8;
  const fs::path wide = base_dir() / "wide_ds";
  REQUIRE(run_cli("dataset --config " + q(write_cfg("wide.json", cfg)) + " --out " + q(wide))
              .code == 0);

  const RunResult r = run_cli("train --config " + q(write_cfg("tiny.json", tiny_cfg())) +
                              " --dataset " + q(wide) + " --out " + q(tiny_ckpt()) +
                              " --resume --quiet");
  CHECK(r.code == 2);
  CHECK(r.err.find("[8]") != std::string::npos);
  CHECK(r.err.find("[16]") != std::string::npos);
}

TEST_CASE("diverging training exits with the numeric code and keeps the last good checkpoint") {
  json cfg = tiny_cfg();
  cfg["model"]["arch"] = "frnn";
  cfg["model"]["activation"] = "relu";
  cfg["train"]["epochs"] = 8;
  cfg["train"]["batch"] = 16;  // one optimizer step per epoch
  cfg["train"]["lr_min"] = 1e-6;
  cfg["train"]["lr_max"] = 1e32;  // detonates once the schedule leaves the floor
  const fs::path out = base_dir() / "blowup_ckpt";
  const RunResult r = run_cli("train --config " + q(write_cfg("blowup.json", cfg)) +
                              " --dataset " + q(tiny_dataset()) + " --out " + q(out) + " --quiet");
  CHECK(r.code == 4);
  CHECK(r.err.find("non-finite") != std::string::npos);
  const Checkpoint ck = load_checkpoint(out);  // last good epoch survives
  CHECK(ck.next_epoch >= 1);
}

TEST_CASE("eval reports split MSE and honors the horizon multiplier") {
  const std::string base = "eval --ckpt " + q(tiny_ckpt()) + " --dataset " + q(tiny_dataset());
  const RunResult r = run_cli(base);
  CHECK(r.code == 0);
  const json rep = json::parse(r.out);
  CHECK(rep.at("system").get<std::string>() == "string");
  CHECK(rep.at("arch").get<std::string>() == "fgru");
  CHECK(rep.at("horizon").get<Index>() == 4);  // the training horizon by default
  CHECK(rep.at("train_samples").get<Index>() == 11);
  CHECK(rep.at("val_samples").get<Index>() == 1);
  CHECK(std::isfinite(rep.at("train_mse").get<double>()));
  CHECK(std::isfinite(rep.at("val_mse").get<double>()));

  const fs::path copy = base_dir() / "eval_report.json";
  const RunResult r2 = run_cli(base + " --horizon 2x --out " + q(copy));
  CHECK(r2.code == 0);
  const json rep2 = json::parse(r2.out);
  CHECK(rep2.at("horizon").get<Index>() == 8);
  CHECK(json::parse(read_text(copy)) == rep2);
}

TEST_CASE("eval refuses mismatched artifacts") {
  const RunResult wrong_system =
      run_cli("eval --ckpt " + q(tiny_ckpt()) + " --dataset " + q(base_dir() / "wave_ds"));
  CHECK(wrong_system.code == 2);
  CHECK(wrong_system.err.find("disagrees") != std::string::npos);

  json cfg = tiny_cfg();
  cfg["dataset"]["seed"] = 6;  // same physics, different draws -> different scale
  const fs::path other = base_dir() / "tiny_ds_reseeded";
  REQUIRE(run_cli("dataset --config " + q(write_cfg("reseed.json", cfg)) + " --out " + q(other))
              .code == 0);
  const RunResult wrong_scale = run_cli("eval --ckpt " + q(tiny_ckpt()) + " --dataset " + q(other));
  CHECK(wrong_scale.code == 2);
  CHECK(wrong_scale.err.find("normalization scale") != std::string::npos);
}

TEST_CASE("stored-trajectory poles match the modal frequencies") {
  json cfg = tiny_cfg();
  cfg["dataset"]["samples"] = 2;
  cfg["dataset"]["steps"] = 256;  // half a cycle of the slowest mode
  cfg["dataset"]["seed"] = 11;
  const fs::path dir = base_dir() / "pole_ds";
  REQUIRE(run_cli("dataset --config " + q(write_cfg("pole.json", cfg)) + " --out " + q(dir))
              .code == 0);

  const fs::path csv = base_dir() / "poles.csv";
  const RunResult r =
      run_cli("poles --dataset " + q(dir) + " --sample 0 --frames 257 --out " + q(csv));
  CHECK(r.code == 0);
  CHECK(r.out.find("poles (ground_truth) -> ") != std::string::npos);

  const std::vector<std::string> lines = read_lines(csv);
  REQUIRE(lines.size() >= 2);
  CHECK(lines[0] == "freq_hz,magnitude,re_s,im_s,source");
  std::vector<double> freqs;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_csv(lines[i]);
    REQUIRE(fields.size() == 5);
    CHECK(fields[4] == "ground_truth");
    freqs.push_back(std::stod(fields[0]));
  }

  StringParams p;
  p.grid_points = 8;
  p.modes = 4;
  const ModalSystem ms = string_modal_system(p);
  int analytic = 0;
  for (Index i = 0; i < ms.eigenvalues.size(); ++i) {
    const double im = ms.eigenvalues[i].imag();
    if (im <= 0.0) continue;  // one member per conjugate pair
    ++analytic;
    const double f = im / (2.0 * std::numbers::pi);
    double best = std::numeric_limits<double>::infinity();
    for (double g : freqs) best = std::min(best, std::abs(g - f) / f);
    CHECK_MESSAGE(best <= 1e-4, "mode at " << f << " Hz missed by " << best);
  }
  CHECK(analytic == 4);
}

TEST_CASE("model poles command pairs ground truth and rollout sets") {
  const fs::path csv = base_dir() / "model_poles.csv";
  const RunResult r = run_cli("poles --ckpt " + q(tiny_ckpt()) + " --excitation " +
                              q(impulse_json()) + " --steps 32 --out " + q(csv));
  CHECK(r.code == 0);
  CHECK(r.out.find("ground-truth / ") != std::string::npos);
  const std::vector<std::string> lines = read_lines(csv);
  REQUIRE(!lines.empty());
  CHECK(lines[0] == "freq_hz,magnitude,re_s,im_s,source");
}

TEST_CASE("rollout bundle has the multiplied horizon and run manifest") {
  const fs::path dir = base_dir() / "rollout_bundle";
  const RunResult r = run_cli("rollout --ckpt " + q(tiny_ckpt()) + " --excitation " +
                              q(impulse_json()) + " --out " + q(dir));
  CHECK(r.code == 0);
  CHECK(r.out.find("rollout 40 steps, final step mse ") != std::string::npos);

  const json summary = json::parse(read_text(dir / "summary.json"));
  CHECK(summary.at("steps").get<Index>() == 40);  // default --steps 10x of k_train 4

  // 41 frames x 2 state channels per trajectory CSV, plus the header.
  CHECK(read_lines(dir / "truth.csv").size() == 1 + 41 * 2);
  CHECK(read_lines(dir / "prediction.csv").size() == 1 + 41 * 2);
  CHECK(read_lines(dir / "step_mse.csv").size() == 1 + 41);
  CHECK(fs::exists(dir / "poles.csv"));

  const json run = json::parse(read_text(dir / "run.json"));
  CHECK(run.at("system").get<std::string>() == "string");
  CHECK(run.at("arch").get<std::string>() == "fgru");
  CHECK(run.at("steps").get<Index>() == 40);
  CHECK(run.at("excitation").at("kind").get<std::string>() == "impulse");
  CHECK(std::stod(run.at("scale").get<std::string>()) > 0.0);
}

TEST_CASE("configuration errors exit with the config code") {
  const fs::path out = base_dir() / "unused";

  const RunResult missing = run_cli("dataset --config /nonexistent.json --out " + q(out));
  CHECK(missing.code == 2);
  CHECK(missing.err.find("cannot open config file") != std::string::npos);

  const fs::path broken = base_dir() / "broken.json";
  write_text(broken, "{not json");
  const RunResult invalid = run_cli("dataset --config " + q(broken) + " --out " + q(out));
  CHECK(invalid.code == 2);
  CHECK(invalid.err.find("not valid JSON") != std::string::npos);

  const RunResult unknown = run_cli("dataset --config " +
                                    q(write_cfg("unknown.json", json{{"bogus", 1}})) + " --out " +
                                    q(out));
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("unknown config key 'bogus'") != std::string::npos);

  json typed = json::object();
  typed["train"]["epochs"] = "three";
  const RunResult wrong_type =
      run_cli("dataset --config " + q(write_cfg("typed.json", typed)) + " --out " + q(out));
  CHECK(wrong_type.code == 2);
  CHECK(wrong_type.err.find("wrong type") != std::string::npos);

  CHECK(run_cli("").code == 2);               // a subcommand is required
  CHECK(run_cli("dataset --nope").code == 2); // unknown flag

  const RunResult neither = run_cli("poles --out " + q(out));
  CHECK(neither.code == 2);
  CHECK(neither.err.find("pass exactly one of --dataset or --ckpt") != std::string::npos);

  const RunResult no_exc = run_cli("poles --ckpt " + q(tiny_ckpt()) + " --out " + q(out));
  CHECK(no_exc.code == 2);
  CHECK(no_exc.err.find("--ckpt mode requires --excitation") != std::string::npos);

  const RunResult bad_sample =
      run_cli("poles --dataset " + q(tiny_dataset()) + " --sample 99 --out " + q(out));
  CHECK(bad_sample.code == 2);
  CHECK(bad_sample.err.find("--sample out of range") != std::string::npos);

  const RunResult bad_count = run_cli("eval --ckpt " + q(tiny_ckpt()) + " --dataset " +
                                      q(tiny_dataset()) + " --horizon 0x");
  CHECK(bad_count.code == 2);
  CHECK(bad_count.err.find("--horizon must be a positive integer") != std::string::npos);
}

TEST_CASE("synthesis failures exit with the synthesis code") {
  json cfg = tiny_cfg();
  cfg["system"]["string"]["d1"] = 1e4;  // far past critical damping
  cfg["dataset"]["samples"] = 2;
  cfg["dataset"]["steps"] = 4;
  const RunResult r = run_cli("dataset --config " + q(write_cfg("overdamped.json", cfg)) +
                              " --out " + q(base_dir() / "overdamped_ds"));
  CHECK(r.code == 3);
  CHECK(r.err.find("overdamped") != std::string::npos);
}

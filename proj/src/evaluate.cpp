#include "pmfno/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "pmfno/train.hpp"

namespace pmfno {

namespace {

constexpr double kPi = std::numbers::pi;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::ofstream open_csv(const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw Error(Error::Code::config, "cannot open '" + file.string() + "' for writing");
  return out;
}

}  // namespace

Index default_pole_frames(Index state_dim, Index available_frames) {
  return std::min(available_frames, 4 * state_dim);
}

Eigen::MatrixXd estimate_transition(const Tensor& trajectory, Index frames) {
  if (trajectory.rank() < 2)
    throw Error(Error::Code::config,
                "transition fit needs a [frames, state...] trajectory, got shape " +
                    shape_str(trajectory.shape()));
  const Index available = trajectory.dim(0);
  const Index d = trajectory.stride(0);  // flattened state dimension
  if (frames == 0) frames = default_pole_frames(d, available);
  if (frames < 2 || frames > available)
    throw Error(Error::Code::config, "transition fit frame count " + std::to_string(frames) +
                                         " out of range [2, " + std::to_string(available) + "]");

  using ConstMap = Eigen::Map<const RowMajorMat<double>>;
  const ConstMap prev(trajectory.data(), frames - 1, d);
  const ConstMap next(trajectory.data() + d, frames - 1, d);
  if (prev.cwiseAbs().maxCoeff() == 0.0)
    throw Error(Error::Code::numeric, "degenerate (all-zero) trajectory");

  // Physical state channels can live on wildly different scales (metres of
  // displacement against metres-per-second of velocity), which poisons the
  // snapshot conditioning. Balance each channel to unit RMS over the fit
  // window; this diagonal similarity leaves the eigenvalues untouched and is
  // undone on the way out.
  const Index channels = trajectory.rank() >= 3 ? trajectory.dim(1) : 1;
  const Index points = d / std::max<Index>(channels, 1);
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(channels);
  for (Index c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (Index k = 0; k + 1 < frames; ++k)
      sum += prev.row(k).segment(c * points, points).squaredNorm();
    const double rms = std::sqrt(sum / static_cast<double>((frames - 1) * points));
    if (rms > 0.0) scale[c] = rms;
  }

  Eigen::MatrixXd prev_b = prev, next_b = next;
  for (Index c = 0; c < channels; ++c) {
    prev_b.middleCols(c * points, points) /= scale[c];
    next_b.middleCols(c * points, points) /= scale[c];
  }

  // ||U_next - G U_prev||_F transposes to ||prev G^T - next||_F column-wise.
  Eigen::MatrixXd g = lstsq(prev_b, next_b).x.transpose();
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) g(i, j) *= scale[i / points] / scale[j / points];
  return g;
}

PoleSet poles_from_transition(const Eigen::MatrixXd& g, double sample_interval,
                              std::string source) {
  if (!(sample_interval > 0.0))
    throw Error(Error::Code::config, "sample interval must be positive");
  const Eigen::VectorXcd lambda = eig_general(g);
  PoleSet set;
  set.source = std::move(source);
  set.poles.reserve(static_cast<std::size_t>(lambda.size()));
  for (Index i = 0; i < lambda.size(); ++i) {
    const double mag = std::abs(lambda[i]);
    if (mag == 0.0) continue;  // a dead direction has no finite continuous pole
    const double ang = std::arg(lambda[i]);
    if (ang < 0.0) continue;  // negative-frequency half of a conjugate pair
    Pole p;
    p.magnitude = mag;
    p.freq_hz = ang / (2.0 * kPi * sample_interval);
    p.re_s = std::log(mag) / sample_interval;
    p.im_s = ang / sample_interval;
    set.poles.push_back(p);
  }
  std::sort(set.poles.begin(), set.poles.end(), [](const Pole& a, const Pole& b) {
    return a.freq_hz != b.freq_hz ? a.freq_hz < b.freq_hz : a.re_s < b.re_s;
  });
  return set;
}

PoleSet estimate_poles(const Tensor& trajectory, double sample_interval, std::string source,
                       Index frames) {
  return poles_from_transition(estimate_transition(trajectory, frames), sample_interval,
                               std::move(source));
}

PoleComparison match_poles(const PoleSet& reference, const PoleSet& estimate, double freq_gate) {
  PoleComparison cmp;
  std::vector<bool> used(estimate.poles.size(), false);
  for (std::size_t r = 0; r < reference.poles.size(); ++r) {
    const Pole& ref = reference.poles[r];
    Index best = -1;
    double best_df = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < estimate.poles.size(); ++e) {
      if (used[e]) continue;
      const double df = std::abs(estimate.poles[e].freq_hz - ref.freq_hz);
      if (df < best_df) {
        best_df = df;
        best = static_cast<Index>(e);
      }
    }
    const double gate = freq_gate * std::max(std::abs(ref.freq_hz), 1e-12);
    if (best < 0 || best_df > gate) {
      cmp.unmatched_ref.push_back(static_cast<Index>(r));
      continue;
    }
    used[static_cast<std::size_t>(best)] = true;
    const Pole& est = estimate.poles[static_cast<std::size_t>(best)];
    PoleMatch m;
    m.ref_index = static_cast<Index>(r);
    m.est_index = best;
    m.rel_freq_error = best_df / std::max(std::abs(ref.freq_hz), 1e-12);
    const double s_ref = std::hypot(ref.re_s, ref.im_s);
    const double ds = std::hypot(ref.re_s - est.re_s, ref.im_s - est.im_s);
    m.rel_s_error = s_ref > 0.0 ? ds / s_ref : ds;
    cmp.max_rel_s_error = std::max(cmp.max_rel_s_error, m.rel_s_error);
    cmp.matches.push_back(m);
  }
  for (std::size_t e = 0; e < estimate.poles.size(); ++e)
    if (!used[e]) cmp.unmatched_est.push_back(static_cast<Index>(e));
  return cmp;
}

RolloutFn model_rollout_fn(const Model& model) {
  return [&model](Index, const Tensor& u0, Index steps) {
    return model.rollout(u0, steps, nullptr);
  };
}

RolloutFn oracle_rollout_fn(const TrajectoryDataset& ds) {
  return [&ds](Index sample_index, const Tensor&, Index steps) {
    if (sample_index < 0 || sample_index >= ds.sample_count())
      throw Error(Error::Code::config, "oracle rollout: sample index out of range");
    const Tensor& s = ds.samples[static_cast<std::size_t>(sample_index)];
    if (steps + 1 > s.dim(0))
      throw Error(Error::Code::config, "oracle rollout: horizon exceeds the stored trajectory");
    return leading_frames(s, steps + 1);
  };
}

EvalReport eval_mse(const RolloutFn& fn, const TrajectoryDataset& ds, Index horizon,
                    const SystemSpec* resynth) {
  if (horizon == 0) horizon = ds.steps;
  if (horizon < 1) throw Error(Error::Code::config, "eval horizon must be >= 1");
  if (ds.sample_count() < 1) throw Error(Error::Code::config, "eval: empty dataset");
  if (horizon > ds.steps) {
    if (!resynth)
      throw Error(Error::Code::config,
                  "eval horizon " + std::to_string(horizon) + " exceeds the stored horizon " +
                      std::to_string(ds.steps) +
                      "; a system description is required to re-synthesize ground truth");
    if (resynth->name() != ds.system)
      throw Error(Error::Code::config, "re-synthesis system '" + resynth->name() +
                                           "' disagrees with dataset system '" + ds.system + "'");
    if (!(ds.scale > 0.0))
      throw Error(Error::Code::config, "dataset normalization scale must be positive");
  }

  EvalReport rep;
  rep.horizon = horizon;
  rep.train_samples = ds.train_count();
  rep.val_samples = ds.sample_count() - ds.train_count();

  double train_sum = 0.0, val_sum = 0.0;
  for (Index i = 0; i < ds.sample_count(); ++i) {
    const Tensor& stored = ds.samples[static_cast<std::size_t>(i)];
    Tensor truth;
    if (horizon + 1 <= stored.dim(0)) {
      truth = leading_frames(stored, horizon + 1);
    } else {
      Tensor u0 = frame_at(stored, 0);
      as_vec(u0) *= ds.scale;
      truth = synthesize_trajectory(*resynth, u0, horizon);
      as_vec(truth) /= ds.scale;
    }
    Tensor pred = fn(i, frame_at(stored, 0), horizon);
    if (!pred.same_shape(truth))
      throw Error(Error::Code::config, "rollout shape " + shape_str(pred.shape()) +
                                           " disagrees with ground truth " +
                                           shape_str(truth.shape()));
    const double loss = mse_value(pred, truth);
    (i < ds.train_count() ? train_sum : val_sum) += loss;
  }
  rep.train_mse = rep.train_samples > 0 ? train_sum / static_cast<double>(rep.train_samples) : 0.0;
  rep.val_mse = rep.val_samples > 0 ? val_sum / static_cast<double>(rep.val_samples) : 0.0;
  return rep;
}

RolloutBundle rollout_report(const Model& model, double scale, const SystemSpec& sys,
                             const ExcitationSpec& exc, Index steps, Index pole_frames) {
  if (steps < 1) throw Error(Error::Code::config, "rollout steps must be >= 1");
  if (!(scale > 0.0))
    throw Error(Error::Code::config, "normalization scale must be positive");

  RolloutBundle b;
  b.sample_interval = 1.0 / system_sample_rate(sys);
  const Tensor u0_raw = make_initial_condition(sys, exc);
  b.truth = synthesize_trajectory(sys, u0_raw, steps);

  Tensor u0n = frame_at(b.truth, 0);
  as_vec(u0n) /= scale;
  Tensor pred_n = model.rollout(u0n, steps, nullptr);

  Tensor truth_n = b.truth;
  as_vec(truth_n) /= scale;
  const Index d = pred_n.stride(0);
  b.step_mse.resize(static_cast<std::size_t>(steps + 1));
  for (Index k = 0; k <= steps; ++k) {
    double sum = 0.0;
    const double* p = pred_n.data() + k * d;
    const double* t = truth_n.data() + k * d;
    for (Index j = 0; j < d; ++j) {
      const double diff = p[j] - t[j];
      sum += diff * diff;
    }
    b.step_mse[static_cast<std::size_t>(k)] = sum / static_cast<double>(d);
  }

  b.prediction = std::move(pred_n);
  as_vec(b.prediction) *= scale;
  b.truth_poles = estimate_poles(b.truth, b.sample_interval, "ground_truth", pole_frames);
  b.model_poles =
      estimate_poles(b.prediction, b.sample_interval, arch_name(model.config().arch), pole_frames);
  return b;
}

void write_pole_csv(const std::filesystem::path& file, const std::vector<PoleSet>& sets) {
  std::ofstream out = open_csv(file);
  out << "freq_hz,magnitude,re_s,im_s,source\n";
  for (const PoleSet& set : sets)
    for (const Pole& p : set.poles)
      out << fmt(p.freq_hz) << ',' << fmt(p.magnitude) << ',' << fmt(p.re_s) << ','
          << fmt(p.im_s) << ',' << set.source << '\n';
  if (!out) throw Error(Error::Code::config, "failed writing '" + file.string() + "'");
}

void write_step_mse_csv(const std::filesystem::path& file, const std::vector<double>& step_mse) {
  std::ofstream out = open_csv(file);
  out << "frame,mse\n";
  for (std::size_t k = 0; k < step_mse.size(); ++k) out << k << ',' << fmt(step_mse[k]) << '\n';
  if (!out) throw Error(Error::Code::config, "failed writing '" + file.string() + "'");
}

void write_trajectory_csv(const std::filesystem::path& file, const Tensor& trajectory) {
  if (trajectory.rank() < 3)
    throw Error(Error::Code::config, "trajectory CSV needs [frames, channels, grid...]");
  std::ofstream out = open_csv(file);
  const Index frames = trajectory.dim(0);
  const Index channels = trajectory.dim(1);
  const Index points = trajectory.stride(1);
  out << "frame,channel";
  for (Index j = 0; j < points; ++j) out << ",x" << j;
  out << '\n';
  for (Index k = 0; k < frames; ++k)
    for (Index c = 0; c < channels; ++c) {
      out << k << ',' << c;
      const double* row = trajectory.data() + (k * channels + c) * points;
      for (Index j = 0; j < points; ++j) out << ',' << fmt(row[j]);
      out << '\n';
    }
  if (!out) throw Error(Error::Code::config, "failed writing '" + file.string() + "'");
}

void write_rollout_bundle(const std::filesystem::path& dir, const RolloutBundle& bundle) {
  std::filesystem::create_directories(dir);
  write_trajectory_csv(dir / "truth.csv", bundle.truth);
  write_trajectory_csv(dir / "prediction.csv", bundle.prediction);
  write_step_mse_csv(dir / "step_mse.csv", bundle.step_mse);
  write_pole_csv(dir / "poles.csv", {bundle.truth_poles, bundle.model_poles});

  json summary;
  summary["steps"] = static_cast<Index>(bundle.step_mse.size()) - 1;
  summary["sample_interval"] = bundle.sample_interval;
  double mean = 0.0;
  for (double v : bundle.step_mse) mean += v;
  mean /= bundle.step_mse.empty() ? 1.0 : static_cast<double>(bundle.step_mse.size());
  summary["mse_mean"] = mean;
  summary["mse_final"] = bundle.step_mse.empty() ? 0.0 : bundle.step_mse.back();
  summary["pole_sources"] = json::array({bundle.truth_poles.source, bundle.model_poles.source});
  std::ofstream out(dir / "summary.json");
  if (!out)
    throw Error(Error::Code::config, "cannot open '" + (dir / "summary.json").string() + "'");
  out << summary.dump(2) << '\n';
}

}  // namespace pmfno

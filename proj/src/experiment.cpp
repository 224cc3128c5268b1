#include "evsteer/experiment.hpp"

#include <algorithm>
#include <cmath>

namespace evsteer {

void ExperimentConfig::validate() const {
  if (integration_us <= 0) throw std::invalid_argument("integration time must be positive");
  if (sample_stride_us <= 0) throw std::invalid_argument("sample stride must be positive");
  if (train_len_us <= 0 || test_len_us <= 0) throw std::invalid_argument("split lengths must be positive");
  pipeline.validate();
  train.validate();
}

std::vector<Anchor> sample_anchors(const LabeledRecording& rec, Micros integration_us, Micros stride_us) {
  std::vector<Anchor> anchors;
  if (!rec.gray_frames.empty()) {
    for (std::size_t k = 1; k < rec.gray_frames.size(); ++k) {
      if (rec.gray_frames[k].t >= integration_us) anchors.push_back({rec.gray_frames[k].t, k});
    }
    return anchors;
  }
  for (Micros t = stride_us; t <= rec.duration_us; t += stride_us) {
    if (t >= integration_us) anchors.push_back({t, Anchor::npos});
  }
  return anchors;
}

Tensor build_input(const LabeledRecording& rec, InputKind kind, const Anchor& anchor, Micros integration_us,
                   EventScaling scaling) {
  switch (kind) {
    case InputKind::Events: {
      const Window window{anchor.t - integration_us, integration_us};
      const auto slice = rec.events.slice(window.t_start, window.t_end());
      return to_input(accumulate_events(slice, window, rec.events.width(), rec.events.height()), scaling).values;
    }
    case InputKind::Grayscale:
      if (anchor.frame == Anchor::npos || anchor.frame >= rec.gray_frames.size()) {
        throw DataError("gray input needs a gray frame at t=" + std::to_string(anchor.t));
      }
      return to_input_gray(rec.gray_frames[anchor.frame].image).values;
    case InputKind::GrayDiff:
      if (anchor.frame == Anchor::npos || anchor.frame == 0 || anchor.frame >= rec.gray_frames.size()) {
        throw DataError("graydiff input needs two gray frames at t=" + std::to_string(anchor.t));
      }
      return to_input_graydiff(rec.gray_frames[anchor.frame].image, rec.gray_frames[anchor.frame - 1].image).values;
  }
  throw std::invalid_argument("unknown input kind");
}

namespace {

void require_modality(const LabeledRecording& rec, InputKind kind) {
  if (kind == InputKind::Events) return;
  if (rec.gray_frames.size() < 2) throw DataError("missing modality: recording has no gray frames for " + to_string(kind));
}

std::vector<std::size_t> input_shape(const LabeledRecording& rec, InputKind kind) {
  std::size_t w = static_cast<std::size_t>(rec.events.width());
  std::size_t h = static_cast<std::size_t>(rec.events.height());
  if (kind != InputKind::Events) {
    w = static_cast<std::size_t>(rec.gray_frames.front().image.width);
    h = static_cast<std::size_t>(rec.gray_frames.front().image.height);
  }
  return {channels_for(kind), h, w};
}

struct SplitSamples {
  std::vector<Anchor> anchors;  // indexed by Sample::window_index
  std::vector<Sample> train;
  std::vector<Sample> test;
};

SplitSamples split_samples(const LabeledRecording& rec, const ExperimentConfig& cfg) {
  SplitSamples out;
  out.anchors = sample_anchors(rec, cfg.integration_us, cfg.sample_stride_us);
  std::vector<Micros> times;
  times.reserve(out.anchors.size());
  for (const auto& a : out.anchors) times.push_back(a.t);
  const auto assoc = associate_future_label(times, rec.labels, cfg.pipeline.horizon_us);
  const auto plan = make_split(rec.duration_us, cfg.train_len_us, cfg.test_len_us);
  for (const auto& s : assoc.samples) (plan.is_train(s.t) ? out.train : out.test).push_back(s);
  return out;
}

EvalReport evaluate_test(const Model& model, const LabeledRecording& rec, const ExperimentConfig& cfg,
                         const SplitSamples& split, std::vector<double>* pred_out, std::vector<double>* obs_out) {
  if (split.test.empty()) throw DataError("no labeled test samples in the recording");
  SampleBank bank(input_shape(rec, cfg.kind));
  std::vector<double> obs;
  obs.reserve(split.test.size());
  for (const auto& s : split.test) {
    bank.add(build_input(rec, cfg.kind, split.anchors[s.window_index], cfg.integration_us, cfg.scaling), 0.0);
    obs.push_back(s.angle_deg);
  }
  const auto raw = predict(model, bank);
  std::vector<double> pred(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    pred[i] = denormalize_angle(raw[i], cfg.pipeline.angle_full_scale_deg);
    if (!std::isfinite(pred[i])) throw DivergenceError("non-finite prediction on the test set");
  }

  EvalReport report;
  report.rmse_deg = rmse(pred, obs);
  if (obs.size() >= 2 && population_variance(obs) > 0.0) report.eva = eva(pred, obs);
  report.n_samples = obs.size();
  report.input_kind = to_string(cfg.kind);
  report.integration_time_ms = static_cast<double>(cfg.integration_us) / 1000.0;
  report.relative_error_bins = relative_error_by_angle(pred, obs, cfg.angle_bin_edges);
  if (pred_out) *pred_out = std::move(pred);
  if (obs_out) *obs_out = std::move(obs);
  return report;
}

nlohmann::json metadata_for(const ExperimentConfig& cfg, const LabelStats& stats) {
  return {{"input_kind", to_string(cfg.kind)},
          {"T_ms", static_cast<double>(cfg.integration_us) / 1000.0},
          {"integration_us", cfg.integration_us},
          {"sample_stride_us", cfg.sample_stride_us},
          {"train_len_us", cfg.train_len_us},
          {"test_len_us", cfg.test_len_us},
          {"horizon_us", cfg.pipeline.horizon_us},
          {"angle_full_scale_deg", cfg.pipeline.angle_full_scale_deg},
          {"label_stats", stats_to_json(stats)},
          {"event_scaling",
           {{"mode", cfg.scaling.mode == EventScaling::Mode::PerFrameMax ? "per_frame_max" : "fixed_clip"},
            {"clip", cfg.scaling.clip}}},
          {"angle_bin_edges", cfg.angle_bin_edges}};
}

}  // namespace

ExperimentResult run_experiment(const LabeledRecording& rec, const ExperimentConfig& config,
                                const EpochCallback& on_epoch) {
  config.validate();
  require_modality(rec, config.kind);
  const auto split = split_samples(rec, config);
  if (split.train.empty()) throw DataError("no labeled train samples in the recording");
  const auto labels = prepare_training_labels(split.train, config.pipeline);
  if (labels.samples.empty()) throw DataError("preprocessing removed every train sample");

  SampleBank bank(input_shape(rec, config.kind));
  for (std::size_t i = 0; i < labels.samples.size(); ++i) {
    const auto& s = labels.samples[i];
    bank.add(build_input(rec, config.kind, split.anchors[s.window_index], config.integration_us, config.scaling),
             labels.targets[i]);
  }

  ModelConfig mc = config.model;
  mc.input_channels = static_cast<int>(channels_for(config.kind));
  auto trained = train(init_model(mc), bank, config.train, on_epoch);

  ExperimentResult result;
  result.model = std::move(trained.model);
  result.model.metadata = metadata_for(config, labels.stats);
  result.loss_history = std::move(trained.loss_history);
  result.n_train = bank.size();
  result.report = evaluate_test(result.model, rec, config, split, &result.test_pred_deg, &result.test_obs_deg);
  return result;
}

ExperimentConfig experiment_config_from_metadata(const Model& model) {
  const auto& m = model.metadata;
  ExperimentConfig cfg;
  try {
    cfg.kind = input_kind_from_string(m.at("input_kind").get<std::string>());
    cfg.integration_us = m.at("integration_us").get<Micros>();
    cfg.sample_stride_us = m.value("sample_stride_us", cfg.sample_stride_us);
    cfg.train_len_us = m.value("train_len_us", cfg.train_len_us);
    cfg.test_len_us = m.value("test_len_us", cfg.test_len_us);
    cfg.pipeline.horizon_us = m.value("horizon_us", cfg.pipeline.horizon_us);
    cfg.pipeline.angle_full_scale_deg = m.value("angle_full_scale_deg", cfg.pipeline.angle_full_scale_deg);
    if (m.contains("event_scaling")) {
      const auto& s = m.at("event_scaling");
      cfg.scaling.mode = s.at("mode").get<std::string>() == "fixed_clip" ? EventScaling::Mode::FixedClip
                                                                         : EventScaling::Mode::PerFrameMax;
      cfg.scaling.clip = s.at("clip").get<double>();
    }
    if (m.contains("angle_bin_edges")) cfg.angle_bin_edges = m.at("angle_bin_edges").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("model metadata lacks experiment settings: ") + e.what());
  }
  cfg.model = model.config;
  if (static_cast<std::size_t>(model.config.input_channels) != channels_for(cfg.kind)) {
    throw ModelFormatError("model input channels do not match its input kind");
  }
  return cfg;
}

EvalReport evaluate_model(const Model& model, const LabeledRecording& rec) {
  const auto cfg = experiment_config_from_metadata(model);
  require_modality(rec, cfg.kind);
  const auto split = split_samples(rec, cfg);
  return evaluate_test(model, rec, cfg, split, nullptr, nullptr);
}

namespace {

EvalReport failed_report(const ExperimentConfig& cfg, const std::string& status, const std::string& what) {
  EvalReport r;
  r.input_kind = to_string(cfg.kind);
  r.integration_time_ms = static_cast<double>(cfg.integration_us) / 1000.0;
  r.status = status;
  r.error = what;
  return r;
}

}  // namespace

std::vector<EvalReport> sweep_integration_time(const LabeledRecording& rec, std::vector<double> times_ms,
                                               const ExperimentConfig& base) {
  std::sort(times_ms.begin(), times_ms.end());
  std::vector<EvalReport> reports;
  for (double ms : times_ms) {
    ExperimentConfig cfg = base;
    cfg.integration_us = static_cast<Micros>(std::llround(ms * 1000.0));
    try {
      reports.push_back(run_experiment(rec, cfg).report);
    } catch (const DivergenceError& e) {
      reports.push_back(failed_report(cfg, "diverged", e.what()));
    } catch (const std::exception& e) {
      reports.push_back(failed_report(cfg, "error", e.what()));
    }
  }
  return reports;
}

std::vector<EvalReport> compare_inputs(const LabeledRecording& rec, const std::vector<InputKind>& kinds,
                                       const ExperimentConfig& base) {
  for (auto kind : kinds) require_modality(rec, kind);
  std::vector<EvalReport> reports;
  for (auto kind : kinds) {
    ExperimentConfig cfg = base;
    cfg.kind = kind;
    try {
      reports.push_back(run_experiment(rec, cfg).report);
    } catch (const DivergenceError& e) {
      reports.push_back(failed_report(cfg, "diverged", e.what()));
    }
  }
  return reports;
}

SimConfig benchmark_sim_config(std::uint64_t seed) {
  SimConfig c;
  c.width = 64;
  c.height = 64;
  c.duration_us = 100'000'000;
  c.contrast_threshold = 0.2;
  c.frame_period_us = 50'000;
  c.noise_rate = 0.0;
  c.seed = seed;

  auto& s = c.scene;
  s.kind = SceneKind::TranslatingTexture;
  s.background = 40.0;
  s.foreground = 90.0;
  s.label_period_us = 10'000;
  s.speed_kmh = Profile::constant(40.0);
  s.gain_px_per_deg_s = 3.0;
  s.lead_us = 333'333;
  s.texture = TextureSpec{};

  // Slow steering and fast camera shake, both as fixed sums of sines.
  s.angle_deg.offset = 0.0;
  s.angle_deg.components = {{9.0, 3.1, 0.3}, {6.0, 1.7, 2.1}, {4.0, 1.13, 4.0}, {3.0, 0.83, 5.2}};
  s.jitter_px_s.offset = 0.0;
  s.jitter_px_s.components = {{14.0, 0.041, 0.7}, {12.0, 0.029, 1.9}, {10.0, 0.019, 3.3}, {8.0, 0.015, 5.1}};
  return c;
}

ExperimentConfig benchmark_experiment_config(InputKind kind, Micros integration_us, std::uint64_t seed) {
  ExperimentConfig c;
  c.kind = kind;
  c.integration_us = integration_us;
  c.sample_stride_us = 50'000;
  c.train_len_us = 6'000'000;
  c.test_len_us = 4'000'000;
  c.pipeline.seed = seed;
  c.model.seed = seed;
  c.model.stem_channels = 8;
  c.model.stem_stride = 2;
  c.model.num_residual_blocks = 2;
  c.model.head_hidden = 64;
  c.train.seed = seed;
  c.train.epochs = 30;
  c.train.batch_size = 16;
  c.train.learning_rate = 0.02;
  c.train.momentum = 0.9;
  return c;
}

}  // namespace evsteer

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "evsteer/event_sim.hpp"
#include "evsteer/frames.hpp"
#include "evsteer/labels.hpp"
#include "evsteer/metrics.hpp"
#include "evsteer/model.hpp"
#include "evsteer/train.hpp"

namespace evsteer {

/// The recording lacks something the experiment needs (a modality, samples).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  InputKind kind = InputKind::Events;
  Micros integration_us = 50'000;
  /// Sample spacing for recordings without gray frames; otherwise samples sit
  /// on the gray frame timestamps.
  Micros sample_stride_us = 50'000;
  Micros train_len_us = kTrainSegmentUs;
  Micros test_len_us = kTestSegmentUs;
  PipelineConfig pipeline;
  ModelConfig model;  // input_channels follows `kind`
  TrainConfig train;
  EventScaling scaling;
  std::vector<double> angle_bin_edges = kDefaultAngleBinEdges;

  void validate() const;
};

/// Sample time with the gray frame it coincides with (npos when none).
struct Anchor {
  Micros t = 0;
  std::size_t frame = npos;
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
};

/// Samples sit at gray frame k >= 1 with t_k >= T, so every input kind sees
/// the same sample times; without gray frames at multiples of `stride`.
std::vector<Anchor> sample_anchors(const LabeledRecording& rec, Micros integration_us, Micros stride_us);

/// Events: histogram over [t - T, t). Gray: frame k. GrayDiff: frames k, k-1.
Tensor build_input(const LabeledRecording& rec, InputKind kind, const Anchor& anchor, Micros integration_us,
                   EventScaling scaling = {});

struct ExperimentResult {
  EvalReport report;
  Model model;
  std::vector<double> loss_history;
  std::vector<double> test_pred_deg;
  std::vector<double> test_obs_deg;
  std::size_t n_train = 0;
};

/// Associates labels, splits, preprocesses the train part, trains from scratch
/// and evaluates on the test part in degrees. The returned model's metadata
/// carries what evaluate_model needs.
ExperimentResult run_experiment(const LabeledRecording& rec, const ExperimentConfig& config,
                                const EpochCallback& on_epoch = {});

/// Re-evaluates a trained model on the test split of `rec`.
EvalReport evaluate_model(const Model& model, const LabeledRecording& rec);

ExperimentConfig experiment_config_from_metadata(const Model& model);

/// One independent run per T, sorted by T. Failures are recorded in the
/// report status instead of aborting the sweep.
std::vector<EvalReport> sweep_integration_time(const LabeledRecording& rec, std::vector<double> times_ms,
                                               const ExperimentConfig& base);

/// One run per input kind with identical seeds. Throws DataError when the
/// recording lacks a requested modality.
std::vector<EvalReport> compare_inputs(const LabeledRecording& rec, const std::vector<InputKind>& kinds,
                                       const ExperimentConfig& base);

/// Motion-coded synthetic benchmark: a 64x64 textured scene translating with
/// a velocity proportional to the upcoming steering angle plus camera shake.
SimConfig benchmark_sim_config(std::uint64_t seed = 1);
ExperimentConfig benchmark_experiment_config(InputKind kind, Micros integration_us, std::uint64_t seed);

}  // namespace evsteer

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "evsteer/events.hpp"

namespace evsteer {

/// One row of a recording's steering log.
struct LabelRecord {
  Micros t = 0;
  double angle_deg = 0.0;
  double speed_kmh = 0.0;
  friend bool operator==(const LabelRecord&, const LabelRecord&) = default;
};

struct Sample {
  Micros t = 0;
  std::size_t window_index = 0;
  double angle_deg = 0.0;
  double speed_kmh = 0.0;
  friend bool operator==(const Sample&, const Sample&) = default;
};

struct LabelStats {
  double sigma_deg = 0.0;
  double clip_deg = 0.0;
  friend bool operator==(const LabelStats&, const LabelStats&) = default;
};

enum class SplitMode { Train, Test };
enum class TrimMode { Clip, Discard };

struct PipelineConfig {
  Micros horizon_us = 333'333;  // 1/3 s
  double speed_min_kmh = 20.0;
  double straight_thresh_deg = 5.0;
  double straight_keep_frac = 0.30;
  double angle_full_scale_deg = 180.0;
  std::uint64_t seed = 0;
  TrimMode trim = TrimMode::Clip;

  void validate() const;
};

struct Association {
  std::vector<Sample> samples;
  std::size_t dropped = 0;
};

/// Each window time t gets the label nearest to t + horizon when it lies
/// within half the label cadence; otherwise the window is dropped.
/// `labels` must be time-sorted.
Association associate_future_label(std::span<const Micros> window_times, std::span<const LabelRecord> labels,
                                   Micros horizon);

/// Train mode keeps speed >= speed_min; test mode keeps everything.
std::vector<Sample> filter_by_speed(std::span<const Sample> samples, double speed_min, SplitMode mode);

/// Train mode keeps exactly ceil(keep_frac * n) of the n samples with
/// |angle| < thresh, picked by a seeded permutation; order is preserved.
std::vector<Sample> subsample_straight(std::span<const Sample> samples, double straight_thresh, double keep_frac,
                                       std::uint64_t seed, SplitMode mode);

/// Population standard deviation of the angles; clip = 3 sigma.
/// Throws std::invalid_argument for fewer than 2 samples.
LabelStats fit_stats(std::span<const Sample> samples);

double normalize_angle(double angle_deg, const LabelStats& stats, double full_scale = 180.0);
double denormalize_angle(double value, double full_scale = 180.0);

struct TrainingLabels {
  std::vector<Sample> samples;
  std::vector<double> targets;  // normalized, aligned with samples
  LabelStats stats;
  std::size_t removed_slow = 0;
  std::size_t removed_straight = 0;
  std::size_t removed_outliers = 0;
};

/// Speed filter, straight-road subsampling, stats fit and trimming, in that order.
TrainingLabels prepare_training_labels(std::span<const Sample> samples, const PipelineConfig& config);

/// Number of samples kept by the straight-road quota for n candidates.
std::size_t straight_quota(std::size_t n, double keep_frac);

void write_samples_csv(const std::string& path, std::span<const Sample> samples);
std::vector<Sample> read_samples_csv(const std::string& path);

nlohmann::json stats_to_json(const LabelStats& stats);
LabelStats stats_from_json(const nlohmann::json& j);

}  // namespace evsteer

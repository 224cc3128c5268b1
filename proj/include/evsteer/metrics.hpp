#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "evsteer/events.hpp"

namespace evsteer {

/// sqrt(mean((pred - obs)^2)). Throws std::invalid_argument on empty or
/// mismatched inputs.
double rmse(std::span<const double> pred, std::span<const double> obs);

/// Explained variance 1 - Var(pred - obs) / Var(obs), population variances.
/// Throws std::invalid_argument for fewer than 2 values, mismatched lengths,
/// or zero observed variance.
double eva(std::span<const double> pred, std::span<const double> obs);

double population_variance(std::span<const double> values);

struct Interval {
  Micros start = 0;
  Micros end = 0;  // exclusive
  friend bool operator==(const Interval&, const Interval&) = default;
};

inline constexpr Micros kTrainSegmentUs = 40'000'000;
inline constexpr Micros kTestSegmentUs = 20'000'000;

/// Alternating train/test segments over [0, span), starting with train.
struct SplitPlan {
  std::vector<Interval> train;
  std::vector<Interval> test;
  Micros train_len = kTrainSegmentUs;
  Micros test_len = kTestSegmentUs;

  bool is_train(Micros t) const;
};

SplitPlan make_split(Micros span, Micros train_len = kTrainSegmentUs, Micros test_len = kTestSegmentUs);

struct AngleBin {
  double lo_deg = 0.0;
  double hi_deg = 0.0;
  std::size_t count = 0;
  std::optional<double> median_relative_error;  // empty for empty bins
};

inline const std::vector<double> kDefaultAngleBinEdges = {0.0, 5.0, 10.0, 20.0, 45.0, 180.0};

/// Bins samples by |obs| over [edges[i], edges[i+1]) (the last bin also takes
/// its upper edge) and reports the median of |pred - obs| / max(|obs|, 1 deg).
std::vector<AngleBin> relative_error_by_angle(std::span<const double> pred, std::span<const double> obs,
                                              std::span<const double> edges = kDefaultAngleBinEdges);

struct EvalReport {
  double rmse_deg = 0.0;
  std::optional<double> eva;  // undefined when the observed angles are constant
  std::size_t n_samples = 0;
  std::string input_kind;
  double integration_time_ms = 0.0;
  std::vector<AngleBin> relative_error_bins;
  std::string status = "ok";
  std::string error;
};

nlohmann::json report_to_json(const EvalReport& report);

/// One header line, one row per report.
void write_reports_csv(const std::string& path, std::span<const EvalReport> reports);

}  // namespace evsteer

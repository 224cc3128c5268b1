#include "evsteer/labels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace evsteer {

void PipelineConfig::validate() const {
  if (horizon_us <= 0) throw std::invalid_argument("horizon must be positive");
  if (!(straight_keep_frac > 0.0 && straight_keep_frac <= 1.0)) {
    throw std::invalid_argument("straight_keep_frac must be in (0, 1]");
  }
  if (!(angle_full_scale_deg > 0.0)) throw std::invalid_argument("angle_full_scale_deg must be positive");
}

Association associate_future_label(std::span<const Micros> window_times, std::span<const LabelRecord> labels,
                                   Micros horizon) {
  Association out;
  if (labels.empty()) {
    out.dropped = window_times.size();
    return out;
  }
  // Cadence is the median label spacing, robust to the odd gap in a log.
  Micros tolerance = 0;
  if (labels.size() >= 2) {
    std::vector<Micros> gaps(labels.size() - 1);
    for (std::size_t i = 1; i < labels.size(); ++i) gaps[i - 1] = labels[i].t - labels[i - 1].t;
    std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
    tolerance = gaps[gaps.size() / 2] / 2;
  }
  for (std::size_t w = 0; w < window_times.size(); ++w) {
    const Micros target = window_times[w] + horizon;
    auto it = std::lower_bound(labels.begin(), labels.end(), target,
                               [](const LabelRecord& l, Micros t) { return l.t < t; });
    const LabelRecord* best = nullptr;
    if (it != labels.end()) best = &*it;
    if (it != labels.begin()) {
      const LabelRecord* before = &*std::prev(it);
      if (best == nullptr || target - before->t <= best->t - target) best = before;
    }
    if (best == nullptr || std::abs(best->t - target) > tolerance) {
      ++out.dropped;
      continue;
    }
    out.samples.push_back({window_times[w], w, best->angle_deg, best->speed_kmh});
  }
  return out;
}

std::vector<Sample> filter_by_speed(std::span<const Sample> samples, double speed_min, SplitMode mode) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (mode == SplitMode::Test || s.speed_kmh >= speed_min) out.push_back(s);
  }
  return out;
}

std::size_t straight_quota(std::size_t n, double keep_frac) {
  // The epsilon keeps products like 0.3 * 10 = 3.0000000000000004 from rounding up.
  const double q = std::ceil(keep_frac * static_cast<double>(n) - 1e-9);
  return std::min(n, static_cast<std::size_t>(std::max(0.0, q)));
}

std::vector<Sample> subsample_straight(std::span<const Sample> samples, double straight_thresh, double keep_frac,
                                       std::uint64_t seed, SplitMode mode) {
  if (mode == SplitMode::Test) return {samples.begin(), samples.end()};
  std::vector<std::size_t> straight;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (std::abs(samples[i].angle_deg) < straight_thresh) straight.push_back(i);
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = straight.size(); i > 1; --i) {
    std::swap(straight[i - 1], straight[rng() % i]);
  }
  straight.resize(straight_quota(straight.size(), keep_frac));
  std::vector<bool> keep(samples.size(), true);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (std::abs(samples[i].angle_deg) < straight_thresh) keep[i] = false;
  }
  for (auto i : straight) keep[i] = true;
  std::vector<Sample> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (keep[i]) out.push_back(samples[i]);
  }
  return out;
}

LabelStats fit_stats(std::span<const Sample> samples) {
  if (samples.size() < 2) throw std::invalid_argument("fit_stats needs at least 2 samples");
  double mean = 0.0;
  for (const auto& s : samples) mean += s.angle_deg;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (const auto& s : samples) var += (s.angle_deg - mean) * (s.angle_deg - mean);
  var /= static_cast<double>(samples.size());
  const double sigma = std::sqrt(var);
  return {sigma, 3.0 * sigma};
}

double normalize_angle(double angle_deg, const LabelStats& stats, double full_scale) {
  return std::clamp(angle_deg, -stats.clip_deg, stats.clip_deg) / full_scale;
}

double denormalize_angle(double value, double full_scale) {
  return std::clamp(value * full_scale, -180.0, 180.0);
}

TrainingLabels prepare_training_labels(std::span<const Sample> samples, const PipelineConfig& config) {
  config.validate();
  TrainingLabels out;
  auto fast = filter_by_speed(samples, config.speed_min_kmh, SplitMode::Train);
  out.removed_slow = samples.size() - fast.size();
  auto balanced = subsample_straight(fast, config.straight_thresh_deg, config.straight_keep_frac, config.seed,
                                     SplitMode::Train);
  out.removed_straight = fast.size() - balanced.size();
  out.stats = fit_stats(balanced);
  for (const auto& s : balanced) {
    if (config.trim == TrimMode::Discard && std::abs(s.angle_deg) > out.stats.clip_deg) {
      ++out.removed_outliers;
      continue;
    }
    out.samples.push_back(s);
    out.targets.push_back(normalize_angle(s.angle_deg, out.stats, config.angle_full_scale_deg));
  }
  return out;
}

void write_samples_csv(const std::string& path, std::span<const Sample> samples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "t_us,window_index,angle_deg,speed_kmh\n";
  for (const auto& s : samples) {
    out << s.t << ',' << s.window_index << ',' << s.angle_deg << ',' << s.speed_kmh << '\n';
  }
}

std::vector<Sample> read_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("t_us,window_index,angle_deg,speed_kmh", 0) != 0) {
    throw std::runtime_error(path + ": unexpected samples header");
  }
  std::vector<Sample> out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    Sample s;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ss >> s.t >> c1 >> s.window_index >> c2 >> s.angle_deg >> c3 >> s.speed_kmh) || c1 != ',' ||
        c2 != ',' || c3 != ',') {
      throw std::runtime_error(path + ": malformed sample row " + std::to_string(out.size()));
    }
    out.push_back(s);
  }
  return out;
}

nlohmann::json stats_to_json(const LabelStats& stats) {
  return {{"sigma_deg", stats.sigma_deg}, {"clip_deg", stats.clip_deg}};
}

LabelStats stats_from_json(const nlohmann::json& j) {
  return {j.at("sigma_deg").get<double>(), j.at("clip_deg").get<double>()};
}

}  // namespace evsteer

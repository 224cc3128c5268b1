#include "evsteer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace evsteer {

namespace {

void check_pair(std::span<const double> pred, std::span<const double> obs, std::size_t min_len, const char* op) {
  if (pred.size() != obs.size()) {
    throw std::invalid_argument(std::string(op) + ": length mismatch (" + std::to_string(pred.size()) + " vs " +
                                std::to_string(obs.size()) + ")");
  }
  if (obs.size() < min_len) {
    throw std::invalid_argument(std::string(op) + ": needs at least " + std::to_string(min_len) + " values");
  }
}

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double upper = v[mid];
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> obs) {
  check_pair(pred, obs, 1, "rmse");
  double acc = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) acc += (pred[i] - obs[i]) * (pred[i] - obs[i]);
  return std::sqrt(acc / static_cast<double>(obs.size()));
}

double population_variance(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(values.size());
}

double eva(std::span<const double> pred, std::span<const double> obs) {
  check_pair(pred, obs, 2, "eva");
  const double var_obs = population_variance(obs);
  if (!(var_obs > 0.0)) throw std::invalid_argument("eva: observed values have zero variance");
  std::vector<double> residual(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) residual[i] = pred[i] - obs[i];
  return 1.0 - population_variance(residual) / var_obs;
}

bool SplitPlan::is_train(Micros t) const {
  if (t < 0) return false;
  return t % (train_len + test_len) < train_len;
}

SplitPlan make_split(Micros span, Micros train_len, Micros test_len) {
  if (span <= 0) throw std::invalid_argument("make_split: span must be positive");
  if (train_len <= 0 || test_len <= 0) throw std::invalid_argument("make_split: segment lengths must be positive");
  SplitPlan plan;
  plan.train_len = train_len;
  plan.test_len = test_len;
  Micros t = 0;
  bool train = true;
  while (t < span) {
    const Micros end = std::min(span, t + (train ? train_len : test_len));
    (train ? plan.train : plan.test).push_back({t, end});
    t = end;
    train = !train;
  }
  return plan;
}

std::vector<AngleBin> relative_error_by_angle(std::span<const double> pred, std::span<const double> obs,
                                              std::span<const double> edges) {
  check_pair(pred, obs, 0, "relative_error_by_angle");
  if (edges.size() < 2) throw std::invalid_argument("relative_error_by_angle: need at least two bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw std::invalid_argument("relative_error_by_angle: edges must increase");
  }
  const std::size_t nbins = edges.size() - 1;
  std::vector<std::vector<double>> errors(nbins);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double a = std::abs(obs[i]);
    if (a < edges.front() || a > edges.back()) continue;
    auto it = std::upper_bound(edges.begin(), edges.end(), a);
    std::size_t bin = static_cast<std::size_t>(it - edges.begin()) - 1;
    if (bin >= nbins) bin = nbins - 1;
    errors[bin].push_back(std::abs(pred[i] - obs[i]) / std::max(a, 1.0));
  }
  std::vector<AngleBin> bins(nbins);
  for (std::size_t b = 0; b < nbins; ++b) {
    bins[b].lo_deg = edges[b];
    bins[b].hi_deg = edges[b + 1];
    bins[b].count = errors[b].size();
    if (!errors[b].empty()) bins[b].median_relative_error = median(std::move(errors[b]));
  }
  return bins;
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : r.relative_error_bins) {
    bins.push_back({{"lo_deg", b.lo_deg},
                    {"hi_deg", b.hi_deg},
                    {"count", b.count},
                    {"median_relative_error",
                     b.median_relative_error ? nlohmann::json(*b.median_relative_error) : nlohmann::json()}});
  }
  nlohmann::json j = {{"rmse_deg", r.rmse_deg},
                      {"eva", r.eva ? nlohmann::json(*r.eva) : nlohmann::json()},
                      {"n_samples", r.n_samples},
                      {"input_kind", r.input_kind},
                      {"T_ms", r.integration_time_ms},
                      {"relative_error_bins", bins}};
  if (r.status != "ok") {
    j["status"] = r.status;
    j["error"] = r.error;
  }
  return j;
}

void write_reports_csv(const std::string& path, std::span<const EvalReport> reports) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(10);
  out << "input_kind,T_ms,n_samples,rmse_deg,eva,status\n";
  for (const auto& r : reports) {
    out << r.input_kind << ',' << r.integration_time_ms << ',' << r.n_samples << ',';
    if (r.status == "ok") {
      out << r.rmse_deg << ',';
      if (r.eva) out << *r.eva;
    } else {
      out << ',';
    }
    out << ',' << r.status << '\n';
  }
}

}  // namespace evsteer

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "evsteer/model.hpp"
#include "evsteer/tensor.hpp"

namespace evsteer {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  int epochs = 10;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Inputs of identical shape (C, H, W) stored at float precision, with one
/// normalized target each.
class SampleBank {
 public:
  explicit SampleBank(std::vector<std::size_t> sample_shape);

  void add(const Tensor& input, double target);
  std::size_t size() const noexcept { return targets_.size(); }
  bool empty() const noexcept { return targets_.empty(); }
  const std::vector<std::size_t>& sample_shape() const noexcept { return sample_shape_; }
  std::span<const double> targets() const noexcept { return targets_; }

  /// (N, C, H, W) batch of the given rows.
  Tensor batch(std::span<const std::size_t> rows) const;

 private:
  std::vector<std::size_t> sample_shape_;
  std::size_t sample_size_ = 0;
  std::vector<float> inputs_;
  std::vector<double> targets_;
};

struct TrainResult {
  Model model;
  std::vector<double> loss_history;  // mean training loss per epoch
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// SGD with momentum (v = mu v + g; p -= lr v) over a seeded per-epoch shuffle.
/// Throws DivergenceError carrying the epoch index on a non-finite loss.
TrainResult train(Model model, const SampleBank& data, const TrainConfig& config, const EpochCallback& on_epoch = {});

std::vector<double> predict(const Model& model, const SampleBank& data, std::size_t batch_size = 64);

}  // namespace evsteer

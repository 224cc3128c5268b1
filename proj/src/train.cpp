#include "evsteer/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace evsteer {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
}

SampleBank::SampleBank(std::vector<std::size_t> sample_shape)
    : sample_shape_(std::move(sample_shape)), sample_size_(shape_size(sample_shape_)) {
  if (sample_shape_.size() != 3) throw std::invalid_argument("samples must be (C, H, W)");
}

void SampleBank::add(const Tensor& input, double target) {
  if (input.shape() != sample_shape_) {
    throw std::invalid_argument("sample shape " + shape_string(input.shape()) + " does not match bank shape " +
                                shape_string(sample_shape_));
  }
  for (double v : input.data()) inputs_.push_back(static_cast<float>(v));
  targets_.push_back(target);
}

Tensor SampleBank::batch(std::span<const std::size_t> rows) const {
  std::vector<std::size_t> shape{rows.size()};
  shape.insert(shape.end(), sample_shape_.begin(), sample_shape_.end());
  Tensor out(std::move(shape));
  double* dst = out.data().data();
  for (std::size_t r : rows) {
    const float* src = inputs_.data() + r * sample_size_;
    for (std::size_t i = 0; i < sample_size_; ++i) *dst++ = src[i];
  }
  return out;
}

TrainResult train(Model model, const SampleBank& data, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("training set is empty");

  std::vector<Tensor> velocity;
  for (const auto& p : model.parameters) velocity.emplace_back(p.value.shape());

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);
  std::vector<double> batch_targets;

  TrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> rows(order.data() + start, end - start);
      batch_targets.clear();
      for (auto r : rows) batch_targets.push_back(data.targets()[r]);
      LossAndGrad lg;
      try {
        lg = loss_and_grad(model, data.batch(rows), batch_targets);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch), epoch);
      }
      loss_sum += lg.loss * static_cast<double>(rows.size());
      for (std::size_t k = 0; k < model.parameters.size(); ++k) {
        auto p = model.parameters[k].value.data();
        auto v = velocity[k].data();
        const auto g = lg.grads[k].data();
        for (std::size_t j = 0; j < p.size(); ++j) {
          v[j] = config.momentum * v[j] + g[j];
          p[j] -= config.learning_rate * v[j];
        }
        round_to_float(model.parameters[k].value);
      }
    }
    const double mean = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(mean)) throw DivergenceError("non-finite epoch loss at epoch " + std::to_string(epoch), epoch);
    result.loss_history.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  result.model = std::move(model);
  return result;
}

std::vector<double> predict(const Model& model, const SampleBank& data, std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(data.size());
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    rows.clear();
    for (std::size_t r = start; r < std::min(data.size(), start + batch_size); ++r) rows.push_back(r);
    auto preds = forward(model, data.batch(rows));
    out.insert(out.end(), preds.begin(), preds.end());
  }
  return out;
}

}  // namespace evsteer

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evsteer/autodiff.hpp"
#include "evsteer/tensor.hpp"

namespace evsteer {

/// Residual regressor shape: stem conv -> residual blocks -> global average
/// pooling -> FC(head_hidden) -> ReLU -> FC(1).
///
/// Block 0 keeps the stem width. Every later block halves the resolution with
/// a stride-2 first conv, doubles the channel count, and uses a 1x1 stride-2
/// projection on the shortcut. Each block is conv3x3 -> ReLU -> conv3x3 plus
/// the shortcut, with no activation after the sum.
struct ModelConfig {
  int input_channels = 2;
  int stem_channels = 8;
  int stem_stride = 2;
  int num_residual_blocks = 2;
  int head_hidden = 64;
  std::uint64_t seed = 0;

  void validate() const;
  int block_channels(int block) const { return stem_channels << block; }
  int output_channels() const { return block_channels(num_residual_blocks - 1); }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct Parameter {
  std::string name;
  Tensor value;
  friend bool operator==(const Parameter&, const Parameter&) = default;
};

struct Model {
  ModelConfig config;
  std::vector<Parameter> parameters;
  /// Free-form annotations carried through save/load (input kind, label stats, ...).
  nlohmann::json metadata = nlohmann::json::object();

  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);
  std::size_t parameter_count() const;

  friend bool operator==(const Model&, const Model&) = default;
};

/// Training diverged or a non-finite value reached the loss.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what, int epoch = -1) : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// Names and shapes of every parameter, in storage order.
std::vector<std::pair<std::string, std::vector<std::size_t>>> parameter_layout(const ModelConfig& config);

/// He fan-in normal init for convs and the hidden FC, zero biases, zero final FC.
/// Parameter values are rounded to float precision so they survive the model file.
Model init_model(const ModelConfig& config);

/// (out, 3, k, k) RGB filters -> (out, 2, k, k): both channels are the RGB mean.
Tensor transfer_init_first_layer(const Tensor& rgb_filters);

/// Appends the network to `graph`; `as_parameters` selects whether the weights
/// are differentiable leaves. Returns the (N, 1) prediction node and fills
/// `param_vars` in storage order.
Var build_network(Graph& graph, const Model& model, Var input, bool as_parameters, std::vector<Var>& param_vars);

/// Normalized-angle prediction per sample of an (N, C, H, W) batch.
std::vector<double> forward(const Model& model, const Tensor& batch);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<Tensor> grads;  // aligned with model.parameters
  std::vector<double> predictions;
};

/// MSE on normalized angles and its gradient for every parameter.
/// Throws DivergenceError when the loss or a gradient is not finite.
LossAndGrad loss_and_grad(const Model& model, const Tensor& batch, std::span<const double> targets);

/// Rounds every value to the nearest float.
void round_to_float(Tensor& t);

/// "EVSM" magic, u32 LE header length, JSON header (format version, config,
/// parameter names and shapes, metadata), then the parameters as f32 LE in
/// header order.
std::vector<std::byte> save_model(const Model& model);
Model load_model(std::span<const std::byte> bytes);

void save_model_file(const Model& model, const std::string& path);
Model load_model_file(const std::string& path);

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace evsteer

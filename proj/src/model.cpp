#include "evsteer/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

namespace evsteer {

namespace {

constexpr char kMagic[4] = {'E', 'V', 'S', 'M'};
constexpr int kFormatVersion = 1;

std::size_t as_size(int v) { return static_cast<std::size_t>(v); }

}  // namespace

void ModelConfig::validate() const {
  if (input_channels < 1 || stem_channels < 1 || stem_stride < 1 || num_residual_blocks < 1 || head_hidden < 1) {
    throw std::invalid_argument("model sizes must all be >= 1");
  }
  if (num_residual_blocks > 8) throw std::invalid_argument("at most 8 residual blocks are supported");
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"input_channels", c.input_channels}, {"stem_channels", c.stem_channels},
          {"stem_stride", c.stem_stride},       {"num_residual_blocks", c.num_residual_blocks},
          {"head_hidden", c.head_hidden},       {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.input_channels = j.at("input_channels").get<int>();
  c.stem_channels = j.at("stem_channels").get<int>();
  c.stem_stride = j.value("stem_stride", 2);
  c.num_residual_blocks = j.at("num_residual_blocks").get<int>();
  c.head_hidden = j.at("head_hidden").get<int>();
  c.seed = j.value("seed", std::uint64_t{0});
  c.validate();
  return c;
}

const Tensor& Model::at(std::string_view name) const {
  for (const auto& p : parameters) {
    if (p.name == name) return p.value;
  }
  throw std::out_of_range("no parameter named " + std::string(name));
}

Tensor& Model::at(std::string_view name) {
  return const_cast<Tensor&>(static_cast<const Model&>(*this).at(name));
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters) n += p.value.size();
  return n;
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> parameter_layout(const ModelConfig& c) {
  c.validate();
  std::vector<std::pair<std::string, std::vector<std::size_t>>> layout;
  const auto stem = as_size(c.stem_channels);
  layout.push_back({"stem.weight", {stem, as_size(c.input_channels), 3, 3}});
  layout.push_back({"stem.bias", {stem}});
  for (int b = 0; b < c.num_residual_blocks; ++b) {
    const auto in = as_size(b == 0 ? c.stem_channels : c.block_channels(b - 1));
    const auto out = as_size(c.block_channels(b));
    const std::string prefix = "block" + std::to_string(b) + ".";
    layout.push_back({prefix + "conv1.weight", {out, in, 3, 3}});
    layout.push_back({prefix + "conv1.bias", {out}});
    layout.push_back({prefix + "conv2.weight", {out, out, 3, 3}});
    layout.push_back({prefix + "conv2.bias", {out}});
    if (b > 0) {
      layout.push_back({prefix + "proj.weight", {out, in, 1, 1}});
      layout.push_back({prefix + "proj.bias", {out}});
    }
  }
  const auto hidden = as_size(c.head_hidden);
  layout.push_back({"head.fc1.weight", {hidden, as_size(c.output_channels())}});
  layout.push_back({"head.fc1.bias", {hidden}});
  layout.push_back({"head.fc2.weight", {1, hidden}});
  layout.push_back({"head.fc2.bias", {1}});
  return layout;
}

void round_to_float(Tensor& t) {
  for (double& v : t.data()) v = static_cast<double>(static_cast<float>(v));
}

Model init_model(const ModelConfig& config) {
  Model m;
  m.config = config;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& [name, shape] : parameter_layout(config)) {
    Tensor t(shape);
    const bool is_bias = name.ends_with(".bias");
    if (!is_bias && !name.starts_with("head.fc2")) {
      std::size_t fan_in = 1;
      for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
      const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (double& v : t.data()) v = normal(rng) * std;
      round_to_float(t);
    }
    m.parameters.push_back({name, std::move(t)});
  }
  return m;
}

Tensor transfer_init_first_layer(const Tensor& rgb) {
  if (rgb.rank() != 4 || rgb.dim(1) != 3) {
    throw std::invalid_argument("transfer init expects (out, 3, k, k) filters, got " + shape_string(rgb.shape()));
  }
  const std::size_t out = rgb.dim(0);
  const std::size_t plane = rgb.dim(2) * rgb.dim(3);
  Tensor result({out, 2, rgb.dim(2), rgb.dim(3)});
  for (std::size_t o = 0; o < out; ++o) {
    const double* src = rgb.data().data() + o * 3 * plane;
    double* dst = result.data().data() + o * 2 * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const double mean = (src[i] + src[plane + i] + src[2 * plane + i]) / 3.0;
      dst[i] = mean;
      dst[plane + i] = mean;
    }
  }
  return result;
}

Var build_network(Graph& g, const Model& model, Var input, bool as_parameters, std::vector<Var>& vars) {
  const auto& c = model.config;
  const auto& in_shape = g.value(input).shape();
  if (in_shape.size() != 4 || in_shape[1] != as_size(c.input_channels)) {
    throw std::invalid_argument("network expects (N, " + std::to_string(c.input_channels) + ", H, W) input, got " +
                                shape_string(in_shape));
  }
  vars.clear();
  for (const auto& p : model.parameters) {
    vars.push_back(as_parameters ? g.parameter(p.value) : g.input(p.value));
  }
  std::size_t next = 0;
  auto take = [&]() { return vars.at(next++); };

  Var w = take();
  Var b = take();
  Var x = g.relu(g.conv2d(input, w, b, as_size(c.stem_stride), 1));
  for (int blk = 0; blk < c.num_residual_blocks; ++blk) {
    const std::size_t stride = blk == 0 ? 1 : 2;
    Var w1 = take();
    Var b1 = take();
    Var w2 = take();
    Var b2 = take();
    Var h = g.conv2d(g.relu(g.conv2d(x, w1, b1, stride, 1)), w2, b2, 1, 1);
    Var shortcut = x;
    if (blk > 0) {
      Var wp = take();
      Var bp = take();
      shortcut = g.conv2d(x, wp, bp, 2, 0);
    }
    x = g.add(h, shortcut);
  }
  Var pooled = g.global_avg_pool(x);
  Var w_fc1 = take();
  Var b_fc1 = take();
  Var hidden = g.relu(g.linear(pooled, w_fc1, b_fc1));
  Var w_fc2 = take();
  Var b_fc2 = take();
  return g.linear(hidden, w_fc2, b_fc2);
}

std::vector<double> forward(const Model& model, const Tensor& batch) {
  Graph g;
  std::vector<Var> vars;
  Var out = build_network(g, model, g.input(batch), false, vars);
  const auto& v = g.value(out);
  return {v.data().begin(), v.data().end()};
}

LossAndGrad loss_and_grad(const Model& model, const Tensor& batch, std::span<const double> targets) {
  Graph g;
  std::vector<Var> vars;
  Var pred = build_network(g, model, g.input(batch), true, vars);
  Var loss = g.mse(pred, targets);
  LossAndGrad out;
  out.loss = g.value(loss)[0];
  const auto& pv = g.value(pred);
  out.predictions.assign(pv.data().begin(), pv.data().end());
  if (!std::isfinite(out.loss)) {
    throw DivergenceError("non-finite loss (" + std::to_string(out.loss) + ") on a batch of " +
                          std::to_string(targets.size()));
  }
  g.backward(loss);
  for (std::size_t i = 0; i < vars.size(); ++i) {
    out.grads.push_back(g.grad(vars[i]));
    if (!out.grads.back().all_finite()) {
      throw DivergenceError("non-finite gradient for " + model.parameters[i].name);
    }
  }
  return out;
}

// --- serialization -------------------------------------------------------------

std::vector<std::byte> save_model(const Model& model) {
  nlohmann::json header;
  header["format"] = "evsteer-model";
  header["version"] = kFormatVersion;
  header["config"] = model_config_to_json(model.config);
  header["parameters"] = nlohmann::json::array();
  for (const auto& p : model.parameters) {
    header["parameters"].push_back({{"name", p.name}, {"shape", p.value.shape()}});
  }
  header["metadata"] = model.metadata;
  const std::string text = header.dump();

  std::vector<std::byte> out;
  out.reserve(8 + text.size() + model.parameter_count() * 4);
  for (char ch : kMagic) out.push_back(static_cast<std::byte>(ch));
  const auto len = static_cast<std::uint32_t>(text.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((len >> (8 * i)) & 0xFF));
  for (char ch : text) out.push_back(static_cast<std::byte>(ch));
  for (const auto& p : model.parameters) {
    for (double v : p.value.data()) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((bits >> (8 * i)) & 0xFF));
    }
  }
  return out;
}

Model load_model(std::span<const std::byte> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ModelFormatError("model file: bad magic bytes");
  }
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= std::to_integer<std::uint32_t>(bytes[4 + i]) << (8 * i);
  if (bytes.size() < 8 + static_cast<std::size_t>(len)) throw ModelFormatError("model file: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(reinterpret_cast<const char*>(bytes.data() + 8),
                                   reinterpret_cast<const char*>(bytes.data() + 8 + len));
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("model file: malformed header: ") + e.what());
  }
  if (header.value("format", std::string()) != "evsteer-model") throw ModelFormatError("model file: wrong format tag");
  if (header.value("version", -1) != kFormatVersion) {
    throw ModelFormatError("model file: unsupported version " + header.value("version", nlohmann::json()).dump());
  }
  Model m;
  try {
    m.config = model_config_from_json(header.at("config"));
  } catch (const std::exception& e) {
    throw ModelFormatError(std::string("model file: bad config: ") + e.what());
  }
  m.metadata = header.value("metadata", nlohmann::json::object());
  const auto layout = parameter_layout(m.config);
  const auto& params = header.at("parameters");
  if (params.size() != layout.size()) throw ModelFormatError("model file: parameter count does not match config");
  std::size_t offset = 8 + len;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto name = params[i].at("name").get<std::string>();
    const auto shape = params[i].at("shape").get<std::vector<std::size_t>>();
    if (name != layout[i].first || shape != layout[i].second) {
      throw ModelFormatError("model file: parameter " + name + " " + shape_string(shape) + " does not match " +
                             layout[i].first + " " + shape_string(layout[i].second));
    }
    Tensor t(shape);
    if (bytes.size() < offset + t.size() * 4) throw ModelFormatError("model file: truncated payload");
    for (double& v : t.data()) {
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k) bits |= std::to_integer<std::uint32_t>(bytes[offset + k]) << (8 * k);
      v = static_cast<double>(std::bit_cast<float>(bits));
      offset += 4;
    }
    m.parameters.push_back({name, std::move(t)});
  }
  if (offset != bytes.size()) throw ModelFormatError("model file: trailing bytes after payload");
  return m;
}

void save_model_file(const Model& model, const std::string& path) {
  const auto bytes = save_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

Model load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_model(std::as_bytes(std::span(raw.data(), raw.size())));
}

}  // namespace evsteer

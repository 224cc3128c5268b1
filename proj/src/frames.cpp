#include "evsteer/frames.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "evsteer/pgm.hpp"

namespace evsteer {

std::uint64_t EventFrame::total() const {
  return std::accumulate(h_plus.begin(), h_plus.end(), std::uint64_t{0}) +
         std::accumulate(h_minus.begin(), h_minus.end(), std::uint64_t{0});
}

std::uint32_t EventFrame::max_count() const {
  std::uint32_t m = 0;
  for (auto v : h_plus) m = std::max(m, v);
  for (auto v : h_minus) m = std::max(m, v);
  return m;
}

EventFrame accumulate_events(std::span<const Event> slice, Window window, int width, int height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("frame dimensions must be positive");
  EventFrame f;
  f.window = window;
  f.width = width;
  f.height = height;
  const auto n = static_cast<std::size_t>(width) * height;
  f.h_plus.assign(n, 0);
  f.h_minus.assign(n, 0);
  for (std::size_t k = 0; k < slice.size(); ++k) {
    const Event& e = slice[k];
    if (e.x >= width || e.y >= height) {
      throw FrameError("event " + std::to_string(k) + " (t=" + std::to_string(e.t) + ", x=" +
                       std::to_string(e.x) + ", y=" + std::to_string(e.y) + ") is outside the " +
                       std::to_string(width) + "x" + std::to_string(height) + " frame");
    }
    if (!window.contains(e.t)) {
      throw FrameError("event " + std::to_string(k) + " (t=" + std::to_string(e.t) + ") is outside window [" +
                       std::to_string(window.t_start) + ", " + std::to_string(window.t_end()) + ")");
    }
    const std::size_t i = static_cast<std::size_t>(e.y) * width + e.x;
    if (e.p > 0) {
      ++f.h_plus[i];
    } else {
      ++f.h_minus[i];
    }
  }
  return f;
}

Image polarity_balance(const EventFrame& frame) {
  Image out(frame.width, frame.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.values[i] = static_cast<double>(frame.h_plus[i]) - static_cast<double>(frame.h_minus[i]);
  }
  return out;
}

Image grayscale_log_diff(const Image& current, const Image& previous) {
  if (!current.same_shape(previous)) throw std::invalid_argument("grayscale_log_diff: image shapes differ");
  Image out(current.width, current.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.values[i] = std::log(current.values[i] + 1.0) - std::log(previous.values[i] + 1.0);
  }
  return out;
}

std::string to_string(InputKind kind) {
  switch (kind) {
    case InputKind::Events:
      return "events";
    case InputKind::Grayscale:
      return "gray";
    case InputKind::GrayDiff:
      return "graydiff";
  }
  return "unknown";
}

InputKind input_kind_from_string(const std::string& s) {
  if (s == "events") return InputKind::Events;
  if (s == "gray" || s == "grayscale") return InputKind::Grayscale;
  if (s == "graydiff") return InputKind::GrayDiff;
  throw std::invalid_argument("unknown input kind: " + s);
}

std::size_t channels_for(InputKind kind) { return kind == InputKind::Events ? 2 : 1; }

InputTensor to_input(const EventFrame& frame, EventScaling scaling) {
  const auto w = static_cast<std::size_t>(frame.width);
  const auto h = static_cast<std::size_t>(frame.height);
  InputTensor t{InputKind::Events, Tensor({2, h, w})};
  double scale = 0.0;
  if (scaling.mode == EventScaling::Mode::PerFrameMax) {
    const auto m = frame.max_count();
    scale = m > 0 ? 1.0 / m : 0.0;
  } else {
    if (!(scaling.clip > 0.0)) throw std::invalid_argument("fixed clip must be positive");
    scale = 1.0 / scaling.clip;
  }
  auto& v = t.values.values();
  const std::size_t plane = w * h;
  for (std::size_t i = 0; i < plane; ++i) {
    v[i] = std::min(1.0, frame.h_plus[i] * scale);
    v[plane + i] = std::min(1.0, frame.h_minus[i] * scale);
  }
  return t;
}

InputTensor to_input_gray(const Image& frame) {
  InputTensor t{InputKind::Grayscale,
                Tensor({1, static_cast<std::size_t>(frame.height), static_cast<std::size_t>(frame.width)})};
  for (std::size_t i = 0; i < frame.size(); ++i) {
    t.values[i] = std::clamp(frame.values[i] / 255.0, 0.0, 1.0);
  }
  return t;
}

InputTensor to_input_graydiff(const Image& current, const Image& previous) {
  const Image diff = grayscale_log_diff(current, previous);
  double m = 0.0;
  for (double v : diff.values) m = std::max(m, std::abs(v));
  InputTensor t{InputKind::GrayDiff,
                Tensor({1, static_cast<std::size_t>(diff.height), static_cast<std::size_t>(diff.width)})};
  if (m > 0.0) {
    for (std::size_t i = 0; i < diff.size(); ++i) t.values[i] = diff.values[i] / m;
  }
  return t;
}

void write_event_frame_pgm(const EventFrame& frame, const std::string& base_path) {
  auto to16 = [](const std::vector<std::uint32_t>& counts) {
    std::vector<std::uint16_t> out(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
      out[i] = static_cast<std::uint16_t>(std::min<std::uint32_t>(counts[i], 65535));
    }
    return out;
  };
  write_pgm16(base_path + "_pos.pgm", frame.width, frame.height, to16(frame.h_plus));
  write_pgm16(base_path + "_neg.pgm", frame.width, frame.height, to16(frame.h_minus));
}

}  // namespace evsteer

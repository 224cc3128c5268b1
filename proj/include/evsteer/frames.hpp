#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evsteer/events.hpp"
#include "evsteer/image.hpp"
#include "evsteer/tensor.hpp"

namespace evsteer {

/// Separate positive and negative count histograms over one window.
struct EventFrame {
  Window window;
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> h_plus;
  std::vector<std::uint32_t> h_minus;

  std::uint32_t plus(int x, int y) const { return h_plus[static_cast<std::size_t>(y) * width + x]; }
  std::uint32_t minus(int x, int y) const { return h_minus[static_cast<std::size_t>(y) * width + x]; }
  std::uint64_t total() const;
  std::uint32_t max_count() const;

  friend bool operator==(const EventFrame&, const EventFrame&) = default;
};

class FrameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws FrameError naming the first event that is out of bounds or outside the window.
EventFrame accumulate_events(std::span<const Event> slice, Window window, int width, int height);

/// h+ - h-, for analysis and display only.
Image polarity_balance(const EventFrame& frame);

/// log(I_t + 1) - log(I_prev + 1) pixel-wise. Throws std::invalid_argument on shape mismatch.
Image grayscale_log_diff(const Image& current, const Image& previous);

enum class InputKind { Events, Grayscale, GrayDiff };

std::string to_string(InputKind kind);
/// Accepts "events", "gray"/"grayscale", "graydiff".
InputKind input_kind_from_string(const std::string& s);
std::size_t channels_for(InputKind kind);

/// Network input of shape (channels, height, width).
struct InputTensor {
  InputKind kind = InputKind::Events;
  Tensor values;
};

struct EventScaling {
  enum class Mode { PerFrameMax, FixedClip };
  Mode mode = Mode::PerFrameMax;
  double clip = 8.0;  // counts, FixedClip only
};

/// Stacks (h+, h-) and scales both channels into [0, 1].
InputTensor to_input(const EventFrame& frame, EventScaling scaling = {});
/// 8-bit intensity / 255.
InputTensor to_input_gray(const Image& frame);
/// Log-intensity difference scaled by its per-frame max magnitude into [-1, 1].
InputTensor to_input_graydiff(const Image& current, const Image& previous);

/// Writes <base>_pos.pgm and <base>_neg.pgm as 16-bit binary PGM.
void write_event_frame_pgm(const EventFrame& frame, const std::string& base_path);

}  // namespace evsteer

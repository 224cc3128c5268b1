#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evsteer/events.hpp"
#include "evsteer/image.hpp"
#include "evsteer/labels.hpp"

namespace evsteer {

struct Sinusoid {
  double amplitude = 0.0;
  double period_s = 1.0;
  double phase = 0.0;  // radians

  friend bool operator==(const Sinusoid&, const Sinusoid&) = default;
};

/// Scalar signal of time: offset + sum of sinusoids. Used for steering angle,
/// speed and camera-shake velocity.
struct Profile {
  double offset = 0.0;
  std::vector<Sinusoid> components;

  static Profile constant(double value) { return {value, {}}; }

  double value(Micros t) const;
  /// Integral over [t0, t1] in (unit * seconds).
  double integral(Micros t0, Micros t1) const;
  double max_value() const;
  double min_value() const;

  friend bool operator==(const Profile&, const Profile&) = default;
};

enum class SceneKind { TranslatingBar, TranslatingTexture, TurningRoad };

struct TextureSpec {
  double period_px = 256.0;
  int bars = 16;
  double min_width_px = 2.0;
  double max_width_px = 6.0;
  double min_height_frac = 0.3;
  /// Bar intensity is drawn uniformly in [foreground * (1 - spread), foreground].
  double spread = 0.3;

  friend bool operator==(const TextureSpec&, const TextureSpec&) = default;
};

struct SceneSpec {
  SceneKind kind = SceneKind::TranslatingTexture;
  Profile angle_deg = Profile::constant(0.0);
  Profile speed_kmh = Profile::constant(40.0);
  /// Extra horizontal image velocity (camera shake), px/s.
  Profile jitter_px_s = Profile::constant(0.0);

  double background = 40.0;
  double foreground = 90.0;
  Micros label_period_us = 10'000;

  // translating_bar
  double bar_velocity_px_s = 100.0;
  double bar_width_px = 4.0;
  double bar_x0_px = 0.0;

  // translating_texture: image velocity = gain * angle(t + lead) + jitter(t)
  double gain_px_per_deg_s = 5.0;
  Micros lead_us = 0;
  TextureSpec texture;

  // turning_road
  double road_curvature_px_per_deg = 0.5;
  double road_half_width_frac = 0.45;
  double road_dash_length_m = 3.0;

  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

struct SimConfig {
  int width = kDefaultWidth;
  int height = kDefaultHeight;
  Micros duration_us = 1'000'000;
  double contrast_threshold = 0.2;
  Micros frame_period_us = 50'000;
  double noise_rate = 0.0;  // events / pixel / s
  std::uint64_t seed = 0;
  SceneSpec scene;

  /// Throws std::invalid_argument naming the first broken invariant.
  void validate() const;
  /// Dense sampling step for crossing detection.
  Micros sample_step_us() const;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

/// JSON form: keys width, height, duration_us, contrast_threshold,
/// frame_period_us, noise_rate, seed, scene{...}. Profiles may be given as
/// {"type":"random_sines",...}, which is expanded with the config seed.
SimConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::json sim_config_to_json(const SimConfig& config);

/// Procedural scene with precomputed texture tables.
class Scene {
 public:
  Scene(SceneSpec spec, int width, int height, std::uint64_t seed);

  const SceneSpec& spec() const noexcept { return spec_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  /// Positive intensities on a [0, 255] scale.
  Image render(Micros t) const;
  void render_into(Micros t, Image& out) const;

  /// Horizontal displacement of the scene content at time t (px), relative to t = 0.
  double displacement_px(Micros t) const;

 private:
  void render_bar(Micros t, Image& out) const;
  void render_texture(Micros t, Image& out) const;
  void render_road(Micros t, Image& out) const;

  SceneSpec spec_;
  int width_;
  int height_;
  // translating_texture: per-row cumulative integral of the texture, sampled
  // every 1/kTexRes px over one period.
  std::vector<std::vector<double>> row_integral_;
  std::size_t tex_samples_ = 0;
};

Image render_brightness(const Scene& scene, Micros t);

using BrightnessFn = std::function<void(Micros, Image&)>;

/// Per-pixel threshold model on log(I + 1): whenever the log intensity moves
/// by C from the pixel's reference level an event is emitted at the
/// interpolated crossing time and the reference steps by C.
EventStream generate_events(const BrightnessFn& brightness, const SimConfig& config);

struct GrayFrame {
  Micros t = 0;
  Image image;
  friend bool operator==(const GrayFrame&, const GrayFrame&) = default;
};

struct LabeledRecording {
  Micros duration_us = 0;
  EventStream events;
  std::vector<GrayFrame> gray_frames;
  std::vector<LabelRecord> labels;

  friend bool operator==(const LabeledRecording&, const LabeledRecording&) = default;
};

LabeledRecording generate_recording(const SimConfig& config);

}  // namespace evsteer

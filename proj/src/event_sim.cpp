#include "evsteer/event_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace evsteer {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kTexRes = 32;  // texture samples per pixel

double seconds(Micros t) { return static_cast<double>(t) * 1e-6; }

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

// --- JSON helpers ----------------------------------------------------------

Profile profile_from_json(const nlohmann::json& j, std::mt19937_64& rng) {
  if (j.is_number()) return Profile::constant(j.get<double>());
  const auto type = j.value("type", std::string("constant"));
  if (type == "constant") return Profile::constant(j.value("value", 0.0));
  Profile p;
  p.offset = j.value("offset", 0.0);
  if (type == "sines") {
    for (const auto& c : j.at("components")) {
      p.components.push_back({c.at("amplitude").get<double>(), c.at("period_s").get<double>(),
                              c.value("phase", 0.0)});
    }
    return p;
  }
  if (type == "random_sines") {
    // Amplitudes share `amplitude` so that |value - offset| <= amplitude; periods
    // are log-uniform in [min_period_s, max_period_s].
    const double amplitude = j.at("amplitude").get<double>();
    const int count = j.value("count", 4);
    const double pmin = j.value("min_period_s", 1.0);
    const double pmax = j.value("max_period_s", 4.0);
    if (count < 1 || pmin <= 0 || pmax < pmin) throw std::invalid_argument("bad random_sines profile");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> weights(count);
    double total = 0.0;
    for (auto& w : weights) {
      w = 0.5 + unit(rng);
      total += w;
    }
    for (int i = 0; i < count; ++i) {
      const double period = pmin * std::pow(pmax / pmin, unit(rng));
      const double phase = kTwoPi * unit(rng);
      p.components.push_back({amplitude * weights[i] / total, period, phase});
    }
    return p;
  }
  throw std::invalid_argument("unknown profile type: " + type);
}

nlohmann::json profile_to_json(const Profile& p) {
  if (p.components.empty()) return {{"type", "constant"}, {"value", p.offset}};
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : p.components) {
    comps.push_back({{"amplitude", c.amplitude}, {"period_s", c.period_s}, {"phase", c.phase}});
  }
  return {{"type", "sines"}, {"offset", p.offset}, {"components", comps}};
}

SceneKind scene_kind_from_string(const std::string& s) {
  if (s == "translating_bar") return SceneKind::TranslatingBar;
  if (s == "translating_texture") return SceneKind::TranslatingTexture;
  if (s == "turning_road") return SceneKind::TurningRoad;
  throw std::invalid_argument("unknown scene kind: " + s);
}

std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::TranslatingBar:
      return "translating_bar";
    case SceneKind::TranslatingTexture:
      return "translating_texture";
    case SceneKind::TurningRoad:
      return "turning_road";
  }
  return "unknown";
}

}  // namespace

// --- Profile ----------------------------------------------------------------

double Profile::value(Micros t) const {
  const double s = seconds(t);
  double v = offset;
  for (const auto& c : components) v += c.amplitude * std::sin(kTwoPi * s / c.period_s + c.phase);
  return v;
}

double Profile::integral(Micros t0, Micros t1) const {
  const double s0 = seconds(t0);
  const double s1 = seconds(t1);
  double v = offset * (s1 - s0);
  for (const auto& c : components) {
    const double w = kTwoPi / c.period_s;
    v += c.amplitude / w * (std::cos(w * s0 + c.phase) - std::cos(w * s1 + c.phase));
  }
  return v;
}

double Profile::max_value() const {
  double v = offset;
  for (const auto& c : components) v += std::abs(c.amplitude);
  return v;
}

double Profile::min_value() const {
  double v = offset;
  for (const auto& c : components) v -= std::abs(c.amplitude);
  return v;
}

// --- SimConfig --------------------------------------------------------------

void SimConfig::validate() const {
  if (width <= 0 || height <= 0 || width > 65535 || height > 65535) {
    throw std::invalid_argument("width and height must be in [1, 65535]");
  }
  if (!(contrast_threshold > 0.0)) throw std::invalid_argument("contrast_threshold must be > 0");
  if (frame_period_us <= 0) throw std::invalid_argument("frame_period_us must be > 0");
  if (duration_us < frame_period_us) throw std::invalid_argument("duration_us must be >= frame_period_us");
  if (!(noise_rate >= 0.0)) throw std::invalid_argument("noise_rate must be >= 0");
  if (scene.angle_deg.max_value() > 180.0 || scene.angle_deg.min_value() < -180.0) {
    throw std::invalid_argument("steering profile leaves [-180, 180] degrees");
  }
  if (scene.speed_kmh.min_value() < 0.0) throw std::invalid_argument("speed profile can become negative");
  if (scene.label_period_us <= 0) throw std::invalid_argument("label_period_us must be > 0");
  if (!(scene.background >= 0.0) || !(scene.foreground >= 0.0)) {
    throw std::invalid_argument("intensities must be non-negative");
  }
  for (const auto* p : {&scene.angle_deg, &scene.speed_kmh, &scene.jitter_px_s}) {
    for (const auto& c : p->components) {
      if (!(c.period_s > 0.0)) throw std::invalid_argument("profile periods must be > 0");
    }
  }
  if (scene.kind == SceneKind::TranslatingTexture) {
    const auto& tex = scene.texture;
    if (!(tex.period_px >= 1.0) || tex.bars < 0 || !(tex.min_width_px > 0.0) ||
        tex.max_width_px < tex.min_width_px || tex.max_width_px > tex.period_px) {
      throw std::invalid_argument("invalid texture parameters");
    }
  }
}

Micros SimConfig::sample_step_us() const { return std::max<Micros>(1, frame_period_us / 100); }

SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig c;
  c.width = j.value("width", kDefaultWidth);
  c.height = j.value("height", kDefaultHeight);
  c.duration_us = j.at("duration_us").get<Micros>();
  c.contrast_threshold = j.value("contrast_threshold", 0.2);
  c.frame_period_us = j.value("frame_period_us", Micros{50'000});
  c.noise_rate = j.value("noise_rate", 0.0);
  c.seed = j.value("seed", std::uint64_t{0});

  std::mt19937_64 rng(c.seed ^ 0x5ce9e5eedULL);
  const auto& s = j.contains("scene") ? j.at("scene") : nlohmann::json::object();
  SceneSpec& sc = c.scene;
  sc.kind = scene_kind_from_string(s.value("kind", std::string("translating_texture")));
  if (s.contains("angle")) sc.angle_deg = profile_from_json(s.at("angle"), rng);
  if (s.contains("speed")) sc.speed_kmh = profile_from_json(s.at("speed"), rng);
  if (s.contains("jitter")) sc.jitter_px_s = profile_from_json(s.at("jitter"), rng);
  sc.background = s.value("background", sc.background);
  sc.foreground = s.value("foreground", sc.foreground);
  sc.label_period_us = s.value("label_period_us", sc.label_period_us);
  sc.bar_velocity_px_s = s.value("bar_velocity_px_s", sc.bar_velocity_px_s);
  sc.bar_width_px = s.value("bar_width_px", sc.bar_width_px);
  sc.bar_x0_px = s.value("bar_x0_px", sc.bar_x0_px);
  sc.gain_px_per_deg_s = s.value("gain_px_per_deg_s", sc.gain_px_per_deg_s);
  sc.lead_us = s.value("lead_us", sc.lead_us);
  if (s.contains("texture")) {
    const auto& t = s.at("texture");
    auto& tex = sc.texture;
    tex.period_px = t.value("period_px", tex.period_px);
    tex.bars = t.value("bars", tex.bars);
    tex.min_width_px = t.value("min_width_px", tex.min_width_px);
    tex.max_width_px = t.value("max_width_px", tex.max_width_px);
    tex.min_height_frac = t.value("min_height_frac", tex.min_height_frac);
    tex.spread = t.value("spread", tex.spread);
  }
  sc.road_curvature_px_per_deg = s.value("road_curvature_px_per_deg", sc.road_curvature_px_per_deg);
  sc.road_half_width_frac = s.value("road_half_width_frac", sc.road_half_width_frac);
  sc.road_dash_length_m = s.value("road_dash_length_m", sc.road_dash_length_m);
  c.validate();
  return c;
}

nlohmann::json sim_config_to_json(const SimConfig& c) {
  const auto& sc = c.scene;
  nlohmann::json scene = {
      {"kind", to_string(sc.kind)},
      {"angle", profile_to_json(sc.angle_deg)},
      {"speed", profile_to_json(sc.speed_kmh)},
      {"jitter", profile_to_json(sc.jitter_px_s)},
      {"background", sc.background},
      {"foreground", sc.foreground},
      {"label_period_us", sc.label_period_us},
      {"bar_velocity_px_s", sc.bar_velocity_px_s},
      {"bar_width_px", sc.bar_width_px},
      {"bar_x0_px", sc.bar_x0_px},
      {"gain_px_per_deg_s", sc.gain_px_per_deg_s},
      {"lead_us", sc.lead_us},
      {"texture",
       {{"period_px", sc.texture.period_px},
        {"bars", sc.texture.bars},
        {"min_width_px", sc.texture.min_width_px},
        {"max_width_px", sc.texture.max_width_px},
        {"min_height_frac", sc.texture.min_height_frac},
        {"spread", sc.texture.spread}}},
      {"road_curvature_px_per_deg", sc.road_curvature_px_per_deg},
      {"road_half_width_frac", sc.road_half_width_frac},
      {"road_dash_length_m", sc.road_dash_length_m},
  };
  return {{"width", c.width},
          {"height", c.height},
          {"duration_us", c.duration_us},
          {"contrast_threshold", c.contrast_threshold},
          {"frame_period_us", c.frame_period_us},
          {"noise_rate", c.noise_rate},
          {"seed", c.seed},
          {"scene", scene}};
}

// --- Scene ------------------------------------------------------------------

Scene::Scene(SceneSpec spec, int width, int height, std::uint64_t seed)
    : spec_(std::move(spec)), width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("scene dimensions must be positive");
  if (spec_.kind != SceneKind::TranslatingTexture) return;

  const auto& tex = spec_.texture;
  tex_samples_ = static_cast<std::size_t>(std::lround(tex.period_px * kTexRes));
  std::vector<std::vector<double>> level(height_, std::vector<double>(tex_samples_, spec_.background));
  std::mt19937_64 rng(seed ^ 0x7e47u);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int b = 0; b < tex.bars; ++b) {
    const double w = tex.min_width_px + (tex.max_width_px - tex.min_width_px) * unit(rng);
    const auto start = static_cast<std::size_t>(unit(rng) * static_cast<double>(tex_samples_));
    const auto len = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(w * kTexRes)));
    const double hfrac = tex.min_height_frac + (1.0 - tex.min_height_frac) * unit(rng);
    const int h = std::max(1, static_cast<int>(std::lround(hfrac * height_)));
    const int y0 = static_cast<int>(unit(rng) * (height_ - h + 1));
    const double value = spec_.foreground * (1.0 - tex.spread * unit(rng));
    for (int y = y0; y < std::min(height_, y0 + h); ++y) {
      for (std::size_t k = 0; k < len; ++k) {
        auto& cell = level[y][(start + k) % tex_samples_];
        cell = std::max(cell, value);
      }
    }
  }
  row_integral_.assign(height_, std::vector<double>(tex_samples_ + 1, 0.0));
  for (int y = 0; y < height_; ++y) {
    for (std::size_t k = 0; k < tex_samples_; ++k) {
      row_integral_[y][k + 1] = row_integral_[y][k] + level[y][k] / kTexRes;
    }
  }
}

double Scene::displacement_px(Micros t) const {
  switch (spec_.kind) {
    case SceneKind::TranslatingBar:
      return spec_.bar_velocity_px_s * seconds(t);
    case SceneKind::TranslatingTexture:
      return spec_.gain_px_per_deg_s * spec_.angle_deg.integral(spec_.lead_us, t + spec_.lead_us) +
             spec_.jitter_px_s.integral(0, t);
    case SceneKind::TurningRoad:
      return 0.0;
  }
  return 0.0;
}

Image Scene::render(Micros t) const {
  Image img(width_, height_);
  render_into(t, img);
  return img;
}

void Scene::render_into(Micros t, Image& out) const {
  if (out.width != width_ || out.height != height_) out = Image(width_, height_);
  switch (spec_.kind) {
    case SceneKind::TranslatingBar:
      render_bar(t, out);
      break;
    case SceneKind::TranslatingTexture:
      render_texture(t, out);
      break;
    case SceneKind::TurningRoad:
      render_road(t, out);
      break;
  }
}

void Scene::render_bar(Micros t, Image& out) const {
  const double left = spec_.bar_x0_px + displacement_px(t);
  const double right = left + spec_.bar_width_px;
  const double contrast = spec_.foreground - spec_.background;
  for (int x = 0; x < width_; ++x) {
    const double v = spec_.background + contrast * overlap(x, x + 1.0, left, right);
    for (int y = 0; y < height_; ++y) out.at(x, y) = v;
  }
}

void Scene::render_texture(Micros t, Image& out) const {
  const double period = spec_.texture.period_px;
  const double d = displacement_px(t);
  // Cumulative integral of the periodic texture at texture coordinate u.
  auto cumulative = [&](const std::vector<double>& row, double u) {
    const double wraps = std::floor(u / period);
    const double pos = (u - wraps * period) * kTexRes;
    auto k = static_cast<std::size_t>(pos);
    if (k >= tex_samples_) k = tex_samples_ - 1;
    const double frac = pos - static_cast<double>(k);
    const double within = row[k] + frac * (row[k + 1] - row[k]);
    return wraps * row[tex_samples_] + within;
  };
  for (int y = 0; y < height_; ++y) {
    const auto& row = row_integral_[y];
    double prev = cumulative(row, -d);
    for (int x = 0; x < width_; ++x) {
      const double next = cumulative(row, x + 1.0 - d);
      out.at(x, y) = next - prev;
      prev = next;
    }
  }
}

void Scene::render_road(Micros t, Image& out) const {
  const double horizon = 0.4 * height_;
  const double center0 = 0.5 * width_;
  const double alpha = spec_.angle_deg.value(t);
  const double travelled_m = spec_.speed_kmh.integral(0, t) / 3.6;
  const double sky = std::min(255.0, spec_.foreground * 1.2);
  for (int y = 0; y < height_; ++y) {
    const double yc = y + 0.5;
    if (yc <= horizon) {
      for (int x = 0; x < width_; ++x) out.at(x, y) = sky;
      continue;
    }
    const double s = (yc - horizon) / (height_ - horizon);
    const double bend = spec_.road_curvature_px_per_deg * alpha * (1.0 - s) * (1.0 - s);
    const double center = center0 + bend;
    const double half = spec_.road_half_width_frac * width_ * s;
    const double line_w = std::max(0.5, 2.0 * s);
    const double depth = 1.0 / s;
    const double dash = 0.5 + 0.5 * std::sin(kTwoPi * (2.0 * depth + travelled_m / spec_.road_dash_length_m));
    for (int x = 0; x < width_; ++x) {
      const double x0 = x;
      const double x1 = x + 1.0;
      double v = spec_.background;
      for (double c : {center - half, center + half}) {
        v += (spec_.foreground - spec_.background) * overlap(x0, x1, c - 0.5 * line_w, c + 0.5 * line_w);
      }
      v += (spec_.foreground - spec_.background) * dash *
           overlap(x0, x1, center - 0.25 * line_w, center + 0.25 * line_w);
      out.at(x, y) = v;
    }
  }
}

Image render_brightness(const Scene& scene, Micros t) { return scene.render(t); }

// --- Event generation ---------------------------------------------------------

EventStream generate_events(const BrightnessFn& brightness, const SimConfig& config) {
  config.validate();
  const int w = config.width;
  const int h = config.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  const double c = config.contrast_threshold;
  const Micros step = config.sample_step_us();
  const Micros fp = config.frame_period_us;

  Image img(w, h);
  brightness(0, img);
  std::vector<double> ref(n);
  std::vector<double> prev(n);
  for (std::size_t i = 0; i < n; ++i) {
    ref[i] = prev[i] = std::log(img.values[i] + 1.0);
  }

  struct Pending {
    Micros t;
    std::uint32_t pixel;
    std::int8_t p;
  };
  std::vector<Event> events;
  std::vector<Pending> pending;
  Micros t_prev = 0;
  while (t_prev < config.duration_us) {
    // Grid = multiples of the sampling step plus every frame timestamp.
    const Micros t = std::min({(t_prev / step + 1) * step, (t_prev / fp + 1) * fp, config.duration_us});
    const double dt = static_cast<double>(t - t_prev);
    brightness(t, img);
    pending.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const double cur = std::log(img.values[i] + 1.0);
      const double before = prev[i];
      double& r = ref[i];
      while (cur - r >= c) {
        r += c;
        const double tau = static_cast<double>(t_prev) + (r - before) / (cur - before) * dt;
        pending.push_back({static_cast<Micros>(std::floor(tau)), static_cast<std::uint32_t>(i), 1});
      }
      while (r - cur >= c) {
        r -= c;
        const double tau = static_cast<double>(t_prev) + (r - before) / (cur - before) * dt;
        pending.push_back({static_cast<Micros>(std::floor(tau)), static_cast<std::uint32_t>(i), -1});
      }
      prev[i] = cur;
    }
    std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) { return a.t < b.t; });
    for (const auto& e : pending) {
      events.push_back({std::clamp(e.t, t_prev, t), static_cast<std::uint16_t>(e.pixel % w),
                        static_cast<std::uint16_t>(e.pixel / w), e.p});
    }
    t_prev = t;
  }

  if (config.noise_rate > 0.0) {
    std::mt19937_64 rng(config.seed ^ 0x9015eULL);
    const double mean = config.noise_rate * static_cast<double>(n) * seconds(config.duration_us);
    std::poisson_distribution<std::uint64_t> count_dist(mean);
    const auto count = count_dist(rng);
    std::uniform_int_distribution<Micros> t_dist(0, config.duration_us - 1);
    std::uniform_int_distribution<int> x_dist(0, w - 1);
    std::uniform_int_distribution<int> y_dist(0, h - 1);
    std::bernoulli_distribution pol(0.5);
    std::vector<Event> noise(count);
    for (auto& e : noise) {
      e.t = t_dist(rng);
      e.x = static_cast<std::uint16_t>(x_dist(rng));
      e.y = static_cast<std::uint16_t>(y_dist(rng));
      e.p = pol(rng) ? 1 : -1;
    }
    std::stable_sort(noise.begin(), noise.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
    std::vector<Event> merged;
    merged.reserve(events.size() + noise.size());
    std::merge(events.begin(), events.end(), noise.begin(), noise.end(), std::back_inserter(merged),
               [](const Event& a, const Event& b) { return a.t < b.t; });
    events = std::move(merged);
  }
  return EventStream(w, h, std::move(events));
}

LabeledRecording generate_recording(const SimConfig& config) {
  config.validate();
  Scene scene(config.scene, config.width, config.height, config.seed);
  LabeledRecording rec;
  rec.duration_us = config.duration_us;
  rec.events = generate_events([&](Micros t, Image& img) { scene.render_into(t, img); }, config);
  for (Micros t = 0; t < config.duration_us; t += config.frame_period_us) {
    rec.gray_frames.push_back({t, scene.render(t)});
  }
  for (Micros t = 0; t < config.duration_us; t += config.scene.label_period_us) {
    rec.labels.push_back({t, config.scene.angle_deg.value(t), config.scene.speed_kmh.value(t)});
  }
  return rec;
}

}  // namespace evsteer

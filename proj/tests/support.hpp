#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "evsteer/events.hpp"

namespace testing_support {

using Rng = std::mt19937_64;

/// Valid stream with random size, geometry, timestamps and polarities.
inline evsteer::EventStream random_stream(Rng& rng, std::size_t max_events = 200, int max_dim = 64) {
  std::uniform_int_distribution<int> dim(1, max_dim);
  const int w = dim(rng);
  const int h = dim(rng);
  std::uniform_int_distribution<std::size_t> count(0, max_events);
  std::uniform_int_distribution<int> gap(0, 50);
  std::uniform_int_distribution<int> xs(0, w - 1);
  std::uniform_int_distribution<int> ys(0, h - 1);
  std::bernoulli_distribution pol(0.5);
  std::vector<evsteer::Event> events(count(rng));
  evsteer::Micros t = std::uniform_int_distribution<evsteer::Micros>(0, 1000)(rng);
  for (auto& e : events) {
    t += gap(rng);
    e = {t, static_cast<std::uint16_t>(xs(rng)), static_cast<std::uint16_t>(ys(rng)),
         static_cast<std::int8_t>(pol(rng) ? 1 : -1)};
  }
  return evsteer::EventStream(w, h, std::move(events));
}

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("evsteer_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support

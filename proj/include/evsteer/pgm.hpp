#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "evsteer/events.hpp"
#include "evsteer/image.hpp"

namespace evsteer {

/// Binary (P5) 8-bit PGM. Values are rounded and clamped to [0, 255]. When
/// `t_us` is set it is stored as a "# t_us=<n>" comment line.
void write_pgm8(const std::string& path, const Image& image, std::optional<Micros> t_us = {});

/// Binary (P5) 16-bit PGM, big-endian samples as the format requires.
void write_pgm16(const std::string& path, int width, int height, std::span<const std::uint16_t> values);

struct PgmImage {
  Image image;
  int maxval = 255;
  std::optional<Micros> t_us;
};

/// Reads 8- or 16-bit binary PGM. Throws std::runtime_error on malformed input.
PgmImage read_pgm(const std::string& path);

}  // namespace evsteer

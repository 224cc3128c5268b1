#include "evsteer/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace evsteer {

void write_pgm8(const std::string& path, const Image& image, std::optional<Micros> t_us) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n";
  if (t_us) out << "# t_us=" << *t_us << "\n";
  out << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> bytes(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::clamp(std::lround(image.values[i]), 0L, 255L));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_pgm16(const std::string& path, int width, int height, std::span<const std::uint16_t> values) {
  if (values.size() != static_cast<std::size_t>(width) * height) {
    throw std::invalid_argument("pgm16: value count does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << width << " " << height << "\n65535\n";
  std::vector<unsigned char> bytes;
  bytes.reserve(values.size() * 2);
  for (auto v : values) {
    bytes.push_back(static_cast<unsigned char>(v >> 8));
    bytes.push_back(static_cast<unsigned char>(v & 0xFF));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

PgmImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  PgmImage result;
  // Header tokens separated by whitespace, with '#' comments.
  auto next_token = [&]() -> std::string {
    std::string tok;
    while (true) {
      int c = in.peek();
      if (c == EOF) break;
      if (c == '#') {
        std::string line;
        std::getline(in, line);
        if (line.rfind("# t_us=", 0) == 0) {
          result.t_us = std::stoll(line.substr(7));
        }
        continue;
      }
      if (std::isspace(c)) {
        in.get();
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(static_cast<char>(in.get()));
    }
    return tok;
  };
  if (next_token() != "P5") throw std::runtime_error(path + ": not a binary PGM");
  int width = 0;
  int height = 0;
  int maxval = 0;
  try {
    width = std::stoi(next_token());
    height = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw std::runtime_error(path + ": malformed PGM header");
  }
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw std::runtime_error(path + ": invalid PGM dimensions");
  }
  result.maxval = maxval;
  result.image = Image(width, height);
  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(result.image.size() * bytes_per);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw std::runtime_error(path + ": truncated PGM");
  for (std::size_t i = 0; i < result.image.size(); ++i) {
    result.image.values[i] = bytes_per == 1 ? raw[i] : (raw[2 * i] << 8 | raw[2 * i + 1]);
  }
  return result;
}

}  // namespace evsteer

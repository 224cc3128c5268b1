#include "evsteer/recording_io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "evsteer/pgm.hpp"

namespace evsteer {

namespace fs = std::filesystem;

namespace {

std::string frame_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.pgm", k);
  return buf;
}

}  // namespace

void write_labels_csv(const std::string& path, std::span<const LabelRecord> labels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "t_us,angle_deg,speed_kmh\n";
  for (const auto& l : labels) out << l.t << ',' << l.angle_deg << ',' << l.speed_kmh << '\n';
}

std::vector<LabelRecord> read_labels_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty label file");
  std::vector<LabelRecord> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    LabelRecord r;
    char c1 = 0, c2 = 0;
    std::istringstream ss(line);
    if (!(ss >> r.t >> c1 >> r.angle_deg >> c2 >> r.speed_kmh) || c1 != ',' || c2 != ',') {
      throw std::runtime_error(path + ": malformed label at line " + std::to_string(line_no));
    }
    if (!labels.empty() && r.t < labels.back().t) {
      throw std::runtime_error(path + ": labels not time-sorted at line " + std::to_string(line_no));
    }
    labels.push_back(r);
  }
  return labels;
}

std::vector<GrayFrame> read_gray_frames(const std::string& frames_dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(frames_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<GrayFrame> frames;
  frames.reserve(files.size());
  for (const auto& f : files) {
    auto pgm = read_pgm(f.string());
    if (!pgm.t_us) throw std::runtime_error(f.string() + ": missing t_us comment");
    if (pgm.maxval != 255) throw std::runtime_error(f.string() + ": gray frames must be 8-bit");
    if (!frames.empty() && *pgm.t_us <= frames.back().t) {
      throw std::runtime_error(f.string() + ": frame timestamps must increase");
    }
    frames.push_back({*pgm.t_us, std::move(pgm.image)});
  }
  return frames;
}

void write_recording(const LabeledRecording& rec, const std::string& dir, const std::optional<SimConfig>& config) {
  fs::create_directories(fs::path(dir) / "frames");
  write_events_file(rec.events, (fs::path(dir) / "events.evt1").string());
  for (std::size_t k = 0; k < rec.gray_frames.size(); ++k) {
    write_pgm8((fs::path(dir) / "frames" / frame_name(k)).string(), rec.gray_frames[k].image, rec.gray_frames[k].t);
  }
  write_labels_csv((fs::path(dir) / "labels.csv").string(), rec.labels);
  {
    std::ofstream out(fs::path(dir) / "recording.json");
    out << nlohmann::json{{"duration_us", rec.duration_us}}.dump(2) << '\n';
  }
  if (config) {
    std::ofstream out(fs::path(dir) / "sim_config.json");
    out << sim_config_to_json(*config).dump(2) << '\n';
  }
}

LabeledRecording read_recording(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw std::runtime_error(dir + ": not a directory");
  LabeledRecording rec{0, read_events_file((root / "events.evt1").string()), {}, {}};
  if (fs::is_directory(root / "frames")) rec.gray_frames = read_gray_frames((root / "frames").string());
  rec.labels = read_labels_csv((root / "labels.csv").string());

  Micros duration = 0;
  if (fs::exists(root / "recording.json")) {
    std::ifstream in(root / "recording.json");
    try {
      duration = nlohmann::json::parse(in).at("duration_us").get<Micros>();
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(dir + "/recording.json: " + e.what());
    }
  } else {
    if (!rec.events.empty()) duration = std::max(duration, rec.events.events().back().t + 1);
    if (!rec.gray_frames.empty()) duration = std::max(duration, rec.gray_frames.back().t + 1);
    if (!rec.labels.empty()) duration = std::max(duration, rec.labels.back().t + 1);
  }
  if (duration <= 0) throw std::runtime_error(dir + ": recording has no duration");
  rec.duration_us = duration;
  return rec;
}

}  // namespace evsteer

#pragma once

#include <optional>
#include <string>

#include "evsteer/event_sim.hpp"

namespace evsteer {

/// Recording directory layout:
///   events.evt1           event stream
///   frames/NNNNNN.pgm     8-bit gray frames, timestamp in a "# t_us=" comment
///   labels.csv            t_us,angle_deg,speed_kmh
///   recording.json        {"duration_us": ...}
///   sim_config.json       optional, the generating configuration
void write_recording(const LabeledRecording& rec, const std::string& dir,
                     const std::optional<SimConfig>& config = std::nullopt);

/// Reads a recording directory. Missing frames/ yields no gray frames.
/// Throws std::runtime_error (or StreamError) on missing or malformed files.
LabeledRecording read_recording(const std::string& dir);

void write_labels_csv(const std::string& path, std::span<const LabelRecord> labels);
std::vector<LabelRecord> read_labels_csv(const std::string& path);

/// Gray frames from a frames/ directory, sorted by file name.
std::vector<GrayFrame> read_gray_frames(const std::string& frames_dir);

}  // namespace evsteer

#include "evsteer/events.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

namespace evsteer {

namespace {

std::string describe(ViolationKind kind, std::size_t index) {
  switch (kind) {
    case ViolationKind::InvalidPolarity:
      return "invalid polarity at record " + std::to_string(index);
    case ViolationKind::OutOfBounds:
      return "coordinate out of bounds at record " + std::to_string(index);
    case ViolationKind::NonMonotone:
      return "non-monotone at index " + std::to_string(index);
    case ViolationKind::NegativeTimestamp:
      return "negative timestamp at record " + std::to_string(index);
  }
  return "invalid event at record " + std::to_string(index);
}

StreamErrorKind to_error_kind(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::InvalidPolarity:
      return StreamErrorKind::InvalidPolarity;
    case ViolationKind::OutOfBounds:
      return StreamErrorKind::OutOfBounds;
    case ViolationKind::NonMonotone:
      return StreamErrorKind::NonMonotone;
    case ViolationKind::NegativeTimestamp:
      return StreamErrorKind::NegativeTimestamp;
  }
  return StreamErrorKind::Malformed;
}

template <typename T>
void put_le(std::vector<std::byte>& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::byte>((u >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(const std::byte* p) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    u |= static_cast<U>(std::to_integer<U>(p[i]) << (8 * i));
  }
  return static_cast<T>(u);
}

void throw_first(const std::vector<Violation>& violations) {
  if (!violations.empty()) {
    const auto& v = violations.front();
    throw StreamError(to_error_kind(v.kind), v.message, v.index);
  }
}

EventStream read_binary(std::span<const std::byte> bytes) {
  if (bytes.size() < kEvt1HeaderSize) {
    throw StreamError(StreamErrorKind::Truncated, "EVT1 header truncated");
  }
  if (std::memcmp(bytes.data(), "EVT1", 4) != 0) {
    throw StreamError(StreamErrorKind::BadMagic, "magic header mismatch (expected EVT1)");
  }
  const int width = get_le<std::uint16_t>(bytes.data() + 4);
  const int height = get_le<std::uint16_t>(bytes.data() + 6);
  const auto count = get_le<std::uint64_t>(bytes.data() + 8);
  if (width == 0 || height == 0) {
    throw StreamError(StreamErrorKind::BadHeader, "EVT1 header has zero resolution");
  }
  const std::size_t payload = bytes.size() - kEvt1HeaderSize;
  if (payload % kEvt1RecordSize != 0 || payload / kEvt1RecordSize != count) {
    const std::size_t whole = payload / kEvt1RecordSize;
    throw StreamError(StreamErrorKind::Truncated,
                      "record count " + std::to_string(count) + " does not match payload (" +
                          std::to_string(payload) + " bytes) at record " + std::to_string(whole),
                      whole);
  }
  std::vector<Event> events;
  events.reserve(count);
  const std::byte* p = bytes.data() + kEvt1HeaderSize;
  for (std::size_t i = 0; i < count; ++i, p += kEvt1RecordSize) {
    const auto t = get_le<std::uint64_t>(p);
    if (t > static_cast<std::uint64_t>(std::numeric_limits<Micros>::max())) {
      throw StreamError(StreamErrorKind::Malformed, "timestamp overflow at record " + std::to_string(i), i);
    }
    Event e;
    e.t = static_cast<Micros>(t);
    e.x = get_le<std::uint16_t>(p + 8);
    e.y = get_le<std::uint16_t>(p + 10);
    e.p = get_le<std::int8_t>(p + 12);
    events.push_back(e);
  }
  return EventStream(width, height, std::move(events));
}

template <typename T>
bool parse_field(std::string_view field, T& out) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
    field.remove_suffix(1);
  }
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return ec == std::errc() && ptr == end && !field.empty();
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

EventStream read_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find('\n', start);
    auto line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) {
    throw StreamError(StreamErrorKind::BadHeader, "missing width,height header line");
  }
  auto header = split_commas(lines.front());
  int width = 0;
  int height = 0;
  if (header.size() != 2 || !parse_field(header[0], width) || !parse_field(header[1], height) ||
      width <= 0 || height <= 0 || width > 65535 || height > 65535) {
    throw StreamError(StreamErrorKind::BadHeader, "malformed width,height header line");
  }
  std::vector<Event> events;
  events.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t record = i - 1;
    auto fields = split_commas(lines[i]);
    Micros t = 0;
    long x = 0;
    long y = 0;
    int p = 0;
    if (fields.size() != 4 || !parse_field(fields[0], t) || !parse_field(fields[1], x) ||
        !parse_field(fields[2], y) || !parse_field(fields[3], p)) {
      throw StreamError(StreamErrorKind::Malformed, "malformed record " + std::to_string(record), record);
    }
    if (p != 1 && p != -1) {
      throw StreamError(StreamErrorKind::InvalidPolarity, describe(ViolationKind::InvalidPolarity, record),
                        record);
    }
    if (x < 0 || y < 0 || x >= width || y >= height) {
      throw StreamError(StreamErrorKind::OutOfBounds, describe(ViolationKind::OutOfBounds, record), record);
    }
    events.push_back(Event{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                           static_cast<std::int8_t>(p)});
  }
  return EventStream(width, height, std::move(events));
}

}  // namespace

std::vector<Violation> validate_stream(int width, int height, std::span<const Event> events) {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    auto add = [&](ViolationKind kind) { out.push_back({i, kind, describe(kind, i)}); };
    if (e.p != 1 && e.p != -1) add(ViolationKind::InvalidPolarity);
    if (e.x >= width || e.y >= height) add(ViolationKind::OutOfBounds);
    if (e.t < 0) add(ViolationKind::NegativeTimestamp);
    if (i > 0 && e.t < events[i - 1].t) add(ViolationKind::NonMonotone);
  }
  return out;
}

EventStream::EventStream(int width, int height, std::vector<Event> events)
    : width_(width), height_(height), events_(std::move(events)) {
  if (width <= 0 || height <= 0 || width > 65535 || height > 65535) {
    throw StreamError(StreamErrorKind::BadHeader, "stream resolution must be in [1, 65535]");
  }
  throw_first(validate_stream(width_, height_, events_));
}

std::span<const Event> EventStream::slice(Micros t_begin, Micros t_end) const {
  auto by_time = [](const Event& e, Micros t) { return e.t < t; };
  auto lo = std::lower_bound(events_.begin(), events_.end(), t_begin, by_time);
  auto hi = std::lower_bound(lo, events_.end(), t_end, by_time);
  return {lo, hi};
}

WindowRange::WindowRange(const EventStream& stream, Micros duration, Micros stride)
    : stream_(&stream), duration_(duration), stride_(stride) {
  if (duration <= 0 || stride <= 0) {
    throw std::invalid_argument("window duration and stride must be positive");
  }
  if (!stream.empty()) {
    first_t_ = stream.events().front().t;
    const Micros span = stream.events().back().t - first_t_ + 1;
    count_ = static_cast<std::size_t>((span + stride_ - 1) / stride_);
  }
}

WindowSlice WindowRange::at(std::size_t index) const {
  Window w{first_t_ + static_cast<Micros>(index) * stride_, duration_};
  return {w, stream_->slice(w.t_start, w.t_end())};
}

WindowRange window_iter(const EventStream& stream, Micros duration, Micros stride) {
  return WindowRange(stream, duration, stride == 0 ? duration : stride);
}

EventStream read_events(std::span<const std::byte> bytes, EventFormat format) {
  if (format == EventFormat::Binary) return read_binary(bytes);
  return read_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

EventStream read_events(std::string_view text, EventFormat format) {
  if (format == EventFormat::Csv) return read_csv(text);
  return read_binary(std::as_bytes(std::span(text.data(), text.size())));
}

std::vector<std::byte> write_events(const EventStream& stream, EventFormat format) {
  std::vector<std::byte> out;
  if (format == EventFormat::Binary) {
    out.reserve(kEvt1HeaderSize + stream.size() * kEvt1RecordSize);
    for (char c : std::string_view("EVT1")) out.push_back(static_cast<std::byte>(c));
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(stream.width()));
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(stream.height()));
    put_le<std::uint64_t>(out, stream.size());
    for (const Event& e : stream.events()) {
      put_le<std::uint64_t>(out, static_cast<std::uint64_t>(e.t));
      put_le<std::uint16_t>(out, e.x);
      put_le<std::uint16_t>(out, e.y);
      put_le<std::int8_t>(out, e.p);
    }
    return out;
  }
  std::string text = std::to_string(stream.width()) + "," + std::to_string(stream.height()) + "\n";
  text.reserve(text.size() + stream.size() * 20);
  for (const Event& e : stream.events()) {
    text += std::to_string(e.t);
    text += ',';
    text += std::to_string(e.x);
    text += ',';
    text += std::to_string(e.y);
    text += ',';
    text += std::to_string(static_cast<int>(e.p));
    text += '\n';
  }
  auto bytes = std::as_bytes(std::span(text.data(), text.size()));
  out.assign(bytes.begin(), bytes.end());
  return out;
}

EventFormat format_for_path(std::string_view path) {
  return path.ends_with(".csv") ? EventFormat::Csv : EventFormat::Binary;
}

EventStream read_events_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return read_events(std::as_bytes(std::span(raw.data(), raw.size())), format_for_path(path));
}

void write_events_file(const EventStream& stream, const std::string& path) {
  auto bytes = write_events(stream, format_for_path(path));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace evsteer

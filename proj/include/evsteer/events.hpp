#pragma once

#include <cstddef>
#include <cstdint>
#include <iterator>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evsteer {

/// Timestamps are integer microseconds throughout the library.
using Micros = std::int64_t;

inline constexpr int kDefaultWidth = 346;
inline constexpr int kDefaultHeight = 260;

/// One asynchronous brightness-change report.
struct Event {
  Micros t = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t p = 1;  // -1 or +1

  friend bool operator==(const Event&, const Event&) = default;
};

enum class ViolationKind {
  InvalidPolarity,
  OutOfBounds,
  NonMonotone,
  NegativeTimestamp,
};

struct Violation {
  std::size_t index = 0;
  ViolationKind kind{};
  std::string message;
};

/// Checks every stream invariant and returns one entry per offending event.
/// An empty result means the sequence is a valid stream.
std::vector<Violation> validate_stream(int width, int height, std::span<const Event> events);

enum class StreamErrorKind {
  BadMagic,
  Truncated,
  Malformed,
  InvalidPolarity,
  OutOfBounds,
  NonMonotone,
  NegativeTimestamp,
  BadHeader,
};

/// Raised by the readers and by EventStream construction. `record()` names the
/// offending record (0-based, header excluded) when one exists.
class StreamError : public std::runtime_error {
 public:
  StreamError(StreamErrorKind kind, std::string message, std::optional<std::size_t> record = {})
      : std::runtime_error(std::move(message)), kind_(kind), record_(record) {}

  StreamErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> record() const noexcept { return record_; }

 private:
  StreamErrorKind kind_;
  std::optional<std::size_t> record_;
};

/// Validated, immutable sequence of events on a fixed sensor array.
class EventStream {
 public:
  EventStream() = default;
  /// Throws StreamError on the first invariant violation.
  EventStream(int width, int height, std::vector<Event> events);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::span<const Event> events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }

  /// Events with t in [t_begin, t_end).
  std::span<const Event> slice(Micros t_begin, Micros t_end) const;

  friend bool operator==(const EventStream&, const EventStream&) = default;

 private:
  int width_ = kDefaultWidth;
  int height_ = kDefaultHeight;
  std::vector<Event> events_;
};

/// Half-open interval [t_start, t_start + duration).
struct Window {
  Micros t_start = 0;
  Micros duration = 1;

  Micros t_end() const noexcept { return t_start + duration; }
  bool contains(Micros t) const noexcept { return t >= t_start && t < t_end(); }
  friend bool operator==(const Window&, const Window&) = default;
};

struct WindowSlice {
  Window window;
  std::span<const Event> events;
};

/// Lazy sequence of windows over a stream. Windows start at the first event
/// timestamp and advance by `stride` while t_start <= last timestamp; the
/// trailing window may be only partly covered by data.
class WindowRange {
 public:
  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = WindowSlice;
    using difference_type = std::ptrdiff_t;

    iterator() = default;
    iterator(const WindowRange* range, std::size_t index) : range_(range), index_(index) {}

    WindowSlice operator*() const { return range_->at(index_); }
    iterator& operator++() {
      ++index_;
      return *this;
    }
    iterator operator++(int) {
      auto copy = *this;
      ++index_;
      return copy;
    }
    friend bool operator==(const iterator& a, const iterator& b) { return a.index_ == b.index_; }

   private:
    const WindowRange* range_ = nullptr;
    std::size_t index_ = 0;
  };

  WindowRange(const EventStream& stream, Micros duration, Micros stride);

  std::size_t size() const noexcept { return count_; }
  WindowSlice at(std::size_t index) const;
  iterator begin() const { return {this, 0}; }
  iterator end() const { return {this, count_}; }

 private:
  const EventStream* stream_;
  Micros duration_;
  Micros stride_;
  Micros first_t_ = 0;
  std::size_t count_ = 0;
};

/// Throws std::invalid_argument unless duration and stride are positive.
/// A stride of 0 selects stride = duration.
WindowRange window_iter(const EventStream& stream, Micros duration, Micros stride = 0);

enum class EventFormat { Binary, Csv };

/// EVT1 binary layout: "EVT1", u16 width, u16 height, u64 count, then
/// 13-byte records (u64 t, u16 x, u16 y, i8 p), all little-endian.
inline constexpr std::size_t kEvt1HeaderSize = 16;
inline constexpr std::size_t kEvt1RecordSize = 13;

EventStream read_events(std::span<const std::byte> bytes, EventFormat format);
EventStream read_events(std::string_view text, EventFormat format);
std::vector<std::byte> write_events(const EventStream& stream, EventFormat format);

EventStream read_events_file(const std::string& path);
void write_events_file(const EventStream& stream, const std::string& path);

/// Picks the format from the file extension: ".csv" is CSV, anything else EVT1.
EventFormat format_for_path(std::string_view path);

}  // namespace evsteer

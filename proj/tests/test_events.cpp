#include <doctest.h>

#include <cstring>

#include "evsteer/events.hpp"
#include "support.hpp"

using namespace evsteer;
using testing_support::random_stream;
using testing_support::Rng;

namespace {

std::vector<std::byte> as_bytes(const std::vector<std::uint8_t>& raw) {
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

std::vector<Event> ts_events(std::initializer_list<Micros> ts) {
  std::vector<Event> out;
  for (auto t : ts) out.push_back({t, 0, 0, 1});
  return out;
}

template <typename F>
StreamError capture(F&& f) {
  try {
    f();
  } catch (const StreamError& e) {
    return e;
  }
  FAIL("expected StreamError");
  return StreamError(StreamErrorKind::Malformed, "");
}

}  // namespace

TEST_CASE("csv parse of two events") {
  auto s = read_events(std::string_view("8,8\n10,5,5,1\n20,2,3,-1"), EventFormat::Csv);
  CHECK(s.width() == 8);
  CHECK(s.height() == 8);
  REQUIRE(s.size() == 2);
  CHECK(s.events()[0].t == 10);
  CHECK(s.events()[1].t == 20);
  CHECK(s.events()[1].x == 2);
  CHECK(s.events()[1].y == 3);
  CHECK(s.events()[1].p == -1);
}

TEST_CASE("header only yields empty stream") {
  CHECK(read_events(std::string_view("8,8\n"), EventFormat::Csv).empty());
  std::vector<std::uint8_t> raw = {'E', 'V', 'T', '1', 4, 0, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  auto s = read_events(as_bytes(raw), EventFormat::Binary);
  CHECK(s.empty());
  CHECK(s.width() == 4);
  CHECK(s.height() == 3);
}

TEST_CASE("csv errors name the record") {
  auto e = capture([] { read_events(std::string_view("8,8\n10,5,5,0"), EventFormat::Csv); });
  CHECK(e.kind() == StreamErrorKind::InvalidPolarity);
  CHECK(std::string(e.what()) == "invalid polarity at record 0");
  CHECK(e.record() == 0u);

  e = capture([] { read_events(std::string_view("8,8\n1,1,1,1\n2,8,1,1"), EventFormat::Csv); });
  CHECK(e.kind() == StreamErrorKind::OutOfBounds);
  CHECK(e.record() == 1u);

  e = capture([] { read_events(std::string_view("8,8\n10,1,1,1\n5,1,1,1"), EventFormat::Csv); });
  CHECK(e.kind() == StreamErrorKind::NonMonotone);
  CHECK(e.record() == 1u);

  e = capture([] { read_events(std::string_view("8,8\n10,1,x,1"), EventFormat::Csv); });
  CHECK(e.kind() == StreamErrorKind::Malformed);

  e = capture([] { read_events(std::string_view("8\n"), EventFormat::Csv); });
  CHECK(e.kind() == StreamErrorKind::BadHeader);
  e = capture([] { read_events(std::string_view(""), EventFormat::Csv); });
  CHECK(e.kind() == StreamErrorKind::BadHeader);
}

TEST_CASE("binary errors") {
  std::vector<std::uint8_t> raw = {'E', 'V', 'T', '2', 4, 0, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  CHECK(capture([&] { read_events(as_bytes(raw), EventFormat::Binary); }).kind() == StreamErrorKind::BadMagic);

  raw[3] = '1';
  raw[8] = 1;  // claims one record, none present
  CHECK(capture([&] { read_events(as_bytes(raw), EventFormat::Binary); }).kind() == StreamErrorKind::Truncated);

  std::vector<std::uint8_t> shortheader = {'E', 'V', 'T'};
  CHECK(capture([&] { read_events(as_bytes(shortheader), EventFormat::Binary); }).kind() ==
        StreamErrorKind::Truncated);

  // one record with p = 0
  std::vector<std::uint8_t> rec = raw;
  for (int i = 0; i < 13; ++i) rec.push_back(0);
  auto e = capture([&] { read_events(as_bytes(rec), EventFormat::Binary); });
  CHECK(e.kind() == StreamErrorKind::InvalidPolarity);
  CHECK(e.record() == 0u);
}

TEST_CASE("binary layout is header plus 13 bytes per record") {
  EventStream s(8, 8, {{10, 5, 5, 1}, {20, 2, 3, -1}});
  auto bytes = write_events(s, EventFormat::Binary);
  REQUIRE(bytes.size() == kEvt1HeaderSize + 2 * kEvt1RecordSize);
  CHECK(std::memcmp(bytes.data(), "EVT1", 4) == 0);
  CHECK(static_cast<int>(bytes[4]) == 8);
  CHECK(static_cast<int>(bytes[8]) == 2);
  // second record: t = 20, x = 2, y = 3, p = -1
  const auto* r = bytes.data() + kEvt1HeaderSize + kEvt1RecordSize;
  CHECK(static_cast<int>(r[0]) == 20);
  CHECK(static_cast<int>(r[8]) == 2);
  CHECK(static_cast<int>(r[10]) == 3);
  CHECK(static_cast<int>(r[12]) == 0xFF);

  EventStream empty(8, 8, {});
  CHECK(write_events(empty, EventFormat::Binary).size() == kEvt1HeaderSize);
}

TEST_CASE("round trip of 10000 random events, both formats") {
  Rng rng(7);
  std::uniform_int_distribution<int> xs(0, 345), ys(0, 259), gap(0, 3);
  std::vector<Event> events(10000);
  Micros t = 0;
  for (auto& e : events) {
    t += gap(rng);
    e = {t, static_cast<std::uint16_t>(xs(rng)), static_cast<std::uint16_t>(ys(rng)),
         static_cast<std::int8_t>(rng() % 2 ? 1 : -1)};
  }
  EventStream s(kDefaultWidth, kDefaultHeight, events);
  for (auto fmt : {EventFormat::Binary, EventFormat::Csv}) {
    auto bytes = write_events(s, fmt);
    CHECK(read_events(bytes, fmt) == s);
    CHECK(write_events(read_events(bytes, fmt), fmt) == bytes);
  }
}

TEST_CASE("round trip property over random streams") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    auto s = random_stream(rng);
    CHECK(read_events(write_events(s, EventFormat::Binary), EventFormat::Binary) == s);
    CHECK(read_events(write_events(s, EventFormat::Csv), EventFormat::Csv) == s);
  }
}

TEST_CASE("file round trip picks format from extension") {
  auto dir = testing_support::scratch_dir("events_io");
  EventStream s(16, 9, {{0, 1, 2, 1}, {5, 15, 8, -1}});
  for (const char* name : {"a.evt1", "b.csv"}) {
    const auto path = (dir / name).string();
    write_events_file(s, path);
    CHECK(read_events_file(path) == s);
  }
  CHECK(format_for_path("x.csv") == EventFormat::Csv);
  CHECK(format_for_path("x.evt1") == EventFormat::Binary);
  CHECK_THROWS(read_events_file((dir / "missing.evt1").string()));
}

TEST_CASE("default resolution") {
  EventStream s;
  CHECK(s.width() == 346);
  CHECK(s.height() == 260);
}

TEST_CASE("validate_stream") {
  CHECK(validate_stream(8, 8, ts_events({0, 1, 1, 5})).empty());

  auto v = validate_stream(8, 8, ts_events({10, 5}));
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == ViolationKind::NonMonotone);
  CHECK(v[0].index == 1);
  CHECK(v[0].message == "non-monotone at index 1");

  std::vector<Event> oob = {{0, 8, 0, 1}};
  v = validate_stream(8, 8, oob);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == ViolationKind::OutOfBounds);
  CHECK(v[0].message.find("coordinate out of bounds") == 0);

  std::vector<Event> bad = {{-1, 0, 9, 0}};
  v = validate_stream(8, 8, bad);
  CHECK(v.size() == 3);

  CHECK_THROWS_AS(EventStream(8, 8, ts_events({3, 2})), StreamError);
}

TEST_CASE("windows follow the half-open convention") {
  EventStream s(8, 8, ts_events({0, 49, 50}));
  auto w = window_iter(s, 50, 50);
  REQUIRE(w.size() == 2);
  CHECK(w.at(0).events.size() == 2);
  CHECK(w.at(1).events.size() == 1);
  CHECK(w.at(1).events[0].t == 50);
  CHECK(w.at(1).window == Window{50, 50});
}

TEST_CASE("empty stream yields no windows") {
  EventStream s(8, 8, {});
  CHECK(window_iter(s, 10).size() == 0);
  CHECK(window_iter(s, 10).begin() == window_iter(s, 10).end());
}

TEST_CASE("uniform partition into ten windows") {
  std::vector<Event> events;
  for (Micros t = 0; t < 1000; ++t) events.push_back({t, 0, 0, 1});
  EventStream s(1, 1, events);
  auto w = window_iter(s, 100, 100);
  REQUIRE(w.size() == 10);
  for (const auto& slice : w) CHECK(slice.events.size() == 100);
}

TEST_CASE("window arguments must be positive") {
  EventStream s(8, 8, ts_events({0}));
  CHECK_THROWS_AS(window_iter(s, 0), std::invalid_argument);
  CHECK_THROWS_AS(window_iter(s, 10, -1), std::invalid_argument);
  CHECK(window_iter(s, 10).size() == 1);  // stride 0 means stride = T
}

TEST_CASE("overlapping windows") {
  EventStream s(8, 8, ts_events({0, 10, 20, 30}));
  auto w = window_iter(s, 20, 10);
  REQUIRE(w.size() == 4);
  CHECK(w.at(0).events.size() == 2);
  CHECK(w.at(1).events.size() == 2);
  CHECK(w.at(3).events.size() == 1);
}

TEST_CASE("partition and window count properties") {
  Rng rng(3);
  std::uniform_int_distribution<Micros> td(1, 300);
  for (int iter = 0; iter < 300; ++iter) {
    auto s = random_stream(rng);
    const Micros T = td(rng);
    auto range = window_iter(s, T);
    std::vector<Event> joined;
    Micros expected_start = s.empty() ? 0 : s.events().front().t;
    for (const auto& slice : range) {
      CHECK(slice.window.t_start == expected_start);
      expected_start += T;
      for (const auto& e : slice.events) CHECK(slice.window.contains(e.t));
      joined.insert(joined.end(), slice.events.begin(), slice.events.end());
    }
    CHECK(EventStream(s.width(), s.height(), joined) == s);
    if (!s.empty()) {
      const Micros span = s.events().back().t - s.events().front().t + 1;
      CHECK(range.size() == static_cast<std::size_t>((span + T - 1) / T));
    }
  }
}

TEST_CASE("slice returns the half-open range") {
  EventStream s(8, 8, ts_events({1, 2, 2, 3, 7}));
  CHECK(s.slice(2, 3).size() == 2);
  CHECK(s.slice(0, 100).size() == 5);
  CHECK(s.slice(4, 7).empty());
}

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "evsteer/experiment.hpp"
#include "evsteer/recording_io.hpp"
#include "support.hpp"

using namespace evsteer;

namespace {

SimConfig tiny_sim(double amplitude_deg, std::uint64_t seed = 1) {
  SimConfig c;
  c.width = 16;
  c.height = 16;
  c.duration_us = 6'000'000;
  c.frame_period_us = 50'000;
  c.seed = seed;
  c.scene.kind = SceneKind::TranslatingTexture;
  c.scene.speed_kmh = Profile::constant(30.0);
  c.scene.gain_px_per_deg_s = 2.0;
  c.scene.lead_us = 333'333;
  c.scene.texture.period_px = 64;
  c.scene.texture.bars = 6;
  if (amplitude_deg > 0) c.scene.angle_deg.components = {{amplitude_deg, 1.3, 0.4}, {amplitude_deg / 2, 0.7, 1.0}};
  return c;
}

ExperimentConfig tiny_experiment(InputKind kind, Micros t_us = 50'000) {
  ExperimentConfig c;
  c.kind = kind;
  c.integration_us = t_us;
  c.train_len_us = 2'000'000;
  c.test_len_us = 1'000'000;
  c.model.stem_channels = 4;
  c.model.head_hidden = 8;
  c.train.epochs = 3;
  c.train.batch_size = 8;
  c.train.learning_rate = 0.01;
  return c;
}

}  // namespace

TEST_CASE("recording directory round trip") {
  const auto cfg = tiny_sim(10.0);
  const auto rec = generate_recording(cfg);
  auto dir = testing_support::scratch_dir("recording");
  write_recording(rec, dir.string(), cfg);
  CHECK(std::filesystem::exists(dir / "events.evt1"));
  CHECK(std::filesystem::exists(dir / "frames" / "000000.pgm"));
  CHECK(std::filesystem::exists(dir / "frames" / "000119.pgm"));
  CHECK(std::filesystem::exists(dir / "sim_config.json"));
  std::ifstream labels(dir / "labels.csv");
  std::string header;
  std::getline(labels, header);
  CHECK(header == "t_us,angle_deg,speed_kmh");

  const auto back = read_recording(dir.string());
  CHECK(back.duration_us == rec.duration_us);
  CHECK(back.events == rec.events);
  CHECK(back.labels == rec.labels);
  REQUIRE(back.gray_frames.size() == rec.gray_frames.size());
  for (std::size_t k = 0; k < rec.gray_frames.size(); ++k) {
    CHECK(back.gray_frames[k].t == rec.gray_frames[k].t);
    for (std::size_t i = 0; i < rec.gray_frames[k].image.size(); ++i) {
      CHECK(std::abs(back.gray_frames[k].image.values[i] - rec.gray_frames[k].image.values[i]) <= 0.5);
    }
  }
  std::ifstream sc(dir / "sim_config.json");
  CHECK(sim_config_from_json(nlohmann::json::parse(sc)) == cfg);
}

TEST_CASE("malformed recordings are rejected") {
  auto dir = testing_support::scratch_dir("bad_recording");
  CHECK_THROWS(read_recording((dir / "nope").string()));
  CHECK_THROWS(read_recording(dir.string()));  // no events file
  write_events_file(EventStream(4, 4, {}), (dir / "events.evt1").string());
  CHECK_THROWS(read_recording(dir.string()));  // no labels
  {
    std::ofstream out(dir / "labels.csv");
    out << "t_us,angle_deg,speed_kmh\n0,1.5,30\n10,oops,30\n";
  }
  CHECK_THROWS(read_recording(dir.string()));
  {
    std::ofstream out(dir / "labels.csv");
    out << "t_us,angle_deg,speed_kmh\n0,1.5,30\n10000,2,30\n";
  }
  auto rec = read_recording(dir.string());
  CHECK(rec.labels.size() == 2);
  CHECK(rec.duration_us == 10'001);
  CHECK(rec.gray_frames.empty());
}

TEST_CASE("sample anchors sit on gray frames") {
  const auto rec = generate_recording(tiny_sim(10.0));
  auto a = sample_anchors(rec, 50'000, 50'000);
  REQUIRE(!a.empty());
  CHECK(a.front().frame == 1);
  CHECK(a.front().t == 50'000);
  auto b = sample_anchors(rec, 200'000, 50'000);
  CHECK(b.front().t == 200'000);
  CHECK(b.front().frame == 4);
  CHECK(b.back().t == a.back().t);

  LabeledRecording no_frames{1'000'000, rec.events, {}, rec.labels};
  auto c = sample_anchors(no_frames, 100'000, 250'000);
  REQUIRE(c.size() == 4);
  CHECK(c.front().t == 250'000);
  CHECK(c.front().frame == Anchor::npos);
  CHECK_THROWS_AS(build_input(no_frames, InputKind::Grayscale, c.front(), 100'000), DataError);
}

TEST_CASE("inputs for each kind") {
  const auto rec = generate_recording(tiny_sim(10.0));
  const Anchor anchor{500'000, 10};
  auto ev = build_input(rec, InputKind::Events, anchor, 50'000);
  CHECK(ev.shape() == std::vector<std::size_t>{2, 16, 16});
  const auto frame = accumulate_events(rec.events.slice(450'000, 500'000), Window{450'000, 50'000}, 16, 16);
  CHECK(ev == to_input(frame).values);
  CHECK(build_input(rec, InputKind::Grayscale, anchor, 50'000) == to_input_gray(rec.gray_frames[10].image).values);
  CHECK(build_input(rec, InputKind::GrayDiff, anchor, 50'000) ==
        to_input_graydiff(rec.gray_frames[10].image, rec.gray_frames[9].image).values);
}

TEST_CASE("experiment runs, is deterministic and re-evaluates from the model") {
  const auto rec = generate_recording(tiny_sim(10.0));
  auto cfg = tiny_experiment(InputKind::Events);
  auto a = run_experiment(rec, cfg);
  CHECK(a.loss_history.size() == 3);
  CHECK(a.report.n_samples >= 1);
  CHECK(a.report.n_samples == a.test_obs_deg.size());
  CHECK(a.report.rmse_deg >= 0.0);
  REQUIRE(a.report.eva.has_value());
  CHECK(*a.report.eva <= 1.0);
  CHECK(a.report.input_kind == "events");
  CHECK(a.report.integration_time_ms == 50.0);
  CHECK(a.n_train > 0);

  auto b = run_experiment(rec, cfg);
  CHECK(b.test_pred_deg == a.test_pred_deg);
  CHECK(b.model == a.model);

  auto again = evaluate_model(load_model(save_model(a.model)), rec);
  CHECK(again.rmse_deg == a.report.rmse_deg);
  CHECK(again.n_samples == a.report.n_samples);
  CHECK(experiment_config_from_metadata(a.model).integration_us == 50'000);

  Model bare = a.model;
  bare.metadata = nlohmann::json::object();
  CHECK_THROWS_AS(evaluate_model(bare, rec), ModelFormatError);
}

TEST_CASE("sweep returns one report per T in order") {
  const auto rec = generate_recording(tiny_sim(10.0));
  auto base = tiny_experiment(InputKind::Events);
  base.train.epochs = 1;
  auto reports = sweep_integration_time(rec, {100, 25}, base);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].integration_time_ms == 25.0);
  CHECK(reports[1].integration_time_ms == 100.0);
  for (const auto& r : reports) CHECK(r.status == "ok");

  auto single = sweep_integration_time(rec, {50}, base);
  CHECK(single.size() == 1);

  base.train.learning_rate = 1e9;
  base.train.epochs = 5;
  auto failed = sweep_integration_time(rec, {25, 50}, base);
  REQUIRE(failed.size() == 2);
  for (const auto& r : failed) CHECK(r.status == "diverged");
}

TEST_CASE("compare inputs") {
  const auto rec = generate_recording(tiny_sim(10.0));
  auto base = tiny_experiment(InputKind::Events);
  base.train.epochs = 1;
  auto one = compare_inputs(rec, {InputKind::Events}, base);
  REQUIRE(one.size() == 1);
  CHECK(one[0].input_kind == "events");

  LabeledRecording events_only{rec.duration_us, rec.events, {}, rec.labels};
  CHECK_THROWS_AS(compare_inputs(events_only, {InputKind::Events, InputKind::Grayscale}, base), DataError);
}

TEST_CASE("static recording is predicted exactly by every kind") {
  const auto rec = generate_recording(tiny_sim(0.0));
  CHECK(rec.events.empty());
  auto base = tiny_experiment(InputKind::Events);
  auto reports = compare_inputs(rec, {InputKind::Grayscale, InputKind::GrayDiff, InputKind::Events}, base);
  REQUIRE(reports.size() == 3);
  for (const auto& r : reports) {
    CHECK(r.status == "ok");
    CHECK(r.rmse_deg < 1e-9);
    CHECK_FALSE(r.eva.has_value());
  }
}

TEST_CASE("experiment config errors") {
  const auto rec = generate_recording(tiny_sim(10.0));
  auto cfg = tiny_experiment(InputKind::Events);
  cfg.integration_us = 0;
  CHECK_THROWS_AS(run_experiment(rec, cfg), std::invalid_argument);
  cfg = tiny_experiment(InputKind::Events);
  cfg.train_len_us = 100'000'000;  // no test segment
  CHECK_THROWS_AS(run_experiment(rec, cfg), DataError);
}

TEST_CASE("shipped benchmark config matches the built-in one") {
  std::ifstream in(std::string(EVSTEER_SOURCE_DIR) + "/configs/benchmark.json");
  REQUIRE(in);
  const auto j = nlohmann::json::parse(in);
  CHECK(sim_config_from_json(j) == benchmark_sim_config(1));
}

// evsteer command-line interface.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 training divergence.

#include <CLI11.hpp>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "evsteer/events.hpp"
#include "evsteer/experiment.hpp"
#include "evsteer/frames.hpp"
#include "evsteer/pgm.hpp"
#include "evsteer/recording_io.hpp"

namespace fs = std::filesystem;
using namespace evsteer;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDiverged = 3;

const std::vector<std::string> kKindNames = {"events", "gray", "graydiff"};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct TrainFlags {
  int epochs = 30;
  double lr = 0.02;
  std::size_t batch = 16;
  double train_s = 40.0;
  double test_s = 20.0;
  std::uint64_t seed = 0;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f, bool with_epochs_seed) {
  if (with_epochs_seed) {
    cmd->add_option("--epochs", f.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", f.seed, "Seed for init, shuffling and subsampling");
  }
  cmd->add_option("--lr", f.lr, "SGD learning rate")->capture_default_str();
  cmd->add_option("--batch-size", f.batch, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--train-s", f.train_s, "Train segment length in seconds")->capture_default_str();
  cmd->add_option("--test-s", f.test_s, "Test segment length in seconds")->capture_default_str();
}

ExperimentConfig make_config(const TrainFlags& f, InputKind kind, double t_ms) {
  ExperimentConfig c;
  c.kind = kind;
  c.integration_us = static_cast<Micros>(std::llround(t_ms * 1000.0));
  c.train_len_us = static_cast<Micros>(std::llround(f.train_s * 1e6));
  c.test_len_us = static_cast<Micros>(std::llround(f.test_s * 1e6));
  c.pipeline.seed = f.seed;
  c.model.seed = f.seed;
  c.train.seed = f.seed;
  c.train.epochs = f.epochs;
  c.train.learning_rate = f.lr;
  c.train.batch_size = f.batch;
  return c;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::string indexed(const fs::path& dir, std::size_t i, const char* suffix) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu%s", i, suffix);
  return (dir / buf).string();
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
  std::ifstream in(config_path);
  if (!in) throw std::runtime_error("cannot open " + config_path);
  SimConfig config;
  try {
    config = sim_config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(config_path + ": " + e.what());
  }
  const auto rec = generate_recording(config);
  write_recording(rec, out_dir, config);
  std::cout << "wrote " << rec.events.size() << " events, " << rec.gray_frames.size() << " frames, "
            << rec.labels.size() << " labels to " << out_dir << '\n';
  return kExitOk;
}

int cmd_frames(const std::string& events_path, int t_ms, int stride_ms, const std::string& kind_name,
               const std::string& out_dir) {
  const auto kind = input_kind_from_string(kind_name);
  const auto stream = read_events_file(events_path);
  std::vector<GrayFrame> gray;
  if (kind != InputKind::Events) {
    const auto frames_dir = fs::path(events_path).parent_path() / "frames";
    if (!fs::is_directory(frames_dir)) throw DataError("missing modality: no frames/ next to " + events_path);
    gray = read_gray_frames(frames_dir.string());
    if (gray.size() < 2) throw DataError("missing modality: fewer than two gray frames");
  }
  fs::create_directories(out_dir);
  std::ofstream index(fs::path(out_dir) / "index.csv");
  index << "index,t_start_us,t_end_us,n_events,frame_t_us\n";

  const auto windows = window_iter(stream, static_cast<Micros>(t_ms) * 1000, static_cast<Micros>(stride_ms) * 1000);
  std::size_t written = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto slice = windows.at(i);
    const auto& w = slice.window;
    std::string frame_t;
    if (kind == InputKind::Events) {
      write_event_frame_pgm(accumulate_events(slice.events, w, stream.width(), stream.height()),
                            indexed(out_dir, i, ""));
    } else {
      // Latest gray frame exposed before the window closes.
      auto it = std::lower_bound(gray.begin(), gray.end(), w.t_end(),
                                 [](const GrayFrame& g, Micros t) { return g.t < t; });
      if (it == gray.begin()) continue;
      const std::size_t k = static_cast<std::size_t>(it - gray.begin()) - 1;
      if (kind == InputKind::Grayscale) {
        write_pgm8(indexed(out_dir, i, ".pgm"), gray[k].image, gray[k].t);
      } else {
        if (k == 0) continue;
        const auto diff = to_input_graydiff(gray[k].image, gray[k - 1].image);
        Image img(gray[k].image.width, gray[k].image.height);
        for (std::size_t j = 0; j < img.values.size(); ++j) img.values[j] = 127.5 + 127.5 * diff.values[j];
        write_pgm8(indexed(out_dir, i, ".pgm"), img, gray[k].t);
      }
      frame_t = std::to_string(gray[k].t);
    }
    index << i << ',' << w.t_start << ',' << w.t_end() << ',' << slice.events.size() << ',' << frame_t << '\n';
    ++written;
  }
  std::cout << "wrote " << written << " " << to_string(kind) << " frames to " << out_dir << '\n';
  return kExitOk;
}

int cmd_train(const std::string& data, const std::string& kind_name, int t_ms, const TrainFlags& f,
              const std::string& out) {
  const auto rec = read_recording(data);
  const auto cfg = make_config(f, input_kind_from_string(kind_name), t_ms);
  const auto result = run_experiment(rec, cfg, [](int epoch, double loss) {
    std::cerr << "epoch " << epoch << " loss " << loss << '\n';
  });
  save_model_file(result.model, out);
  std::cout << report_to_json(result.report).dump(2) << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& data, const std::string& report_path) {
  const auto model = load_model_file(model_path);
  const auto rec = read_recording(data);
  const auto report = evaluate_model(model, rec);
  write_json(report_path, report_to_json(report));
  std::cout << "rmse_deg " << report.rmse_deg << " n_samples " << report.n_samples << '\n';
  return kExitOk;
}

int finish_table(const std::vector<EvalReport>& reports, const std::string& report_path) {
  write_reports_csv(report_path, reports);
  bool diverged = false;
  for (const auto& r : reports) {
    std::cout << r.input_kind << " T=" << r.integration_time_ms << "ms ";
    if (r.status == "ok") {
      std::cout << "rmse_deg=" << r.rmse_deg << " eva=" << (r.eva ? std::to_string(*r.eva) : "n/a") << '\n';
    } else {
      std::cout << r.status << ": " << r.error << '\n';
      diverged = diverged || r.status == "diverged";
    }
  }
  return diverged ? kExitDiverged : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Training reallocates the same large buffers every batch; keep them on the heap.
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Event-camera steering prediction toolkit"};
  app.require_subcommand(1);

  std::string config_path, out, data, events_path, kind_name = "events", model_path, report_path;
  std::string times = "10,25,50,100,200", kinds = "events,gray,graydiff";
  int t_ms = 50, stride_ms = 0;
  TrainFlags tf;

  auto* sim = app.add_subcommand("simulate", "Simulate a labeled recording from a JSON config");
  sim->add_option("--config", config_path, "Simulator config JSON")->required();
  sim->add_option("--out", out, "Output recording directory")->required();

  auto* frames = app.add_subcommand("frames", "Convert a stream into per-window frames");
  frames->add_option("--events", events_path, "Event file (.evt1 or .csv)")->required();
  frames->add_option("--T-ms", t_ms, "Integration time in ms")->required()->check(CLI::PositiveNumber);
  frames->add_option("--stride-ms", stride_ms, "Window stride in ms (default: T)")->check(CLI::PositiveNumber);
  frames->add_option("--kind", kind_name, "events|graydiff|gray")->check(CLI::IsMember(kKindNames));
  frames->add_option("--out", out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train a regressor on a recording's train split");
  tr->add_option("--data", data, "Recording directory")->required();
  tr->add_option("--input", kind_name, "events|gray|graydiff")->required()->check(CLI::IsMember(kKindNames));
  tr->add_option("--T-ms", t_ms, "Integration time in ms")->required()->check(CLI::PositiveNumber);
  add_train_flags(tr, tf, true);
  tr->add_option("--out", out, "Model file")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a model on a recording's test split");
  ev->add_option("--model", model_path, "Model file")->required();
  ev->add_option("--data", data, "Recording directory")->required();
  ev->add_option("--report", report_path, "Report JSON path")->required();

  auto* sw = app.add_subcommand("sweep", "Integration-time sweep");
  sw->add_option("--data", data, "Recording directory")->required();
  sw->add_option("--times-ms", times, "Comma-separated integration times")->capture_default_str();
  sw->add_option("--seed", tf.seed, "Seed");
  sw->add_option("--epochs", tf.epochs, "Training epochs")->capture_default_str();
  add_train_flags(sw, tf, false);
  sw->add_option("--report", report_path, "CSV report path")->required();

  auto* cmp = app.add_subcommand("compare", "Input-type comparison");
  cmp->add_option("--data", data, "Recording directory")->required();
  cmp->add_option("--kinds", kinds, "Comma-separated input kinds")->capture_default_str();
  cmp->add_option("--T-ms", t_ms, "Integration time for event input")->capture_default_str();
  cmp->add_option("--seed", tf.seed, "Seed");
  cmp->add_option("--epochs", tf.epochs, "Training epochs")->capture_default_str();
  add_train_flags(cmp, tf, false);
  cmp->add_option("--report", report_path, "CSV report path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sim) return cmd_simulate(config_path, out);
    if (*frames) return cmd_frames(events_path, t_ms, stride_ms == 0 ? t_ms : stride_ms, kind_name, out);
    if (*tr) return cmd_train(data, kind_name, t_ms, tf, out);
    if (*ev) return cmd_eval(model_path, data, report_path);
    if (*sw) {
      std::vector<double> ts;
      for (const auto& s : split_list(times)) {
        try {
          ts.push_back(std::stod(s));
        } catch (const std::exception&) {
          std::cerr << "error: bad --times-ms entry '" << s << "'\n";
          return kExitUsage;
        }
        if (!(ts.back() > 0)) {
          std::cerr << "error: integration times must be positive\n";
          return kExitUsage;
        }
      }
      if (ts.empty()) {
        std::cerr << "error: --times-ms is empty\n";
        return kExitUsage;
      }
      const auto rec = read_recording(data);
      return finish_table(sweep_integration_time(rec, ts, make_config(tf, InputKind::Events, 50.0)), report_path);
    }
    if (*cmp) {
      std::vector<InputKind> ks;
      for (const auto& s : split_list(kinds)) {
        try {
          ks.push_back(input_kind_from_string(s));
        } catch (const std::exception&) {
          std::cerr << "error: unknown input kind '" << s << "'\n";
          return kExitUsage;
        }
      }
      if (ks.empty()) {
        std::cerr << "error: --kinds is empty\n";
        return kExitUsage;
      }
      const auto rec = read_recording(data);
      return finish_table(compare_inputs(rec, ks, make_config(tf, InputKind::Events, t_ms)), report_path);
    }
  } catch (const DivergenceError& e) {
    std::cerr << "error: training diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

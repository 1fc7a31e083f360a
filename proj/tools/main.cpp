// echoflow command-line front end: phantom generation, feature tracking,
// single trials, batches, and plot-data extraction.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "echoflow/image_io.hpp"
#include "echoflow/pipeline.hpp"
#include "echoflow/signal.hpp"

namespace fs = std::filesystem;
using namespace echoflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitPartialBatch = 5;

struct CommonOverrides {
  std::optional<std::string> config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<bool> zero_phase;
  std::optional<double> train_fraction;
};

void add_common_flags(CLI::App* cmd, CommonOverrides& o) {
  cmd->add_option("--config", o.config_path, "Pipeline config file (key = value)");
  cmd->add_option("--out", o.out_dir, "Output directory");
  cmd->add_option("--seed", o.seed, "Master seed (protocol uses seed, phantom seed+1)");
  cmd->add_option("--lambda", o.lambda, "Ridge regularization strength");
  cmd->add_option("--zero-phase", o.zero_phase, "Zero-phase (forward-backward) filtering");
  cmd->add_option("--train-fraction", o.train_fraction, "Contiguous training fraction");
}

PipelineConfig resolve_config(const CommonOverrides& o) {
  PipelineConfig config =
      o.config_path ? parse_config_file(*o.config_path) : PipelineConfig{};
  if (!o.config_path) config.reseed(config.seed);
  if (o.seed) config.reseed(*o.seed);
  if (o.out_dir) config.out_dir = *o.out_dir;
  if (o.lambda) config.lambda = *o.lambda;
  if (o.zero_phase) config.filter.zero_phase = *o.zero_phase;
  if (o.train_fraction) config.train_fraction = *o.train_fraction;
  return config;
}

void write_phantom_meta(const fs::path& path, const PipelineConfig& c, Index n_frames) {
  nlohmann::json doc{
      {"schema_version", 1},
      {"config_fingerprint", config_fingerprint(c)},
      {"seed", c.seed},
      {"protocol",
       {{"amplitudes_deg", c.protocol.amplitudes_deg},
        {"period_s", c.protocol.period_s},
        {"n_cycles", c.protocol.n_cycles},
        {"trim_head_cycles", c.protocol.trim_head_cycles},
        {"trim_tail_cycles", c.protocol.trim_tail_cycles},
        {"frame_rate_hz", c.protocol.frame_rate_hz},
        {"rng_seed", c.protocol.rng_seed}}},
      {"phantom",
       {{"width_px", c.phantom.width_px},
        {"height_px", c.phantom.height_px},
        {"n_speckles", c.phantom.n_speckles},
        {"speckle_sigma_px", c.phantom.speckle_sigma_px},
        {"displacement_gain_px_per_deg", c.phantom.displacement_gain_px_per_deg},
        {"depth_profile",
         c.phantom.depth_profile == DepthProfile::linear ? "linear" : "constant"},
        {"pixel_noise_sigma", c.phantom.pixel_noise_sigma},
        {"rng_seed", c.phantom.rng_seed}}},
      {"n_frames", n_frames},
  };
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << doc.dump(2) << "\n";
}

int cmd_phantom(const CommonOverrides& o) {
  PipelineConfig config = resolve_config(o);
  config.protocol.validate();
  config.phantom.validate();
  const fs::path out_dir = config.out_dir;

  AngleSeries angles = generate_target_signal(config.protocol);
  FrameSequence frames = render_phantom(config.phantom, angles);
  save_frames(out_dir, frames);
  save_angles(out_dir / "angles.csv", angles);
  write_phantom_meta(out_dir / "phantom_meta.json", config, frames.size());
  std::cout << "phantom: wrote " << frames.size() << " frames ("
            << frames.width() << "x" << frames.height() << ") to " << out_dir.string() << "\n";
  return kExitOk;
}

int cmd_track(const CommonOverrides& o, const std::string& frames_dir) {
  PipelineConfig config = resolve_config(o);
  FrameSequence frames = load_frames(frames_dir, config.frame_rate_hz);
  std::vector<Point2> corners = detect_corners(frames.frames[0], config.corner);
  if (corners.empty()) throw ValidationError("no corners detected on frame 0");
  TrackSet tracks = prune_lost(track_sequence(frames, corners, config.flow));

  fs::create_directories(config.out_dir);
  const fs::path out_path = config.out_dir / "tracks.csv";
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot open for writing: " + out_path.string());
  out << "frame,point_id,x_px,y_px\n";
  char buf[96];
  for (Index k = 0; k < tracks.n_frames(); ++k) {
    for (Index i = 0; i < tracks.n_points(); ++i) {
      std::snprintf(buf, sizeof(buf), "%lld,%d,%.17g,%.17g\n", static_cast<long long>(k),
                    tracks.point_ids[static_cast<std::size_t>(i)], tracks.xs(i, k),
                    tracks.ys(i, k));
      out << buf;
    }
  }
  std::cout << "track: " << tracks.n_points() << " surviving tracks over "
            << tracks.n_frames() << " frames -> " << out_path.string() << "\n";
  return kExitOk;
}

int cmd_run(const CommonOverrides& o) {
  PipelineConfig config = resolve_config(o);
  RunReport report = run_trial(config);
  std::printf("run: rmse=%.4f deg  r2=%.6f  (train %lld, val %lld)\n", report.eval.rmse_deg,
              report.eval.r2, static_cast<long long>(report.eval.n_train),
              static_cast<long long>(report.eval.n_val));
  std::printf("run: %lld corners, %lld surviving tracks, %lld channels\n",
              static_cast<long long>(report.n_corners_detected),
              static_cast<long long>(report.n_tracks_surviving),
              static_cast<long long>(report.n_channels));
  std::cout << "run: outputs in " << config.out_dir.string() << "\n";
  return kExitOk;
}

int cmd_batch(const CommonOverrides& o, const std::vector<std::string>& config_paths,
              int repeat) {
  std::vector<PipelineConfig> configs;
  if (config_paths.empty()) {
    PipelineConfig base = resolve_config(o);
    for (int i = 0; i < std::max(repeat, 1); ++i) {
      PipelineConfig c = base;
      c.reseed(base.seed + static_cast<std::uint64_t>(i));
      configs.push_back(std::move(c));
    }
  } else {
    for (const std::string& path : config_paths) {
      PipelineConfig c = parse_config_file(path);
      if (o.seed) c.reseed(*o.seed);
      if (o.lambda) c.lambda = *o.lambda;
      if (o.zero_phase) c.filter.zero_phase = *o.zero_phase;
      if (o.train_fraction) c.train_fraction = *o.train_fraction;
      for (int i = 0; i < std::max(repeat, 1); ++i) {
        PipelineConfig trial = c;
        if (repeat > 1) trial.reseed(c.seed + static_cast<std::uint64_t>(i));
        configs.push_back(std::move(trial));
      }
    }
  }

  fs::path out_dir = o.out_dir ? fs::path(*o.out_dir) : fs::path("batch_out");
  BatchResult result = run_batch(configs, out_dir);
  for (const TrialRow& row : result.rows) {
    if (row.ok) {
      std::printf("trial %d: ok  rmse=%.4f deg  r2=%.6f\n", row.trial, row.eval.rmse_deg,
                  row.eval.r2);
    } else {
      std::printf("trial %d: error  %s\n", row.trial, row.detail.c_str());
    }
  }
  std::cout << "batch: summary at " << result.summary_path.string() << "\n";
  if (result.all_ok()) return kExitOk;
  return kExitPartialBatch;
}

int cmd_plot_data(const std::string& estimates, const std::string& out_dir) {
  emit_plot_data(estimates, out_dir);
  std::cout << "plot-data: wrote timeseries.csv and scatter.csv to " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"echoflow: joint-angle estimation from grayscale image sequences"};
  app.require_subcommand(1);

  CommonOverrides phantom_o, track_o, run_o, batch_o;
  std::string track_frames_dir;
  std::vector<std::string> batch_configs;
  int batch_repeat = 1;
  std::string plot_estimates, plot_out = "plot_out";

  CLI::App* phantom = app.add_subcommand("phantom", "Generate a synthetic speckle dataset");
  add_common_flags(phantom, phantom_o);

  CLI::App* track = app.add_subcommand("track", "Track feature points in a frame directory");
  add_common_flags(track, track_o);
  track->add_option("--frames", track_frames_dir, "Directory of frame_*.pgm files")->required();

  CLI::App* run = app.add_subcommand("run", "Run one estimation trial");
  add_common_flags(run, run_o);

  CLI::App* batch = app.add_subcommand("batch", "Run several trials and aggregate");
  add_common_flags(batch, batch_o);
  batch->add_option("configs", batch_configs, "Config files, one trial each");
  batch->add_option("--repeat", batch_repeat,
                    "Clone each config N times with master seed +0, +1, ...");

  CLI::App* plot = app.add_subcommand("plot-data", "Extract plot-ready CSVs from a trial");
  plot->add_option("--estimates", plot_estimates, "estimates.csv from a run")->required();
  plot->add_option("--out", plot_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (phantom->parsed()) return cmd_phantom(phantom_o);
    if (track->parsed()) return cmd_track(track_o, track_frames_dir);
    if (run->parsed()) return cmd_run(run_o);
    if (batch->parsed()) return cmd_batch(batch_o, batch_configs, batch_repeat);
    if (plot->parsed()) return cmd_plot_data(plot_estimates, plot_out);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

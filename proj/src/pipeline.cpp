#include "echoflow/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "echoflow/image_io.hpp"
#include "echoflow/signal.hpp"

namespace echoflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& sink) : sink_(sink) {}

  template <class Fn>
  auto run(const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        stop(name, start);
      } else {
        auto result = fn();
        stop(name, start);
        return result;
      }
    } catch (const ConfigError& e) {
      rethrow<ConfigError>(name, e);
    } catch (const ParseError& e) {
      rethrow<ParseError>(name, e);
    } catch (const IoError& e) {
      rethrow<IoError>(name, e);
    } catch (const NumericalError& e) {
      rethrow<NumericalError>(name, e);
    } catch (const DegenerateChannelError& e) {
      rethrow<DegenerateChannelError>(name, e);
    } catch (const EmptyAliveError& e) {
      rethrow<EmptyAliveError>(name, e);
    } catch (const ValidationError& e) {
      rethrow<ValidationError>(name, e);
    }
  }

 private:
  template <class E>
  [[noreturn]] static void rethrow(const std::string& name, const E& e) {
    throw E("stage " + name + ": " + e.what());
  }

  void stop(const std::string& name, std::chrono::steady_clock::time_point start) {
    const auto end = std::chrono::steady_clock::now();
    sink_.push_back(
        {name, std::chrono::duration<double, std::milli>(end - start).count()});
  }

  std::vector<StageTiming>& sink_;
};

void write_estimates_csv(const fs::path& path, const Vec& t_s, const Vec& meas_deg,
                         const Vec& est_deg, Index split_boundary) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "k,t_s,theta_meas_deg,theta_est_deg,is_validation\n";
  char buf[160];
  for (Index k = 0; k < t_s.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%d\n", static_cast<long long>(k),
                  t_s[k], meas_deg[k], est_deg[k], k >= split_boundary ? 1 : 0);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_report_json(const fs::path& path, const RunReport& report) {
  json timings = json::object();
  for (const StageTiming& t : report.timings) timings[t.name] = t.ms;
  json doc{
      {"schema_version", 1},
      {"config_fingerprint", report.config_fingerprint},
      {"eval",
       {{"rmse_deg", report.eval.rmse_deg},
        {"r2", report.eval.r2},
        {"n_train", report.eval.n_train},
        {"n_val", report.eval.n_val},
        {"split_boundary", report.eval.split_boundary}}},
      {"n_corners_detected", report.n_corners_detected},
      {"n_tracks_surviving", report.n_tracks_surviving},
      {"n_channels", report.n_channels},
      {"timings_ms", timings},
      {"artifacts",
       {{"model", report.model_path.string()},
        {"estimates", report.estimates_path.string()},
        {"report", report.report_path.string()}}},
  };
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

RunReport run_trial(const PipelineConfig& config) {
  config.validate();

  RunReport report;
  report.config_fingerprint = config_fingerprint(config);
  StageClock clock(report.timings);

  // Acquire frames + raw angles.
  struct Acquired {
    FrameSequence frames;
    AngleSeries angles;
  };
  Acquired input = clock.run("acquire", [&] {
    Acquired a;
    if (config.source == InputSource::phantom) {
      a.angles = generate_target_signal(config.protocol);
      a.frames = render_phantom(config.phantom, a.angles);
    } else {
      a.frames = load_frames(config.frames_dir, config.frame_rate_hz);
      a.angles = load_angles(config.angles_csv);
    }
    return a;
  });

  // Resample angles onto the frame clock (starting at the angle stream's
  // first timestamp).
  AngleSeries angles = clock.run("resample", [&] {
    Vec target(input.frames.size());
    for (Index k = 0; k < input.frames.size(); ++k) {
      target[k] = input.angles.t_s[0] + static_cast<double>(k) / input.frames.frame_rate_hz;
    }
    return resample_to(input.angles, target);
  });

  std::vector<Point2> corners = clock.run("detect_corners", [&] {
    auto found = detect_corners(input.frames.frames[0], config.corner);
    if (found.empty()) {
      throw ValidationError(
          "no corners detected on frame 0; lower corner.quality_level or check input");
    }
    return found;
  });
  report.n_corners_detected = static_cast<Index>(corners.size());

  TrackSet tracked = clock.run(
      "track", [&] { return track_sequence(input.frames, corners, config.flow); });

  TrackSet alive = clock.run("prune", [&] { return prune_lost(tracked); });
  report.n_tracks_surviving = alive.n_points();

  const Index n_samples = alive.n_frames();
  const SplitIndices split = clock.run(
      "split", [&] { return split_contiguous(n_samples, config.train_fraction); });

  // Condition both streams. Features: standardize then filter; angles:
  // filter then standardize.
  const ButterworthDesign design =
      config.filter.enabled
          ? design_butterworth(config.filter.order, config.filter.cutoff_hz,
                               input.frames.frame_rate_hz)
          : ButterworthDesign{};
  ConditioningOptions cond;
  cond.zero_phase = config.filter.zero_phase;
  cond.filter_enabled = config.filter.enabled;
  cond.stats_samples =
      config.standardize_scope == StandardizeScope::train_only ? split.n_train : -1;

  FeatureMatrix features = clock.run(
      "condition_features", [&] { return build_feature_matrix(alive, design, cond); });
  report.n_channels = features.values.rows();

  struct ConditionedAngle {
    Vec standardized;
    ZScoreParams zparams;
  };
  ConditionedAngle angle = clock.run("condition_angle", [&] {
    Vec filtered = angles.theta_deg;
    if (config.filter.enabled) {
      filtered = config.filter.zero_phase ? filtfilt(design, filtered)
                                          : filter_forward(design, filtered);
    }
    Mat row = filtered.transpose();
    ConditionedAngle out;
    try {
      out.zparams = zscore_params(row, cond.stats_samples);
    } catch (const DegenerateChannelError&) {
      throw DegenerateChannelError("angle series has zero variance and cannot be standardized");
    }
    out.standardized = standardize(row, out.zparams).row(0).transpose();
    return out;
  });

  Vec weights = clock.run("fit", [&] {
    return ridge_fit(features.values.leftCols(split.n_train),
                     angle.standardized.head(split.n_train), config.lambda);
  });

  Vec estimate_std =
      clock.run("predict", [&] { return ridge_predict(weights, features.values); });

  // Back to degrees, then metrics on the validation segment only.
  Vec meas_deg = inverse_zscore(angle.standardized.transpose(), angle.zparams).row(0).transpose();
  Vec est_deg = inverse_zscore(estimate_std.transpose(), angle.zparams).row(0).transpose();

  clock.run("evaluate", [&] {
    report.eval.n_train = split.n_train;
    report.eval.n_val = split.n_val();
    report.eval.split_boundary = split.n_train;
    report.eval.rmse_deg = rmse(meas_deg.tail(split.n_val()), est_deg.tail(split.n_val()));
    report.eval.r2 = r_squared(meas_deg.tail(split.n_val()), est_deg.tail(split.n_val()));
  });

  clock.run("write_outputs", [&] {
    fs::create_directories(config.out_dir);
    report.model_path = config.out_dir / "model.json";
    report.estimates_path = config.out_dir / "estimates.csv";
    report.report_path = config.out_dir / "report.json";

    RidgeModel model;
    model.weights = weights;
    model.lambda = config.lambda;
    model.feature_zparams = features.zparams;
    model.angle_zparams = angle.zparams;
    model.channel_ids = features.channel_ids;
    model.config_fingerprint = report.config_fingerprint;
    save_model_json(model, report.model_path);

    write_estimates_csv(report.estimates_path, angles.t_s, meas_deg, est_deg, split.n_train);
    write_report_json(report.report_path, report);
  });

  return report;
}

bool BatchResult::all_ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const TrialRow& r) { return r.ok; });
}

bool BatchResult::any_ok() const {
  return std::any_of(rows.begin(), rows.end(), [](const TrialRow& r) { return r.ok; });
}

BatchResult run_batch(const std::vector<PipelineConfig>& configs, const fs::path& out_dir) {
  if (configs.empty()) throw ValidationError("batch: need at least one config");
  fs::create_directories(out_dir);

  BatchResult result;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    PipelineConfig config = configs[i];
    char name[32];
    std::snprintf(name, sizeof(name), "trial_%03zu", i + 1);
    config.out_dir = out_dir / name;

    TrialRow row;
    row.trial = static_cast<int>(i + 1);
    try {
      RunReport report = run_trial(config);
      row.ok = true;
      row.eval = report.eval;
      row.detail = config.out_dir.string();
    } catch (const Error& e) {
      row.ok = false;
      row.detail = e.what();
    }
    result.rows.push_back(std::move(row));
  }

  result.summary_path = out_dir / "summary.csv";
  std::ofstream out(result.summary_path);
  if (!out) throw IoError("cannot open for writing: " + result.summary_path.string());
  out << "trial,status,rmse_deg,r2,n_train,n_val,detail\n";
  char buf[256];
  std::vector<double> rmses, r2s;
  for (const TrialRow& row : result.rows) {
    if (row.ok) {
      std::snprintf(buf, sizeof(buf), "%d,ok,%.17g,%.17g,%lld,%lld,%s\n", row.trial,
                    row.eval.rmse_deg, row.eval.r2, static_cast<long long>(row.eval.n_train),
                    static_cast<long long>(row.eval.n_val), row.detail.c_str());
      rmses.push_back(row.eval.rmse_deg);
      r2s.push_back(row.eval.r2);
    } else {
      std::string detail = row.detail;
      std::replace(detail.begin(), detail.end(), ',', ';');
      std::snprintf(buf, sizeof(buf), "%d,error,,,,,%s\n", row.trial, detail.c_str());
    }
    out << buf;
  }
  auto mean_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto std_of = [&](const std::vector<double>& v, double mu) {
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return std::sqrt(s / static_cast<double>(v.size()));
  };
  if (!rmses.empty()) {
    const double rmse_mean = mean_of(rmses), r2_mean = mean_of(r2s);
    std::snprintf(buf, sizeof(buf), "mean,,%.17g,%.17g,,,\n", rmse_mean, r2_mean);
    out << buf;
    std::snprintf(buf, sizeof(buf), "std,,%.17g,%.17g,,,\n", std_of(rmses, rmse_mean),
                  std_of(r2s, r2_mean));
    out << buf;
  }
  if (!out) throw IoError("write failed: " + result.summary_path.string());
  return result;
}

void emit_plot_data(const fs::path& estimates_csv, const fs::path& out_dir) {
  std::ifstream in(estimates_csv);
  if (!in) throw IoError("cannot open: " + estimates_csv.string());
  std::string header;
  if (!std::getline(in, header)) throw ParseError("empty estimates file");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (header != "k,t_s,theta_meas_deg,theta_est_deg,is_validation") {
    throw ParseError("unexpected estimates header: " + header);
  }

  fs::create_directories(out_dir);
  std::ofstream timeseries(out_dir / "timeseries.csv");
  std::ofstream scatter(out_dir / "scatter.csv");
  if (!timeseries || !scatter) throw IoError("cannot open plot outputs in " + out_dir.string());
  timeseries << "t_s,theta_meas_deg,theta_est_deg,is_validation\n";
  scatter << "theta_meas_deg,theta_est_deg\n";

  // Fields are re-emitted verbatim so plot files carry the exact values.
  std::string line;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) {
      throw ParseError("estimates row " + std::to_string(row) + ": expected 5 columns");
    }
    timeseries << cells[1] << "," << cells[2] << "," << cells[3] << "," << cells[4] << "\n";
    if (cells[4] == "1") scatter << cells[2] << "," << cells[3] << "\n";
  }
}

}  // namespace echoflow

#pragma once

#include <string>
#include <vector>

#include "echoflow/config.hpp"
#include "echoflow/ridge.hpp"

namespace echoflow {

struct StageTiming {
  std::string name;
  double ms = 0.0;
};

/// Everything a finished trial reports; mirrored into report.json.
struct RunReport {
  EvalReport eval;
  Index n_corners_detected = 0;
  Index n_tracks_surviving = 0;
  Index n_channels = 0;
  std::vector<StageTiming> timings;
  std::string config_fingerprint;
  std::filesystem::path model_path;
  std::filesystem::path estimates_path;
  std::filesystem::path report_path;
};

/// One complete experiment: acquire frames and angles, resample the angles to
/// the frame clock, seed corners on frame 0, track, prune, condition both
/// streams, contiguous split, fit, predict everywhere, invert standardization
/// and evaluate on the validation segment. Writes model.json, estimates.csv
/// and report.json into config.out_dir.
RunReport run_trial(const PipelineConfig& config);

struct TrialRow {
  int trial = 0;
  bool ok = false;
  EvalReport eval;
  std::string detail;  // output dir or error message
};

struct BatchResult {
  std::vector<TrialRow> rows;
  std::filesystem::path summary_path;
  bool all_ok() const;
  bool any_ok() const;
};

/// Runs each config independently (fresh model per trial); failures are
/// recorded per row and the batch continues. Writes summary.csv with one row
/// per trial plus mean and std aggregate rows.
BatchResult run_batch(const std::vector<PipelineConfig>& configs,
                      const std::filesystem::path& out_dir);

/// Derives plot-ready files from an estimates.csv: timeseries.csv (measured
/// vs estimated vs time, with the validation flag as split marker) and
/// scatter.csv (measured vs estimated pairs, validation rows only).
void emit_plot_data(const std::filesystem::path& estimates_csv,
                    const std::filesystem::path& out_dir);

}  // namespace echoflow

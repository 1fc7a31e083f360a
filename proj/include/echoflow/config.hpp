#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "echoflow/phantom.hpp"
#include "echoflow/vision.hpp"

namespace echoflow {

struct FilterConfig {
  int order = 2;
  double cutoff_hz = 6.0;
  bool zero_phase = true;
  bool enabled = true;  ///< false = passthrough (shapes unchanged, values raw)
};

enum class InputSource { phantom, files };
enum class StandardizeScope { full_trial, train_only };

/// Everything one trial needs. Parsed from a flat key-value config file
/// (`key = value`, `#` comments); see parse_config_file.
struct PipelineConfig {
  InputSource source = InputSource::phantom;
  std::uint64_t seed = 42;  ///< master seed; protocol uses seed, phantom seed+1

  MotionProtocol protocol;
  PhantomConfig phantom;

  std::filesystem::path frames_dir;
  std::filesystem::path angles_csv;
  double frame_rate_hz = 63.0;  ///< frame clock for the files source

  CornerParams corner;
  FlowParams flow;
  FilterConfig filter;
  StandardizeScope standardize_scope = StandardizeScope::full_trial;

  double lambda = 10.0;
  double train_fraction = 0.8;
  std::filesystem::path out_dir = "out";

  void validate() const;
  /// Applies the master seed to the protocol/phantom streams.
  void reseed(std::uint64_t master);
};

PipelineConfig parse_config_file(const std::filesystem::path& path);
PipelineConfig parse_config_text(const std::string& text);

/// Canonical serialization: every effective field, sorted by key, normalized
/// formatting. Fingerprints hash this text.
std::string canonical_config_text(const PipelineConfig& config);

/// 64-bit FNV-1a of the canonical text, as 16 hex digits.
std::string config_fingerprint(const PipelineConfig& config);

/// Writes the canonical form; parse_config_file(write) round-trips.
void write_config_file(const std::filesystem::path& path, const PipelineConfig& config);

}  // namespace echoflow

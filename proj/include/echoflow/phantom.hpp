#pragma once

#include <cstdint>
#include <vector>

#include "echoflow/core.hpp"

namespace echoflow {

/// Repeating-sine motion protocol: each cycle is one full sine period whose
/// amplitude is drawn uniformly from `amplitudes_deg`; the first
/// `trim_head_cycles` and last `trim_tail_cycles` cycles are discarded.
struct MotionProtocol {
  std::vector<double> amplitudes_deg{20.0, 40.0, 60.0};
  double period_s = 4.0;
  int n_cycles = 18;
  int trim_head_cycles = 2;
  int trim_tail_cycles = 1;
  double frame_rate_hz = 63.0;
  std::uint64_t rng_seed = 1;

  void validate() const;
  int retained_cycles() const { return n_cycles - trim_head_cycles - trim_tail_cycles; }
  /// Samples per cycle = round(period_s * frame_rate_hz); totals are exact
  /// multiples so non-integer period x rate products cannot drift.
  Index samples_per_cycle() const;
};

enum class DepthProfile { constant, linear };

/// Synthetic speckle scene. Frames are the base speckle image inverse-warped
/// horizontally by gain(row) * theta plus additive Gaussian pixel noise.
struct PhantomConfig {
  Index width_px = 256;
  Index height_px = 256;
  int n_speckles = 1500;
  double speckle_sigma_px = 2.0;
  double displacement_gain_px_per_deg = 1.5;
  DepthProfile depth_profile = DepthProfile::linear;
  double pixel_noise_sigma = 0.01;  // additive intensity noise std on [0,1] scale
  std::uint64_t rng_seed = 2;

  void validate() const;
};

/// Per-row displacement gain in px/deg. `constant` uses the configured gain
/// everywhere; `linear` ramps from half gain at the top row to full gain at
/// the bottom row, so every depth moves and the configured value stays the
/// peak displacement per degree.
double depth_gain(const PhantomConfig& config, Index row);

/// Target angle trajectory sampled at the protocol frame rate, trimmed to the
/// retained cycles, timestamps restarted at 0. Amplitudes are drawn per cycle
/// (including trimmed ones) from a Pcg32 stream seeded with protocol.rng_seed.
AngleSeries generate_target_signal(const MotionProtocol& protocol);

/// Renders one 8-bit frame per angle sample. Draw order from the phantom
/// stream is: speckle positions/amplitudes, then frame 0 noise row-major,
/// frame 1 noise, ... so identical (config, angles) give bit-identical frames.
FrameSequence render_phantom(const PhantomConfig& config, const AngleSeries& angles);

}  // namespace echoflow

#pragma once

#include <utility>
#include <vector>

#include "echoflow/core.hpp"

namespace echoflow {

/// Digital low-pass transfer function b(z)/a(z), a normalized so a[0] = 1.
struct ButterworthDesign {
  int order = 2;
  double cutoff_hz = 6.0;
  double sample_rate_hz = 63.0;
  Vec b;
  Vec a;
};

/// Per-channel standardization parameters (population standard deviation).
struct ZScoreParams {
  Vec mean;
  Vec stddev;
  Index channels() const { return mean.size(); }
};

/// Standardized coordinate channels x time points; row order is
/// (point 0 x, point 0 y, point 1 x, ...).
struct FeatureMatrix {
  Mat values;  ///< channels x time
  std::vector<ChannelId> channel_ids;
  ZScoreParams zparams;
};

/// Linear interpolation of the series onto target_times_s, which must all lie
/// within [first, last] source timestamps.
AngleSeries resample_to(const AngleSeries& series, const Vec& target_times_s);

/// Low-pass Butterworth via the analog prototype and bilinear transform with
/// cutoff prewarping; DC gain is normalized to exactly 1.
ButterworthDesign design_butterworth(int order, double cutoff_hz, double sample_rate_hz);

/// Magnitude of the designed response at frequency f_hz.
double butterworth_magnitude(const ButterworthDesign& design, double f_hz);

/// Single forward IIR pass (direct form II transposed) with steady-state
/// initial conditions scaled to x[0], so a constant input stays constant.
Vec filter_forward(const ButterworthDesign& design, const Eigen::Ref<const Vec>& x);

/// Zero-phase filtering: odd-reflection padding of length 3*(order+1) at both
/// ends, forward pass, reverse, second pass, reverse, padding stripped.
/// Output length equals input length.
Vec filtfilt(const ButterworthDesign& design, const Eigen::Ref<const Vec>& x);

/// Standardization statistics per channel (row). stats_cols limits the
/// columns used (first stats_cols samples); pass -1 for all columns.
/// Throws DegenerateChannelError on a zero-variance channel.
ZScoreParams zscore_params(const Eigen::Ref<const Mat>& x, Index stats_cols = -1);

/// (x - mean) / std per channel with the given parameters.
Mat standardize(const Eigen::Ref<const Mat>& x, const ZScoreParams& params);

/// Standardizes each channel over its full extent; returns the transformed
/// matrix and the parameters needed for exact inversion.
std::pair<Mat, ZScoreParams> zscore(const Eigen::Ref<const Mat>& x);

/// x * std + mean; exact inverse of standardize with the same parameters.
Mat inverse_zscore(const Eigen::Ref<const Mat>& x, const ZScoreParams& params);

struct ConditioningOptions {
  bool zero_phase = true;
  bool filter_enabled = true;
  Index stats_samples = -1;  ///< standardization window; -1 = full trial
};

/// Per coordinate channel of a pruned TrackSet: standardize, then low-pass.
/// Channel order is (point 0 x, point 0 y, point 1 x, ...).
FeatureMatrix build_feature_matrix(const TrackSet& tracks, const ButterworthDesign& design,
                                   const ConditioningOptions& options = {});

}  // namespace echoflow

#include "echoflow/signal.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

namespace echoflow {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

AngleSeries resample_to(const AngleSeries& series, const Vec& target_times_s) {
  series.validate();
  if (series.size() < 2) throw ValidationError("resample: need at least 2 source samples");

  const Vec& t = series.t_s;
  AngleSeries out;
  out.t_s = target_times_s;
  out.theta_deg.resize(target_times_s.size());

  for (Index i = 0; i < target_times_s.size(); ++i) {
    double tt = target_times_s[i];
    if (tt < t[0] || tt > t[t.size() - 1]) {
      std::ostringstream os;
      os << "resample: target time " << tt << " s outside source range [" << t[0] << ", "
         << t[t.size() - 1] << "]";
      throw ValidationError(os.str());
    }
    // Bracketing source interval [j, j+1].
    const double* begin = t.data();
    const double* pos = std::upper_bound(begin, begin + t.size(), tt);
    Index j = std::min<Index>(std::max<Index>(static_cast<Index>(pos - begin) - 1, 0),
                              t.size() - 2);
    double u = (tt - t[j]) / (t[j + 1] - t[j]);
    out.theta_deg[i] = (1.0 - u) * series.theta_deg[j] + u * series.theta_deg[j + 1];
  }

  if (out.size() > 1) {
    Vec d = out.t_s.tail(out.size() - 1) - out.t_s.head(out.size() - 1);
    std::vector<double> diffs(d.data(), d.data() + d.size());
    std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
    double median = diffs[diffs.size() / 2];
    out.rate_hz = median > 0.0 ? 1.0 / median : 0.0;
  }
  return out;
}

namespace {

// Expands a monic polynomial from its roots; c[0] = 1.
std::vector<std::complex<double>> poly_from_roots(
    const std::vector<std::complex<double>>& roots) {
  std::vector<std::complex<double>> c{1.0};
  for (const auto& r : roots) {
    c.push_back(0.0);
    for (std::size_t j = c.size() - 1; j >= 1; --j) c[j] -= r * c[j - 1];
  }
  return c;
}

}  // namespace

ButterworthDesign design_butterworth(int order, double cutoff_hz, double sample_rate_hz) {
  if (order < 1) throw ValidationError("butterworth: order must be >= 1");
  if (!(sample_rate_hz > 0.0)) throw ValidationError("butterworth: sample rate must be > 0");
  if (!(cutoff_hz > 0.0) || cutoff_hz >= sample_rate_hz / 2.0) {
    std::ostringstream os;
    os << "butterworth: cutoff " << cutoff_hz << " Hz must lie in (0, Nyquist = "
       << sample_rate_hz / 2.0 << " Hz)";
    throw ValidationError(os.str());
  }

  // Analog prototype poles on the left-half-plane Butterworth circle, scaled
  // by the prewarped cutoff so the bilinear transform lands the -3 dB point
  // exactly at cutoff_hz.
  const double fs2 = 2.0 * sample_rate_hz;
  const double warped = fs2 * std::tan(kPi * cutoff_hz / sample_rate_hz);
  std::vector<std::complex<double>> zpoles(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k) {
    double angle = kPi * (2.0 * k + order + 1.0) / (2.0 * order);
    std::complex<double> s = warped * std::exp(std::complex<double>(0.0, angle));
    zpoles[static_cast<std::size_t>(k)] = (fs2 + s) / (fs2 - s);
  }

  // All zeros at z = -1.
  std::vector<std::complex<double>> zzeros(static_cast<std::size_t>(order),
                                           std::complex<double>(-1.0, 0.0));

  auto ac = poly_from_roots(zpoles);
  auto bc = poly_from_roots(zzeros);

  ButterworthDesign design;
  design.order = order;
  design.cutoff_hz = cutoff_hz;
  design.sample_rate_hz = sample_rate_hz;
  design.a.resize(order + 1);
  design.b.resize(order + 1);
  for (int i = 0; i <= order; ++i) {
    design.a[i] = ac[static_cast<std::size_t>(i)].real();
    design.b[i] = bc[static_cast<std::size_t>(i)].real();
  }
  // Normalize to unit DC gain: H(1) = sum(b)/sum(a) = 1.
  design.b *= design.a.sum() / design.b.sum();
  return design;
}

double butterworth_magnitude(const ButterworthDesign& design, double f_hz) {
  std::complex<double> z = std::exp(std::complex<double>(0.0, 2.0 * kPi * f_hz /
                                                                  design.sample_rate_hz));
  std::complex<double> num = 0.0, den = 0.0;
  std::complex<double> zk = 1.0;
  for (Index i = 0; i < design.b.size(); ++i) {
    num += design.b[i] * zk;
    den += design.a[i] * zk;
    zk /= z;  // z^-i terms
  }
  return std::abs(num / den);
}

namespace {

// Steady-state state vector for a unit-amplitude constant input (direct form
// II transposed); scaled by the first sample it removes startup transients.
Vec lfilter_zi(const Vec& b, const Vec& a) {
  const Index n = b.size() - 1;
  Mat m = Mat::Identity(n, n);
  // I - companion(a)^T
  for (Index i = 0; i < n; ++i) m(i, 0) += a[i + 1];
  for (Index i = 0; i + 1 < n; ++i) m(i, i + 1) -= 1.0;
  Vec rhs(n);
  for (Index i = 0; i < n; ++i) rhs[i] = b[i + 1] - a[i + 1] * b[0];
  return m.partialPivLu().solve(rhs);
}

Vec lfilter(const Vec& b, const Vec& a, const Eigen::Ref<const Vec>& x, const Vec& z_init) {
  const Index n = b.size() - 1;
  Vec z = z_init;
  Vec y(x.size());
  for (Index k = 0; k < x.size(); ++k) {
    double xk = x[k];
    double yk = b[0] * xk + z[0];
    for (Index i = 0; i + 1 < n; ++i) z[i] = b[i + 1] * xk + z[i + 1] - a[i + 1] * yk;
    z[n - 1] = b[n] * xk - a[n] * yk;
    y[k] = yk;
  }
  return y;
}

}  // namespace

Vec filter_forward(const ButterworthDesign& design, const Eigen::Ref<const Vec>& x) {
  if (x.size() == 0) return Vec();
  Vec zi = lfilter_zi(design.b, design.a);
  return lfilter(design.b, design.a, x, Vec(zi * x[0]));
}

Vec filtfilt(const ButterworthDesign& design, const Eigen::Ref<const Vec>& x) {
  const Index pad = 3 * (static_cast<Index>(design.order) + 1);
  if (x.size() <= pad) {
    std::ostringstream os;
    os << "filtfilt: signal length " << x.size() << " must exceed padding length " << pad;
    throw ValidationError(os.str());
  }
  const Index n = x.size();

  Vec ext(n + 2 * pad);
  for (Index i = 0; i < pad; ++i) ext[i] = 2.0 * x[0] - x[pad - i];
  ext.segment(pad, n) = x;
  for (Index i = 0; i < pad; ++i) ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  const Vec zi = lfilter_zi(design.b, design.a);
  Vec y = lfilter(design.b, design.a, ext, Vec(zi * ext[0]));
  y.reverseInPlace();
  y = lfilter(design.b, design.a, y, Vec(zi * y[0]));
  y.reverseInPlace();
  return y.segment(pad, n);
}

ZScoreParams zscore_params(const Eigen::Ref<const Mat>& x, Index stats_cols) {
  const Index cols = stats_cols < 0 ? x.cols() : stats_cols;
  if (cols < 1 || cols > x.cols()) throw ValidationError("zscore: invalid stats window");
  ZScoreParams params;
  params.mean.resize(x.rows());
  params.stddev.resize(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    double mu = x.row(i).head(cols).mean();
    double var = (x.row(i).head(cols).array() - mu).square().sum() / static_cast<double>(cols);
    double sigma = std::sqrt(var);
    if (!(sigma > 1e-15 * std::max(1.0, std::abs(mu)))) {
      std::ostringstream os;
      os << "channel " << i << " has zero variance and cannot be standardized";
      throw DegenerateChannelError(os.str());
    }
    params.mean[i] = mu;
    params.stddev[i] = sigma;
  }
  return params;
}

Mat standardize(const Eigen::Ref<const Mat>& x, const ZScoreParams& params) {
  if (params.channels() != x.rows()) {
    std::ostringstream os;
    os << "standardize: " << params.channels() << " parameter channels vs " << x.rows()
       << " data channels";
    throw ValidationError(os.str());
  }
  Mat out = x;
  out.colwise() -= params.mean;
  out.array().colwise() /= params.stddev.array();
  return out;
}

std::pair<Mat, ZScoreParams> zscore(const Eigen::Ref<const Mat>& x) {
  ZScoreParams params = zscore_params(x);
  return {standardize(x, params), params};
}

Mat inverse_zscore(const Eigen::Ref<const Mat>& x, const ZScoreParams& params) {
  if (params.channels() != x.rows()) {
    std::ostringstream os;
    os << "inverse_zscore: " << params.channels() << " parameter channels vs " << x.rows()
       << " data channels";
    throw ValidationError(os.str());
  }
  Mat out = x;
  out.array().colwise() *= params.stddev.array();
  out.colwise() += params.mean;
  return out;
}

FeatureMatrix build_feature_matrix(const TrackSet& tracks, const ButterworthDesign& design,
                                   const ConditioningOptions& options) {
  if (tracks.n_points() == 0) throw ValidationError("feature matrix: no tracks");
  if (tracks.n_alive() != tracks.n_points()) {
    throw ValidationError("feature matrix: tracks must be pruned (all alive)");
  }

  const Index n_points = tracks.n_points();
  const Index n_frames = tracks.n_frames();
  FeatureMatrix fm;
  fm.values.resize(2 * n_points, n_frames);
  fm.channel_ids.resize(static_cast<std::size_t>(2 * n_points));
  for (Index i = 0; i < n_points; ++i) {
    fm.values.row(2 * i) = tracks.xs.row(i);
    fm.values.row(2 * i + 1) = tracks.ys.row(i);
    int pid = tracks.point_ids[static_cast<std::size_t>(i)];
    fm.channel_ids[static_cast<std::size_t>(2 * i)] = ChannelId{pid, 'x'};
    fm.channel_ids[static_cast<std::size_t>(2 * i + 1)] = ChannelId{pid, 'y'};
  }

  // Check variance per channel up front so the error can name the offending
  // (point, axis) pair rather than a bare row number.
  const Index stats_cols = options.stats_samples < 0 ? n_frames : options.stats_samples;
  for (Index c = 0; c < fm.values.rows(); ++c) {
    try {
      zscore_params(fm.values.row(c), stats_cols);
    } catch (const DegenerateChannelError&) {
      const ChannelId& id = fm.channel_ids[static_cast<std::size_t>(c)];
      std::ostringstream os;
      os << "feature channel (point " << id.point_id << ", axis " << id.axis
         << ") has zero variance; a perfectly static point cannot be standardized";
      throw DegenerateChannelError(os.str());
    }
  }
  fm.zparams = zscore_params(fm.values, options.stats_samples);
  fm.values = standardize(fm.values, fm.zparams);

  if (options.filter_enabled) {
    for (Index c = 0; c < fm.values.rows(); ++c) {
      Vec channel = fm.values.row(c).transpose();
      fm.values.row(c) = (options.zero_phase ? filtfilt(design, channel)
                                             : filter_forward(design, channel))
                             .transpose();
    }
  }
  return fm;
}

}  // namespace echoflow

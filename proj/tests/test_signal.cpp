#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "echoflow/rng.hpp"
#include "echoflow/signal.hpp"

using namespace echoflow;

namespace {

constexpr double kPi = 3.14159265358979323846;

AngleSeries make_series(const Vec& t, const Vec& theta, double rate) {
  AngleSeries s;
  s.t_s = t;
  s.theta_deg = theta;
  s.rate_hz = rate;
  return s;
}

double to_db(double mag) { return 20.0 * std::log10(mag); }

// Warped analytic Butterworth magnitude for a bilinear-transform design.
double analytic_mag(int order, double f, double fc, double fs) {
  double ratio = std::tan(kPi * f / fs) / std::tan(kPi * fc / fs);
  return 1.0 / std::sqrt(1.0 + std::pow(ratio, 2.0 * order));
}

// Integer lag of the cross-correlation peak between two equal-length signals.
Index xcorr_peak_lag(const Vec& a, const Vec& b, Index max_lag) {
  double best = -1e300;
  Index best_lag = 0;
  for (Index lag = -max_lag; lag <= max_lag; ++lag) {
    double s = 0.0;
    for (Index i = std::max<Index>(0, -lag); i < a.size() && i + lag < b.size(); ++i) {
      s += a[i] * b[i + lag];
    }
    if (s > best) {
      best = s;
      best_lag = lag;
    }
  }
  return best_lag;
}

}  // namespace

TEST_CASE("resampling onto the source grid is the identity") {
  Vec t = Vec::LinSpaced(100, 0.0, 0.099);
  Vec theta = t.array().sin();
  AngleSeries s = make_series(t, theta, 1000.0);
  AngleSeries r = resample_to(s, t);
  CHECK((r.theta_deg - theta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linear interpolation is exact on affine signals") {
  Vec t = Vec::LinSpaced(1000, 0.0, 0.999);
  Vec theta = 3.5 * t.array() - 0.75;
  AngleSeries s = make_series(t, theta, 1000.0);
  Vec target = Vec::LinSpaced(63, 0.0, 62.0 / 63.0 * 0.999);
  AngleSeries r = resample_to(s, target);
  for (Index i = 0; i < r.size(); ++i) {
    double expected = 3.5 * target[i] - 0.75;
    CHECK(std::abs(r.theta_deg[i] - expected) <= 1e-12 * std::max(1.0, std::abs(expected)));
  }
}

TEST_CASE("1000 Hz sine resampled to 63 Hz matches direct evaluation") {
  const double rate = 1000.0;
  const Index n = 4001;  // 4 s
  Vec t = Vec::LinSpaced(n, 0.0, static_cast<double>(n - 1) / rate);
  Vec theta = (2.0 * kPi / 4.0 * t.array()).sin() * 20.0;  // period 4 s
  AngleSeries s = make_series(t, theta, rate);

  Vec target(252);
  for (Index k = 0; k < 252; ++k) target[k] = static_cast<double>(k) / 63.0;
  AngleSeries r = resample_to(s, target);
  for (Index k = 0; k < r.size(); ++k) {
    double expected = 20.0 * std::sin(2.0 * kPi / 4.0 * target[k]);
    CHECK(std::abs(r.theta_deg[k] - expected) < 1e-5);
  }
  CHECK(r.rate_hz == doctest::Approx(63.0).epsilon(1e-6));
}

TEST_CASE("resampling outside the source range fails") {
  Vec t = Vec::LinSpaced(10, 0.0, 0.009);
  AngleSeries s = make_series(t, t, 1000.0);
  Vec target(1);
  target[0] = 0.0085;
  CHECK_NOTHROW(resample_to(s, target));
  target[0] = 0.02;
  CHECK_THROWS_AS(resample_to(s, target), ValidationError);
  target[0] = -0.001;
  CHECK_THROWS_AS(resample_to(s, target), ValidationError);
}

TEST_CASE("butterworth design has unit DC gain and -3.0103 dB at cutoff") {
  for (int order : {1, 2, 4}) {
    ButterworthDesign d = design_butterworth(order, 6.0, 63.0);
    CHECK(d.a[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(butterworth_magnitude(d, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    double db_at_cutoff = to_db(butterworth_magnitude(d, 6.0));
    CHECK(std::abs(db_at_cutoff - (-3.0102999566398120)) < 0.01);
  }
}

TEST_CASE("order-2 magnitude at twice a low cutoff matches 1/sqrt(1+(f/fc)^4)") {
  // Warping is negligible when the cutoff is far below Nyquist.
  ButterworthDesign d = design_butterworth(2, 0.5, 200.0);
  double got = to_db(butterworth_magnitude(d, 1.0));
  double want = to_db(1.0 / std::sqrt(1.0 + std::pow(2.0, 4.0)));
  CHECK(std::abs(got - want) < 0.05);
}

TEST_CASE("designed magnitude matches the warped analytic response everywhere") {
  for (int order : {2, 4}) {
    ButterworthDesign d = design_butterworth(order, 6.0, 63.0);
    const int n = 200;
    for (int i = 0; i < n; ++i) {
      double f = 31.5 * static_cast<double>(i + 1) / static_cast<double>(n + 1);
      double got = to_db(butterworth_magnitude(d, f));
      double want = to_db(analytic_mag(order, f, 6.0, 63.0));
      CHECK(std::abs(got - want) < 0.05);
    }
  }
}

TEST_CASE("cutoff at or above Nyquist is rejected") {
  CHECK_THROWS_AS(design_butterworth(2, 31.5, 63.0), ValidationError);
  CHECK_THROWS_AS(design_butterworth(2, 40.0, 63.0), ValidationError);
  CHECK_THROWS_AS(design_butterworth(0, 6.0, 63.0), ValidationError);
  CHECK_THROWS_AS(design_butterworth(2, -1.0, 63.0), ValidationError);
}

TEST_CASE("filtfilt leaves a constant signal unchanged") {
  ButterworthDesign d = design_butterworth(2, 6.0, 63.0);
  Vec x = Vec::Constant(100, 3.7);
  Vec y = filtfilt(d, x);
  REQUIRE(y.size() == x.size());
  CHECK((y.array() - 3.7).abs().maxCoeff() < 1e-9);
  // The causal single pass preserves constants too (steady-state start).
  Vec yc = filter_forward(d, x);
  CHECK((yc.array() - 3.7).abs().maxCoeff() < 1e-9);
}

TEST_CASE("filtfilt is zero-phase and amplitude-true for in-band sinusoids") {
  ButterworthDesign d = design_butterworth(2, 6.0, 63.0);
  const Index n = 1260;  // 20 s
  const double f0 = 0.3;  // cutoff / 20
  Vec x(n);
  for (Index i = 0; i < n; ++i) x[i] = std::sin(2.0 * kPi * f0 * static_cast<double>(i) / 63.0);
  Vec y = filtfilt(d, x);

  // Compare on the interior to keep edge transients out of the amplitude check.
  Index lo = 100, hi = n - 100;
  double ax = x.segment(lo, hi - lo).cwiseAbs().maxCoeff();
  double ay = y.segment(lo, hi - lo).cwiseAbs().maxCoeff();
  CHECK(std::abs(ay - ax) / ax < 0.005);
  CHECK(xcorr_peak_lag(x, y, 40) == 0);

  // The single-pass filter lags; zero phase is specific to filtfilt.
  Vec yc = filter_forward(d, x);
  CHECK(xcorr_peak_lag(x, yc, 40) != 0);
}

TEST_CASE("filtfilt attenuates out-of-band noise by at least 20 dB") {
  ButterworthDesign d = design_butterworth(2, 6.0, 63.0);
  const Index n = 4096;
  Pcg32 rng(99);
  Vec x(n);
  for (Index i = 0; i < n; ++i) x[i] = rng.next_gaussian();
  Vec y = filtfilt(d, x);

  // Periodogram via direct DFT; compare power above 12 Hz.
  double in_power = 0.0, out_power = 0.0;
  for (Index k = 0; k < n / 2; ++k) {
    double f = 63.0 * static_cast<double>(k) / static_cast<double>(n);
    if (f <= 12.0) continue;
    std::complex<double> xin = 0.0, xout = 0.0;
    for (Index i = 0; i < n; ++i) {
      double phase = -2.0 * kPi * static_cast<double>(k) * static_cast<double>(i) /
                     static_cast<double>(n);
      std::complex<double> w(std::cos(phase), std::sin(phase));
      xin += x[i] * w;
      xout += y[i] * w;
    }
    in_power += std::norm(xin);
    out_power += std::norm(xout);
  }
  CHECK(out_power < in_power * 1e-2);  // >= 20 dB
}

TEST_CASE("filtfilt is idempotent on an in-band signal within 1%") {
  ButterworthDesign d = design_butterworth(2, 6.0, 63.0);
  const Index n = 3780;
  Vec x(n);
  for (Index i = 0; i < n; ++i) {
    x[i] = 40.0 * std::sin(2.0 * kPi * 0.25 * static_cast<double>(i) / 63.0);
  }
  Vec once = filtfilt(d, x);
  Vec twice = filtfilt(d, once);
  CHECK((twice - once).norm() / once.norm() < 0.01);
}

TEST_CASE("too-short signals are rejected by filtfilt") {
  ButterworthDesign d = design_butterworth(2, 6.0, 63.0);
  CHECK_THROWS_AS(filtfilt(d, Vec::Ones(9)), ValidationError);  // pad length = 9
  CHECK_NOTHROW(filtfilt(d, Vec::Ones(10)));
}

TEST_CASE("zscore hand examples") {
  Mat pm(1, 2);
  pm << -1.0, 1.0;
  auto [std_pm, params_pm] = zscore(pm);
  CHECK(std_pm(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std_pm(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(params_pm.mean[0] == doctest::Approx(0.0));
  CHECK(params_pm.stddev[0] == doctest::Approx(1.0));

  Mat m(1, 3);
  m << 1.0, 2.0, 3.0;
  auto [standardized, params] = zscore(m);
  CHECK(params.mean[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(params.stddev[0] == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
  CHECK(standardized(0, 0) == doctest::Approx(-1.2247).epsilon(1e-4));
  CHECK(standardized(0, 1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(standardized(0, 2) == doctest::Approx(1.2247).epsilon(1e-4));

  Mat back = inverse_zscore(standardized, params);
  CHECK(back(0, 0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(back(0, 2) == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("constant channels cannot be standardized") {
  Mat m(2, 4);
  m.row(0) << 1.0, 2.0, 3.0, 4.0;
  m.row(1) << 5.0, 5.0, 5.0, 5.0;
  CHECK_THROWS_AS(zscore(m), DegenerateChannelError);
}

TEST_CASE("standardized channels have zero mean and unit population std") {
  Pcg32 rng(123);
  Mat m(6, 500);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      m(i, j) = 100.0 * rng.next_gaussian() + 40.0 * static_cast<double>(i);
    }
  }
  auto [standardized, params] = zscore(m);
  for (Index i = 0; i < m.rows(); ++i) {
    double mean = standardized.row(i).mean();
    double var = (standardized.row(i).array() - mean).square().sum() /
                 static_cast<double>(m.cols());
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
  }

  // Round trip within 1e-12 relative.
  Mat back = inverse_zscore(standardized, params);
  double rel = (back - m).cwiseAbs().maxCoeff() / m.cwiseAbs().maxCoeff();
  CHECK(rel < 1e-12);

  // Zeros map back to the channel means.
  Mat zeros = Mat::Zero(m.rows(), 3);
  Mat means = inverse_zscore(zeros, params);
  for (Index i = 0; i < m.rows(); ++i) {
    CHECK(means(i, 0) == doctest::Approx(params.mean[i]).epsilon(1e-12));
  }
}

TEST_CASE("inverse_zscore rejects channel-count mismatches") {
  Mat m(2, 3);
  m.setRandom();
  ZScoreParams p;
  p.mean = Vec::Zero(3);
  p.stddev = Vec::Ones(3);
  CHECK_THROWS_AS(inverse_zscore(m, p), ValidationError);
}

TEST_CASE("feature matrix shape, order and conditioning") {
  TrackSet t;
  const Index n_frames = 100;
  t.xs.resize(2, n_frames);
  t.ys.resize(2, n_frames);
  for (Index k = 0; k < n_frames; ++k) {
    double phase = 2.0 * kPi * static_cast<double>(k) / 63.0;
    t.xs(0, k) = 50.0 + 3.0 * std::sin(phase);
    t.ys(0, k) = 40.0 + 1.0 * std::cos(phase);
    t.xs(1, k) = 80.0 + 2.0 * std::sin(phase);
    t.ys(1, k) = 20.0 + 0.5 * std::cos(phase);
  }
  t.alive = {1, 1};
  t.point_ids = {4, 9};

  ButterworthDesign d = design_butterworth(2, 6.0, 63.0);
  FeatureMatrix fm = build_feature_matrix(t, d);
  REQUIRE(fm.values.rows() == 4);
  REQUIRE(fm.values.cols() == n_frames);
  CHECK(fm.channel_ids[0].point_id == 4);
  CHECK(fm.channel_ids[0].axis == 'x');
  CHECK(fm.channel_ids[1].axis == 'y');
  CHECK(fm.channel_ids[2].point_id == 9);
  CHECK(fm.zparams.mean[0] == doctest::Approx(t.xs.row(0).mean()).epsilon(1e-12));

  // Passthrough mode keeps the standardized values unfiltered.
  ConditioningOptions off;
  off.filter_enabled = false;
  FeatureMatrix raw = build_feature_matrix(t, d, off);
  CHECK(raw.values.rows() == fm.values.rows());
  CHECK_FALSE((raw.values - fm.values).cwiseAbs().maxCoeff() == 0.0);

  // A single-track set gives a 2 x T matrix.
  TrackSet single;
  single.xs = t.xs.topRows(1);
  single.ys = t.ys.topRows(1);
  single.alive = {1};
  single.point_ids = {0};
  CHECK(build_feature_matrix(single, d).values.rows() == 2);
}

TEST_CASE("static tracks are reported as degenerate channels") {
  TrackSet t;
  t.xs = Mat::Constant(1, 50, 30.0);
  t.ys = Mat::Constant(1, 50, 40.0);
  t.alive = {1};
  t.point_ids = {7};
  ButterworthDesign d = design_butterworth(2, 6.0, 63.0);
  try {
    build_feature_matrix(t, d);
    FAIL("expected DegenerateChannelError");
  } catch (const DegenerateChannelError& e) {
    std::string msg = e.what();
    CHECK(msg.find("point 7") != std::string::npos);
  }
}

TEST_CASE("unpruned tracks are rejected by the feature builder") {
  TrackSet t;
  t.xs = Mat::Ones(2, 10);
  t.ys = Mat::Ones(2, 10);
  t.alive = {1, 0};
  t.point_ids = {0, 1};
  CHECK_THROWS_AS(build_feature_matrix(t, design_butterworth(2, 6.0, 63.0)),
                  ValidationError);
}

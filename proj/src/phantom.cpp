#include "echoflow/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "echoflow/rng.hpp"

namespace echoflow {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void MotionProtocol::validate() const {
  if (!(period_s > 0.0)) throw ConfigError("protocol: period_s must be > 0");
  if (!(frame_rate_hz > 0.0)) throw ConfigError("protocol: frame_rate_hz must be > 0");
  if (trim_head_cycles < 0 || trim_tail_cycles < 0)
    throw ConfigError("protocol: trim cycle counts must be >= 0");
  if (n_cycles <= trim_head_cycles + trim_tail_cycles) {
    std::ostringstream os;
    os << "protocol: n_cycles (" << n_cycles << ") must exceed trimmed cycles ("
       << trim_head_cycles + trim_tail_cycles << ")";
    throw ConfigError(os.str());
  }
  if (amplitudes_deg.empty()) throw ConfigError("protocol: amplitudes_deg must be non-empty");
  for (double a : amplitudes_deg) {
    if (!(a > 0.0)) throw ConfigError("protocol: amplitudes must be > 0");
  }
  if (samples_per_cycle() < 2) throw ConfigError("protocol: fewer than 2 samples per cycle");
}

Index MotionProtocol::samples_per_cycle() const {
  return static_cast<Index>(std::llround(period_s * frame_rate_hz));
}

void PhantomConfig::validate() const {
  if (width_px < 64 || height_px < 64)
    throw ConfigError("phantom: width_px and height_px must be >= 64");
  if (n_speckles < 100) throw ConfigError("phantom: n_speckles must be >= 100");
  if (!(speckle_sigma_px > 0.0)) throw ConfigError("phantom: speckle_sigma_px must be > 0");
  if (pixel_noise_sigma < 0.0) throw ConfigError("phantom: pixel_noise_sigma must be >= 0");
  if (!(displacement_gain_px_per_deg >= 0.0))
    throw ConfigError("phantom: displacement gain must be >= 0");
}

double depth_gain(const PhantomConfig& config, Index row) {
  double g = config.displacement_gain_px_per_deg;
  if (config.depth_profile == DepthProfile::constant) return g;
  double frac = config.height_px > 1
                    ? static_cast<double>(row) / static_cast<double>(config.height_px - 1)
                    : 0.0;
  return 0.5 * g * (1.0 + frac);
}

AngleSeries generate_target_signal(const MotionProtocol& protocol) {
  protocol.validate();

  // Set semantics: draw from the sorted unique amplitudes so the sequence
  // does not depend on config listing order.
  std::vector<double> amps = protocol.amplitudes_deg;
  std::sort(amps.begin(), amps.end());
  amps.erase(std::unique(amps.begin(), amps.end()), amps.end());

  Pcg32 rng(protocol.rng_seed);
  std::vector<double> cycle_amp(static_cast<std::size_t>(protocol.n_cycles));
  for (auto& a : cycle_amp) {
    a = amps[rng.next_below(static_cast<std::uint32_t>(amps.size()))];
  }

  const Index per_cycle = protocol.samples_per_cycle();
  const int first = protocol.trim_head_cycles;
  const int last = protocol.n_cycles - protocol.trim_tail_cycles;  // exclusive
  const Index n = static_cast<Index>(last - first) * per_cycle;

  AngleSeries series;
  series.t_s.resize(n);
  series.theta_deg.resize(n);
  series.rate_hz = protocol.frame_rate_hz;
  Index k = 0;
  for (int c = first; c < last; ++c) {
    // Each retained cycle starts at 0 deg rising.
    for (Index j = 0; j < per_cycle; ++j, ++k) {
      series.t_s[k] = static_cast<double>(k) / protocol.frame_rate_hz;
      series.theta_deg[k] =
          cycle_amp[static_cast<std::size_t>(c)] *
          std::sin(2.0 * kPi * static_cast<double>(j) / static_cast<double>(per_cycle));
    }
  }
  return series;
}

namespace {

ImageF render_base_image(const PhantomConfig& config, Pcg32& rng) {
  const Index w = config.width_px;
  const Index h = config.height_px;
  ImageF base = ImageF::Zero(h, w);
  const double sigma = config.speckle_sigma_px;
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
  const Index reach = static_cast<Index>(std::ceil(4.0 * sigma));

  for (int i = 0; i < config.n_speckles; ++i) {
    double cx = rng.next_unit() * static_cast<double>(w);
    double cy = rng.next_unit() * static_cast<double>(h);
    double amp = 0.25 + 0.75 * rng.next_unit();
    Index x0 = std::max<Index>(0, static_cast<Index>(std::floor(cx)) - reach);
    Index x1 = std::min<Index>(w - 1, static_cast<Index>(std::floor(cx)) + reach);
    Index y0 = std::max<Index>(0, static_cast<Index>(std::floor(cy)) - reach);
    Index y1 = std::min<Index>(h - 1, static_cast<Index>(std::floor(cy)) + reach);
    for (Index y = y0; y <= y1; ++y) {
      float* row = &base(y, 0);
      double dy = static_cast<double>(y) - cy;
      for (Index x = x0; x <= x1; ++x) {
        double dx = static_cast<double>(x) - cx;
        row[x] += static_cast<float>(amp * std::exp(-(dx * dx + dy * dy) * inv_two_sigma2));
      }
    }
  }

  float peak = base.maxCoeff();
  if (peak > 0.0f) base /= peak;
  return base;
}

/// Linear sample of one image row at fractional x; outside the row -> 0.
inline float sample_row(const float* row, Index w, double x) {
  if (x < 0.0 || x > static_cast<double>(w - 1)) return 0.0f;
  Index ix = static_cast<Index>(std::floor(x));
  if (ix >= w - 1) return row[w - 1];
  float fx = static_cast<float>(x - static_cast<double>(ix));
  return (1.0f - fx) * row[ix] + fx * row[ix + 1];
}

}  // namespace

FrameSequence render_phantom(const PhantomConfig& config, const AngleSeries& angles) {
  config.validate();
  angles.validate();
  if (angles.size() == 0) throw ValidationError("phantom: angle series is empty");

  // Peak gain over rows (the linear ramp tops out at the configured gain).
  double gain_max = config.displacement_gain_px_per_deg;

  // Trackability guard: the frame-to-frame displacement anywhere in the
  // field must stay under width/4, else no tracker could follow it.
  double max_step_deg = 0.0;
  for (Index k = 1; k < angles.size(); ++k) {
    max_step_deg = std::max(max_step_deg, std::abs(angles.theta_deg[k] - angles.theta_deg[k - 1]));
  }
  double max_step_px = gain_max * max_step_deg;
  if (max_step_px > static_cast<double>(config.width_px) / 4.0) {
    std::ostringstream os;
    os << "phantom: frame-to-frame displacement " << max_step_px
       << " px exceeds width/4 = " << static_cast<double>(config.width_px) / 4.0
       << " px; tracking would be unphysical";
    throw ConfigError(os.str());
  }

  Pcg32 rng(config.rng_seed);
  const ImageF base = render_base_image(config, rng);
  const Index w = config.width_px;
  const Index h = config.height_px;

  std::vector<double> row_gain(static_cast<std::size_t>(h));
  for (Index y = 0; y < h; ++y) row_gain[static_cast<std::size_t>(y)] = depth_gain(config, y);

  FrameSequence seq;
  seq.frame_rate_hz = angles.rate_hz;
  seq.frames.reserve(static_cast<std::size_t>(angles.size()));

  ImageF warped(h, w);
  const double noise_sigma = config.pixel_noise_sigma;
  for (Index k = 0; k < angles.size(); ++k) {
    const double theta = angles.theta_deg[k];
    for (Index y = 0; y < h; ++y) {
      const double shift = row_gain[static_cast<std::size_t>(y)] * theta;
      const float* src = &base(y, 0);
      float* dst = &warped(y, 0);
      for (Index x = 0; x < w; ++x) {
        dst[x] = sample_row(src, w, static_cast<double>(x) - shift);
      }
    }
    ImageU8 frame(h, w);
    if (noise_sigma > 0.0) {
      for (Index y = 0; y < h; ++y) {
        const float* src = &warped(y, 0);
        std::uint8_t* dst = &frame(y, 0);
        for (Index x = 0; x < w; ++x) {
          double v = static_cast<double>(src[x]) + noise_sigma * rng.next_gaussian();
          v = std::min(1.0, std::max(0.0, v));
          dst[x] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
      }
    } else {
      for (Index y = 0; y < h; ++y) {
        const float* src = &warped(y, 0);
        std::uint8_t* dst = &frame(y, 0);
        for (Index x = 0; x < w; ++x) {
          double v = std::min(1.0, std::max(0.0, static_cast<double>(src[x])));
          dst[x] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
      }
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

}  // namespace echoflow

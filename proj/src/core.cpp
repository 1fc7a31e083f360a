#include "echoflow/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

namespace echoflow {

void AngleSeries::validate() const {
  if (t_s.size() != theta_deg.size()) {
    std::ostringstream os;
    os << "angle series length mismatch: " << t_s.size() << " timestamps vs "
       << theta_deg.size() << " angles";
    throw ValidationError(os.str());
  }
  for (Index i = 1; i < t_s.size(); ++i) {
    if (!(t_s[i] > t_s[i - 1])) {
      std::ostringstream os;
      os << "timestamps not strictly increasing at row " << i << " (t=" << t_s[i - 1]
         << " then t=" << t_s[i] << ")";
      throw ValidationError(os.str());
    }
  }
  for (Index i = 0; i < theta_deg.size(); ++i) {
    if (!std::isfinite(theta_deg[i]) || !std::isfinite(t_s[i])) {
      std::ostringstream os;
      os << "non-finite value at row " << i;
      throw ValidationError(os.str());
    }
  }
}

void FrameSequence::validate() const {
  if (frame_rate_hz <= 0.0) throw ValidationError("frame rate must be positive");
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (frames[k].rows() != height() || frames[k].cols() != width()) {
      std::ostringstream os;
      os << "frame " << k << " is " << frames[k].cols() << "x" << frames[k].rows()
         << " but frame 0 is " << width() << "x" << height();
      throw ValidationError(os.str());
    }
  }
}

Index TrackSet::n_alive() const {
  return static_cast<Index>(std::count(alive.begin(), alive.end(), std::uint8_t{1}));
}

void parallel_for_chunks(Index n, const std::function<void(Index, Index)>& fn) {
  if (n <= 0) return;
  unsigned hw = std::thread::hardware_concurrency();
  Index n_threads = std::min<Index>(n, hw == 0 ? 1 : static_cast<Index>(hw));
  if (n_threads <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(n_threads));
  Index chunk = (n + n_threads - 1) / n_threads;
  for (Index t = 0; t < n_threads; ++t) {
    Index begin = t * chunk;
    Index end = std::min(n, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& w : workers) w.join();
}

}  // namespace echoflow

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

#include "echoflow/errors.hpp"

namespace echoflow {

using Index = Eigen::Index;
using Scalar = double;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Row-major dense image, scalar-templated; row = image row, col = x.
template <typename T>
using Image = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ImageU8 = Image<std::uint8_t>;
using ImageF = Image<float>;
using ImageD = Image<double>;

/// Sub-pixel image position. (0, 0) is the center of the top-left pixel,
/// x grows with columns, y with rows.
struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Timestamped joint angles in degrees.
struct AngleSeries {
  Vec t_s;        ///< strictly increasing timestamps, seconds
  Vec theta_deg;  ///< same length as t_s
  double rate_hz = 0.0;

  Index size() const { return theta_deg.size(); }
  void validate() const;
};

/// Ordered grayscale frames on a uniform clock; frame k has implicit index k.
struct FrameSequence {
  std::vector<ImageU8> frames;
  double frame_rate_hz = 0.0;

  Index size() const { return static_cast<Index>(frames.size()); }
  Index width() const { return frames.empty() ? 0 : frames.front().cols(); }
  Index height() const { return frames.empty() ? 0 : frames.front().rows(); }
  void validate() const;
};

/// Per-point trajectories across all frames. Row i of xs/ys is point i;
/// column k is frame k. Points that were lost hold NaN from the frame the
/// track died onward and are flagged dead in `alive`.
struct TrackSet {
  Mat xs;  ///< n_points x n_frames
  Mat ys;  ///< n_points x n_frames
  std::vector<std::uint8_t> alive;
  std::vector<int> point_ids;  ///< stable ids from seeding order

  Index n_points() const { return xs.rows(); }
  Index n_frames() const { return xs.cols(); }
  Index n_alive() const;
};

/// Label of one feature channel: which point and which coordinate axis.
struct ChannelId {
  int point_id = 0;
  char axis = 'x';  // 'x' or 'y'
};

inline bool operator==(const ChannelId& a, const ChannelId& b) {
  return a.point_id == b.point_id && a.axis == b.axis;
}

/// Runs fn(begin, end) over [0, n) split into contiguous chunks, one worker
/// thread per chunk. Chunk boundaries depend only on n and the thread count,
/// so any per-index output is deterministic.
void parallel_for_chunks(Index n, const std::function<void(Index, Index)>& fn);

}  // namespace echoflow

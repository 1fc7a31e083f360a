#pragma once

#include <vector>

#include "echoflow/core.hpp"

namespace echoflow {

struct CornerParams {
  int max_corners = 2000;
  double quality_level = 0.01;   ///< fraction of the peak response, in (0,1)
  double min_distance_px = 5.0;  ///< non-maximum suppression radius
  int block_size_px = 3;         ///< structure-tensor window side, odd

  void validate() const;
};

struct FlowParams {
  int window_px = 21;  ///< LK window side, odd >= 5
  int pyramid_levels = 3;
  int max_iters = 30;
  double epsilon_px = 0.01;        ///< per-level convergence threshold
  double min_eig_threshold = 1e-4; ///< trackability floor on normalized intensities

  void validate() const;
};

/// Per-pixel smaller eigenvalue of the 2x2 gradient structure tensor summed
/// over a block_size_px window. Intensities are normalized to [0,1] and
/// gradients are central differences; the response is zero on every pixel
/// whose window or gradient support crosses the image border.
ImageD min_eigenvalue_map(const ImageU8& frame, int block_size_px);

/// Shi-Tomasi seeding: pixels with response >= quality_level * max response,
/// greedily accepted in descending response order with suppression radius
/// min_distance_px, capped at max_corners. Ties break by (row, col) ascending
/// so the result is deterministic.
std::vector<Point2> detect_corners(const ImageU8& frame, const CornerParams& params);

/// Frame-to-frame pyramidal Lucas-Kanade tracking of the seed points through
/// the whole sequence, each point's new position seeding the next frame pair.
/// A point dies when (judged at the finest pyramid level) its window leaves
/// the image, the spatial gradient matrix falls below min_eig_threshold, or
/// the iteration fails to converge; dead points hold NaN thereafter.
TrackSet track_sequence(const FrameSequence& seq, const std::vector<Point2>& seeds,
                        const FlowParams& params);

/// Keeps only tracks that survived to the final frame, order preserved.
TrackSet prune_lost(const TrackSet& tracks);

}  // namespace echoflow

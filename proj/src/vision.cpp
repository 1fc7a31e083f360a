#include "echoflow/vision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

namespace echoflow {

void CornerParams::validate() const {
  if (max_corners < 1) throw ValidationError("corners: max_corners must be >= 1");
  if (!(quality_level > 0.0 && quality_level < 1.0))
    throw ValidationError("corners: quality_level must lie in (0, 1)");
  if (!(min_distance_px >= 1.0)) throw ValidationError("corners: min_distance_px must be >= 1");
  if (block_size_px < 3 || block_size_px % 2 == 0)
    throw ValidationError("corners: block_size_px must be odd and >= 3");
}

void FlowParams::validate() const {
  if (window_px < 5 || window_px % 2 == 0)
    throw ValidationError("flow: window_px must be odd and >= 5");
  if (pyramid_levels < 1) throw ValidationError("flow: pyramid_levels must be >= 1");
  if (max_iters < 1) throw ValidationError("flow: max_iters must be >= 1");
  if (!(epsilon_px > 0.0)) throw ValidationError("flow: epsilon_px must be > 0");
  if (!(min_eig_threshold >= 0.0)) throw ValidationError("flow: min_eig_threshold must be >= 0");
}

ImageD min_eigenvalue_map(const ImageU8& frame, int block_size_px) {
  if (block_size_px < 3 || block_size_px % 2 == 0)
    throw ValidationError("min_eigenvalue_map: block size must be odd and >= 3");
  const Index h = frame.rows();
  const Index w = frame.cols();
  if (h < block_size_px || w < block_size_px) {
    std::ostringstream os;
    os << "min_eigenvalue_map: frame " << w << "x" << h << " smaller than block "
       << block_size_px;
    throw ValidationError(os.str());
  }

  ImageD intensity = frame.cast<double>() / 255.0;

  // Central-difference gradients; zero on the 1-px image border.
  ImageD gx = ImageD::Zero(h, w);
  ImageD gy = ImageD::Zero(h, w);
  for (Index y = 1; y + 1 < h; ++y) {
    for (Index x = 1; x + 1 < w; ++x) {
      gx(y, x) = 0.5 * (intensity(y, x + 1) - intensity(y, x - 1));
      gy(y, x) = 0.5 * (intensity(y + 1, x) - intensity(y - 1, x));
    }
  }

  ImageD ixx = gx * gx;
  ImageD ixy = gx * gy;
  ImageD iyy = gy * gy;

  // Separable box sums over the block window.
  const Index r = block_size_px / 2;
  auto box_sum = [&](const ImageD& src) {
    ImageD rows = ImageD::Zero(h, w);
    for (Index y = 0; y < h; ++y) {
      for (Index x = r; x + r < w; ++x) {
        double s = 0.0;
        for (Index d = -r; d <= r; ++d) s += src(y, x + d);
        rows(y, x) = s;
      }
    }
    ImageD out = ImageD::Zero(h, w);
    for (Index y = r; y + r < h; ++y) {
      for (Index x = r; x + r < w; ++x) {
        double s = 0.0;
        for (Index d = -r; d <= r; ++d) s += rows(y + d, x);
        out(y, x) = s;
      }
    }
    return out;
  };

  ImageD sxx = box_sum(ixx);
  ImageD sxy = box_sum(ixy);
  ImageD syy = box_sum(iyy);

  ImageD response = ImageD::Zero(h, w);
  for (Index y = r; y + r < h; ++y) {
    for (Index x = r; x + r < w; ++x) {
      double tr = sxx(y, x) + syy(y, x);
      double det = sxx(y, x) * syy(y, x) - sxy(y, x) * sxy(y, x);
      double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
      response(y, x) = 0.5 * (tr - disc);
    }
  }
  return response;
}

std::vector<Point2> detect_corners(const ImageU8& frame, const CornerParams& params) {
  params.validate();
  ImageD response = min_eigenvalue_map(frame, params.block_size_px);

  const double peak = response.maxCoeff();
  if (!(peak > 0.0)) return {};
  const double threshold = params.quality_level * peak;

  struct Candidate {
    double resp;
    Index row;
    Index col;
  };
  std::vector<Candidate> candidates;
  for (Index y = 0; y < response.rows(); ++y) {
    for (Index x = 0; x < response.cols(); ++x) {
      if (response(y, x) >= threshold) candidates.push_back({response(y, x), y, x});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.resp != b.resp) return a.resp > b.resp;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });

  // Greedy suppression on a uniform grid: any point closer than the radius to
  // an accepted one lies in the 3x3 cell neighborhood.
  const double radius = params.min_distance_px;
  const double r2 = radius * radius;
  const double cell = radius;
  const Index gw = static_cast<Index>(std::floor(response.cols() / cell)) + 1;
  const Index gh = static_cast<Index>(std::floor(response.rows() / cell)) + 1;
  std::vector<std::vector<Index>> grid(static_cast<std::size_t>(gw * gh));
  std::vector<Point2> accepted;
  accepted.reserve(static_cast<std::size_t>(params.max_corners));

  for (const Candidate& c : candidates) {
    if (static_cast<int>(accepted.size()) >= params.max_corners) break;
    double px = static_cast<double>(c.col);
    double py = static_cast<double>(c.row);
    Index cx = static_cast<Index>(px / cell);
    Index cy = static_cast<Index>(py / cell);
    bool suppressed = false;
    for (Index ny = std::max<Index>(0, cy - 1); ny <= std::min(gh - 1, cy + 1) && !suppressed;
         ++ny) {
      for (Index nx = std::max<Index>(0, cx - 1); nx <= std::min(gw - 1, cx + 1) && !suppressed;
           ++nx) {
        for (Index idx : grid[static_cast<std::size_t>(ny * gw + nx)]) {
          double dx = accepted[static_cast<std::size_t>(idx)].x - px;
          double dy = accepted[static_cast<std::size_t>(idx)].y - py;
          if (dx * dx + dy * dy < r2) {
            suppressed = true;
            break;
          }
        }
      }
    }
    if (suppressed) continue;
    grid[static_cast<std::size_t>(cy * gw + cx)].push_back(
        static_cast<Index>(accepted.size()));
    accepted.push_back(Point2{px, py});
  }
  return accepted;
}

namespace {

std::vector<ImageF> build_pyramid(const ImageU8& frame, int n_levels) {
  std::vector<ImageF> pyramid;
  pyramid.reserve(static_cast<std::size_t>(n_levels));
  pyramid.push_back(frame.cast<float>() / 255.0f);
  for (int l = 1; l < n_levels; ++l) {
    const ImageF& src = pyramid.back();
    const Index h = src.rows(), w = src.cols();
    const Index h2 = (h + 1) / 2, w2 = (w + 1) / 2;
    // 5-tap binomial blur (clamped at edges), then 2x decimation.
    static constexpr float k[5] = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};
    ImageF rows(h2, w);
    for (Index i = 0; i < h2; ++i) {
      const Index y = 2 * i;
      for (Index x = 0; x < w; ++x) {
        float s = 0.0f;
        for (int d = -2; d <= 2; ++d) {
          Index yy = std::clamp<Index>(y + d, 0, h - 1);
          s += k[d + 2] * src(yy, x);
        }
        rows(i, x) = s;
      }
    }
    ImageF out(h2, w2);
    for (Index i = 0; i < h2; ++i) {
      for (Index j = 0; j < w2; ++j) {
        const Index x = 2 * j;
        float s = 0.0f;
        for (int d = -2; d <= 2; ++d) {
          Index xx = std::clamp<Index>(x + d, 0, w - 1);
          s += k[d + 2] * rows(i, xx);
        }
        out(i, j) = s;
      }
    }
    pyramid.push_back(std::move(out));
  }
  return pyramid;
}

// Window support of radius `r` plus the bilinear/gradient border must stay
// inside the image for patch sampling to be valid.
inline bool in_margins(double x, double y, Index w, Index h, int r) {
  const double lo = static_cast<double>(r) + 1.0;
  return x >= lo && y >= lo && x <= static_cast<double>(w - r - 3) &&
         y <= static_cast<double>(h - r - 3);
}

// Bilinear sample of a (2*radius+1)^2 window centered at (cx, cy). Offsets
// are integers, so the four bilinear weights are shared by every pixel of the
// window and sampling reduces to a weighted sum of four shifted rows.
inline void sample_patch(const ImageF& img, double cx, double cy, int radius, float* out) {
  const Index ix = static_cast<Index>(std::floor(cx));
  const Index iy = static_cast<Index>(std::floor(cy));
  const float fx = static_cast<float>(cx - static_cast<double>(ix));
  const float fy = static_cast<float>(cy - static_cast<double>(iy));
  const float w00 = (1.0f - fy) * (1.0f - fx);
  const float w01 = (1.0f - fy) * fx;
  const float w10 = fy * (1.0f - fx);
  const float w11 = fy * fx;
  const int side = 2 * radius + 1;
  for (int j = 0; j < side; ++j) {
    const float* r0 = &img(iy - radius + j, ix - radius);
    const float* r1 = &img(iy - radius + j + 1, ix - radius);
    float* o = out + static_cast<std::ptrdiff_t>(j) * side;
    for (int i = 0; i < side; ++i) {
      o[i] = w00 * r0[i] + w01 * r0[i + 1] + w10 * r1[i] + w11 * r1[i + 1];
    }
  }
}

struct LkScratch {
  std::vector<float> prev_patch;  // (side+2)^2, window plus gradient border
  std::vector<float> prev_i;      // side^2
  std::vector<float> prev_ix;
  std::vector<float> prev_iy;
  std::vector<float> next_patch;

  explicit LkScratch(int window_px) {
    const std::size_t n = static_cast<std::size_t>(window_px) * window_px;
    const std::size_t nb = static_cast<std::size_t>(window_px + 2) * (window_px + 2);
    prev_patch.resize(nb);
    prev_i.resize(n);
    prev_ix.resize(n);
    prev_iy.resize(n);
    next_patch.resize(n);
  }
};

// One point through one frame pair. Coarse levels only refine the guess; all
// death verdicts (bounds, trackability, convergence) are made at the finest
// level.
std::optional<Point2> lk_track_point(const std::vector<ImageF>& prev_pyr,
                                     const std::vector<ImageF>& next_pyr, Point2 p,
                                     const FlowParams& fp, LkScratch& s) {
  const int r = fp.window_px / 2;
  const int side = fp.window_px;
  const int bside = side + 2;
  const double npix = static_cast<double>(side) * static_cast<double>(side);
  const int n_levels = static_cast<int>(prev_pyr.size());

  double dx = 0.0, dy = 0.0;
  for (int l = n_levels - 1; l >= 0; --l) {
    const ImageF& prev = prev_pyr[static_cast<std::size_t>(l)];
    const ImageF& next = next_pyr[static_cast<std::size_t>(l)];
    const double scale = 1.0 / static_cast<double>(1 << l);
    const double px = p.x * scale;
    const double py = p.y * scale;
    if (l != n_levels - 1) {
      dx *= 2.0;
      dy *= 2.0;
    }
    const bool finest = (l == 0);

    if (!in_margins(px, py, prev.cols(), prev.rows(), r + 1)) {
      if (finest) return std::nullopt;
      continue;
    }
    sample_patch(prev, px, py, r + 1, s.prev_patch.data());

    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int j = 0; j < side; ++j) {
      const float* mid = s.prev_patch.data() + static_cast<std::ptrdiff_t>(j + 1) * bside;
      const float* up = s.prev_patch.data() + static_cast<std::ptrdiff_t>(j) * bside;
      const float* down = s.prev_patch.data() + static_cast<std::ptrdiff_t>(j + 2) * bside;
      float* gi = s.prev_i.data() + static_cast<std::ptrdiff_t>(j) * side;
      float* gx = s.prev_ix.data() + static_cast<std::ptrdiff_t>(j) * side;
      float* gy = s.prev_iy.data() + static_cast<std::ptrdiff_t>(j) * side;
      for (int i = 0; i < side; ++i) {
        const float ix = 0.5f * (mid[i + 2] - mid[i]);
        const float iy = 0.5f * (down[i + 1] - up[i + 1]);
        gi[i] = mid[i + 1];
        gx[i] = ix;
        gy[i] = iy;
        sxx += ix * ix;
        sxy += ix * iy;
        syy += iy * iy;
      }
    }

    const double tr = sxx + syy;
    const double det = sxx * syy - sxy * sxy;
    const double min_eig = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det))) / npix;
    if (min_eig < fp.min_eig_threshold || det <= 0.0) {
      if (finest) return std::nullopt;
      continue;
    }

    bool converged = false;
    bool left_bounds = false;
    for (int it = 0; it < fp.max_iters; ++it) {
      const double qx = px + dx;
      const double qy = py + dy;
      if (!in_margins(qx, qy, next.cols(), next.rows(), r)) {
        left_bounds = true;
        break;
      }
      sample_patch(next, qx, qy, r, s.next_patch.data());
      double bx = 0.0, by = 0.0;
      const int n = side * side;
      for (int m = 0; m < n; ++m) {
        const float di = s.prev_i[static_cast<std::size_t>(m)] -
                         s.next_patch[static_cast<std::size_t>(m)];
        bx += di * s.prev_ix[static_cast<std::size_t>(m)];
        by += di * s.prev_iy[static_cast<std::size_t>(m)];
      }
      const double ex = (syy * bx - sxy * by) / det;
      const double ey = (sxx * by - sxy * bx) / det;
      dx += ex;
      dy += ey;
      if (ex * ex + ey * ey < fp.epsilon_px * fp.epsilon_px) {
        converged = true;
        break;
      }
    }
    if (finest && (left_bounds || !converged)) return std::nullopt;
  }
  return Point2{p.x + dx, p.y + dy};
}

int effective_levels(const FlowParams& fp, Index width, Index height) {
  // Each level must leave room for the window, its gradient border and the
  // bilinear support on both sides.
  const Index min_dim = static_cast<Index>(fp.window_px) + 6;
  int levels = 0;
  Index w = width, h = height;
  while (levels < fp.pyramid_levels && w >= min_dim && h >= min_dim) {
    ++levels;
    w = (w + 1) / 2;
    h = (h + 1) / 2;
  }
  return levels;
}

}  // namespace

TrackSet track_sequence(const FrameSequence& seq, const std::vector<Point2>& seeds,
                        const FlowParams& params) {
  params.validate();
  seq.validate();
  if (seeds.empty()) throw ValidationError("track: need at least one seed point");
  if (seq.size() < 2) throw ValidationError("track: need at least two frames");

  const int n_levels = effective_levels(params, seq.width(), seq.height());
  if (n_levels < 1) {
    std::ostringstream os;
    os << "track: frame " << seq.width() << "x" << seq.height()
       << " too small for window " << params.window_px;
    throw ValidationError(os.str());
  }

  const Index n_points = static_cast<Index>(seeds.size());
  const Index n_frames = seq.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  TrackSet tracks;
  tracks.xs = Mat::Constant(n_points, n_frames, nan);
  tracks.ys = Mat::Constant(n_points, n_frames, nan);
  tracks.alive.assign(static_cast<std::size_t>(n_points), 1);
  tracks.point_ids.resize(static_cast<std::size_t>(n_points));
  for (Index i = 0; i < n_points; ++i) {
    tracks.xs(i, 0) = seeds[static_cast<std::size_t>(i)].x;
    tracks.ys(i, 0) = seeds[static_cast<std::size_t>(i)].y;
    tracks.point_ids[static_cast<std::size_t>(i)] = static_cast<int>(i);
  }

  std::vector<ImageF> prev_pyr = build_pyramid(seq.frames[0], n_levels);
  for (Index k = 0; k + 1 < n_frames; ++k) {
    std::vector<ImageF> next_pyr =
        build_pyramid(seq.frames[static_cast<std::size_t>(k + 1)], n_levels);

    parallel_for_chunks(n_points, [&](Index begin, Index end) {
      LkScratch scratch(params.window_px);
      for (Index i = begin; i < end; ++i) {
        if (!tracks.alive[static_cast<std::size_t>(i)]) continue;
        Point2 p{tracks.xs(i, k), tracks.ys(i, k)};
        auto moved = lk_track_point(prev_pyr, next_pyr, p, params, scratch);
        if (moved) {
          tracks.xs(i, k + 1) = moved->x;
          tracks.ys(i, k + 1) = moved->y;
        } else {
          tracks.alive[static_cast<std::size_t>(i)] = 0;
        }
      }
    });

    if (tracks.n_alive() == 0) {
      std::ostringstream os;
      os << "track: all " << n_points << " points lost by frame " << (k + 1);
      throw EmptyAliveError(os.str());
    }
    prev_pyr = std::move(next_pyr);
  }
  return tracks;
}

TrackSet prune_lost(const TrackSet& tracks) {
  std::vector<Index> keep;
  for (Index i = 0; i < tracks.n_points(); ++i) {
    if (tracks.alive[static_cast<std::size_t>(i)]) keep.push_back(i);
  }
  if (keep.empty()) throw EmptyAliveError("prune: no track survived to the final frame");

  TrackSet out;
  out.xs.resize(static_cast<Index>(keep.size()), tracks.n_frames());
  out.ys.resize(static_cast<Index>(keep.size()), tracks.n_frames());
  out.alive.assign(keep.size(), 1);
  out.point_ids.resize(keep.size());
  for (std::size_t j = 0; j < keep.size(); ++j) {
    out.xs.row(static_cast<Index>(j)) = tracks.xs.row(keep[j]);
    out.ys.row(static_cast<Index>(j)) = tracks.ys.row(keep[j]);
    out.point_ids[j] = tracks.point_ids[static_cast<std::size_t>(keep[j])];
  }
  return out;
}

}  // namespace echoflow

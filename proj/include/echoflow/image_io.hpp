#pragma once

#include <filesystem>

#include "echoflow/core.hpp"

namespace echoflow {

/// Binary 8-bit PGM (P5, maxval 255).
void save_pgm(const std::filesystem::path& path, const ImageU8& image);
ImageU8 load_pgm(const std::filesystem::path& path);

/// Writes frames as frame_000001.pgm, frame_000002.pgm, ... into dir.
void save_frames(const std::filesystem::path& dir, const FrameSequence& seq);

/// Loads every frame_<number>.pgm in dir, sorted by numeric index regardless
/// of directory listing order. Numbering must be contiguous and dimensions
/// consistent; needs at least 2 frames.
FrameSequence load_frames(const std::filesystem::path& dir, double frame_rate_hz);

/// CSV with header `t_s,theta_deg`. The nominal rate is inferred from the
/// median timestamp step; any step deviating more than 1% from the median is
/// rejected (dropped samples).
AngleSeries load_angles(const std::filesystem::path& csv_path);
void save_angles(const std::filesystem::path& csv_path, const AngleSeries& series);

}  // namespace echoflow

#include "echoflow/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace echoflow {

namespace fs = std::filesystem;

void save_pgm(const fs::path& path, const ImageU8& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "P5\n" << image.cols() << " " << image.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data()),
            static_cast<std::streamsize>(image.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

// Next whitespace-delimited token, skipping '#' comment lines.
std::string pnm_token(std::istream& in) {
  std::string token;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    token.push_back(static_cast<char>(c));
    c = in.get();
  }
  return token;
}

long parse_pnm_int(std::istream& in, const fs::path& path, const char* what) {
  std::string tok = pnm_token(in);
  char* end = nullptr;
  long v = std::strtol(tok.c_str(), &end, 10);
  if (tok.empty() || end == tok.c_str() || *end != '\0') {
    throw ParseError("invalid " + std::string(what) + " in " + path.string());
  }
  return v;
}

}  // namespace

ImageU8 load_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string magic = pnm_token(in);
  if (magic != "P5") throw ParseError("not a binary PGM (P5): " + path.string());
  long w = parse_pnm_int(in, path, "width");
  long h = parse_pnm_int(in, path, "height");
  long maxval = parse_pnm_int(in, path, "maxval");
  if (w <= 0 || h <= 0) throw ParseError("bad dimensions in " + path.string());
  if (maxval != 255) throw ParseError("expected maxval 255 in " + path.string());
  // Exactly one whitespace byte separates the header from pixel data; the
  // token reader has already consumed it.
  ImageU8 image(h, w);
  in.read(reinterpret_cast<char*>(image.data()), static_cast<std::streamsize>(image.size()));
  if (in.gcount() != static_cast<std::streamsize>(image.size())) {
    throw IoError("truncated pixel data: " + path.string());
  }
  return image;
}

void save_frames(const fs::path& dir, const FrameSequence& seq) {
  fs::create_directories(dir);
  char name[32];
  for (Index k = 0; k < seq.size(); ++k) {
    std::snprintf(name, sizeof(name), "frame_%06lld.pgm", static_cast<long long>(k + 1));
    save_pgm(dir / name, seq.frames[static_cast<std::size_t>(k)]);
  }
}

FrameSequence load_frames(const fs::path& dir, double frame_rate_hz) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());

  std::vector<std::pair<long, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() < 11 || name.rfind("frame_", 0) != 0) continue;
    if (name.substr(name.size() - 4) != ".pgm") continue;
    const std::string digits = name.substr(6, name.size() - 10);
    if (digits.empty() ||
        !std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); }))
      continue;
    found.emplace_back(std::strtol(digits.c_str(), nullptr, 10), entry.path());
  }
  if (found.size() < 2) {
    std::ostringstream os;
    os << "need at least 2 frame_*.pgm files in " << dir.string() << ", found " << found.size();
    throw ValidationError(os.str());
  }
  std::sort(found.begin(), found.end());
  for (std::size_t i = 1; i < found.size(); ++i) {
    if (found[i].first != found[i - 1].first + 1) {
      std::ostringstream os;
      os << "frame numbering not contiguous: " << found[i - 1].second.filename().string()
         << " followed by " << found[i].second.filename().string();
      throw ValidationError(os.str());
    }
  }

  FrameSequence seq;
  seq.frame_rate_hz = frame_rate_hz;
  seq.frames.reserve(found.size());
  for (const auto& [num, path] : found) {
    ImageU8 frame = load_pgm(path);
    if (!seq.frames.empty() &&
        (frame.rows() != seq.height() || frame.cols() != seq.width())) {
      std::ostringstream os;
      os << "dimension mismatch: " << path.filename().string() << " is " << frame.cols() << "x"
         << frame.rows() << " but " << found.front().second.filename().string() << " is "
         << seq.width() << "x" << seq.height();
      throw ValidationError(os.str());
    }
    seq.frames.push_back(std::move(frame));
  }
  seq.validate();
  return seq;
}

AngleSeries load_angles(const fs::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open: " + csv_path.string());

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file: " + csv_path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t_s,theta_deg") {
    throw ParseError("expected header `t_s,theta_deg` in " + csv_path.string() + ", got `" +
                     line + "`");
  }

  std::vector<double> t, theta;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParseError("row " + std::to_string(row) + ": expected two columns");
    }
    auto parse_cell = [&](const std::string& cell) {
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v)) {
        throw ParseError("row " + std::to_string(row) + ": non-numeric cell `" + cell + "`");
      }
      return v;
    };
    t.push_back(parse_cell(line.substr(0, comma)));
    theta.push_back(parse_cell(line.substr(comma + 1)));
  }
  if (t.size() < 2) throw ValidationError("need at least 2 data rows in " + csv_path.string());

  AngleSeries series;
  series.t_s = Eigen::Map<const Vec>(t.data(), static_cast<Index>(t.size()));
  series.theta_deg = Eigen::Map<const Vec>(theta.data(), static_cast<Index>(theta.size()));
  series.validate();

  std::vector<double> diffs(t.size() - 1);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) diffs[i] = t[i + 1] - t[i];
  std::vector<double> sorted = diffs;
  std::sort(sorted.begin(), sorted.end());
  double median = sorted[sorted.size() / 2];
  if (sorted.size() % 2 == 0) median = 0.5 * (median + sorted[sorted.size() / 2 - 1]);
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    if (std::abs(diffs[i] - median) > 0.01 * median) {
      std::ostringstream os;
      os << "non-uniform sampling at row " << (i + 2) << ": step " << diffs[i]
         << " s deviates more than 1% from median " << median << " s";
      throw ValidationError(os.str());
    }
  }
  series.rate_hz = 1.0 / median;
  return series;
}

void save_angles(const fs::path& csv_path, const AngleSeries& series) {
  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot open for writing: " + csv_path.string());
  out << "t_s,theta_deg\n";
  char buf[64];
  for (Index i = 0; i < series.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", series.t_s[i], series.theta_deg[i]);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + csv_path.string());
}

}  // namespace echoflow

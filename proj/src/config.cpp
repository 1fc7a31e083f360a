#include "echoflow/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace echoflow {

void PipelineConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train_fraction must lie in (0, 1)");
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (source == InputSource::files) {
    if (frames_dir.empty()) throw ConfigError("files source requires frames_dir");
    if (angles_csv.empty()) throw ConfigError("files source requires angles_csv");
    if (!(frame_rate_hz > 0.0)) throw ConfigError("frame_rate_hz must be > 0");
  } else {
    protocol.validate();
    phantom.validate();
  }
  if (filter.enabled) {
    if (filter.order < 1) throw ConfigError("filter.order must be >= 1");
    double rate = source == InputSource::phantom ? protocol.frame_rate_hz : frame_rate_hz;
    if (!(filter.cutoff_hz > 0.0) || filter.cutoff_hz >= rate / 2.0)
      throw ConfigError("filter.cutoff_hz must lie in (0, frame rate / 2)");
  }
}

void PipelineConfig::reseed(std::uint64_t master) {
  seed = master;
  protocol.rng_seed = master;
  phantom.rng_seed = master + 1;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

struct KvReader {
  std::map<std::string, std::string> kv;
  std::map<std::string, bool> used;

  bool has(const std::string& key) const { return kv.count(key) != 0; }

  std::string raw(const std::string& key) {
    used[key] = true;
    return kv.at(key);
  }

  double get_double(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    std::string v = raw(key);
    char* end = nullptr;
    double x = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size())
      throw ConfigError("config: key `" + key + "` expects a number, got `" + v + "`");
    return x;
  }

  long get_int(const std::string& key, long fallback) {
    if (!has(key)) return fallback;
    std::string v = raw(key);
    char* end = nullptr;
    long x = std::strtol(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size())
      throw ConfigError("config: key `" + key + "` expects an integer, got `" + v + "`");
    return x;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    std::string v = raw(key);
    char* end = nullptr;
    unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size())
      throw ConfigError("config: key `" + key + "` expects an unsigned integer, got `" + v + "`");
    return x;
  }

  bool get_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    std::string v = raw(key);
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("config: key `" + key + "` expects true/false, got `" + v + "`");
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    std::string v = raw(key);
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
    return v;
  }

  std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback) {
    if (!has(key)) return fallback;
    std::string v = raw(key);
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      char* end = nullptr;
      double x = std::strtod(item.c_str(), &end);
      if (item.empty() || end != item.c_str() + item.size())
        throw ConfigError("config: key `" + key + "` has a non-numeric item `" + item + "`");
      out.push_back(x);
    }
    if (out.empty()) throw ConfigError("config: key `" + key + "` has an empty list");
    return out;
  }
};

}  // namespace

PipelineConfig parse_config_text(const std::string& text) {
  KvReader r;
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (r.kv.count(key))
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key `" + key + "`");
    r.kv[key] = value;
  }

  PipelineConfig c;

  const std::string source = r.get_string("source", "phantom");
  if (source == "phantom") {
    c.source = InputSource::phantom;
  } else if (source == "files") {
    c.source = InputSource::files;
  } else {
    throw ConfigError("config: source must be `phantom` or `files`, got `" + source + "`");
  }
  c.seed = r.get_u64("seed", c.seed);
  c.reseed(c.seed);

  c.protocol.amplitudes_deg = r.get_double_list("protocol.amplitudes_deg", c.protocol.amplitudes_deg);
  c.protocol.period_s = r.get_double("protocol.period_s", c.protocol.period_s);
  c.protocol.n_cycles = static_cast<int>(r.get_int("protocol.n_cycles", c.protocol.n_cycles));
  c.protocol.trim_head_cycles =
      static_cast<int>(r.get_int("protocol.trim_head_cycles", c.protocol.trim_head_cycles));
  c.protocol.trim_tail_cycles =
      static_cast<int>(r.get_int("protocol.trim_tail_cycles", c.protocol.trim_tail_cycles));
  c.protocol.frame_rate_hz = r.get_double("protocol.frame_rate_hz", c.protocol.frame_rate_hz);

  c.phantom.width_px = r.get_int("phantom.width_px", c.phantom.width_px);
  c.phantom.height_px = r.get_int("phantom.height_px", c.phantom.height_px);
  c.phantom.n_speckles = static_cast<int>(r.get_int("phantom.n_speckles", c.phantom.n_speckles));
  c.phantom.speckle_sigma_px = r.get_double("phantom.speckle_sigma_px", c.phantom.speckle_sigma_px);
  c.phantom.displacement_gain_px_per_deg =
      r.get_double("phantom.displacement_gain_px_per_deg", c.phantom.displacement_gain_px_per_deg);
  const std::string profile = r.get_string(
      "phantom.depth_profile", c.phantom.depth_profile == DepthProfile::linear ? "linear" : "constant");
  if (profile == "linear") {
    c.phantom.depth_profile = DepthProfile::linear;
  } else if (profile == "constant") {
    c.phantom.depth_profile = DepthProfile::constant;
  } else {
    throw ConfigError("config: phantom.depth_profile must be `constant` or `linear`");
  }
  c.phantom.pixel_noise_sigma = r.get_double("phantom.pixel_noise_sigma", c.phantom.pixel_noise_sigma);

  c.frames_dir = r.get_string("frames_dir", "");
  c.angles_csv = r.get_string("angles_csv", "");
  c.frame_rate_hz = r.get_double("frame_rate_hz", c.frame_rate_hz);

  c.corner.max_corners = static_cast<int>(r.get_int("corner.max_corners", c.corner.max_corners));
  c.corner.quality_level = r.get_double("corner.quality_level", c.corner.quality_level);
  c.corner.min_distance_px = r.get_double("corner.min_distance_px", c.corner.min_distance_px);
  c.corner.block_size_px = static_cast<int>(r.get_int("corner.block_size_px", c.corner.block_size_px));

  c.flow.window_px = static_cast<int>(r.get_int("flow.window_px", c.flow.window_px));
  c.flow.pyramid_levels = static_cast<int>(r.get_int("flow.pyramid_levels", c.flow.pyramid_levels));
  c.flow.max_iters = static_cast<int>(r.get_int("flow.max_iters", c.flow.max_iters));
  c.flow.epsilon_px = r.get_double("flow.epsilon_px", c.flow.epsilon_px);
  c.flow.min_eig_threshold = r.get_double("flow.min_eig_threshold", c.flow.min_eig_threshold);

  c.filter.order = static_cast<int>(r.get_int("filter.order", c.filter.order));
  c.filter.cutoff_hz = r.get_double("filter.cutoff_hz", c.filter.cutoff_hz);
  c.filter.zero_phase = r.get_bool("filter.zero_phase", c.filter.zero_phase);
  c.filter.enabled = r.get_bool("filter.enabled", c.filter.enabled);

  const std::string scope = r.get_string(
      "standardize_scope", c.standardize_scope == StandardizeScope::full_trial ? "full_trial" : "train_only");
  if (scope == "full_trial") {
    c.standardize_scope = StandardizeScope::full_trial;
  } else if (scope == "train_only") {
    c.standardize_scope = StandardizeScope::train_only;
  } else {
    throw ConfigError("config: standardize_scope must be `full_trial` or `train_only`");
  }

  c.lambda = r.get_double("lambda", c.lambda);
  c.train_fraction = r.get_double("train_fraction", c.train_fraction);
  c.out_dir = r.get_string("out_dir", c.out_dir.string());

  for (const auto& [key, value] : r.kv) {
    if (!r.used.count(key)) throw ConfigError("config: unknown key `" + key + "`");
  }
  return c;
}

PipelineConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string canonical_config_text(const PipelineConfig& c) {
  std::map<std::string, std::string> kv;
  kv["source"] = c.source == InputSource::phantom ? "phantom" : "files";
  kv["seed"] = std::to_string(c.seed);

  {
    std::string amps;
    std::vector<double> sorted = c.protocol.amplitudes_deg;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (i) amps += ",";
      amps += fmt_double(sorted[i]);
    }
    kv["protocol.amplitudes_deg"] = amps;
  }
  kv["protocol.period_s"] = fmt_double(c.protocol.period_s);
  kv["protocol.n_cycles"] = std::to_string(c.protocol.n_cycles);
  kv["protocol.trim_head_cycles"] = std::to_string(c.protocol.trim_head_cycles);
  kv["protocol.trim_tail_cycles"] = std::to_string(c.protocol.trim_tail_cycles);
  kv["protocol.frame_rate_hz"] = fmt_double(c.protocol.frame_rate_hz);

  kv["phantom.width_px"] = std::to_string(c.phantom.width_px);
  kv["phantom.height_px"] = std::to_string(c.phantom.height_px);
  kv["phantom.n_speckles"] = std::to_string(c.phantom.n_speckles);
  kv["phantom.speckle_sigma_px"] = fmt_double(c.phantom.speckle_sigma_px);
  kv["phantom.displacement_gain_px_per_deg"] = fmt_double(c.phantom.displacement_gain_px_per_deg);
  kv["phantom.depth_profile"] =
      c.phantom.depth_profile == DepthProfile::linear ? "linear" : "constant";
  kv["phantom.pixel_noise_sigma"] = fmt_double(c.phantom.pixel_noise_sigma);

  kv["frames_dir"] = c.frames_dir.string();
  kv["angles_csv"] = c.angles_csv.string();
  kv["frame_rate_hz"] = fmt_double(c.frame_rate_hz);

  kv["corner.max_corners"] = std::to_string(c.corner.max_corners);
  kv["corner.quality_level"] = fmt_double(c.corner.quality_level);
  kv["corner.min_distance_px"] = fmt_double(c.corner.min_distance_px);
  kv["corner.block_size_px"] = std::to_string(c.corner.block_size_px);

  kv["flow.window_px"] = std::to_string(c.flow.window_px);
  kv["flow.pyramid_levels"] = std::to_string(c.flow.pyramid_levels);
  kv["flow.max_iters"] = std::to_string(c.flow.max_iters);
  kv["flow.epsilon_px"] = fmt_double(c.flow.epsilon_px);
  kv["flow.min_eig_threshold"] = fmt_double(c.flow.min_eig_threshold);

  kv["filter.order"] = std::to_string(c.filter.order);
  kv["filter.cutoff_hz"] = fmt_double(c.filter.cutoff_hz);
  kv["filter.zero_phase"] = c.filter.zero_phase ? "true" : "false";
  kv["filter.enabled"] = c.filter.enabled ? "true" : "false";

  kv["standardize_scope"] =
      c.standardize_scope == StandardizeScope::full_trial ? "full_trial" : "train_only";
  kv["lambda"] = fmt_double(c.lambda);
  kv["train_fraction"] = fmt_double(c.train_fraction);
  kv["out_dir"] = c.out_dir.string();

  std::string text;
  for (const auto& [key, value] : kv) {
    text += key;
    text += " = ";
    text += value;
    text += "\n";
  }
  return text;
}

std::string config_fingerprint(const PipelineConfig& config) {
  const std::string text = canonical_config_text(config);
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

void write_config_file(const std::filesystem::path& path, const PipelineConfig& config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "# echoflow pipeline configuration\n" << canonical_config_text(config);
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace echoflow

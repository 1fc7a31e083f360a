#include <fstream>
#include <string>

#include <json.hpp>

#include "echoflow/ridge.hpp"

namespace echoflow {

namespace {

using nlohmann::json;

json zparams_to_json(const ZScoreParams& p) {
  return json{{"mean", std::vector<double>(p.mean.data(), p.mean.data() + p.mean.size())},
              {"std", std::vector<double>(p.stddev.data(), p.stddev.data() + p.stddev.size())}};
}

ZScoreParams zparams_from_json(const json& j) {
  auto mean = j.at("mean").get<std::vector<double>>();
  auto stddev = j.at("std").get<std::vector<double>>();
  if (mean.size() != stddev.size()) throw ParseError("model: mean/std length mismatch");
  ZScoreParams p;
  p.mean = Eigen::Map<const Vec>(mean.data(), static_cast<Index>(mean.size()));
  p.stddev = Eigen::Map<const Vec>(stddev.data(), static_cast<Index>(stddev.size()));
  return p;
}

}  // namespace

void save_model_json(const RidgeModel& model, const std::filesystem::path& path) {
  json channels = json::array();
  for (const ChannelId& id : model.channel_ids) {
    channels.push_back({{"point_id", id.point_id}, {"axis", std::string(1, id.axis)}});
  }
  json doc{
      {"schema_version", 1},
      {"lambda", model.lambda},
      {"config_fingerprint", model.config_fingerprint},
      {"channel_ids", channels},
      {"weights",
       std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size())},
      {"feature_zparams", zparams_to_json(model.feature_zparams)},
      {"angle_zparams", zparams_to_json(model.angle_zparams)},
  };
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

RidgeModel load_model_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("model json: " + std::string(e.what()));
  }
  try {
    if (doc.at("schema_version").get<int>() != 1)
      throw ParseError("model: unsupported schema version");
    RidgeModel model;
    model.lambda = doc.at("lambda").get<double>();
    model.config_fingerprint = doc.value("config_fingerprint", std::string());
    auto weights = doc.at("weights").get<std::vector<double>>();
    model.weights = Eigen::Map<const Vec>(weights.data(), static_cast<Index>(weights.size()));
    model.feature_zparams = zparams_from_json(doc.at("feature_zparams"));
    model.angle_zparams = zparams_from_json(doc.at("angle_zparams"));
    for (const auto& c : doc.at("channel_ids")) {
      const std::string axis = c.at("axis").get<std::string>();
      if (axis.size() != 1 || (axis[0] != 'x' && axis[0] != 'y'))
        throw ParseError("model: channel axis must be 'x' or 'y'");
      model.channel_ids.push_back(ChannelId{c.at("point_id").get<int>(), axis[0]});
    }
    if (model.weights.size() != static_cast<Index>(model.channel_ids.size()))
      throw ParseError("model: weights length does not match channel_ids");
    return model;
  } catch (const json::exception& e) {
    throw ParseError("model json: " + std::string(e.what()));
  }
}

}  // namespace echoflow

#include "cameo/checkpoint.hpp"

#include <nlohmann/json.hpp>

namespace cameo {

std::string checkpoint_manifest_json(const DenoiserConfig& cfg,
                                     int precision_bits,
                                     const std::vector<std::string>& names) {
  nlohmann::json j;
  j["model"] = {{"F", cfg.F},
                {"h", cfg.h},
                {"w", cfg.w},
                {"d", cfg.d},
                {"heads", cfg.heads},
                {"blocks", cfg.blocks},
                {"latent_channels", cfg.latent_channels},
                {"supervised_layer", cfg.supervised_layer},
                {"schedule_steps", cfg.schedule_steps}};
  j["precision_bits"] = precision_bits;
  j["parameters"] = names;
  return j.dump(2);
}

void parse_checkpoint_manifest(const std::string& text, DenoiserConfig& cfg,
                               int& precision_bits,
                               std::vector<std::string>& names) {
  nlohmann::json j = nlohmann::json::parse(text);
  const auto& m = j.at("model");
  cfg.F = m.at("F").get<int>();
  cfg.h = m.at("h").get<int>();
  cfg.w = m.at("w").get<int>();
  cfg.d = m.at("d").get<int>();
  cfg.heads = m.at("heads").get<int>();
  cfg.blocks = m.at("blocks").get<int>();
  cfg.latent_channels = m.at("latent_channels").get<int>();
  cfg.supervised_layer = m.at("supervised_layer").get<int>();
  cfg.schedule_steps = m.at("schedule_steps").get<int>();
  precision_bits = j.at("precision_bits").get<int>();
  names = j.at("parameters").get<std::vector<std::string>>();
}

}  // namespace cameo

#ifndef BACR_CONFIG_HPP
#define BACR_CONFIG_HPP

#include "bacr/trainer.hpp"

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace bacr {

/// Malformed input, unknown key or invalid value. The message starts with the key path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Canonical key names in serialization order.
std::vector<std::string> config_keys();

/// Sets one key from a JSON value. Accepts the short aliases G, M and K.
void set_config_value(TrainConfig& cfg, const std::string& key, const nlohmann::json& value);

/// Sets one key from its key=value text form ("0.3", "true", "8,16,32").
void set_config_text(TrainConfig& cfg, const std::string& key, const std::string& text);

/// Flat key=value lines; '#' starts a comment. Result is validated.
TrainConfig parse_config_text(const std::string& text, const TrainConfig& base = {});
/// JSON object of keys; nested objects are flattened with '.' separators.
TrainConfig parse_config_json(const nlohmann::json& j, const TrainConfig& base = {});
/// Dispatches on content: a leading '{' selects JSON.
TrainConfig parse_config(const std::string& path, const TrainConfig& base = {});

std::string config_to_text(const TrainConfig& cfg);
nlohmann::json config_to_json(const TrainConfig& cfg);

bool operator==(const TrainConfig& a, const TrainConfig& b);

}  // namespace bacr

#endif  // BACR_CONFIG_HPP

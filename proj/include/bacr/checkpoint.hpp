#ifndef BACR_CHECKPOINT_HPP
#define BACR_CHECKPOINT_HPP

#include "bacr/advantage.hpp"
#include "bacr/policy.hpp"

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>

namespace bacr {

/// Tensors as a JSON array of {name, shape: [rows, cols], values} with values
/// in row-major order. Vectors have shape [n, 1].
template <typename Params>
nlohmann::json tensors_to_json(const Params& p) {
  nlohmann::json arr = nlohmann::json::array();
  p.visit("", [&](const std::string& name, const auto& t) {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(t.size()));
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) values.push_back(static_cast<double>(t(r, c)));
    arr.push_back({{"name", name}, {"shape", {t.rows(), t.cols()}}, {"values", values}});
  });
  return arr;
}

/// Fills `p` (already sized) from tensors_to_json output. Every tensor of `p`
/// must be present with a matching shape; extra entries are ignored.
template <typename Params>
void tensors_from_json(const nlohmann::json& arr, Params& p) {
  std::map<std::string, const nlohmann::json*> by_name;
  for (const auto& e : arr) by_name[e.at("name").get<std::string>()] = &e;
  p.visit("", [&](const std::string& name, auto& t) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::invalid_argument("checkpoint: missing tensor '" + name + "'");
    const auto& e = *it->second;
    const auto shape = e.at("shape").get<std::vector<Eigen::Index>>();
    const auto values = e.at("values").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols() ||
        values.size() != static_cast<std::size_t>(t.size()))
      throw DimensionError("checkpoint: tensor '" + name + "' has the wrong shape");
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = values[i++];
  });
}

struct Checkpoint {
  PolicyShape shape;
  Eigen::Index value_hidden = 16;
  int iteration = 0;  // training iterations completed
  PolicyParams<double> policy;
  ValueNetParams<double> value;
};

/// Builds a checkpoint whose shape block is read off the parameters.
Checkpoint make_checkpoint(const PolicyParams<double>& policy, const ValueNetParams<double>& value, int iteration = 0);

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace bacr

#endif  // BACR_CHECKPOINT_HPP

#include "bacr/checkpoint.hpp"

#include <fstream>

namespace bacr {

Checkpoint make_checkpoint(const PolicyParams<double>& policy, const ValueNetParams<double>& value, int iteration) {
  policy.check_shape();
  Checkpoint c;
  c.shape.dim = policy.dim();
  c.shape.hidden = policy.input_proj.hidden_dim();
  c.shape.pos_dim = policy.pos_dim;
  c.shape.feature_dim = policy.input_proj.input_dim() - policy.pos_dim - 1;
  c.shape.work_scale = policy.work_scale;
  c.shape.range = policy.budget_embed.range;
  c.value_hidden = value.head.hidden_dim();
  c.iteration = iteration;
  c.policy = policy;
  c.value = value;
  return c;
}

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt) {
  const PolicyShape& s = ckpt.shape;
  nlohmann::json shape = {{"feature_dim", s.feature_dim}, {"hidden", s.hidden},     {"dim", s.dim},
                          {"pos_dim", s.pos_dim},         {"work_scale", s.work_scale}, {"b_min", s.range.min},
                          {"b_max", s.range.max},         {"value_hidden", ckpt.value_hidden}};
  nlohmann::json tensors = tensors_to_json(ckpt.policy);
  for (auto& t : tensors_to_json(ckpt.value)) tensors.push_back(std::move(t));
  return {{"format", "bacr-checkpoint"}, {"version", 1}, {"iteration", ckpt.iteration}, {"shape", shape}, {"tensors", tensors}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "bacr-checkpoint") throw std::invalid_argument("checkpoint: unrecognized format");
  const auto& s = j.at("shape");
  Checkpoint c;
  c.shape.feature_dim = s.at("feature_dim").get<Eigen::Index>();
  c.shape.hidden = s.at("hidden").get<Eigen::Index>();
  c.shape.dim = s.at("dim").get<Eigen::Index>();
  c.shape.pos_dim = s.at("pos_dim").get<Eigen::Index>();
  c.shape.work_scale = s.at("work_scale").get<double>();
  c.shape.range = {s.at("b_min").get<double>(), s.at("b_max").get<double>()};
  c.value_hidden = s.at("value_hidden").get<Eigen::Index>();
  c.iteration = j.value("iteration", 0);
  Rng rng(0);  // shapes only; every value is overwritten below
  c.policy = make_policy(c.shape, rng);
  c.value = make_value_net(c.shape.feature_dim, c.shape.dim, c.value_hidden, rng);
  tensors_from_json(j.at("tensors"), c.policy);
  tensors_from_json(j.at("tensors"), c.value);
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << checkpoint_to_json(ckpt).dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  return checkpoint_from_json(nlohmann::json::parse(in));
}

}  // namespace bacr

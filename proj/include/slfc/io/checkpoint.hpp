#pragma once

#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "slfc/core/errors.hpp"
#include "slfc/core/matrix.hpp"
#include "slfc/core/rng.hpp"
#include "slfc/model/config.hpp"
#include "slfc/model/params.hpp"
#include "slfc/train/adam.hpp"

namespace slfc {

inline constexpr const char* kCheckpointFormat = "slfc-ckpt-v1";

/// Optimizer and stream state carried alongside parameters so an interrupted
/// run can resume bit-identically.
struct TrainState {
  AdamState adam;
  std::string rng_state;
  std::size_t next_epoch = 0;
};

namespace ckpt_detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json j;
  j["shape"] = {m.rows(), m.cols()};
  j["data"] = m.storage();
  return j;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  auto shape = j.at("shape");
  Matrix m(shape.at(0).get<std::size_t>(), shape.at(1).get<std::size_t>());
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != m.size()) throw IoError("checkpoint: tensor data/shape mismatch");
  m.storage() = std::move(data);
  return m;
}

template <typename Visitable>
nlohmann::json tensors_to_json(const Visitable& p) {
  nlohmann::json j = nlohmann::json::object();
  p.visit([&](const std::string& name, const Matrix& m) { j[name] = matrix_to_json(m); });
  return j;
}

template <typename Visitable>
void tensors_from_json(const nlohmann::json& j, Visitable& p) {
  p.visit([&](const std::string& name, Matrix& m) {
    if (!j.contains(name)) throw IoError("checkpoint: missing tensor '" + name + "'");
    Matrix loaded = matrix_from_json(j.at(name));
    if (!loaded.same_shape(m))
      throw IoError("checkpoint: shape mismatch for tensor '" + name + "'");
    m = std::move(loaded);
  });
}

inline nlohmann::json named_grads_to_json(const NamedGrads& g) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, m] : g) j[name] = matrix_to_json(m);
  return j;
}

inline void named_grads_from_json(const nlohmann::json& j, NamedGrads& g) {
  for (auto& [name, m] : g) {
    if (!j.contains(name)) throw IoError("checkpoint: missing optimizer slot '" + name + "'");
    m = matrix_from_json(j.at(name));
  }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

}  // namespace ckpt_detail

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return nlohmann::json{{"obs_dim", c.obs_dim},
                        {"action_dim", c.action_dim},
                        {"latent_dim", c.latent_dim},
                        {"num_skills", c.num_skills},
                        {"encoder_hidden", c.encoder_hidden},
                        {"decoder_hidden", c.decoder_hidden},
                        {"switcher_hidden", c.switcher_hidden},
                        {"var_floor", c.var_floor},
                        {"feedback_structure", c.feedback_structure},
                        {"switch_kl", c.switch_kl}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.obs_dim = j.at("obs_dim").get<std::size_t>();
  c.action_dim = j.at("action_dim").get<std::size_t>();
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.num_skills = j.at("num_skills").get<std::size_t>();
  c.encoder_hidden = j.at("encoder_hidden").get<std::vector<std::size_t>>();
  c.decoder_hidden = j.at("decoder_hidden").get<std::vector<std::size_t>>();
  c.switcher_hidden = j.at("switcher_hidden").get<std::vector<std::size_t>>();
  c.var_floor = j.at("var_floor").get<double>();
  c.feedback_structure = j.at("feedback_structure").get<bool>();
  c.switch_kl = j.at("switch_kl").get<bool>();
  c.validate();
  return c;
}

namespace ckpt_detail {

inline nlohmann::json train_state_to_json(const TrainState& ts) {
  nlohmann::json j;
  j["epoch"] = ts.next_epoch;
  j["adam_t"] = ts.adam.t;
  j["adam_m"] = named_grads_to_json(ts.adam.m);
  j["adam_v"] = named_grads_to_json(ts.adam.v);
  j["rng"] = ts.rng_state;
  return j;
}

inline TrainState train_state_from_json(const nlohmann::json& j, const AdamState& shape) {
  TrainState ts;
  ts.adam = shape;
  ts.adam.t = j.at("adam_t").get<std::size_t>();
  named_grads_from_json(j.at("adam_m"), ts.adam.m);
  named_grads_from_json(j.at("adam_v"), ts.adam.v);
  ts.rng_state = j.at("rng").get<std::string>();
  ts.next_epoch = j.at("epoch").get<std::size_t>();
  return ts;
}

}  // namespace ckpt_detail

inline void save_model_checkpoint(const std::string& path, const ModelConfig& cfg,
                                  const ModelParams& params,
                                  const TrainState* train_state = nullptr) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["kind"] = "slfc";
  j["config"] = model_config_to_json(cfg);
  j["params"] = ckpt_detail::tensors_to_json(params);
  if (train_state) j["train_state"] = ckpt_detail::train_state_to_json(*train_state);
  ckpt_detail::write_json_file(path, j);
}

struct LoadedModel {
  ModelConfig config;
  ModelParams params;
  std::optional<TrainState> train_state;
};

inline std::string checkpoint_kind(const std::string& path) {
  nlohmann::json j = ckpt_detail::read_json_file(path);
  if (!j.contains("format") || j.at("format").get<std::string>() != kCheckpointFormat)
    throw IoError("not a " + std::string(kCheckpointFormat) + " checkpoint: " + path);
  return j.at("kind").get<std::string>();
}

inline LoadedModel load_model_checkpoint(const std::string& path) {
  nlohmann::json j = ckpt_detail::read_json_file(path);
  if (!j.contains("format") || j.at("format").get<std::string>() != kCheckpointFormat)
    throw IoError("not a " + std::string(kCheckpointFormat) + " checkpoint: " + path);
  if (j.at("kind").get<std::string>() != "slfc")
    throw IoError("checkpoint kind is '" + j.at("kind").get<std::string>() +
                  "', expected 'slfc': " + path);
  LoadedModel out;
  out.config = model_config_from_json(j.at("config"));
  Rng scratch(0);
  out.params = init_params(out.config, scratch);
  ckpt_detail::tensors_from_json(j.at("params"), out.params);
  if (j.contains("train_state")) {
    ParamView view = make_view(out.params);
    out.train_state =
        ckpt_detail::train_state_from_json(j.at("train_state"), AdamState::init(view));
  }
  return out;
}

}  // namespace slfc

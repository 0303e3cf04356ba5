#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "slfc/core/errors.hpp"
#include "slfc/sim/task.hpp"
#include "slfc/train/trainer.hpp"

namespace slfc {

namespace detail {

inline nlohmann::json matrix_rows_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(m.row(i));
  return rows;
}

inline Matrix matrix_rows_from_json(const nlohmann::json& rows) {
  if (!rows.is_array() || rows.empty()) throw IoError("dataset: empty trajectory rows");
  std::size_t cols = rows[0].size();
  Matrix m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto r = rows[i].get<std::vector<double>>();
    if (r.size() != cols) throw IoError("dataset: ragged row lengths");
    m.set_row(i, r);
  }
  return m;
}

}  // namespace detail

inline std::string trajectory_to_jsonl_line(const Trajectory& traj) {
  nlohmann::json j;
  j["task_id"] = traj.task_id;
  j["obs"] = detail::matrix_rows_to_json(traj.obs);
  j["actions"] = detail::matrix_rows_to_json(traj.actions);
  if (!traj.true_skills.empty()) j["skills"] = traj.true_skills;
  return j.dump();
}

inline Trajectory trajectory_from_jsonl_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("dataset: malformed JSONL line: ") + e.what());
  }
  Trajectory traj;
  traj.task_id = j.value("task_id", std::string{});
  traj.obs = detail::matrix_rows_from_json(j.at("obs"));
  traj.actions = detail::matrix_rows_from_json(j.at("actions"));
  if (traj.actions.rows() != traj.obs.rows())
    throw IoError("dataset: obs/actions length mismatch");
  if (j.contains("skills")) {
    traj.true_skills = j.at("skills").get<std::vector<int>>();
    if (traj.true_skills.size() != traj.obs.rows())
      throw IoError("dataset: skills length mismatch");
  }
  return traj;
}

/// One trajectory per line; float round-trips are bit-exact.
inline void save_dataset(const std::string& path, const std::vector<Trajectory>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& traj : data) out << trajectory_to_jsonl_line(traj) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline std::vector<Trajectory> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<Trajectory> data;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    data.push_back(trajectory_from_jsonl_line(line));
  }
  if (data.empty()) throw IoError("dataset is empty: " + path);
  return data;
}

/// Stack all (o, u) pairs across trajectories for i.i.d. minibatching.
inline PairDataset flatten_pairs(const std::vector<Trajectory>& data) {
  if (data.empty()) throw ContractError("flatten_pairs: empty dataset");
  std::size_t total = 0;
  for (const auto& t : data) total += t.length();
  PairDataset out;
  out.obs = Matrix(total, data[0].obs.cols());
  out.actions = Matrix(total, data[0].actions.cols());
  std::size_t r = 0;
  for (const auto& t : data) {
    if (t.obs.cols() != out.obs.cols() || t.actions.cols() != out.actions.cols())
      throw ShapeError("flatten_pairs: inconsistent trajectory dims");
    for (std::size_t i = 0; i < t.length(); ++i, ++r) {
      out.obs.set_row(r, t.obs.row(i));
      out.actions.set_row(r, t.actions.row(i));
    }
  }
  return out;
}

}  // namespace slfc

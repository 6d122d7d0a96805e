#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mw/training.hpp"

namespace mw {

/// Checkpoint directory layout:
///   config.json        - TrainOptions snapshot
///   manager.json       - schema + architecture + parameters
///   worker_<id>.json   - architecture + parameters, one file per worker
///   training_state.json
///   metrics.jsonl      - one record per iteration
struct Checkpoint {
  TrainOptions options;
  std::unique_ptr<ManagerModel> manager;
  std::vector<std::unique_ptr<WorkerModel>> workers;
  TrainingState state;
};

namespace detail {

inline std::string worker_file_name(int id) {
  std::ostringstream os;
  os << "worker_" << std::setw(2) << std::setfill('0') << id << ".json";
  return os.str();
}

inline void write_json_file(const std::filesystem::path& path,
                            const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed json in " + path.string() + ": " + e.what());
  }
  return j;
}

}  // namespace detail

inline void save_checkpoint(const std::string& dir, const TrainOptions& opts,
                            const ManagerModel& manager,
                            const std::vector<std::unique_ptr<WorkerModel>>& workers,
                            const TrainingState& state) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  detail::write_json_file(fs::path(dir) / "config.json", to_json(opts));

  nlohmann::json mj;
  mj["arch"] = to_json(manager.config());
  mj["schema"] = to_json(manager.schema());
  mj["store"] = manager.params().to_json();
  detail::write_json_file(fs::path(dir) / "manager.json", mj);

  for (const auto& w : workers) {
    nlohmann::json wj;
    wj["id"] = w->id();
    wj["kind"] = w->kind();
    wj["arch"] = to_json(w->config());
    wj["store"] = w->params().to_json();
    detail::write_json_file(
        fs::path(dir) / detail::worker_file_name(w->id()), wj);
  }

  detail::write_json_file(fs::path(dir) / "training_state.json",
                          to_json(state));

  std::ofstream metrics(fs::path(dir) / "metrics.jsonl");
  if (!metrics) throw DataError("cannot write metrics log in " + dir);
  for (const auto& line : metrics_log_lines(state)) metrics << line << "\n";
}

inline Checkpoint load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  Checkpoint cp;
  cp.options =
      train_options_from_json(detail::read_json_file(fs::path(dir) / "config.json"));

  const auto mj = detail::read_json_file(fs::path(dir) / "manager.json");
  auto schema = std::make_shared<const ContextSpec>(
      context_spec_from_json(mj.at("schema")));
  const ManagerConfig mcfg = manager_config_from_json(mj.at("arch"));
  std::mt19937_64 scratch_rng(0);  // values are overwritten by the store load
  cp.manager = std::make_unique<ManagerModel>(mcfg, schema, scratch_rng);
  cp.manager->params().from_json(mj.at("store"));

  for (int i = 0; i < cp.options.hp.num_workers; ++i) {
    const auto wj = detail::read_json_file(
        fs::path(dir) / detail::worker_file_name(i));
    const WorkerConfig wcfg = worker_config_from_json(wj.at("arch"));
    auto worker = make_worker(wcfg, scratch_rng);
    worker->set_id(wj.at("id").get<int>());
    worker->params().from_json(wj.at("store"));
    cp.workers.push_back(std::move(worker));
  }

  cp.state = training_state_from_json(
      detail::read_json_file(fs::path(dir) / "training_state.json"));
  return cp;
}

inline ResumePayload resume_payload(const Checkpoint& cp) {
  ResumePayload payload;
  payload.state = cp.state;
  payload.manager_params = cp.manager->params().snapshot();
  for (const auto& w : cp.workers)
    payload.worker_params.push_back(w->params().snapshot());
  return payload;
}

}  // namespace mw

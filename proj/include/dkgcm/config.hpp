#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "dkgcm/trainer.hpp"

#include <json.hpp>

namespace dkgcm {

/// Full run configuration, one JSON document with sections data, clustering,
/// model, training, grpo. Parsing is strict: unknown keys anywhere are hard
/// errors naming the offending key.
struct RunConfig {
  struct Data {
    std::string series;
    std::string adjacency;
    std::string format = "csv";     // csv | raw-f32
    std::string missing = "reject"; // reject | forward-fill
  } data;

  struct Clustering {
    int k = 5;
    std::optional<std::uint64_t> seed;  // defaults to training.seed
    int max_iter = 100;
    double tol = 1e-4;
    int dtw_band = 0;  // 0 = full DP, otherwise Sakoe-Chiba width
  } clustering;

  struct Model {
    std::size_t seq_len = 12;
    std::size_t horizon = 12;
    std::size_t hidden_dim = 64;
    std::string gcn_mode = "first-order";
    int cheb_k = 3;
    std::size_t d_state = 16;
    std::string scan_axis = "embedding";
    double dropout = 0.1;
    bool per_cluster_weights = true;
  } model;

  struct Training {
    std::size_t batch_size = 32;
    int epochs = 100;
    double lr = 0.001;
    std::uint64_t seed = 0;
  } training;

  struct Grpo {
    bool enabled = true;
    double epsilon = 0.3;
    double tau = 0.1;
    double sigma = 1.0;
    double gamma = 0.99;
    int snapshot_cadence = 1;
  } grpo;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

/// Canonical JSON with every key resolved to a concrete value; hashing this
/// gives the config hash recorded in checkpoints and manifests.
nlohmann::json run_config_json(const RunConfig& cfg);

MissingPolicy parse_missing_policy(const std::string& name);

/// Translate the config into the trainer's parameter struct.
TrainRunConfig to_train_config(const RunConfig& cfg);

}  // namespace dkgcm

#include "dkgcm/config.hpp"

#include <fstream>
#include <set>

namespace dkgcm {

namespace {

/// Strict section reader: every accessed key is recorded, leftovers fail.
class SectionReader {
 public:
  SectionReader(const nlohmann::json& j, std::string section)
      : j_(j), section_(std::move(section)) {
    require(j.is_object(), "config section '" + section_ + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& into) {
    if (auto it = j_.find(key); it != j_.end()) {
      try {
        into = it->get<T>();
      } catch (const nlohmann::json::exception&) {
        fail("config key '" + section_ + "." + key + "' has the wrong type");
      }
    }
    seen_.insert(key);
  }

  void read_optional_u64(const char* key, std::optional<std::uint64_t>& into) {
    if (auto it = j_.find(key); it != j_.end()) {
      require(it->is_number_unsigned() || it->is_number_integer(),
              "config key '" + section_ + "." + key + "' must be an integer");
      into = it->get<std::uint64_t>();
    }
    seen_.insert(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      require(seen_.count(it.key()),
              "unknown config key '" + section_ + "." + it.key() + "'");
  }

 private:
  const nlohmann::json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j) {
  require(j.is_object(), "config root must be a JSON object");
  static const std::set<std::string> sections = {"data", "clustering", "model",
                                                 "training", "grpo"};
  for (auto it = j.begin(); it != j.end(); ++it)
    require(sections.count(it.key()), "unknown config section '" + it.key() + "'");

  RunConfig cfg;
  if (j.contains("data")) {
    SectionReader r(j.at("data"), "data");
    r.read("series", cfg.data.series);
    r.read("adjacency", cfg.data.adjacency);
    r.read("format", cfg.data.format);
    r.read("missing", cfg.data.missing);
    r.finish();
  }
  if (j.contains("clustering")) {
    SectionReader r(j.at("clustering"), "clustering");
    r.read("k", cfg.clustering.k);
    r.read_optional_u64("seed", cfg.clustering.seed);
    r.read("max_iter", cfg.clustering.max_iter);
    r.read("tol", cfg.clustering.tol);
    r.read("dtw_band", cfg.clustering.dtw_band);
    r.finish();
  }
  if (j.contains("model")) {
    SectionReader r(j.at("model"), "model");
    r.read("seq_len", cfg.model.seq_len);
    r.read("horizon", cfg.model.horizon);
    r.read("hidden_dim", cfg.model.hidden_dim);
    r.read("gcn_mode", cfg.model.gcn_mode);
    r.read("cheb_k", cfg.model.cheb_k);
    r.read("d_state", cfg.model.d_state);
    r.read("scan_axis", cfg.model.scan_axis);
    r.read("dropout", cfg.model.dropout);
    r.read("per_cluster_weights", cfg.model.per_cluster_weights);
    r.finish();
  }
  if (j.contains("training")) {
    SectionReader r(j.at("training"), "training");
    r.read("batch_size", cfg.training.batch_size);
    r.read("epochs", cfg.training.epochs);
    r.read("lr", cfg.training.lr);
    r.read("seed", cfg.training.seed);
    r.finish();
  }
  if (j.contains("grpo")) {
    SectionReader r(j.at("grpo"), "grpo");
    r.read("enabled", cfg.grpo.enabled);
    r.read("epsilon", cfg.grpo.epsilon);
    r.read("tau", cfg.grpo.tau);
    r.read("sigma", cfg.grpo.sigma);
    r.read("gamma", cfg.grpo.gamma);
    r.read("snapshot_cadence", cfg.grpo.snapshot_cadence);
    r.finish();
  }
  // Fail fast on invalid values, not at first use.
  to_train_config(cfg).validate();
  parse_series_format(cfg.data.format);
  parse_missing_policy(cfg.data.missing);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "cannot open config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    fail("config file " + path + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

nlohmann::json run_config_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["data"] = {{"series", cfg.data.series},
               {"adjacency", cfg.data.adjacency},
               {"format", cfg.data.format},
               {"missing", cfg.data.missing}};
  j["clustering"] = {{"k", cfg.clustering.k},
                     {"seed", cfg.clustering.seed.value_or(cfg.training.seed)},
                     {"max_iter", cfg.clustering.max_iter},
                     {"tol", cfg.clustering.tol},
                     {"dtw_band", cfg.clustering.dtw_band}};
  j["model"] = {{"seq_len", cfg.model.seq_len},
                {"horizon", cfg.model.horizon},
                {"hidden_dim", cfg.model.hidden_dim},
                {"gcn_mode", cfg.model.gcn_mode},
                {"cheb_k", cfg.model.cheb_k},
                {"d_state", cfg.model.d_state},
                {"scan_axis", cfg.model.scan_axis},
                {"dropout", cfg.model.dropout},
                {"per_cluster_weights", cfg.model.per_cluster_weights}};
  j["training"] = {{"batch_size", cfg.training.batch_size},
                   {"epochs", cfg.training.epochs},
                   {"lr", cfg.training.lr},
                   {"seed", cfg.training.seed}};
  j["grpo"] = {{"enabled", cfg.grpo.enabled},
               {"epsilon", cfg.grpo.epsilon},
               {"tau", cfg.grpo.tau},
               {"sigma", cfg.grpo.sigma},
               {"gamma", cfg.grpo.gamma},
               {"snapshot_cadence", cfg.grpo.snapshot_cadence}};
  return j;
}

MissingPolicy parse_missing_policy(const std::string& name) {
  if (name == "reject") return MissingPolicy::Reject;
  if (name == "forward-fill") return MissingPolicy::ForwardFill;
  fail("unknown missing policy '" + name + "' (expected reject or forward-fill)");
}

TrainRunConfig to_train_config(const RunConfig& cfg) {
  TrainRunConfig t;
  t.n_clusters = cfg.clustering.k;
  t.model.seq_len = cfg.model.seq_len;
  t.model.horizon = cfg.model.horizon;
  t.model.hidden_dim = cfg.model.hidden_dim;
  t.model.d_state = cfg.model.d_state;
  t.model.gcn_mode = parse_gcn_mode(cfg.model.gcn_mode);
  t.model.cheb_k = cfg.model.cheb_k;
  t.model.scan_axis = diffops::parse_scan_axis(cfg.model.scan_axis);
  t.model.dropout = cfg.model.dropout;
  t.model.per_cluster_weights = cfg.model.per_cluster_weights;
  t.batch_size = cfg.training.batch_size;
  t.epochs = cfg.training.epochs;
  t.lr = cfg.training.lr;
  t.seed = cfg.training.seed;
  t.grpo.enabled = cfg.grpo.enabled;
  t.grpo.epsilon = cfg.grpo.epsilon;
  t.grpo.tau = cfg.grpo.tau;
  t.grpo.sigma = cfg.grpo.sigma;
  t.grpo.gamma = cfg.grpo.gamma;
  t.grpo.snapshot_cadence = cfg.grpo.snapshot_cadence;
  t.cluster_seed = cfg.clustering.seed.value_or(cfg.training.seed);
  t.kmeans_max_iter = cfg.clustering.max_iter;
  t.kmeans_tol = cfg.clustering.tol;
  t.dtw_band = cfg.clustering.dtw_band > 0 ? cfg.clustering.dtw_band : -1;
  return t;
}

}  // namespace dkgcm

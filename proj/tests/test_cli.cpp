// End-to-end checks of the command-line surface: file outputs, exit codes,
// idempotency, and the error paths the interface promises.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#ifndef DKGCM_CLI_PATH
#error "DKGCM_CLI_PATH must point at the built binary"
#endif

namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("dkgcm_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
  const std::string cmd = std::string(DKGCM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_small_config(const Workspace& ws, const std::string& name,
                        int epochs = 3) {
  nlohmann::json j;
  j["data"] = {{"series", ws.path("data/series.csv")},
               {"adjacency", ws.path("data/adjacency.csv")}};
  j["clustering"] = {{"k", 2}};
  j["model"] = {{"seq_len", 8}, {"horizon", 4}, {"hidden_dim", 10}, {"d_state", 4}};
  j["training"] = {{"batch_size", 16}, {"epochs", epochs}, {"lr", 0.002}, {"seed", 3}};
  j["grpo"] = {{"enabled", true}};
  std::ofstream os(ws.path(name));
  os << j.dump(2);
}

}  // namespace

TEST_CASE("cluster command writes its outputs and is byte-idempotent") {
  Workspace ws;
  REQUIRE(run("synth --out " + ws.path("data") + " --nodes 6 --steps 300 --seed 9") == 0);

  const std::string args = "cluster --data " + ws.path("data/series.csv") +
                           " --adjacency " + ws.path("data/adjacency.csv") +
                           " --k 2 --seed 5 --out ";
  REQUIRE(run(args + ws.path("c1")) == 0);
  for (const char* f : {"dtw.csv", "cosine.csv", "clusters.json", "manifest.json"})
    CHECK(fs::exists(ws.dir / "c1" / f));

  nlohmann::json clusters = nlohmann::json::parse(slurp(ws.path("c1/clusters.json")));
  CHECK(clusters.at("K") == 2);
  CHECK(clusters.at("seed") == 5);
  CHECK(clusters.at("labels").size() == 6);
  CHECK(clusters.at("inertia").get<double>() >= 0.0);
  // Exactly the documented keys, nothing else.
  CHECK(clusters.size() == 4);

  REQUIRE(run(args + ws.path("c2")) == 0);
  CHECK(slurp(ws.path("c1/dtw.csv")) == slurp(ws.path("c2/dtw.csv")));
  CHECK(slurp(ws.path("c1/cosine.csv")) == slurp(ws.path("c2/cosine.csv")));
  CHECK(slurp(ws.path("c1/clusters.json")) == slurp(ws.path("c2/clusters.json")));
}

TEST_CASE("cluster command rejects bad arguments with nonzero exit") {
  Workspace ws;
  REQUIRE(run("synth --out " + ws.path("data") + " --nodes 4 --steps 200 --seed 1") == 0);
  CHECK(run("cluster --data " + ws.path("data/series.csv") + " --adjacency " +
            ws.path("data/adjacency.csv") + " --k 0 --out " + ws.path("bad")) != 0);
  CHECK(run("cluster --data " + ws.path("missing.csv") + " --adjacency " +
            ws.path("data/adjacency.csv") + " --k 2 --out " + ws.path("bad2")) != 0);
}

TEST_CASE("train, eval and predict round-trip through the checkpoint") {
  Workspace ws;
  REQUIRE(run("synth --out " + ws.path("data") + " --nodes 6 --steps 300 --seed 9") == 0);
  write_small_config(ws, "config.json");

  REQUIRE(run("train --config " + ws.path("config.json") + " --out " + ws.path("run")) == 0);
  for (const char* f : {"checkpoint.bin", "losslog.csv", "losslog.svg", "manifest.json"})
    CHECK(fs::exists(ws.dir / "run" / f));

  // losslog rows follow the epoch,variant,epsilon,loss schema.
  std::ifstream log(ws.path("run/losslog.csv"));
  std::string header;
  std::getline(log, header);
  CHECK(header == "epoch,variant,epsilon,loss");
  std::string row;
  std::getline(log, row);
  CHECK(row.substr(0, 7) == "1,full,");

  REQUIRE(run("eval --checkpoint " + ws.path("run/checkpoint.bin") + " --data " +
              ws.path("data/series.csv") + " --out " + ws.path("ev")) == 0);
  nlohmann::json metrics = nlohmann::json::parse(slurp(ws.path("ev/metrics.json")));
  CHECK(metrics.contains("config_hash"));
  CHECK(metrics.contains("seed"));
  CHECK(metrics.at("per_horizon").size() == 4);  // one row per horizon step
  CHECK(metrics.at("per_cluster").size() == 2);
  const double pooled_mae = metrics.at("pooled").at("mae").get<double>();
  const double at4 = metrics.at("per_horizon")[3].at("mae").get<double>();
  CHECK(pooled_mae == doctest::Approx(at4));

  // Requesting a slice beyond the trained horizon fails.
  CHECK(run("eval --checkpoint " + ws.path("run/checkpoint.bin") + " --data " +
            ws.path("data/series.csv") + " --out " + ws.path("ev_bad") + " --at 9") != 0);

  // Idempotency: identical metrics bytes on a rerun.
  REQUIRE(run("eval --checkpoint " + ws.path("run/checkpoint.bin") + " --data " +
              ws.path("data/series.csv") + " --out " + ws.path("ev2")) == 0);
  CHECK(slurp(ws.path("ev/metrics.json")) == slurp(ws.path("ev2/metrics.json")));

  // predict: F x N forecast with the node-id header.
  {
    std::ifstream src(ws.path("data/series.csv"));
    std::ofstream dst(ws.path("window.csv"));
    std::string line;
    for (int i = 0; i <= 8 && std::getline(src, line); ++i) dst << line << "\n";
  }
  REQUIRE(run("predict --checkpoint " + ws.path("run/checkpoint.bin") +
              " --window-csv " + ws.path("window.csv") + " --out " +
              ws.path("fc.csv")) == 0);
  std::ifstream fc(ws.path("fc.csv"));
  std::string header2;
  std::getline(fc, header2);
  CHECK(header2 == "n0,n1,n2,n3,n4,n5");
  int rows = 0;
  std::string l;
  while (std::getline(fc, l))
    if (!l.empty()) ++rows;
  CHECK(rows == 4);

  // A wrong-length window is rejected.
  CHECK(run("predict --checkpoint " + ws.path("run/checkpoint.bin") +
            " --window-csv " + ws.path("data/series.csv") + " --out " +
            ws.path("fc2.csv")) != 0);
}

TEST_CASE("eval rejects a dataset that does not match the checkpoint") {
  Workspace ws;
  REQUIRE(run("synth --out " + ws.path("data") + " --nodes 6 --steps 300 --seed 9") == 0);
  REQUIRE(run("synth --out " + ws.path("other") + " --nodes 6 --steps 300 --seed 10") == 0);
  write_small_config(ws, "config.json");
  REQUIRE(run("train --config " + ws.path("config.json") + " --out " + ws.path("run")) == 0);
  CHECK(run("eval --checkpoint " + ws.path("run/checkpoint.bin") + " --data " +
            ws.path("other/series.csv") + " --out " + ws.path("ev")) != 0);
}

TEST_CASE("unknown config keys are hard errors naming the key") {
  Workspace ws;
  REQUIRE(run("synth --out " + ws.path("data") + " --nodes 4 --steps 200 --seed 2") == 0);
  nlohmann::json j;
  j["data"] = {{"series", ws.path("data/series.csv")},
               {"adjacency", ws.path("data/adjacency.csv")}};
  j["training"] = {{"batch_sise", 32}};  // typo must be fatal
  std::ofstream(ws.path("bad.json")) << j.dump();
  const std::string cmd = std::string(DKGCM_CLI_PATH) + " train --config " +
                          ws.path("bad.json") + " --out " + ws.path("run") + " 2> " +
                          ws.path("err.txt");
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) != 0);
  CHECK(slurp(ws.path("err.txt")).find("batch_sise") != std::string::npos);
}

TEST_CASE("ablation emits the variant table with a shared split hash") {
  Workspace ws;
  REQUIRE(run("synth --out " + ws.path("data") + " --nodes 6 --steps 300 --seed 9") == 0);
  write_small_config(ws, "config.json", 2);
  REQUIRE(run("ablate --config " + ws.path("config.json") + " --out " + ws.path("ab") +
              " --variants full no-grpo") == 0);
  std::ifstream csv(ws.path("ab/ablation.csv"));
  std::string header, row1, row2;
  std::getline(csv, header);
  CHECK(header == "variant,mae,rmse,split_hash");
  std::getline(csv, row1);
  std::getline(csv, row2);
  CHECK(row1.substr(0, 5) == "full,");
  CHECK(row2.substr(0, 8) == "no-grpo,");
  // Both variants carry the identical split hash.
  CHECK(row1.substr(row1.rfind(',')) == row2.substr(row2.rfind(',')));
  CHECK(fs::exists(ws.dir / "ab" / "ablation.svg"));
  CHECK(fs::exists(ws.dir / "ab" / "losslog.csv"));
}

TEST_CASE("sensitivity sweep writes one row per value") {
  Workspace ws;
  REQUIRE(run("synth --out " + ws.path("data") + " --nodes 6 --steps 300 --seed 9") == 0);
  write_small_config(ws, "config.json", 2);
  REQUIRE(run("sensitivity --config " + ws.path("config.json") + " --out " +
              ws.path("se") + " --param k --values 1 2 3") == 0);
  std::ifstream csv(ws.path("se/sensitivity.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "param,value,mae,rmse");
  int rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) {
      CHECK(line.substr(0, 2) == "k,");
      ++rows;
    }
  CHECK(rows == 3);
  CHECK(fs::exists(ws.dir / "se" / "sensitivity.svg"));

  CHECK(run("sensitivity --config " + ws.path("config.json") + " --out " +
            ws.path("se_bad") + " --param nope --values 1") != 0);
}

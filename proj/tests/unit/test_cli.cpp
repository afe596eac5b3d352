#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "graphdiff/commands.hpp"
#include "graphdiff/config.hpp"

using namespace graphdiff;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("graphdiff_cli_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

struct Run {
  int code;
  std::string out, err;
};

Run cli(const std::vector<std::string> &args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

void write_tiny_config(const fs::path &dir, int epochs) {
  nlohmann::json cfg = {
      {"seed", 4},
      {"dataset", {{"path", "toy/dataset.json"}}},
      {"conditions", {{{"name", "ring_count"}}, {{"name", "has_ring"}}}},
      {"model", {{"D", 16}, {"layers", 1}, {"heads", 2}, {"K", 4}}},
      {"noise", {{"T", 10}}},
      {"train", {{"epochs", epochs}, {"batch_size", 16}, {"val_samples", 0}}},
  };
  write_text(dir / "run.json", cfg.dump(2));
}

}  // namespace

TEST_CASE("usage errors exit with the input code") {
  CHECK(cli({}).code == kExitInput);
  CHECK(cli({"bogus"}).code == kExitInput);
  CHECK(cli({"--help"}).code == kExitOk);
  TempDir tmp;
  auto r = cli({"eval", "--gen", (tmp.path / "missing.smi").string(), "--out", (tmp.path / "e").string()});
  CHECK(r.code == kExitInput);
  CHECK(r.err.find("error") != std::string::npos);
  write_text(tmp.path / "bad.json", R"({"seed": 1, "colour": 3})");
  CHECK(cli({"train", "--config", (tmp.path / "bad.json").string(), "--out", (tmp.path / "o").string()}).code ==
        kExitInput);
}

TEST_CASE("toy then eval against itself") {
  TempDir tmp;
  auto r = cli({"toy", "--n", "100", "--seed", "2", "--out", (tmp.path / "toy").string()});
  REQUIRE(r.code == kExitOk);
  Dataset d = load_dataset_bundle(tmp.path / "toy" / "dataset.json");
  CHECK(d.records.size() == 100);
  std::string text;
  for (int i : d.splits.test) text += d.records[i].smiles + "\n";
  write_text(tmp.path / "gen.smi", text);
  r = cli({"eval", "--gen", (tmp.path / "gen.smi").string(), "--ref", (tmp.path / "toy" / "dataset.json").string(),
           "--train", (tmp.path / "toy" / "dataset.json").string(), "--out", (tmp.path / "e").string()});
  REQUIRE(r.code == kExitOk);
  auto m = read_json(tmp.path / "e" / "metrics.json");
  CHECK(m["validity"].get<double>() == 1.0);
  CHECK(m["fragment_similarity"].get<double>() == doctest::Approx(1.0));
  CHECK(m["descriptor_frechet"].get<double>() == 0.0);
  CHECK(fs::exists(tmp.path / "e" / "run.json"));
}

TEST_CASE("noise-inspect and gradcheck") {
  TempDir tmp;
  REQUIRE(cli({"toy", "--n", "60", "--out", (tmp.path / "toy").string()}).code == kExitOk);
  auto r = cli({"noise-inspect", "--dataset", (tmp.path / "toy" / "dataset.json").string(), "--T", "20",
                "--samples", "500"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("tv_nodes") != std::string::npos);
  r = cli({"noise-inspect", "--dataset", (tmp.path / "toy" / "dataset.json").string(), "--T", "20", "--t", "30"});
  CHECK(r.code == kExitInput);
  r = cli({"gradcheck", "--seed", "2"});
  CHECK(r.code == kExitOk);
}

TEST_CASE("train and sample are byte-reproducible") {
  TempDir tmp;
  REQUIRE(cli({"toy", "--n", "40", "--max-atoms", "6", "--out", (tmp.path / "toy").string()}).code == kExitOk);
  write_tiny_config(tmp.path, 2);
  std::string smiles[2];
  for (int k = 0; k < 2; ++k) {
    fs::path run = tmp.path / ("run" + std::to_string(k));
    REQUIRE(cli({"train", "--config", (tmp.path / "run.json").string(), "--out", run.string(), "--threads", "1"})
                .code == kExitOk);
    fs::path s = tmp.path / ("s" + std::to_string(k));
    REQUIRE(cli({"sample", "--checkpoint", (run / "checkpoint-last.json").string(), "--count", "8", "--seed", "5",
                 "--out", s.string(), "--threads", "1"})
                .code == kExitOk);
    smiles[k] = read_text(s / "samples.smi");
  }
  CHECK(!smiles[0].empty());
  CHECK(smiles[0] == smiles[1]);
}

TEST_CASE("resume refuses a changed config") {
  TempDir tmp;
  REQUIRE(cli({"toy", "--n", "40", "--max-atoms", "6", "--out", (tmp.path / "toy").string()}).code == kExitOk);
  write_tiny_config(tmp.path, 1);
  fs::path run = tmp.path / "run";
  REQUIRE(cli({"train", "--config", (tmp.path / "run.json").string(), "--out", run.string()}).code == kExitOk);
  write_tiny_config(tmp.path, 2);
  CHECK(cli({"train", "--config", (tmp.path / "run.json").string(), "--out", run.string(), "--resume"}).code ==
        kExitOk);
  auto cfg = read_json(tmp.path / "run.json");
  cfg["model"]["D"] = 8;
  write_text(tmp.path / "run.json", cfg.dump());
  auto r = cli({"train", "--config", (tmp.path / "run.json").string(), "--out", run.string(), "--resume"});
  CHECK(r.code == kExitCompat);
}

TEST_CASE("sample rejects a malformed checkpoint") {
  TempDir tmp;
  write_text(tmp.path / "ck.json", "{}");
  auto r = cli({"sample", "--checkpoint", (tmp.path / "ck.json").string(), "--out", (tmp.path / "s").string()});
  CHECK(r.code != kExitOk);
}

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gblend/cli.hpp"

using namespace gblend;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string write(const std::string& file, const json& j) const {
    std::ofstream(path / file) << j.dump(2);
    return (path / file).string();
  }
};

json small_experiment(const fs::path& out) {
  return {
      {"seed", 3},
      {"dataset",
       {{"synthetic",
         {{"class_count", 3},
          {"rows", 240},
          {"seed", 8},
          {"modalities",
           {{{"name", "v"}, {"feature_dim", 4}, {"informative_dim", 4}, {"snr", 2.0}},
            {{"name", "a"}, {"feature_dim", 6}, {"informative_dim", 2}, {"bait_dim", 4}}}}}},
        {"split", {{"train", 0.7}, {"holdout", 0.15}, {"test", 0.15}}}}},
      {"model", {{"encoder_hidden", {6}}, {"feature_dim", 4}, {"fusion_hidden", 6}}},
      {"train", {{"epochs", 2}, {"super_epoch", 1}, {"warmup", 1}, {"batch_size", 32}}},
      {"output_dir", out.string()}};
}

json small_oracle() {
  return {{"ks", {2}},
          {"dimension", 8},
          {"trials", 2000},
          {"scenarios", 2},
          {"correlated_scenarios", 1},
          {"grid_step", 0.05},
          {"taylor_dimension", 3}};
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with the config code") {
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"bogus"}).code == kExitConfig);
  CHECK(cli({"train"}).code == kExitConfig);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("config errors name the field") {
  TempDir tmp("gblend_cli_config");
  json j = small_experiment(tmp.path / "run");
  j["dataset"]["split"]["holdout"] = 0.3;
  const Result r = cli({"gen-data", "--config", tmp.write("c.json", j)});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("dataset.split") != std::string::npos);

  j = small_experiment(tmp.path / "run");
  j["train"]["learning_rate"] = 0.1;
  const Result unknown = cli({"train", "--config", tmp.write("u.json", j)});
  CHECK(unknown.code == kExitConfig);
  CHECK(unknown.err.find("train.learning_rate") != std::string::npos);

  json o = {{"oracle", small_oracle()}};
  o["oracle"]["trials"] = 0;
  const Result oracle = cli({"oracle", "--config", tmp.write("o.json", o)});
  CHECK(oracle.code == kExitConfig);
  CHECK(oracle.err.find("oracle.trials") != std::string::npos);

  CHECK(cli({"train", "--config", (tmp.path / "missing.json").string()}).code == kExitConfig);
}

TEST_CASE("gen-data is reproducible") {
  TempDir tmp("gblend_cli_gen");
  const std::string cfg = tmp.write("c.json", small_experiment(tmp.path / "data"));
  const Result a = cli({"gen-data", "--config", cfg});
  REQUIRE(a.code == kExitOk);
  std::ifstream m1(tmp.path / "data" / "manifest.json");
  const std::string first((std::istreambuf_iterator<char>(m1)), {});
  const Result b = cli({"gen-data", "--config", cfg});
  REQUIRE(b.code == kExitOk);
  CHECK(a.out == b.out);
  std::ifstream m2(tmp.path / "data" / "manifest.json");
  CHECK(std::string((std::istreambuf_iterator<char>(m2)), {}) == first);
  CHECK(a.out.find("manifest ") != std::string::npos);
}

TEST_CASE("train, estimate-weights and report") {
  TempDir tmp("gblend_cli_train");
  const std::string cfg = tmp.write("c.json", small_experiment(tmp.path / "naive"));
  REQUIRE(cli({"train", "--config", cfg}).code == kExitOk);
  REQUIRE(cli({"train", "--config", cfg, "--mode", "online-gblend", "--output-dir",
               (tmp.path / "online").string()})
              .code == kExitOk);
  CHECK(fs::exists(tmp.path / "naive" / "curves.csv"));
  CHECK(!fs::exists(tmp.path / "naive" / "weights.json"));
  CHECK(fs::exists(tmp.path / "online" / "weights.json"));

  std::ifstream s(tmp.path / "online" / "summary.json");
  const json summary = json::parse(s);
  CHECK(summary["format"] == "gblend-summary");
  CHECK(summary["mode"] == "online-gblend");
  CHECK(summary["comparisons"].size() == 2);

  const Result est = cli({"estimate-weights", "--config", cfg, "--checkpoint",
                          (tmp.path / "naive" / "checkpoint.json").string(), "--epochs", "1"});
  REQUIRE(est.code == kExitOk);
  const json rec = json::parse(est.out);
  CHECK(rec["heads"].size() == 3);

  const std::string csv = (tmp.path / "report.csv").string();
  const Result rep = cli({"report", (tmp.path / "naive").string(),
                          (tmp.path / "online").string(), "--csv", csv});
  REQUIRE(rep.code == kExitOk);
  std::ifstream c1(csv);
  const std::string table((std::istreambuf_iterator<char>(c1)), {});
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);
  CHECK(table.rfind("run,mode,", 0) == 0);
  const Result again = cli({"report", (tmp.path / "naive").string(),
                            (tmp.path / "online").string(), "--csv", csv});
  std::ifstream c2(csv);
  CHECK(std::string((std::istreambuf_iterator<char>(c2)), {}) == table);
  CHECK(again.out == rep.out);

  const Result missing = cli({"report", tmp.path.string()});
  CHECK(missing.code == kExitRuntime);
  CHECK(missing.err.find("summary.json") != std::string::npos);
}

TEST_CASE("oracle verdicts map to exit codes") {
  TempDir tmp("gblend_cli_oracle");
  const Result good = cli({"oracle", "--config", tmp.write("o.json", {{"oracle", small_oracle()}})});
  CHECK(good.code == kExitOk);
  CHECK(json::parse(good.out)["pass"] == true);

  json bad = {{"oracle", small_oracle()}};
  bad["oracle"]["inject_weights"] = {1.0, 0.0};
  const Result fail = cli({"oracle", "--config", tmp.write("b.json", bad), "--output",
                           (tmp.path / "report.json").string()});
  CHECK(fail.code == kExitVerification);
  CHECK(fs::exists(tmp.path / "report.json"));
}

}  // TEST_SUITE cli

#include "gblend/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "gblend/errors.hpp"
#include "gblend/experiment.hpp"

namespace gblend {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
};

json read_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("config", "cannot open " + file);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
}

ExperimentConfig load(const std::string& file, const Overrides& o) {
  json j = read_config(file);
  if (!j.is_object()) throw ConfigError("config", "must be a JSON object");
  if (o.seed) j["seed"] = *o.seed;
  if (o.output_dir) j["output_dir"] = *o.output_dir;
  return parse_experiment(j);
}

void write_file(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + file.string());
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Override the root seed");
  cmd->add_option("--output-dir", o.output_dir, "Override the output directory");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient-Blending trainer for multi-modal late-fusion networks", "gblend"};
  app.require_subcommand(1);

  std::string config;
  Overrides ov;
  std::string mode;
  std::string checkpoint, output;
  int epochs = 0;
  std::vector<std::string> runs;
  std::string csv_file, text_file;

  auto* gen = app.add_subcommand("gen-data", "Generate and split a synthetic dataset");
  gen->add_option("--config", config, "Experiment config")->required();
  add_overrides(gen, ov);

  auto* train = app.add_subcommand("train", "Train one run and write its run directory");
  train->add_option("--config", config, "Experiment config")->required();
  train->add_option("--mode", mode,
                    "uni, naive, equal, dropout, pretrain, offline-gblend or online-gblend");
  add_overrides(train, ov);

  auto* est = app.add_subcommand("estimate-weights", "Estimate blend weights from a checkpoint");
  est->add_option("--config", config, "Experiment config")->required();
  est->add_option("--checkpoint", checkpoint, "checkpoint.json of a run")->required();
  est->add_option("--epochs", epochs, "Estimation epochs per head")->required();
  est->add_option("--output", output, "Write the weight record here instead of stdout");
  add_overrides(est, ov);

  auto* oracle = app.add_subcommand("oracle", "Verify the optimal blend on the gradient testbed");
  oracle->add_option("--config", config, "Config with an 'oracle' section");
  oracle->add_option("--output", output, "Write the report here instead of stdout");
  oracle->add_option("--seed", ov.seed, "Override the root seed");

  auto* report = app.add_subcommand("report", "Compare finished runs");
  report->add_option("runs", runs, "Run directories")->required();
  report->add_option("--csv", csv_file, "Write the CSV table here");
  report->add_option("--text", text_file, "Write the text table here");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (*gen) {
      const ExperimentConfig cfg = load(config, ov);
      const std::string hash = cmd_gen_data(cfg);
      const Dataset data = load_dataset(resolve_output(cfg.output_dir));
      out << "dataset " << resolve_output(cfg.output_dir).string() << '\n'
          << "rows " << data.rows() << " classes " << data.class_count << " modalities "
          << data.modality_count() << '\n'
          << "split train " << data.indices(Split::train).size() << " holdout "
          << data.indices(Split::holdout).size() << " test " << data.indices(Split::test).size()
          << '\n'
          << "manifest " << hash << '\n';
    } else if (*train) {
      ExperimentConfig cfg = load(config, ov);
      if (!mode.empty()) cfg.mode = train_mode_from_string(mode);
      const TrainOutputs res = cmd_train(cfg);
      out << "run " << res.run_dir.string() << '\n'
          << "mode " << to_string(cfg.mode) << '\n'
          << "train_accuracy " << res.summary["train_accuracy"].dump() << '\n'
          << "val_accuracy " << res.summary["val_accuracy"].dump() << '\n'
          << "test_accuracy " << res.summary["test_accuracy"].dump() << '\n';
    } else if (*est) {
      const ExperimentConfig cfg = load(config, ov);
      const json rec = cmd_estimate_weights(cfg, checkpoint, epochs);
      if (output.empty()) {
        out << rec.dump(2) << '\n';
      } else {
        write_file(resolve_output(output), rec.dump(2) + "\n");
      }
    } else if (*oracle) {
      OracleConfig oc;
      std::uint64_t seed = 0;
      if (!config.empty()) {
        const ExperimentConfig cfg = load(config, ov);
        oc = cfg.oracle;
        seed = cfg.seed;
      } else if (ov.seed) {
        seed = *ov.seed;
      }
      const OracleOutputs res = cmd_oracle(oc, seed);
      if (output.empty()) {
        out << res.report.dump(2) << '\n';
      } else {
        write_file(resolve_output(output), res.report.dump(2) + "\n");
      }
      if (!res.pass) {
        err << "oracle verification failed\n";
        return kExitVerification;
      }
    } else if (*report) {
      std::vector<fs::path> dirs(runs.begin(), runs.end());
      const ReportOutputs res = cmd_report(dirs);
      if (!csv_file.empty()) write_file(csv_file, res.csv);
      if (!text_file.empty()) write_file(text_file, res.text);
      out << res.text;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace gblend

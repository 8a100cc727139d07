#include "gblend/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gblend/errors.hpp"
#include "gblend/serialize.hpp"

namespace gblend {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::uni: return "uni";
    case TrainMode::naive: return "naive";
    case TrainMode::equal: return "equal";
    case TrainMode::dropout: return "dropout";
    case TrainMode::pretrain: return "pretrain";
    case TrainMode::offline_gblend: return "offline-gblend";
    case TrainMode::online_gblend: return "online-gblend";
  }
  return "?";
}

TrainMode train_mode_from_string(const std::string& s) {
  for (auto m : {TrainMode::uni, TrainMode::naive, TrainMode::equal, TrainMode::dropout,
                 TrainMode::pretrain, TrainMode::offline_gblend, TrainMode::online_gblend}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("trainer.mode", "unknown mode '" + s + "'");
}

namespace {

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(path, "must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
    }
  }
}

std::string join(const std::string& path, const char* key) {
  return path.empty() ? std::string(key) : path + "." + key;
}

template <class T>
void read(const json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(join(path, key), "wrong type");
  }
}

OptimizerSpec parse_optimizer(const json& j) {
  const std::string p = "train.optimizer";
  check_keys(j, p, {"kind", "learning_rate", "momentum", "beta1", "beta2", "epsilon"});
  OptimizerSpec o;
  std::string kind = to_string(o.kind);
  read(j, p, "kind", kind);
  try {
    o.kind = optimizer_from_string(kind);
  } catch (const std::invalid_argument&) {
    throw ConfigError(p + ".kind", "unknown optimizer '" + kind + "'");
  }
  read(j, p, "learning_rate", o.learning_rate);
  read(j, p, "momentum", o.momentum);
  read(j, p, "beta1", o.beta1);
  read(j, p, "beta2", o.beta2);
  read(j, p, "epsilon", o.epsilon);
  return o;
}

TrainConfig parse_train(const json& j) {
  const std::string p = "train";
  check_keys(j, p,
             {"epochs", "super_epoch", "warmup", "optimizer", "batch_size", "metric",
              "train_subset_fraction", "estimation_fraction"});
  TrainConfig t;
  read(j, p, "epochs", t.epochs);
  read(j, p, "super_epoch", t.super_epoch);
  read(j, p, "warmup", t.warmup);
  read(j, p, "batch_size", t.batch_size);
  read(j, p, "train_subset_fraction", t.train_subset_fraction);
  read(j, p, "estimation_fraction", t.estimation_fraction);
  if (j.contains("metric")) {
    std::string m;
    read(j, p, "metric", m);
    try {
      t.metric = metric_from_string(m);
    } catch (const std::invalid_argument&) {
      throw ConfigError("train.metric", "must be 'loss' or 'accuracy'");
    }
  }
  if (j.contains("optimizer")) t.optimizer = parse_optimizer(j.at("optimizer"));
  return t;
}

FusionArch parse_model(const json& j) {
  const std::string p = "model";
  check_keys(j, p, {"encoder_hidden", "feature_dim", "head_hidden", "fusion_hidden",
                    "fusion_dropout"});
  FusionArch a;
  read(j, p, "encoder_hidden", a.encoder_hidden);
  read(j, p, "feature_dim", a.feature_dim);
  read(j, p, "head_hidden", a.head_hidden);
  read(j, p, "fusion_hidden", a.fusion_hidden);
  read(j, p, "fusion_dropout", a.fusion_dropout);
  if (a.feature_dim == 0) throw ConfigError("model.feature_dim", "must be positive");
  if (a.fusion_hidden == 0) throw ConfigError("model.fusion_hidden", "must be positive");
  if (!(a.fusion_dropout >= 0.0 && a.fusion_dropout < 1.0)) {
    throw ConfigError("model.fusion_dropout", "must be in [0, 1)");
  }
  return a;
}

OracleConfig parse_oracle(const json& j) {
  const std::string p = "oracle";
  check_keys(j, p, {"ks", "dimension", "trials", "scenarios", "correlated_scenarios", "grid_step",
                    "taylor_eta", "taylor_dimension", "inject_weights"});
  OracleConfig o;
  read(j, p, "ks", o.ks);
  read(j, p, "dimension", o.dimension);
  read(j, p, "trials", o.trials);
  read(j, p, "scenarios", o.scenarios);
  read(j, p, "correlated_scenarios", o.correlated_scenarios);
  read(j, p, "grid_step", o.grid_step);
  read(j, p, "taylor_eta", o.taylor_eta);
  read(j, p, "taylor_dimension", o.taylor_dimension);
  if (j.contains("inject_weights")) {
    std::vector<double> w;
    read(j, p, "inject_weights", w);
    o.inject_weights = std::move(w);
  }
  if (o.ks.empty()) throw ConfigError("oracle.ks", "must not be empty");
  for (auto k : o.ks) {
    if (k < 2 || k > 4) throw ConfigError("oracle.ks", "entries must be in [2, 4]");
  }
  if (o.dimension < 2) throw ConfigError("oracle.dimension", "must be at least 2");
  if (o.trials == 0) throw ConfigError("oracle.trials", "must be positive");
  if (o.scenarios == 0) throw ConfigError("oracle.scenarios", "must be positive");
  if (!(o.grid_step == 0.05 || o.grid_step == 0.02 || o.grid_step == 0.01)) {
    throw ConfigError("oracle.grid_step", "must be 0.05, 0.02 or 0.01");
  }
  if (!(o.taylor_eta > 0.0)) throw ConfigError("oracle.taylor_eta", "must be positive");
  if (o.taylor_dimension == 0) throw ConfigError("oracle.taylor_dimension", "must be positive");
  return o;
}

void parse_dataset(const json& j, ExperimentConfig& cfg) {
  const std::string p = "dataset";
  check_keys(j, p, {"path", "synthetic", "split"});
  if (j.contains("path") == j.contains("synthetic")) {
    throw ConfigError(p, "exactly one of 'path' and 'synthetic' is required");
  }
  if (j.contains("path")) {
    std::string path;
    read(j, p, "path", path);
    cfg.dataset_path = path;
    if (j.contains("split")) throw ConfigError("dataset.split", "only valid with 'synthetic'");
    return;
  }
  cfg.synthetic = synthetic_spec_from_json(j.at("synthetic"), "dataset.synthetic");
  if (j.contains("split")) {
    const json& s = j.at("split");
    check_keys(s, "dataset.split", {"train", "holdout", "test"});
    read(s, "dataset.split", "train", cfg.split.train);
    read(s, "dataset.split", "holdout", cfg.split.holdout);
    read(s, "dataset.split", "test", cfg.split.test);
  }
  try {
    cfg.split.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("dataset.split", e.what());
  }
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + file.string());
}

json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  return json::parse(in);
}

json optional_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

BaselineSpec baseline_spec(const ExperimentConfig& cfg) {
  BaselineSpec s;
  switch (cfg.mode) {
    case TrainMode::uni: s.kind = BaselineKind::uni_modal; s.modality = cfg.modality; break;
    case TrainMode::naive: s.kind = BaselineKind::naive_joint; break;
    case TrainMode::equal: s.kind = BaselineKind::equal_weights; break;
    case TrainMode::dropout: s.kind = BaselineKind::dropout; s.dropout_rate = cfg.dropout_rate; break;
    case TrainMode::pretrain: s.kind = BaselineKind::pretrain_finetune; break;
    default: break;
  }
  return s;
}

FusionArch arch_for(const ExperimentConfig& cfg, const Dataset& data) {
  FusionArch a = cfg.arch;
  a.input_dims = data.input_dims();
  a.class_count = data.class_count;
  a.validate();
  return a;
}

json schedule_json(const WeightSchedule& s) {
  json out = json::array();
  for (const auto& e : s) out.push_back({{"start_epoch", e.start_epoch}, {"weights", e.weights.values()}});
  return out;
}

}  // namespace

ExperimentConfig parse_experiment(const json& j) {
  check_keys(j, "", {"seed", "dataset", "model", "train", "trainer", "output_dir", "oracle"});
  ExperimentConfig cfg;
  read(j, "", "seed", cfg.seed);
  if (j.contains("dataset")) parse_dataset(j.at("dataset"), cfg);
  if (j.contains("model")) cfg.arch = parse_model(j.at("model"));
  if (j.contains("train")) cfg.train = parse_train(j.at("train"));
  if (j.contains("trainer")) {
    const json& t = j.at("trainer");
    check_keys(t, "trainer", {"mode", "modality", "dropout_rate"});
    if (t.contains("mode")) {
      std::string m;
      read(t, "trainer", "mode", m);
      cfg.mode = train_mode_from_string(m);
    }
    read(t, "trainer", "modality", cfg.modality);
    read(t, "trainer", "dropout_rate", cfg.dropout_rate);
    if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0)) {
      throw ConfigError("trainer.dropout_rate", "must be in [0, 1)");
    }
  }
  if (j.contains("output_dir")) {
    std::string d;
    read(j, "", "output_dir", d);
    if (d.empty()) throw ConfigError("output_dir", "must not be empty");
    cfg.output_dir = d;
  }
  if (j.contains("oracle")) cfg.oracle = parse_oracle(j.at("oracle"));
  cfg.train.seed = RngSeed{cfg.seed};
  cfg.train.validate();
  return cfg;
}

ExperimentConfig load_experiment(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("config", "cannot open " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return parse_experiment(j);
}

fs::path resolve_output(const fs::path& dir) {
  if (dir.is_absolute()) return dir;
  const char* root = std::getenv("GBLEND_OUTPUT_ROOT");
  if (root && *root) return fs::path(root) / dir;
  return dir;
}

Dataset resolve_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset_path) return load_dataset(*cfg.dataset_path);
  if (!cfg.synthetic) throw ConfigError("dataset", "missing");
  return split(gen_multimodal(*cfg.synthetic), cfg.split,
               derive_seed(RngSeed{cfg.synthetic->seed}, "split"));
}

std::string cmd_gen_data(const ExperimentConfig& cfg) {
  if (!cfg.synthetic) throw ConfigError("dataset.synthetic", "gen-data needs a synthetic spec");
  const Dataset data = resolve_dataset(cfg);
  const fs::path dir = resolve_output(cfg.output_dir);
  const json extra = {{"spec", to_json(*cfg.synthetic)},
                      {"split_fractions",
                       {{"train", cfg.split.train}, {"holdout", cfg.split.holdout},
                        {"test", cfg.split.test}}}};
  save_dataset(data, dir, extra);
  std::ifstream in(dir / "manifest.json", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) h = (h ^ c) * 0x100000001b3ULL;
  return digest_hex(h);
}

std::string curves_csv(const RunLog& log, MetricKind kind) {
  std::ostringstream out;
  out << "epoch,head,train_loss,val_loss,train_acc,val_acc,O,G\n";
  if (log.heads.empty()) return out.str();
  const std::size_t epochs = log.heads.front().size();
  for (std::size_t e = 0; e < epochs; ++e) {
    for (std::size_t h = 0; h < log.heads.size(); ++h) {
      const auto& rec0 = log.heads[h].front();
      const auto& r = log.heads[h][e];
      const bool origin = e == 0;  // O and G are zero by definition
      out << r.epoch << ',' << h << ',' << fmt(r.train_loss) << ',' << fmt(r.val_loss) << ','
          << fmt(r.train_acc) << ',' << fmt(r.val_acc) << ','
          << fmt(origin ? 0.0 : overfitting_at(rec0, r, kind)) << ','
          << fmt(origin ? 0.0 : generalization_at(rec0, r, kind)) << '\n';
    }
  }
  return out.str();
}

json summarize_run(const RunResult& run, const TrainingData& td, std::size_t eval_head,
                   const TrainConfig& config) {
  const auto& curve = run.log.heads.at(eval_head);
  const CheckpointRecord& last = curve.back();

  // Window boundaries: schedule starts when weights changed, else every n epochs.
  std::set<int> bounds{0, last.epoch};
  if (run.log.schedule.size() > 1) {
    for (const auto& s : run.log.schedule) bounds.insert(s.start_epoch);
  } else {
    for (int e = config.super_epoch; e < last.epoch; e += config.super_epoch) bounds.insert(e);
  }
  const std::vector<int> b(bounds.begin(), bounds.end());
  auto at = [&](int epoch) -> const CheckpointRecord& {
    for (const auto& r : curve) {
      if (r.epoch == epoch) return r;
    }
    throw ContractError("summarize_run: epoch missing from curve");
  };
  json windows = json::array();
  std::optional<double> final_ogr;
  for (std::size_t i = 0; i + 1 < b.size(); ++i) {
    const OgrReport rep = ogr_between(curve.front(), at(b[i]), at(b[i + 1]), config.metric);
    windows.push_back({{"start_epoch", b[i]},
                       {"end_epoch", b[i + 1]},
                       {"O", overfitting_at(curve.front(), at(b[i + 1]), config.metric)},
                       {"G", generalization_at(curve.front(), at(b[i + 1]), config.metric)},
                       {"delta_O", rep.delta_o},
                       {"delta_G", rep.delta_g},
                       {"ogr", optional_json(rep.ogr)},
                       {"negative_G", rep.negative_g}});
    final_ogr = rep.ogr;
  }

  json test = nullptr;
  if (!td.test.empty()) test = evaluate_heads(run.state.net, *td.data, td.test)[eval_head].accuracy;
  json comparisons = json::array();
  for (const auto& c : run.comparisons) {
    comparisons.push_back({{"start_epoch", c.start_epoch},
                           {"length", c.length},
                           {"gblend_accuracy", c.gblend_val_acc},
                           {"naive_accuracy", c.naive_val_acc}});
  }
  return {{"format", "gblend-summary"},
          {"version", 1},
          {"evaluation_head", eval_head},
          {"epochs", last.epoch},
          {"metric", to_string(config.metric)},
          {"accuracy_kind", td.multilabel() ? "mAP" : "top1"},
          {"train_accuracy", last.train_acc},
          {"val_accuracy", last.val_acc},
          {"test_accuracy", test},
          {"train_val_gap", last.train_acc - last.val_acc},
          {"final_ogr", optional_json(final_ogr)},
          {"windows", std::move(windows)},
          {"schedule", schedule_json(run.log.schedule)},
          {"comparisons", std::move(comparisons)}};
}

TrainOutputs cmd_train(const ExperimentConfig& cfg) {
  const Dataset data = resolve_dataset(cfg);
  const FusionArch arch = arch_for(cfg, data);
  const MultiHeadNet net0 = make_multihead(arch, derive_seed(cfg.train.seed, "init"));
  const TrainingData td = make_training_data(data, cfg.train);
  if (cfg.mode == TrainMode::uni && cfg.modality >= data.modality_count()) {
    throw ConfigError("trainer.modality", "out of range");
  }

  RunResult run;
  std::size_t head = net0.fused_index();
  const bool gblend = cfg.mode == TrainMode::offline_gblend || cfg.mode == TrainMode::online_gblend;
  if (cfg.mode == TrainMode::offline_gblend) {
    run = offline_gblend(net0, td, cfg.train);
  } else if (cfg.mode == TrainMode::online_gblend) {
    run = online_gblend(net0, td, cfg.train, true);
  } else {
    const BaselineSpec spec = baseline_spec(cfg);
    run = baseline(spec, net0, td, cfg.train);
    head = evaluation_head(spec, net0);
  }

  const fs::path dir = resolve_output(cfg.output_dir);
  fs::create_directories(dir);
  write_text(dir / "curves.csv", curves_csv(run.log, cfg.train.metric));
  if (gblend) {
    const json weights = {{"format", "gblend-weights"},
                          {"version", 1},
                          {"schedule", schedule_json(run.log.schedule)},
                          {"estimates", run.log.weight_records}};
    write_text(dir / "weights.json", weights.dump(2) + "\n");
  }
  json ckpt = net_to_json(run.state.net);
  ckpt["epoch"] = run.state.epoch;
  write_text(dir / "checkpoint.json", ckpt.dump() + "\n");

  json summary = summarize_run(run, td, head, cfg.train);
  summary["mode"] = to_string(cfg.mode);
  summary["seed"] = cfg.seed;
  summary["head_names"] = [&] {
    json names = data.modality_names;
    names.push_back("fused");
    return names;
  }();
  const auto flat = flatten(run.state.net);
  summary["checkpoint_digest"] = digest_hex(digest(flat));
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  return {dir, summary};
}

json cmd_estimate_weights(const ExperimentConfig& cfg, const fs::path& checkpoint, int epochs) {
  if (epochs < 1) throw ConfigError("epochs", "must be positive");
  const Dataset data = resolve_dataset(cfg);
  const json ckpt = read_json(checkpoint);
  TrainerState state = fresh_state(net_from_json(ckpt), cfg.train);
  state.epoch = ckpt.value("epoch", 0);
  if (state.net.modality_count() != data.modality_count()) {
    throw ArgumentError("checkpoint has " + std::to_string(state.net.modality_count()) +
                        " modalities, dataset has " + std::to_string(data.modality_count()));
  }
  const TrainingData td = make_training_data(data, cfg.train);
  const EstimateResult est = gb_estimate(state, td, epochs, cfg.train);
  return weight_record_json(state.epoch, est.measurements, est.weights);
}

OracleOutputs cmd_oracle(const OracleConfig& cfg, std::uint64_t seed) {
  const RngSeed root{seed};
  OracleOutputs out;
  bool pass = true;
  bool injected_used = false;

  json uncorrelated = json::array();
  double reduction_gap = 0.0;
  for (std::size_t s = 0; s < cfg.scenarios; ++s) {
    const std::size_t k = cfg.ks[s % cfg.ks.size()];
    const GradientScenario sc =
        random_uncorrelated_scenario(k, cfg.dimension, cfg.trials, derive_seed(root, "uncorrelated", s));
    std::optional<std::vector<double>> inject;
    if (cfg.inject_weights && cfg.inject_weights->size() == k) {
      inject = cfg.inject_weights;
      injected_used = true;
    }
    const Proposition1Report rep = verify_proposition1(sc, cfg.grid_step, inject);
    pass = pass && rep.pass;
    uncorrelated.push_back(rep.to_json());

    // With diagonal Sigma the general formula must reduce to the closed form.
    GradientStats st = sc.stats();
    st.Sigma = st.sigma2.asDiagonal();
    const BlendWeights a = optimal_weights_correlated(st);
    const BlendWeights u = optimal_weights_uncorrelated(st);
    for (std::size_t i = 0; i < k; ++i) reduction_gap = std::max(reduction_gap, std::abs(a[i] - u[i]));
  }
  if (cfg.inject_weights && !injected_used) {
    throw ConfigError("oracle.inject_weights", "length matches no scenario size");
  }
  const bool reduction_ok = reduction_gap <= 1e-10;
  pass = pass && reduction_ok;

  json correlated = json::array();
  std::size_t dominated = 0;
  for (std::size_t s = 0; s < cfg.correlated_scenarios; ++s) {
    const GradientScenario sc =
        random_correlated_scenario(3, cfg.dimension, cfg.trials, derive_seed(root, "correlated", s));
    const Proposition1Report rep = verify_proposition1(sc, cfg.grid_step);
    const bool ok = rep.correlated &&
                    rep.correlated->mean <= rep.uncorrelated.mean + rep.uncorrelated.standard_error;
    dominated += ok;
    pass = pass && ok;
    json j = rep.to_json();
    j["dominates_uncorrelated"] = ok;
    correlated.push_back(std::move(j));
  }

  const QuadraticLandscape q = random_quadratic_landscape(cfg.taylor_dimension, derive_seed(root, "taylor"));
  Eigen::VectorXd theta = q.optimum;
  {
    Rng rng(derive_seed(root, "taylor-start"));
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) += rng.normal();
  }
  const TaylorReport taylor = taylor_step_check(q, theta, q.train_grad(theta), cfg.taylor_eta);
  pass = pass && taylor.pass;

  out.report = {{"format", "gblend-oracle-report"},
                {"version", 1},
                {"seed", seed},
                {"uncorrelated", std::move(uncorrelated)},
                {"diagonal_reduction", {{"max_abs_diff", reduction_gap}, {"pass", reduction_ok}}},
                {"correlated", std::move(correlated)},
                {"correlated_dominance", {{"passed", dominated}, {"total", cfg.correlated_scenarios}}},
                {"taylor", taylor.to_json()},
                {"pass", pass}};
  out.pass = pass;
  return out;
}

ReportOutputs cmd_report(const std::vector<fs::path>& run_dirs) {
  if (run_dirs.empty()) throw ArgumentError("report: no run directories");
  struct Row {
    std::string run, mode, val, test, gap, ogr;
  };
  std::vector<Row> rows;
  auto cell = [](const json& v) { return v.is_null() ? std::string("") : fmt(v.get<double>()); };
  for (const auto& d : run_dirs) {
    const fs::path file = d / "summary.json";
    if (!fs::exists(file)) throw std::runtime_error("missing summary.json in " + d.string());
    const json s = read_json(file);
    rows.push_back({d.filename().empty() ? d.parent_path().filename().string() : d.filename().string(),
                    s.value("mode", ""), cell(s.at("val_accuracy")), cell(s.at("test_accuracy")),
                    cell(s.at("train_val_gap")), cell(s.at("final_ogr"))});
  }
  const std::vector<std::string> header{"run", "mode", "val_acc", "test_acc", "train_val_gap",
                                        "final_ogr"};
  auto fields = [](const Row& r) {
    return std::vector<std::string>{r.run, r.mode, r.val, r.test, r.gap, r.ogr};
  };

  ReportOutputs out;
  std::ostringstream csv;
  for (std::size_t i = 0; i < header.size(); ++i) csv << (i ? "," : "") << header[i];
  csv << '\n';
  for (const auto& r : rows) {
    const auto f = fields(r);
    for (std::size_t i = 0; i < f.size(); ++i) csv << (i ? "," : "") << f[i];
    csv << '\n';
  }
  out.csv = csv.str();

  // Plain-text table: percentages with two decimals, OGR with four.
  auto pct = [](const std::string& v) {
    if (v.empty()) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * std::strtod(v.c_str(), nullptr));
    return std::string(buf);
  };
  auto num = [](const std::string& v) {
    if (v.empty()) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", std::strtod(v.c_str(), nullptr));
    return std::string(buf);
  };
  std::vector<std::vector<std::string>> table{header};
  for (const auto& r : rows) table.push_back({r.run, r.mode, pct(r.val), pct(r.test), pct(r.gap), num(r.ogr)});
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::ostringstream text;
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i) text << "  ";
      if (i < 2) text << std::left; else text << std::right;
      text << std::setw(static_cast<int>(width[i])) << line[i];
    }
    text << '\n';
  }
  out.text = text.str();
  return out;
}

}  // namespace gblend

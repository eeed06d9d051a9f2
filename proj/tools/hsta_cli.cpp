#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hsta/checkpoint.hpp"
#include "hsta/config.hpp"
#include "hsta/experiment.hpp"
#include "hsta/gradcheck.hpp"
#include "hsta/synth.hpp"
#include "hsta/tensor_io.hpp"
#include "hsta/trainer.hpp"

namespace fs = std::filesystem;
using namespace hsta;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t jobs = 1;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "experiment seed");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--jobs", flags.jobs, "parallel workers")->check(CLI::PositiveNumber);
  cmd->add_option("--set", flags.overrides, "KEY=VALUE config override (repeatable)");
}

ExperimentConfig resolve_config(const CommonFlags& flags) {
  ExperimentConfig cfg = flags.config.empty() ? ExperimentConfig::defaults() : load_experiment_config(flags.config);
  for (const auto& o : flags.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + o + "'");
    apply_override(cfg, o.substr(0, eq), o.substr(eq + 1));
  }
  if (flags.seed) cfg.seed = *flags.seed;
  if (!flags.out.empty()) cfg.out_dir = flags.out;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Loads the dataset and checks it against the model half of the config.
Dataset load_checked(ExperimentConfig& cfg) {
  const fs::path dir = cfg.dataset_path();
  if (!fs::exists(dir / "manifest.json")) {
    throw std::runtime_error("no dataset at " + dir.string() + " (run `hsta gen` first)");
  }
  Dataset ds = load_dataset(dir);
  cfg.gen = ds.spec;
  cfg.validate();
  return ds;
}

int cmd_gen(ExperimentConfig cfg, const CommonFlags& flags) {
  if (flags.seed) cfg.gen.seed = *flags.seed;
  cfg.gen.validate();
  const auto clips = generate_dataset(cfg.gen);
  const fs::path dir = cfg.dataset_path();
  save_dataset(dir, cfg.gen, clips);

  std::map<std::size_t, std::size_t> per_class;
  for (const auto& c : clips) ++per_class[c.info.label];
  std::printf("wrote %zu clips to %s\n", clips.size(), dir.string().c_str());
  std::printf("subjects %zu, clips per subject %zu, classes %zu\n", cfg.gen.num_subjects, cfg.gen.clips_per_subject,
              cfg.gen.num_classes);
  for (const auto& [label, count] : per_class) std::printf("  class %zu: %zu clips\n", label, count);
  return kOk;
}

int cmd_train(ExperimentConfig cfg, std::size_t checkpoint_every) {
  const Dataset ds = load_checked(cfg);
  const InputCache data(ds.clips, cfg.model.frames);
  std::vector<std::size_t> ids;
  for (const auto& c : ds.clips) ids.push_back(c.info.clip_id);

  ModelParams model = ModelParams::init(cfg.model, fold_model_seed(cfg.seed, 0));
  TrainConfig tc = cfg.train;
  tc.seed = fold_train_seed(cfg.seed, 0);
  fs::create_directories(cfg.out_dir);
  std::ofstream log(cfg.out_dir / "loss.log");
  if (!log) throw std::runtime_error("cannot write " + (cfg.out_dir / "loss.log").string());

  auto on_epoch = [&](const EpochLog& e) {
    std::vector<EpochLog> one{e};
    write_loss_log(log, one);
    log.flush();
    std::fprintf(stderr, "epoch %zu loss %.6f lr %.3g\n", e.epoch, e.mean_loss, e.lr);
    if (checkpoint_every > 0 && (e.epoch + 1) % checkpoint_every == 0) {
      save_checkpoint(cfg.out_dir / ("checkpoint_epoch" + std::to_string(e.epoch + 1)), model, cfg.seed);
    }
  };
  train(model, data, ids, tc, on_epoch);
  save_checkpoint(cfg.out_dir / "checkpoint", model, cfg.seed);

  const auto predictions = predict(model, data, ids);
  std::vector<std::size_t> labels;
  for (std::size_t id : ids) labels.push_back(data.label(id));
  const Metrics m = compute_metrics(confusion_counts(predictions, labels, cfg.model.num_classes));
  std::printf("trained %zu params on %zu clips\n", model.scalar_count(), ids.size());
  std::printf("training UF1 %s UAR %s ACC %s\n", format_percent(m.uf1).c_str(), format_percent(m.uar).c_str(),
              format_percent(m.acc).c_str());
  return kOk;
}

CrossvalResult crossval_once(const ExperimentConfig& cfg, const Dataset& ds, std::size_t jobs) {
  return run_crossval(ds.clips, cfg.model, cfg.train, cfg.protocol, cfg.k, cfg.seed, jobs, [](std::size_t f) {
    std::fprintf(stderr, "fold %zu done\n", f);
  });
}

int cmd_crossval(ExperimentConfig cfg, const CommonFlags& flags, const std::string& sweep) {
  const Dataset ds = load_checked(cfg);
  if (sweep.empty()) {
    const CrossvalResult r = crossval_once(cfg, ds, flags.jobs);
    const std::string report = format_crossval_report(r);
    write_text(cfg.out_dir / "results.json", to_json(r).dump(2) + "\n");
    write_text(cfg.out_dir / "report.txt", report);
    std::cout << report;
    return kOk;
  }

  const auto [key, values] = parse_sweep(sweep);
  std::vector<SweepRow> rows;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& v : values) {
    ExperimentConfig variant = cfg;
    apply_override(variant, key, v);
    variant.validate();
    const CrossvalResult r = crossval_once(variant, ds, flags.jobs);
    const fs::path sub = cfg.out_dir / (key + "=" + v);
    write_text(sub / "results.json", to_json(r).dump(2) + "\n");
    write_text(sub / "report.txt", format_crossval_report(r));
    std::cout << key << "=" << v << "\n" << format_crossval_report(r) << "\n";
    rows.push_back({v, r.pooled});
    runs.push_back({{"value", v}, {"results", (fs::path(key + "=" + v) / "results.json").string()}});
  }
  const std::string table = format_sweep_table(key, rows);
  write_text(cfg.out_dir / "sweep.json", nlohmann::json{{"key", key}, {"runs", runs}}.dump(2) + "\n");
  write_text(cfg.out_dir / "sweep.txt", table);
  std::cout << table;
  return kOk;
}

int cmd_gradcheck(const ExperimentConfig& cfg, const std::string& fault) {
  if (!fault.empty()) {
    const auto op = op_from_name(fault);
    if (!op) throw ConfigError("unknown op '" + fault + "' for --inject-fault");
    inject_backward_fault(op);
  }
  GradCheckOptions opts;
  opts.seed = cfg.seed;
  const GradCheckReport report = run_gradcheck_suite(opts);
  inject_backward_fault(std::nullopt);
  std::cout << report.format();
  if (!report.passed() && !fault.empty()) std::cout << "injected fault in " << fault << " detected\n";
  return report.passed() ? kOk : kRuntime;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

int cmd_report(const ExperimentConfig& cfg) {
  const fs::path sweep = cfg.out_dir / "sweep.json";
  if (fs::exists(sweep)) {
    const auto j = read_json(sweep);
    std::vector<SweepRow> rows;
    for (const auto& run : j.at("runs")) {
      const auto r = crossval_from_json(read_json(cfg.out_dir / run.at("results").get<std::string>()));
      rows.push_back({run.at("value").get<std::string>(), r.pooled});
    }
    std::cout << format_sweep_table(j.at("key").get<std::string>(), rows);
    return kOk;
  }
  std::cout << format_crossval_report(crossval_from_json(read_json(cfg.out_dir / "results.json")));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical space-time attention for micro-expression recognition"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto* gen = app.add_subcommand("gen", "generate a synthetic micro-expression dataset");
  auto* trn = app.add_subcommand("train", "train one model on the whole dataset");
  auto* cv = app.add_subcommand("crossval", "cross-validated training and evaluation");
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  auto* rep = app.add_subcommand("report", "print tables from a finished crossval run");
  for (auto* cmd : {gen, trn, cv, gc, rep}) add_common(cmd, flags);

  std::size_t checkpoint_every = 0;
  trn->add_option("--checkpoint-every", checkpoint_every, "also checkpoint every N epochs");

  std::string protocol, sweep;
  std::optional<std::size_t> k;
  cv->add_option("--protocol", protocol, "loso or kfold")->check(CLI::IsMember({"loso", "kfold"}));
  cv->add_option("--k", k, "number of folds for kfold")->check(CLI::Range(2, 1 << 20));
  cv->add_option("--sweep", sweep, "KEY=V1,V2,... ablation grid");

  std::string fault;
  gc->add_option("--inject-fault", fault, "negate one primitive's backward rule")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    ExperimentConfig cfg = resolve_config(flags);
    if (*gen) return cmd_gen(cfg, flags);
    if (*gc) return cmd_gradcheck(cfg, fault);
    if (*rep) return cmd_report(cfg);
    if (!protocol.empty()) cfg.protocol = protocol == "loso" ? Protocol::loso : Protocol::kfold;
    if (k) cfg.k = *k;
    if (*trn) return cmd_train(cfg, checkpoint_every);
    return cmd_crossval(cfg, flags, sweep);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
}

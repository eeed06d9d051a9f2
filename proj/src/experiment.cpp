#include "hsta/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "hsta/random.hpp"

namespace hsta {

std::uint64_t plan_seed(std::uint64_t seed) { return mix_seed(seed, 0xf01d); }
std::uint64_t fold_model_seed(std::uint64_t seed, std::size_t fold) { return mix_seed(seed, 0x1000 + 2 * fold); }
std::uint64_t fold_train_seed(std::uint64_t seed, std::size_t fold) { return mix_seed(seed, 0x1001 + 2 * fold); }

FoldPlan make_plan(std::span<const ClipRecord> clips, Protocol protocol, std::size_t k, std::uint64_t seed) {
  return protocol == Protocol::loso ? loso_folds(clips) : kfold_folds(clips, k, plan_seed(seed));
}

CrossvalResult run_crossval(std::span<const SyntheticClip> clips, const HstaConfig& model_cfg,
                            const TrainConfig& train_cfg, Protocol protocol, std::size_t k, std::uint64_t seed,
                            std::size_t jobs, const std::function<void(std::size_t)>& on_fold_done) {
  model_cfg.validate();
  train_cfg.validate();
  const InputCache data(clips, model_cfg.frames);
  const FoldPlan plan = make_plan(data.records(), protocol, k, seed);

  CrossvalResult result;
  result.protocol = protocol_name(protocol);
  result.folds.resize(plan.size());

  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t f = next++; f < plan.size(); f = next++) {
      try {
        ModelParams model = ModelParams::init(model_cfg, fold_model_seed(seed, f));
        TrainConfig cfg = train_cfg;
        cfg.seed = fold_train_seed(seed, f);
        TrainResult trained = train(model, data, plan[f].train, cfg);

        FoldResult& out = result.folds[f];
        out.fold = f;
        out.test_ids = plan[f].test;
        out.outcome.predictions = predict(model, data, plan[f].test);
        for (std::size_t id : plan[f].test) out.outcome.labels.push_back(data.label(id));
        out.metrics = compute_metrics(
            confusion_counts(out.outcome.predictions, out.outcome.labels, model_cfg.num_classes));
        out.log = std::move(trained.log);
        if (on_fold_done) {
          std::lock_guard lock(mutex);
          on_fold_done(f);
        }
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        next = plan.size();
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(plan.size(), 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<FoldOutcome> outcomes;
  for (const auto& f : result.folds) outcomes.push_back(f.outcome);
  result.pooled = aggregate_over_folds(outcomes, model_cfg.num_classes);
  return result;
}

namespace {

std::string metric_row(const std::string& label, const Metrics& m) {
  char line[128];
  std::snprintf(line, sizeof(line), "%-10s %6s %6s %6s\n", label.c_str(), format_percent(m.uf1).c_str(),
                format_percent(m.uar).c_str(), format_percent(m.acc).c_str());
  return line;
}

}  // namespace

std::string format_crossval_report(const CrossvalResult& result) {
  std::string out = "protocol " + result.protocol + ", " + std::to_string(result.folds.size()) + " folds\n";
  char header[128];
  std::snprintf(header, sizeof(header), "%-10s %6s %6s %6s\n", "fold", "UF1", "UAR", "ACC");
  out += header;
  for (const auto& f : result.folds) out += metric_row(std::to_string(f.fold), f.metrics);
  out += metric_row("pooled", result.pooled);
  return out;
}

std::string format_sweep_table(const std::string& key, std::span<const SweepRow> rows) {
  char line[128];
  std::snprintf(line, sizeof(line), "%-10s %6s %6s %6s\n", ("#" + key).c_str(), "ACC", "UAR", "UF1");
  std::string out = line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-10s %6s %6s %6s\n", r.value.c_str(), format_percent(r.pooled.acc).c_str(),
                  format_percent(r.pooled.uar).c_str(), format_percent(r.pooled.uf1).c_str());
    out += line;
  }
  return out;
}

std::pair<std::string, std::vector<std::string>> parse_sweep(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw ConfigError("sweep must look like KEY=V1,V2,... (got '" + spec + "')");
  }
  std::vector<std::string> values;
  std::size_t start = eq + 1;
  while (true) {
    const auto comma = spec.find(',', start);
    std::string v = spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (v.empty()) throw ConfigError("empty value in sweep '" + spec + "'");
    values.push_back(std::move(v));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return {spec.substr(0, eq), values};
}

namespace {

nlohmann::json metrics_json(const Metrics& m) { return {{"uf1", m.uf1}, {"uar", m.uar}, {"acc", m.acc}}; }

Metrics metrics_from(const nlohmann::json& j) {
  return {j.at("uf1").get<double>(), j.at("uar").get<double>(), j.at("acc").get<double>()};
}

}  // namespace

nlohmann::json to_json(const CrossvalResult& result) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : result.folds) {
    folds.push_back({{"fold", f.fold},
                     {"test_ids", f.test_ids},
                     {"predictions", f.outcome.predictions},
                     {"labels", f.outcome.labels},
                     {"metrics", metrics_json(f.metrics)}});
  }
  return {{"protocol", result.protocol}, {"folds", folds}, {"pooled", metrics_json(result.pooled)}};
}

CrossvalResult crossval_from_json(const nlohmann::json& j) {
  CrossvalResult r;
  r.protocol = j.at("protocol").get<std::string>();
  for (const auto& f : j.at("folds")) {
    FoldResult fold;
    fold.fold = f.at("fold").get<std::size_t>();
    fold.test_ids = f.at("test_ids").get<std::vector<std::size_t>>();
    fold.outcome.predictions = f.at("predictions").get<std::vector<std::size_t>>();
    fold.outcome.labels = f.at("labels").get<std::vector<std::size_t>>();
    fold.metrics = metrics_from(f.at("metrics"));
    r.folds.push_back(std::move(fold));
  }
  r.pooled = metrics_from(j.at("pooled"));
  return r;
}

}  // namespace hsta

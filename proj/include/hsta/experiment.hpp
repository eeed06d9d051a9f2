#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hsta/config.hpp"
#include "hsta/eval.hpp"
#include "hsta/model.hpp"
#include "hsta/synth.hpp"
#include "hsta/trainer.hpp"

namespace hsta {

struct FoldResult {
  std::size_t fold = 0;
  std::vector<std::size_t> test_ids;
  FoldOutcome outcome;
  Metrics metrics;
  std::vector<EpochLog> log;
};

struct CrossvalResult {
  std::string protocol;
  std::vector<FoldResult> folds;
  Metrics pooled;
};

/// Seeds derived from the experiment seed.
std::uint64_t plan_seed(std::uint64_t seed);
std::uint64_t fold_model_seed(std::uint64_t seed, std::size_t fold);
std::uint64_t fold_train_seed(std::uint64_t seed, std::size_t fold);

FoldPlan make_plan(std::span<const ClipRecord> clips, Protocol protocol, std::size_t k, std::uint64_t seed);

/// Trains and evaluates one model per fold, at most `jobs` at a time.
/// Results come back in fold order regardless of scheduling.
CrossvalResult run_crossval(std::span<const SyntheticClip> clips, const HstaConfig& model, const TrainConfig& train,
                            Protocol protocol, std::size_t k, std::uint64_t seed, std::size_t jobs,
                            const std::function<void(std::size_t fold)>& on_fold_done = {});

/// Per-fold rows followed by the pooled row, percentages with one decimal.
std::string format_crossval_report(const CrossvalResult& result);

struct SweepRow {
  std::string value;
  Metrics pooled;
};

/// Ablation-style grid: one row per swept value with ACC, UAR and UF1.
std::string format_sweep_table(const std::string& key, std::span<const SweepRow> rows);

/// Parses "KEY=V1,V2,..." into the key and its values.
std::pair<std::string, std::vector<std::string>> parse_sweep(const std::string& spec);

nlohmann::json to_json(const CrossvalResult& result);
CrossvalResult crossval_from_json(const nlohmann::json& j);

}  // namespace hsta

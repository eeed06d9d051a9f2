#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hsta/synth.hpp"

namespace hsta {

/// One-vs-rest counts per class.
struct ConfusionCounts {
  std::vector<std::size_t> tp, fp, fn, n;

  std::size_t classes() const { return n.size(); }
};

struct Metrics {
  double uf1 = 0.0;
  double uar = 0.0;
  double acc = 0.0;
};

ConfusionCounts confusion_counts(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                                 std::size_t num_classes);

/// UF1 = mean_i 2TP/(2TP+FP+FN), UAR = mean_i TP/N, ACC = sum TP / sum N.
/// A class whose denominator is zero contributes 0 to its mean.
Metrics compute_metrics(const ConfusionCounts& cc);

struct Fold {
  std::vector<std::size_t> train;  ///< clip ids
  std::vector<std::size_t> test;
};

using FoldPlan = std::vector<Fold>;

/// One fold per subject, ascending subject id.
FoldPlan loso_folds(std::span<const ClipRecord> clips);
/// Seeded shuffle, then K contiguous near-equal test blocks.
FoldPlan kfold_folds(std::span<const ClipRecord> clips, std::size_t k, std::uint64_t seed);

/// True when every clip is tested exactly once and no fold trains on its
/// own test clips.
bool is_partition(const FoldPlan& plan, std::span<const ClipRecord> clips);

struct FoldOutcome {
  std::vector<std::size_t> predictions;
  std::vector<std::size_t> labels;
};

/// Pools every fold's test predictions into one confusion table.
Metrics aggregate_over_folds(std::span<const FoldOutcome> folds, std::size_t num_classes);

/// Percentage with one decimal, e.g. 0.426 -> "42.6".
std::string format_percent(double fraction);

}  // namespace hsta

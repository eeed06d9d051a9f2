#include "hsta/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>

#include "hsta/random.hpp"

namespace hsta {

ConfusionCounts confusion_counts(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                                 std::size_t num_classes) {
  if (predictions.size() != labels.size()) {
    throw ContractError("prediction count " + std::to_string(predictions.size()) + " differs from label count " +
                        std::to_string(labels.size()));
  }
  ConfusionCounts cc{std::vector<std::size_t>(num_classes), std::vector<std::size_t>(num_classes),
                     std::vector<std::size_t>(num_classes), std::vector<std::size_t>(num_classes)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t y = labels[i], p = predictions[i];
    if (y >= num_classes || p >= num_classes) throw ContractError("class index out of range");
    ++cc.n[y];
    if (p == y) {
      ++cc.tp[y];
    } else {
      ++cc.fp[p];
      ++cc.fn[y];
    }
  }
  return cc;
}

Metrics compute_metrics(const ConfusionCounts& cc) {
  const std::size_t c = cc.classes();
  if (c == 0) throw ContractError("metrics need at least one class");
  double f1_sum = 0.0, recall_sum = 0.0;
  std::size_t tp_total = 0, n_total = 0;
  for (std::size_t i = 0; i < c; ++i) {
    const std::size_t f1_den = 2 * cc.tp[i] + cc.fp[i] + cc.fn[i];
    if (f1_den) f1_sum += 2.0 * cc.tp[i] / static_cast<double>(f1_den);
    if (cc.n[i]) recall_sum += cc.tp[i] / static_cast<double>(cc.n[i]);
    tp_total += cc.tp[i];
    n_total += cc.n[i];
  }
  Metrics m;
  m.uf1 = f1_sum / static_cast<double>(c);
  m.uar = recall_sum / static_cast<double>(c);
  m.acc = n_total ? tp_total / static_cast<double>(n_total) : 0.0;
  return m;
}

FoldPlan loso_folds(std::span<const ClipRecord> clips) {
  std::map<std::size_t, std::vector<std::size_t>> by_subject;
  for (const auto& c : clips) by_subject[c.subject_id].push_back(c.clip_id);
  if (by_subject.size() < 2) throw ContractError("leave-one-subject-out needs at least two subjects");
  FoldPlan plan;
  for (const auto& [subject, ids] : by_subject) {
    Fold fold;
    fold.test = ids;
    for (const auto& c : clips) {
      if (c.subject_id != subject) fold.train.push_back(c.clip_id);
    }
    plan.push_back(std::move(fold));
  }
  return plan;
}

FoldPlan kfold_folds(std::span<const ClipRecord> clips, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > clips.size()) {
    throw ContractError("k-fold needs 2 <= K <= " + std::to_string(clips.size()) + ", got K=" + std::to_string(k));
  }
  std::vector<std::size_t> order(clips.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t base = clips.size() / k, extra = clips.size() % k;
  FoldPlan plan(k);
  std::size_t begin = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    std::vector<bool> in_test(clips.size(), false);
    for (std::size_t i = begin; i < begin + len; ++i) in_test[order[i]] = true;
    for (std::size_t i = 0; i < clips.size(); ++i) {
      (in_test[i] ? plan[f].test : plan[f].train).push_back(clips[i].clip_id);
    }
    begin += len;
  }
  return plan;
}

bool is_partition(const FoldPlan& plan, std::span<const ClipRecord> clips) {
  std::map<std::size_t, int> tested;
  for (const auto& c : clips) tested[c.clip_id] = 0;
  for (const auto& fold : plan) {
    std::vector<std::size_t> train = fold.train, test = fold.test;
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    std::vector<std::size_t> overlap;
    std::set_intersection(train.begin(), train.end(), test.begin(), test.end(), std::back_inserter(overlap));
    if (!overlap.empty()) return false;
    if (train.size() + test.size() != clips.size()) return false;
    for (std::size_t id : fold.test) {
      auto it = tested.find(id);
      if (it == tested.end()) return false;
      ++it->second;
    }
  }
  return std::all_of(tested.begin(), tested.end(), [](const auto& kv) { return kv.second == 1; });
}

Metrics aggregate_over_folds(std::span<const FoldOutcome> folds, std::size_t num_classes) {
  std::vector<std::size_t> predictions, labels;
  for (const auto& f : folds) {
    predictions.insert(predictions.end(), f.predictions.begin(), f.predictions.end());
    labels.insert(labels.end(), f.labels.begin(), f.labels.end());
  }
  return compute_metrics(confusion_counts(predictions, labels, num_classes));
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * fraction);
  return buf;
}

}  // namespace hsta

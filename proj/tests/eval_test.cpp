#include <algorithm>
#include <numeric>
#include <set>

#include "hsta/eval.hpp"
#include "test_support.hpp"

namespace hsta {
namespace {

/// Counts by scanning every (prediction, label) pair once per class.
Metrics brute_force(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& lab, std::size_t c) {
  double f1 = 0.0, recall = 0.0, correct = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    double tp = 0, fp = 0, fn = 0, n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (lab[i] == k) ++n;
      if (pred[i] == k && lab[i] == k) ++tp;
      if (pred[i] == k && lab[i] != k) ++fp;
      if (pred[i] != k && lab[i] == k) ++fn;
    }
    if (2 * tp + fp + fn > 0) f1 += 2 * tp / (2 * tp + fp + fn);
    if (n > 0) recall += tp / n;
    correct += tp;
  }
  return {f1 / c, recall / c, pred.empty() ? 0.0 : correct / pred.size()};
}

std::vector<ClipRecord> random_clips(Rng& rng, std::size_t subjects, std::size_t max_per_subject) {
  std::vector<ClipRecord> clips;
  for (std::size_t s = 0; s < subjects; ++s) {
    const std::size_t n = 1 + rng() % max_per_subject;
    for (std::size_t i = 0; i < n; ++i) {
      ClipRecord r;
      r.clip_id = clips.size() * 3 + 1;  // ids need not be dense
      r.subject_id = s * 7;
      r.label = rng() % 3;
      clips.push_back(r);
    }
  }
  std::shuffle(clips.begin(), clips.end(), rng);
  return clips;
}

TEST(Confusion, HandCounts) {
  const std::vector<std::size_t> pred = {0, 0}, lab = {0, 1};
  const ConfusionCounts cc = confusion_counts(pred, lab, 2);
  EXPECT_EQ(cc.tp[0], 1u);
  EXPECT_EQ(cc.fp[0], 1u);
  EXPECT_EQ(cc.fn[1], 1u);
  EXPECT_EQ(cc.tp[1], 0u);
  EXPECT_THROW(confusion_counts(std::vector<std::size_t>{0}, lab, 2), ContractError);
}

TEST(Confusion, PerfectPredictions) {
  const std::vector<std::size_t> lab = {0, 1, 2, 2, 1};
  const ConfusionCounts cc = confusion_counts(lab, lab, 3);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(cc.fp[k], 0u);
    EXPECT_EQ(cc.fn[k], 0u);
    EXPECT_EQ(cc.tp[k], cc.n[k]);
  }
  const Metrics m = compute_metrics(cc);
  EXPECT_EQ(m.uf1, 1.0);
  EXPECT_EQ(m.uar, 1.0);
  EXPECT_EQ(m.acc, 1.0);
}

TEST(Metrics, HandCaseThreeQuarters) {
  ConfusionCounts cc{{3, 3}, {1, 1}, {1, 1}, {4, 4}};
  const Metrics m = compute_metrics(cc);
  EXPECT_EQ(m.uf1, 0.75);
  EXPECT_EQ(m.uar, 0.75);
  EXPECT_EQ(m.acc, 0.75);
}

TEST(Metrics, EmptyClassContributesZero) {
  ConfusionCounts cc{{2, 0}, {0, 0}, {2, 0}, {4, 0}};
  const Metrics m = compute_metrics(cc);
  EXPECT_DOUBLE_EQ(m.uar, 0.5 / 2);
  EXPECT_DOUBLE_EQ(m.uf1, (4.0 / 6.0) / 2);
  EXPECT_THROW(compute_metrics(ConfusionCounts{}), ContractError);
}

TEST(Metrics, AgreesWithBruteForce) {
  Rng rng(2024);
  for (std::size_t c : {2, 3, 7}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t n = rng() % 60;
      std::vector<std::size_t> pred(n), lab(n);
      for (std::size_t i = 0; i < n; ++i) pred[i] = rng() % c, lab[i] = rng() % c;
      const Metrics got = compute_metrics(confusion_counts(pred, lab, c));
      const Metrics want = brute_force(pred, lab, c);
      EXPECT_NEAR(got.uf1, want.uf1, 1e-12);
      EXPECT_NEAR(got.uar, want.uar, 1e-12);
      EXPECT_NEAR(got.acc, want.acc, 1e-12);
      EXPECT_GE(got.uf1, 0.0);
      EXPECT_LE(got.uf1, 1.0);
    }
  }
}

TEST(Metrics, AccuracyInvariantUnderRelabeling) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = 2 + rng() % 6, n = 1 + rng() % 50;
    std::vector<std::size_t> pred(n), lab(n), perm(c);
    for (std::size_t i = 0; i < n; ++i) pred[i] = rng() % c, lab[i] = rng() % c;
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> pp(n), pl(n);
    for (std::size_t i = 0; i < n; ++i) pp[i] = perm[pred[i]], pl[i] = perm[lab[i]];
    EXPECT_EQ(compute_metrics(confusion_counts(pred, lab, c)).acc, compute_metrics(confusion_counts(pp, pl, c)).acc);
  }
}

TEST(Loso, OneFoldPerSubjectInOrder) {
  std::vector<ClipRecord> clips;
  for (std::size_t s : {2, 0, 1}) {
    for (int i = 0; i < 2; ++i) clips.push_back({clips.size(), s, 0, 0, 1});
  }
  const FoldPlan plan = loso_folds(clips);
  ASSERT_EQ(plan.size(), 3u);
  for (std::size_t f = 0; f < 3; ++f) {
    EXPECT_EQ(plan[f].test.size(), 2u);
    for (std::size_t id : plan[f].test) EXPECT_EQ(clips[id].subject_id, f);
    EXPECT_EQ(plan[f].train.size(), 4u);
  }
  EXPECT_TRUE(is_partition(plan, clips));

  clips.push_back({clips.size(), 9, 0, 0, 1});
  EXPECT_EQ(loso_folds(clips).back().test.size(), 1u);
  EXPECT_THROW(loso_folds(std::vector<ClipRecord>(3, ClipRecord{})), ContractError);
}

TEST(KFold, SizesAndErrors) {
  std::vector<ClipRecord> clips;
  for (std::size_t i = 0; i < 10; ++i) clips.push_back({i, i, 0, 0, 1});
  const FoldPlan plan = kfold_folds(clips, 5, 3);
  ASSERT_EQ(plan.size(), 5u);
  for (const auto& f : plan) EXPECT_EQ(f.test.size(), 2u);
  clips.push_back({10, 10, 0, 0, 1});
  clips.push_back({11, 11, 0, 0, 1});
  std::vector<std::size_t> sizes;
  for (const auto& f : kfold_folds(clips, 5, 3)) sizes.push_back(f.test.size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 3, 2, 2, 2}));
  EXPECT_THROW(kfold_folds(clips, 1, 0), ContractError);
  EXPECT_THROW(kfold_folds(clips, 13, 0), ContractError);
  EXPECT_EQ(kfold_folds(clips, 5, 3)[0].test, kfold_folds(clips, 5, 3)[0].test);
  EXPECT_NE(kfold_folds(clips, 5, 3)[0].test, kfold_folds(clips, 5, 4)[0].test);
}

TEST(Plans, PartitionRandomized) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const auto clips = random_clips(rng, 2 + rng() % 10, 6);
    EXPECT_TRUE(is_partition(loso_folds(clips), clips));
    const std::size_t k = 2 + rng() % std::min<std::size_t>(9, clips.size() - 1);
    const FoldPlan plan = kfold_folds(clips, k, rng());
    EXPECT_TRUE(is_partition(plan, clips));
    std::size_t lo = clips.size(), hi = 0;
    for (const auto& f : plan) lo = std::min(lo, f.test.size()), hi = std::max(hi, f.test.size());
    EXPECT_LE(hi - lo, 1u);
  }
}

TEST(Plans, PartitionCheckerRejectsBrokenPlans) {
  std::vector<ClipRecord> clips;
  for (std::size_t i = 0; i < 4; ++i) clips.push_back({i, i % 2, 0, 0, 1});
  FoldPlan plan = loso_folds(clips);
  FoldPlan leaky = plan;
  leaky[0].train.push_back(leaky[0].test[0]);
  EXPECT_FALSE(is_partition(leaky, clips));
  FoldPlan twice = plan;
  twice[1].test.push_back(plan[0].test[0]);
  EXPECT_FALSE(is_partition(twice, clips));
  FoldPlan missing = plan;
  missing[1].test.pop_back();
  EXPECT_FALSE(is_partition(missing, clips));
}

TEST(Aggregate, PoolsFolds) {
  const FoldOutcome a{{0, 1, 1}, {0, 1, 0}}, b{{2, 2}, {2, 1}};
  const std::vector<FoldOutcome> one = {a};
  const Metrics single = aggregate_over_folds(one, 3);
  const Metrics direct = compute_metrics(confusion_counts(a.predictions, a.labels, 3));
  EXPECT_EQ(single.uf1, direct.uf1);
  EXPECT_EQ(single.uar, direct.uar);

  const std::vector<FoldOutcome> both = {a, b};
  const Metrics pooled = aggregate_over_folds(both, 3);
  const Metrics concat = compute_metrics(
      confusion_counts(std::vector<std::size_t>{0, 1, 1, 2, 2}, std::vector<std::size_t>{0, 1, 0, 2, 1}, 3));
  EXPECT_EQ(pooled.uf1, concat.uf1);
  EXPECT_EQ(pooled.uar, concat.uar);
  EXPECT_EQ(pooled.acc, concat.acc);

  const FoldOutcome p{{0, 1}, {0, 1}}, q{{2, 1}, {2, 1}};
  const std::vector<FoldOutcome> perfect = {p, q};
  const Metrics m = aggregate_over_folds(perfect, 3);
  EXPECT_EQ(m.uf1, 1.0);
  EXPECT_EQ(m.uar, 1.0);
  EXPECT_EQ(m.acc, 1.0);
}

TEST(Format, OneDecimalPercent) {
  EXPECT_EQ(format_percent(0.426), "42.6");
  EXPECT_EQ(format_percent(1.0), "100.0");
  EXPECT_EQ(format_percent(0.0), "0.0");
  EXPECT_EQ(format_percent(0.3351), "33.5");
}

}  // namespace
}  // namespace hsta

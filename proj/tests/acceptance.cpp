// Acceptance harness: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance 1 4 7      run a subset

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hsta/config.hpp"
#include "hsta/csta.hpp"
#include "hsta/eval.hpp"
#include "hsta/experiment.hpp"
#include "hsta/gradcheck.hpp"
#include "hsta/trainer.hpp"
#include "hsta/usta.hpp"

namespace {

using namespace hsta;
using Clock = std::chrono::steady_clock;

constexpr double kGradTolerance = 1e-6;
constexpr double kGradBudgetSeconds = 60.0;
constexpr double kPermutationTolerance = 1e-9;
constexpr double kMetricTolerance = 1e-12;
constexpr double kScheduleTolerance = 1e-12;
constexpr double kTargetUf1 = 0.90;
constexpr double kEndToEndBudgetSeconds = 15.0 * 60.0;
constexpr int kTrials = 100;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::size_t jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

std::vector<std::size_t> shuffled_iota(std::size_t n, Rng& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& perm) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (std::size_t c = 0; c < x.cols(); ++c) y(i, c) = x(perm[i], c);
  }
  return y;
}

Verdict gradients() {
  const auto start = Clock::now();
  GradCheckReport report;
  report.tolerance = kGradTolerance;
  GradCheckOptions opts;
  opts.tolerance = kGradTolerance;
  report.append(check_model(tiny_model_config(4, 2, 1, 1, 1, 1), opts));
  report.append(check_model(tiny_model_config(8, 4, 2, 2, 1, 2), opts));
  const double elapsed = seconds_since(start);
  double worst = 0.0;
  for (const auto& e : report.entries) worst = std::max(worst, e.max_rel_error);
  std::fputs(report.format().c_str(), stdout);
  return {report.passed() && elapsed < kGradBudgetSeconds,
          fmt("%zu groups, worst rel err %.2e (tol %.0e), %.1f s (budget %.0f s)", report.entries.size(), worst,
              kGradTolerance, elapsed, kGradBudgetSeconds)};
}

Verdict csta_passthrough() {
  Rng rng(101);
  int ok = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t d = 1 + rng() % 16;
    CstaParams p = CstaParams::init(d, rng, "csta");
    const TokenState v{uniform_tensor({1 + rng() % 48, d}, 2.0, rng), uniform_tensor({1, d}, 2.0, rng),
                       Modality::video};
    const TokenState s{uniform_tensor({1 + rng() % 16, d}, 2.0, rng), uniform_tensor({1, d}, 2.0, rng),
                       Modality::special};
    const auto [v1, s1] = csta_forward(v, s, p);
    ok += v1.features == v.features && s1.features == s.features;
  }
  return {ok == kTrials, fmt("%d/%d trials bitwise", ok, kTrials)};
}

Verdict usta_equivariance() {
  Rng rng(102);
  double worst = 0.0;
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t n = 1 + rng() % 48, d = 1 + rng() % 16;
    UstaLayerParams p = UstaLayerParams::init(d, rng, "usta");
    p.gamma.value = uniform_tensor({1, d}, 1.0, rng);
    p.beta.value = uniform_tensor({1, d}, 1.0, rng);
    const TokenState state{uniform_tensor({n, d}, 1.0, rng), uniform_tensor({1, d}, 1.0, rng), Modality::video};
    const auto perm = shuffled_iota(n, rng);
    const TokenState a = usta_layer_forward(state, p);
    const TokenState b = usta_layer_forward({permute_rows(state.features, perm), state.cls, state.modality}, p);
    worst = std::max({worst, max_abs_diff(b.features, permute_rows(a.features, perm)), max_abs_diff(b.cls, a.cls)});
  }
  return {worst <= kPermutationTolerance, fmt("max deviation %.2e over %d trials (tol %.0e)", worst, kTrials,
                                              kPermutationTolerance)};
}

Metrics brute_force(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& lab, std::size_t c) {
  double f1 = 0.0, recall = 0.0, correct = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    double tp = 0, fp = 0, fn = 0, n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      n += lab[i] == k;
      tp += pred[i] == k && lab[i] == k;
      fp += pred[i] == k && lab[i] != k;
      fn += pred[i] != k && lab[i] == k;
    }
    if (2 * tp + fp + fn > 0) f1 += 2 * tp / (2 * tp + fp + fn);
    if (n > 0) recall += tp / n;
    correct += tp;
  }
  return {f1 / c, recall / c, pred.empty() ? 0.0 : correct / pred.size()};
}

Verdict metric_oracle() {
  Rng rng(103);
  double worst = 0.0;
  int cases = 0;
  for (std::size_t c : {2, 3, 7}) {
    for (int trial = 0; trial < 1000; ++trial, ++cases) {
      const std::size_t n = 1 + rng() % 80;
      std::vector<std::size_t> pred(n), lab(n);
      for (std::size_t i = 0; i < n; ++i) pred[i] = rng() % c, lab[i] = rng() % c;
      const Metrics got = compute_metrics(confusion_counts(pred, lab, c));
      const Metrics want = brute_force(pred, lab, c);
      worst = std::max({worst, std::abs(got.uf1 - want.uf1), std::abs(got.uar - want.uar),
                        std::abs(got.acc - want.acc)});
    }
  }
  const Metrics hand = compute_metrics({{3, 3}, {1, 1}, {1, 1}, {4, 4}});
  const bool hand_ok = std::abs(hand.uf1 - 0.75) <= kMetricTolerance &&
                       std::abs(hand.uar - 0.75) <= kMetricTolerance && std::abs(hand.acc - 0.75) <= kMetricTolerance;
  return {worst <= kMetricTolerance && hand_ok,
          fmt("%d cases, max deviation %.2e (tol %.0e); hand case UF1 %.4f UAR %.4f ACC %.4f", cases, worst,
              kMetricTolerance, hand.uf1, hand.uar, hand.acc)};
}

std::vector<ClipRecord> random_records(Rng& rng) {
  std::vector<ClipRecord> clips;
  const std::size_t subjects = 2 + rng() % 12;
  for (std::size_t s = 0; s < subjects; ++s) {
    const std::size_t n = 1 + rng() % 9;
    for (std::size_t i = 0; i < n; ++i) {
      ClipRecord r;
      r.clip_id = 5 * clips.size() + rng() % 5;
      r.subject_id = 11 * s + 3;
      r.label = rng() % 3;
      clips.push_back(r);
    }
  }
  std::shuffle(clips.begin(), clips.end(), rng);
  return clips;
}

/// Every clip in exactly one test set, never in its own fold's train set, and
/// train + test covering the dataset.
bool partitions(const FoldPlan& plan, std::span<const ClipRecord> clips) {
  std::multiset<std::size_t> tested;
  std::set<std::size_t> all;
  for (const auto& c : clips) all.insert(c.clip_id);
  for (const auto& fold : plan) {
    const std::set<std::size_t> test(fold.test.begin(), fold.test.end());
    std::set<std::size_t> both(fold.train.begin(), fold.train.end());
    for (std::size_t id : fold.train) {
      if (test.contains(id)) return false;
    }
    both.insert(test.begin(), test.end());
    if (both != all || test.size() != fold.test.size()) return false;
    tested.insert(fold.test.begin(), fold.test.end());
  }
  for (std::size_t id : all) {
    if (tested.count(id) != 1) return false;
  }
  return tested.size() == all.size();
}

Verdict protocol_partitions() {
  Rng rng(105);
  int loso_ok = 0, kfold_ok = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    const auto clips = random_records(rng);
    std::set<std::size_t> subjects;
    for (const auto& c : clips) subjects.insert(c.subject_id);
    const FoldPlan loso = loso_folds(clips);
    loso_ok += partitions(loso, clips) && loso.size() == subjects.size();
    const std::size_t k = 2 + rng() % std::min<std::size_t>(9, clips.size() - 1);
    const FoldPlan kf = kfold_folds(clips, k, rng());
    std::size_t lo = clips.size(), hi = 0;
    for (const auto& f : kf) lo = std::min(lo, f.test.size()), hi = std::max(hi, f.test.size());
    kfold_ok += partitions(kf, clips) && kf.size() == k && hi - lo <= 1;
  }
  return {loso_ok == kTrials && kfold_ok == kTrials,
          fmt("LOSO %d/%d, K-fold %d/%d randomized datasets", loso_ok, kTrials, kfold_ok, kTrials)};
}

Verdict schedule() {
  TrainConfig cfg;
  double worst = 0.0;
  bool endpoints = true;
  for (std::size_t spe : {1, 3, 9, 12, 40}) {
    const std::size_t w = cfg.warmup_epochs * spe;
    endpoints &= lr_at(0, spe, cfg) == 1e-6;
    endpoints &= lr_at(w, spe, cfg) == 5e-5;
    endpoints &= lr_at(w + 17, spe, cfg) == 5e-5;
    for (std::size_t s = 0; s < w; ++s) {
      const double want = 1e-6 + (5e-5 - 1e-6) * static_cast<double>(s) / static_cast<double>(w - 1);
      worst = std::max(worst, std::abs(lr_at(s, spe, cfg) - want));
    }
  }
  return {endpoints && worst <= kScheduleTolerance,
          fmt("lr(0)=%.0e, first post-warm-up lr=%.0e, max deviation from the line %.2e (tol %.0e)",
              lr_at(0, 9, cfg), lr_at(45, 9, cfg), worst, kScheduleTolerance)};
}

Verdict sampler_exposure() {
  std::string detail;
  bool pass = true;
  for (const std::vector<std::size_t>& sizes : std::vector<std::vector<std::size_t>>{
           {10, 10, 10}, {9, 3, 3}, {50, 5, 5, 5, 5, 5, 5}}) {
    std::vector<ClipRecord> clips;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
      for (std::size_t i = 0; i < sizes[c]; ++i) {
        ClipRecord r;
        r.clip_id = clips.size();
        r.label = c;
        clips.push_back(r);
      }
    }
    std::size_t spread = 0;
    for (std::size_t batch : {sizes.size(), std::size_t{8}, std::size_t{32}}) {
      if (batch < sizes.size()) continue;
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::vector<std::size_t> counts(sizes.size(), 0);
        for (const auto& b : balanced_batches(clips, sizes.size(), batch, seed)) {
          for (std::size_t id : b) ++counts[clips[id].label];
        }
        const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
        spread = std::max(spread, *hi - *lo);
      }
    }
    pass &= spread <= 1;
    std::string label;
    for (std::size_t n : sizes) label += (label.empty() ? "" : ",") + std::to_string(n);
    detail += fmt("%s[%s] spread %zu", detail.empty() ? "" : ", ", label.c_str(), spread);
  }
  return {pass, detail};
}

Verdict end_to_end() {
  const ExperimentConfig cfg = ExperimentConfig::defaults();
  const auto start = Clock::now();
  const auto clips = generate_dataset(cfg.gen);
  const CrossvalResult r = run_crossval(clips, cfg.model, cfg.train, Protocol::kfold, 5, cfg.seed, jobs(),
                                        [&](std::size_t f) {
                                          std::printf("  fold %zu done at %.0f s\n", f, seconds_since(start));
                                          std::fflush(stdout);
                                        });
  const double elapsed = seconds_since(start);
  std::fputs(format_crossval_report(r).c_str(), stdout);
  return {r.pooled.uf1 >= kTargetUf1 && elapsed < kEndToEndBudgetSeconds,
          fmt("pooled UF1 %.3f (target %.2f), %.0f s on %zu threads (budget %.0f s)", r.pooled.uf1, kTargetUf1,
              elapsed, jobs(), kEndToEndBudgetSeconds)};
}

Verdict ablation() {
  const ExperimentConfig base = ExperimentConfig::defaults();
  const auto clips = generate_dataset(base.gen);
  auto variant = [&](std::size_t depth, Fusion fusion) {
    HstaConfig c = base.model;
    c.blocks = 1;
    c.video_depth = c.special_depth = depth;
    c.fusion = fusion;
    return c;
  };
  const HstaConfig full = variant(1, Fusion::csta), no_usta = variant(0, Fusion::csta),
                   concat = variant(1, Fusion::concat);
  int wins = 0;
  double sum_full = 0.0, sum_no_usta = 0.0, sum_concat = 0.0;
  for (std::uint64_t seed : {0, 1, 2}) {
    auto uf1 = [&](const HstaConfig& c) {
      return run_crossval(clips, c, base.train, Protocol::kfold, 5, seed, jobs()).pooled.uf1;
    };
    const double a = uf1(full), b = uf1(no_usta), c = uf1(concat);
    std::printf("  seed %llu: full %.3f  no-USTA %.3f  concat %.3f\n", static_cast<unsigned long long>(seed), a, b,
                c);
    std::fflush(stdout);
    wins += a > b && a > c;
    sum_full += a, sum_no_usta += b, sum_concat += c;
  }
  return {wins == 3, fmt("full model strictly best in %d/3 seeds; mean UF1 full %.3f, no-USTA %.3f, concat %.3f",
                         wins, sum_full / 3, sum_no_usta / 3, sum_concat / 3)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HSTA_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict cli_determinism() {
  const auto root = std::filesystem::temp_directory_path() / ("hsta_accept_" + std::to_string(::getpid()));
  std::filesystem::create_directories(root);
  {
    std::ofstream(root / "config.json") << R"({
      "seed": 7,
      "gen": {"num_subjects": 6, "clips_per_subject": 6, "height": 16, "width": 16},
      "model": {"d": 16, "blocks": 2, "embed": {"height": 16, "width": 16}},
      "train": {"epochs": 3, "warmup_epochs": 1, "batch_size": 8}
    })";
  }
  const std::string cfg = " --config " + (root / "config.json").string();
  const auto a = root / "a", b = root / "b";
  const bool ran = run_cli("gen" + cfg + " --out " + a.string()) == 0 &&
                   run_cli("gen" + cfg + " --out " + b.string()) == 0 &&
                   run_cli("crossval" + cfg + " --jobs 1 --out " + a.string()) == 0 &&
                   run_cli("crossval" + cfg + " --jobs 3 --out " + b.string()) == 0;
  const std::string ra = slurp(a / "report.txt"), rb = slurp(b / "report.txt");
  const std::string ja = slurp(a / "results.json"), jb = slurp(b / "results.json");
  std::filesystem::remove_all(root);
  return {ran && !ra.empty() && ra == rb && ja == jb,
          fmt("two runs (--jobs 1 vs 3): report %zu bytes %s, results.json %s", ra.size(),
              ra == rb ? "identical" : "DIFFERENT", ja == jb ? "identical" : "DIFFERENT")};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict()> check;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "gradient suite", gradients},
      {2, "CSTA feature passthrough", csta_passthrough},
      {3, "USTA permutation equivariance", usta_equivariance},
      {4, "metric oracle", metric_oracle},
      {5, "protocol partitions", protocol_partitions},
      {6, "schedule exactness", schedule},
      {7, "balanced sampler exposure", sampler_exposure},
      {8, "synthetic end-to-end", end_to_end},
      {9, "ablation trend", ablation},
      {10, "CLI determinism", cli_determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  std::vector<std::string> summary;
  bool all = true;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    std::printf("--- criterion %d: %s\n", c.id, c.name);
    std::fflush(stdout);
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    all &= v.pass;
    summary.push_back(fmt("%s  %2d. %s: %s", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str()));
    std::printf("%s\n", summary.back().c_str());
    std::fflush(stdout);
  }
  std::printf("\n");
  for (const auto& line : summary) std::printf("%s\n", line.c_str());
  return all ? 0 : 1;
}

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "hsta/autodiff.hpp"
#include "hsta/model.hpp"
#include "hsta/synth.hpp"

namespace hsta {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 150;
  double base_lr = 5e-5;
  std::size_t warmup_epochs = 5;
  double warmup_init_lr = 1e-6;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Linear per-step warm-up from warmup_init_lr (step 0) to base_lr (last
/// warm-up step), constant afterwards.
double lr_at(std::size_t step, std::size_t steps_per_epoch, const TrainConfig& cfg);

/// Adaptive moments with bias correction, followed by decoupled decay
/// theta <- theta - lr * wd * theta.
class AdamW {
 public:
  explicit AdamW(const TrainConfig& cfg) : cfg_(cfg) {}

  void step(std::span<Param* const> params, double lr);
  std::size_t steps() const { return steps_; }

 private:
  TrainConfig cfg_;
  std::size_t steps_ = 0;
  std::vector<Tensor> m_, v_;
};

/// Preprocessed network input for one clip.
ClipInput prepare_input(const SyntheticClip& clip, std::size_t frames);

/// Clip inputs keyed by clip id.
class InputCache {
 public:
  InputCache(std::span<const SyntheticClip> clips, std::size_t frames);

  const ClipInput& input(std::size_t clip_id) const { return inputs_.at(clip_id); }
  std::size_t label(std::size_t clip_id) const { return labels_.at(clip_id); }
  const std::vector<ClipRecord>& records() const { return records_; }
  std::vector<ClipRecord> subset(std::span<const std::size_t> ids) const;

 private:
  std::map<std::size_t, ClipInput> inputs_;
  std::map<std::size_t, std::size_t> labels_;
  std::vector<ClipRecord> records_;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::vector<double> step_losses;  ///< mean batch loss per optimizer step
  std::size_t steps = 0;
};

/// Mean MSE over a batch; gradients are accumulated into the params.
double batch_loss_and_grad(ModelParams& model, const InputCache& data, std::span<const std::size_t> batch);

TrainResult train(ModelParams& model, const InputCache& data, std::span<const std::size_t> train_ids,
                  const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch = {});

std::vector<std::size_t> predict(ModelParams& model, const InputCache& data, std::span<const std::size_t> ids);

/// "epoch, mean_loss, lr" lines.
void write_loss_log(std::ostream& out, std::span<const EpochLog> log);

}  // namespace hsta

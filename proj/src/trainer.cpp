#include "hsta/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace hsta {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (warmup_epochs > epochs) throw ConfigError("warmup_epochs exceeds epochs");
  if (base_lr < 0.0 || warmup_init_lr < 0.0 || weight_decay < 0.0) throw ConfigError("rates must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
}

double lr_at(std::size_t step, std::size_t steps_per_epoch, const TrainConfig& cfg) {
  const std::size_t warmup_steps = cfg.warmup_epochs * steps_per_epoch;
  if (warmup_steps == 0) return cfg.base_lr;
  if (step == 0) return cfg.warmup_init_lr;
  if (step + 1 >= warmup_steps) return cfg.base_lr;
  const double frac = static_cast<double>(step) / static_cast<double>(warmup_steps - 1);
  return cfg.warmup_init_lr + (cfg.base_lr - cfg.warmup_init_lr) * frac;
}

void AdamW::step(std::span<Param* const> params, double lr) {
  if (m_.empty()) {
    for (Param* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  if (m_.size() != params.size()) throw ContractError("optimizer bound to a different parameter set");
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (p.grad.shape() != m_[i].shape()) throw DimensionError("parameter " + p.name + " changed shape");
    auto m = m_[i].arr();
    auto v = v_[i].arr();
    auto g = p.grad.arr();
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
    auto theta = p.value.arr();
    theta -= lr * ((m / bc1) / ((v / bc2).sqrt() + cfg_.eps));
    theta -= lr * cfg_.weight_decay * theta;
  }
}

ClipInput prepare_input(const SyntheticClip& clip, std::size_t frames) {
  auto [onset, apex] = extract_special_frames(clip);
  return {uniform_sample_frames(clip, frames), std::move(onset), std::move(apex)};
}

InputCache::InputCache(std::span<const SyntheticClip> clips, std::size_t frames) {
  for (const auto& clip : clips) {
    inputs_.emplace(clip.info.clip_id, prepare_input(clip, frames));
    labels_.emplace(clip.info.clip_id, clip.info.label);
    records_.push_back(clip.info);
  }
}

std::vector<ClipRecord> InputCache::subset(std::span<const std::size_t> ids) const {
  std::vector<ClipRecord> out;
  out.reserve(ids.size());
  for (std::size_t id : ids) {
    auto it = std::find_if(records_.begin(), records_.end(), [id](const ClipRecord& r) { return r.clip_id == id; });
    if (it == records_.end()) throw ContractError("unknown clip id " + std::to_string(id));
    out.push_back(*it);
  }
  return out;
}

double batch_loss_and_grad(ModelParams& model, const InputCache& data, std::span<const std::size_t> batch) {
  const double weight = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t id : batch) {
    Tape tape;
    Var loss = mse_loss(model_logits(tape, data.input(id), model), data.label(id));
    total += loss.value()[0];
    backward(tape, scale(loss, weight));
  }
  return total * weight;
}

TrainResult train(ModelParams& model, const InputCache& data, std::span<const std::size_t> train_ids,
                  const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  if (train_ids.empty()) throw ConfigError("training set is empty");
  const auto train_records = data.subset(train_ids);
  BalancedSampler sampler(train_records, model.config.num_classes, cfg.batch_size, mix_seed(cfg.seed, 0x5a3b1e));
  const std::size_t steps_per_epoch = sampler.batches_per_epoch();

  auto params = model.params();
  model.zero_grad();
  AdamW optimizer(cfg);
  TrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t samples = 0;
    double lr = 0.0;
    for (const auto& batch : sampler.epoch(epoch)) {
      const double batch_loss = batch_loss_and_grad(model, data, batch);
      loss_sum += batch_loss * static_cast<double>(batch.size());
      samples += batch.size();
      lr = lr_at(result.steps, steps_per_epoch, cfg);
      optimizer.step(params, lr);
      model.zero_grad();
      result.step_losses.push_back(batch_loss);
      ++result.steps;
    }
    result.log.push_back({epoch, loss_sum / static_cast<double>(samples), lr});
    if (on_epoch) on_epoch(result.log.back());
  }
  return result;
}

std::vector<std::size_t> predict(ModelParams& model, const InputCache& data, std::span<const std::size_t> ids) {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (std::size_t id : ids) {
    Tape tape;
    out.push_back(argmax(model_logits(tape, data.input(id), model).value()));
  }
  return out;
}

void write_loss_log(std::ostream& out, std::span<const EpochLog> log) {
  char line[96];
  for (const auto& e : log) {
    std::snprintf(line, sizeof(line), "%zu, %.17g, %.17g\n", e.epoch, e.mean_loss, e.lr);
    out << line;
  }
}

}  // namespace hsta

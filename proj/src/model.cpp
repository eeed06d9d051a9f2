#include "hsta/model.hpp"

#include <cmath>
#include <tuple>

namespace hsta {

void HstaConfig::validate() const {
  if (d == 0) throw ConfigError("d must be positive");
  if (blocks == 0) throw ConfigError("at least one HSTA block is required");
  if (num_classes < 2) throw ConfigError("at least two classes are required");
  if (frames == 0) throw ConfigError("frames per clip must be positive");
  embed.validate(frames);
}

std::vector<Param*> BlockParams::params() {
  std::vector<Param*> out;
  for (auto& layer : video) {
    for (Param* p : layer.params()) out.push_back(p);
  }
  for (auto& layer : special) {
    for (Param* p : layer.params()) out.push_back(p);
  }
  if (csta) {
    for (Param* p : csta->params()) out.push_back(p);
  }
  return out;
}

ModelParams ModelParams::init(const HstaConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ModelParams m;
  m.config = config;
  m.embedder = EmbedderParams::init(config.embed, config.frames, config.d, rng);
  for (std::size_t b = 0; b < config.blocks; ++b) {
    const std::string prefix = "block" + std::to_string(b);
    BlockParams block;
    for (std::size_t l = 0; l < config.video_depth; ++l) {
      block.video.push_back(UstaLayerParams::init(config.d, rng, prefix + ".usta_video" + std::to_string(l)));
    }
    for (std::size_t l = 0; l < config.special_depth; ++l) {
      block.special.push_back(UstaLayerParams::init(config.d, rng, prefix + ".usta_special" + std::to_string(l)));
    }
    if (config.fusion == Fusion::csta) block.csta = CstaParams::init(config.d, rng, prefix + ".csta");
    m.blocks.push_back(std::move(block));
  }
  const std::size_t in = 2 * config.d;
  m.head.weight = Param("head.weight", uniform_tensor({in, config.num_classes},
                                                      1.0 / std::sqrt(static_cast<double>(in)), rng));
  m.head.bias = Param("head.bias", Tensor({1, config.num_classes}));
  return m;
}

std::vector<Param*> ModelParams::params() {
  std::vector<Param*> out = embedder.params();
  for (auto& block : blocks) {
    for (Param* p : block.params()) out.push_back(p);
  }
  out.push_back(&head.weight);
  out.push_back(&head.bias);
  return out;
}

std::size_t ModelParams::scalar_count() {
  std::size_t total = 0;
  for (Param* p : params()) total += p->size();
  return total;
}

void ModelParams::zero_grad() {
  for (Param* p : params()) p->zero_grad();
}

std::size_t expected_param_count(const HstaConfig& c) {
  const std::size_t d = c.d;
  const std::size_t embedder = c.embed.video_patch_dim() * d + c.embed.special_patch_dim() * d +
                               c.video_tokens() * d + c.special_tokens() * d + 2 * d;
  const std::size_t usta_layer = 3 * d * d + 2 * d;
  const std::size_t mlp = d * 2 * d + 2 * d + 2 * d * d + d;
  const std::size_t csta = c.fusion == Fusion::csta ? 2 * (mlp + 3 * d * d + mlp) : 0;
  const std::size_t head = 2 * d * c.num_classes + c.num_classes;
  return embedder + c.blocks * (c.video_depth + c.special_depth) * usta_layer + c.blocks * csta + head;
}

std::pair<TokenVars, TokenVars> hsta_block(const TokenVars& video, const TokenVars& special, BlockParams& block) {
  auto [v, s] = usta_parallel(video, special, block.video, block.special);
  if (!block.csta) return {v, s};
  return csta_forward(v, s, *block.csta);
}

std::pair<Var, Var> hsta_forward(const TokenVars& video, const TokenVars& special, ModelParams& params) {
  if (params.blocks.empty()) throw ConfigError("model has no HSTA blocks");
  TokenVars v = video, s = special;
  for (auto& block : params.blocks) std::tie(v, s) = hsta_block(v, s, block);
  return {v.cls, s.cls};
}

Var predict_logits(Var cls_video, Var cls_special, HeadParams& head) {
  const std::size_t in = head.weight.value.rows();
  if (cls_video.value().size() + cls_special.value().size() != in) {
    throw DimensionError("head expects " + std::to_string(in) + " inputs, got cls " + to_string(cls_video.shape()) +
                         " and " + to_string(cls_special.shape()));
  }
  if (cls_video.shape() != cls_special.shape() || cls_video.value().rows() != 1) {
    throw DimensionError("head expects two 1 x d tokens, got " + to_string(cls_video.shape()) + " and " +
                         to_string(cls_special.shape()));
  }
  Tape& tape = *cls_video.tape;
  // [cls_v, cls_s] W == cls_v W[:d] + cls_s W[d:]
  auto [top, bottom] = split_rows(tape.param(head.weight), in / 2);
  Var top_scores = matmul(cls_video, top);
  Var bottom_scores = matmul(cls_special, bottom);
  return add_row(top_scores + bottom_scores, tape.param(head.bias));
}

Var model_logits(Tape& tape, const ClipInput& input, ModelParams& params) {
  const HstaConfig& c = params.config;
  TokenVars video = embed_video(tape, input.frames, c.embed, params.embedder);
  TokenVars special = embed_special(tape, input.onset, input.apex, c.embed, params.embedder);
  auto [cls_v, cls_s] = hsta_forward(video, special, params);
  return predict_logits(cls_v, cls_s, params.head);
}

std::pair<TokenState, TokenState> hsta_block(const TokenState& video, const TokenState& special,
                                             const BlockParams& block) {
  Tape tape;
  BlockParams local = block;
  auto [v, s] = hsta_block(bind(tape, video), bind(tape, special), local);
  return {v.values(), s.values()};
}

std::pair<Tensor, Tensor> hsta_forward(const TokenState& video, const TokenState& special, const ModelParams& params) {
  Tape tape;
  ModelParams local = params;
  auto [v, s] = hsta_forward(bind(tape, video), bind(tape, special), local);
  return {v.value(), s.value()};
}

Tensor predict_logits(const Tensor& cls_video, const Tensor& cls_special, const HeadParams& head) {
  Tape tape;
  HeadParams local = head;
  return predict_logits(tape.constant(cls_video), tape.constant(cls_special), local).value();
}

Tensor model_logits(const ClipInput& input, const ModelParams& params) {
  Tape tape;
  ModelParams local = params;
  return model_logits(tape, input, local).value();
}

std::size_t argmax(const Tensor& scores) {
  if (scores.empty()) throw ContractError("argmax of an empty tensor");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

double mse_loss(const Tensor& logits, std::size_t label) {
  Tape tape;
  return mse_loss(tape.constant(logits), label).value()[0];
}

}  // namespace hsta

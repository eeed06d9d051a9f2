#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "hsta/autodiff.hpp"
#include "hsta/csta.hpp"
#include "hsta/embedder.hpp"
#include "hsta/usta.hpp"

namespace hsta {

/// How the two [CLS] tokens are fused at the end of each block.
enum class Fusion {
  csta,    ///< crossmodal space-time attention
  concat,  ///< none; the head simply reads both tokens
};

struct HstaConfig {
  std::size_t d = 64;
  std::size_t video_depth = 2;    ///< USTA layers per block, video frames
  std::size_t special_depth = 1;  ///< USTA layers per block, special frames
  std::size_t blocks = 4;
  std::size_t num_classes = 3;
  std::size_t frames = 6;         ///< uniformly sampled frames per clip
  Fusion fusion = Fusion::csta;
  EmbedderConfig embed;

  void validate() const;
  std::size_t video_tokens() const { return embed.video_tokens(frames); }
  std::size_t special_tokens() const { return embed.special_tokens(); }
};

struct BlockParams {
  std::vector<UstaLayerParams> video;
  std::vector<UstaLayerParams> special;
  std::optional<CstaParams> csta;

  std::vector<Param*> params();
};

struct HeadParams {
  Param weight;  ///< 2d x C
  Param bias;    ///< 1 x C
};

struct ModelParams {
  HstaConfig config;
  EmbedderParams embedder;
  std::vector<BlockParams> blocks;
  HeadParams head;

  static ModelParams init(const HstaConfig& config, std::uint64_t seed);
  std::vector<Param*> params();
  std::size_t scalar_count();
  void zero_grad();
};

/// Closed-form scalar count implied by a configuration.
std::size_t expected_param_count(const HstaConfig& config);

/// One sample's network inputs.
struct ClipInput {
  Tensor frames;  ///< T_sample x H x W x ch
  Tensor onset;   ///< H x W x ch
  Tensor apex;    ///< H x W x ch
};

/// Video and special USTA stacks in parallel, then crossmodal fusion.
std::pair<TokenVars, TokenVars> hsta_block(const TokenVars& video, const TokenVars& special, BlockParams& block);
/// Folds every block; returns the final (video cls, special cls).
std::pair<Var, Var> hsta_forward(const TokenVars& video, const TokenVars& special, ModelParams& params);
/// Linear head on [cls_v, cls_s].
Var predict_logits(Var cls_video, Var cls_special, HeadParams& head);
/// Embedding, blocks and head for one clip.
Var model_logits(Tape& tape, const ClipInput& input, ModelParams& params);

std::pair<TokenState, TokenState> hsta_block(const TokenState& video, const TokenState& special,
                                             const BlockParams& block);
std::pair<Tensor, Tensor> hsta_forward(const TokenState& video, const TokenState& special, const ModelParams& params);
Tensor predict_logits(const Tensor& cls_video, const Tensor& cls_special, const HeadParams& head);
Tensor model_logits(const ClipInput& input, const ModelParams& params);

/// Index of the largest score; ties resolve to the lowest index.
std::size_t argmax(const Tensor& scores);
double mse_loss(const Tensor& logits, std::size_t label);

}  // namespace hsta

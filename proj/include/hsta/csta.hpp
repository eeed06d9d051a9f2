#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hsta/autodiff.hpp"
#include "hsta/random.hpp"
#include "hsta/usta.hpp"

namespace hsta {

enum class Activation { gelu, identity };

/// linear -> activation -> linear, with biases.
struct MlpParams {
  Param w1, b1, w2, b2;
  Activation activation = Activation::gelu;

  /// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases.
  static MlpParams init(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng, const std::string& prefix);
  /// Exact identity map of width d (hidden width 2d, no activation).
  static MlpParams identity(std::size_t d, const std::string& prefix);
  std::vector<Param*> params() { return {&w1, &b1, &w2, &b2}; }
};

Var mlp(Var x, MlpParams& p);

/// One crossmodal direction: a [CLS] token attends over the other
/// modality's features.
struct CstaDirectionParams {
  MlpParams mlp_in;
  Param wq, wk, wv;
  MlpParams mlp_out;

  static CstaDirectionParams init(std::size_t d, Rng& rng, const std::string& prefix);
  std::vector<Param*> params();
};

struct CstaParams {
  CstaDirectionParams video_to_special;
  CstaDirectionParams special_to_video;

  static CstaParams init(std::size_t d, Rng& rng, const std::string& prefix);
  std::vector<Param*> params();
};

/// c = MLP1(cls); cat = [c; feat_other]; h = c + softmax(c Wq (cat Wk)^T / sqrt(d)) cat Wv;
/// returns MLP2(h).
Var csta_direction(Var cls_src, Var feat_other, CstaDirectionParams& params);
/// Refines both [CLS] tokens; feature tokens pass through untouched.
std::pair<TokenVars, TokenVars> csta_forward(const TokenVars& video, const TokenVars& special, CstaParams& params);

/// Attention weights over the (N + 1) keys for one direction, 1 x (N + 1).
Tensor csta_attention_weights(const Tensor& cls_src, const Tensor& feat_other, const CstaDirectionParams& params);

Tensor csta_direction(const Tensor& cls_src, const Tensor& feat_other, const CstaDirectionParams& params);
std::pair<TokenState, TokenState> csta_forward(const TokenState& video, const TokenState& special,
                                               const CstaParams& params);

}  // namespace hsta

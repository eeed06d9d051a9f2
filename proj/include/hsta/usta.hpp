#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hsta/autodiff.hpp"
#include "hsta/random.hpp"
#include "hsta/tensor.hpp"

namespace hsta {

enum class Modality { video, special };

/// A modality's N x d feature tokens plus its 1 x d [CLS] token.
struct TokenState {
  Tensor features;
  Tensor cls;
  Modality modality = Modality::video;
};

/// TokenState recorded on a tape.
struct TokenVars {
  Var features;
  Var cls;
  Modality modality = Modality::video;

  TokenState values() const { return {features.value(), cls.value(), modality}; }
};

TokenVars bind(Tape& tape, const TokenState& state);

/// Single-head self-attention layer: projections, post-norm residual.
struct UstaLayerParams {
  Param wq, wk, wv;
  Param gamma, beta;

  /// Projections uniform in [-1/sqrt(d), 1/sqrt(d)]; gamma = 1, beta = 0.
  static UstaLayerParams init(std::size_t d, Rng& rng, const std::string& prefix);
  std::size_t width() const { return wq.value.rows(); }
  std::vector<Param*> params() { return {&wq, &wk, &wv, &gamma, &beta}; }
};

/// z = [features; cls]; out = LayerNorm(z + softmax(q k^T / sqrt(d)) v),
/// then split back into features and cls.
TokenVars usta_layer(const TokenVars& state, UstaLayerParams& params);
TokenVars usta_stack(const TokenVars& state, std::span<UstaLayerParams> layers, std::size_t depth);
std::pair<TokenVars, TokenVars> usta_parallel(const TokenVars& video, const TokenVars& special,
                                              std::span<UstaLayerParams> video_layers,
                                              std::span<UstaLayerParams> special_layers);

TokenState usta_layer_forward(const TokenState& state, const UstaLayerParams& params);
TokenState usta_stack_forward(const TokenState& state, std::span<const UstaLayerParams> layers, std::size_t depth);
std::pair<TokenState, TokenState> usta_parallel(const TokenState& video, const TokenState& special,
                                                std::span<const UstaLayerParams> video_layers,
                                                std::span<const UstaLayerParams> special_layers);

}  // namespace hsta

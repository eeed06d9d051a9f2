#include "hsta/usta.hpp"

#include <cmath>

namespace hsta {

TokenVars bind(Tape& tape, const TokenState& state) {
  return {tape.constant(state.features), tape.constant(state.cls), state.modality};
}

UstaLayerParams UstaLayerParams::init(std::size_t d, Rng& rng, const std::string& prefix) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  UstaLayerParams p;
  p.wq = Param(prefix + ".wq", uniform_tensor({d, d}, bound, rng));
  p.wk = Param(prefix + ".wk", uniform_tensor({d, d}, bound, rng));
  p.wv = Param(prefix + ".wv", uniform_tensor({d, d}, bound, rng));
  p.gamma = Param(prefix + ".ln_gamma", Tensor::filled({1, d}, 1.0));
  p.beta = Param(prefix + ".ln_beta", Tensor({1, d}));
  return p;
}

TokenVars usta_layer(const TokenVars& state, UstaLayerParams& params) {
  const std::size_t d = params.width();
  const Tensor& f = state.features.value();
  const Tensor& c = state.cls.value();
  if (f.rank() != 2 || c.rank() != 2 || c.rows() != 1 || f.cols() != d || c.cols() != d) {
    throw DimensionError("usta layer of width " + std::to_string(d) + " got features " + to_string(f.shape()) +
                         " and cls " + to_string(c.shape()));
  }
  const std::size_t n = f.rows();
  Tape& tape = *state.features.tape;

  Var z = concat_rows(state.features, state.cls);
  Var q = matmul(z, tape.param(params.wq));
  Var k = matmul(z, tape.param(params.wk));
  Var v = matmul(z, tape.param(params.wv));
  Var attn = softmax_rows(scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d))));
  Var out = layer_norm(z + matmul(attn, v), tape.param(params.gamma), tape.param(params.beta));
  auto [features, cls] = split_rows(out, n);
  return {features, cls, state.modality};
}

TokenVars usta_stack(const TokenVars& state, std::span<UstaLayerParams> layers, std::size_t depth) {
  if (layers.size() != depth) {
    throw ConfigError("usta stack expects " + std::to_string(depth) + " layers, got " + std::to_string(layers.size()));
  }
  TokenVars current = state;
  for (auto& layer : layers) current = usta_layer(current, layer);
  return current;
}

std::pair<TokenVars, TokenVars> usta_parallel(const TokenVars& video, const TokenVars& special,
                                              std::span<UstaLayerParams> video_layers,
                                              std::span<UstaLayerParams> special_layers) {
  return {usta_stack(video, video_layers, video_layers.size()),
          usta_stack(special, special_layers, special_layers.size())};
}

TokenState usta_layer_forward(const TokenState& state, const UstaLayerParams& params) {
  Tape tape;
  UstaLayerParams local = params;
  return usta_layer(bind(tape, state), local).values();
}

TokenState usta_stack_forward(const TokenState& state, std::span<const UstaLayerParams> layers, std::size_t depth) {
  if (layers.size() != depth) {
    throw ConfigError("usta stack expects " + std::to_string(depth) + " layers, got " + std::to_string(layers.size()));
  }
  if (depth == 0) return state;
  Tape tape;
  std::vector<UstaLayerParams> local(layers.begin(), layers.end());
  return usta_stack(bind(tape, state), local, depth).values();
}

std::pair<TokenState, TokenState> usta_parallel(const TokenState& video, const TokenState& special,
                                                std::span<const UstaLayerParams> video_layers,
                                                std::span<const UstaLayerParams> special_layers) {
  return {usta_stack_forward(video, video_layers, video_layers.size()),
          usta_stack_forward(special, special_layers, special_layers.size())};
}

}  // namespace hsta

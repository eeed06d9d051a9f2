#include "hsta/csta.hpp"

#include <cmath>

namespace hsta {
namespace {

struct DirectionTrace {
  Var attention;
  Var out;
};

DirectionTrace trace_direction(Var cls_src, Var feat_other, CstaDirectionParams& params) {
  const std::size_t d = params.wq.value.rows();
  const Tensor& c = cls_src.value();
  const Tensor& f = feat_other.value();
  if (c.rank() != 2 || f.rank() != 2 || c.rows() != 1 || c.cols() != params.mlp_in.w1.value.rows() ||
      f.cols() != d) {
    throw DimensionError("csta direction of width " + std::to_string(d) + " got cls " + to_string(c.shape()) +
                         " and features " + to_string(f.shape()));
  }
  Tape& tape = *cls_src.tape;
  Var query_token = mlp(cls_src, params.mlp_in);
  Var cat = concat_rows(query_token, feat_other);
  Var q = matmul(query_token, tape.param(params.wq));
  Var k = matmul(cat, tape.param(params.wk));
  Var v = matmul(cat, tape.param(params.wv));
  Var attn = softmax_rows(scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d))));
  Var h = query_token + matmul(attn, v);
  return {attn, mlp(h, params.mlp_out)};
}

}  // namespace

MlpParams MlpParams::init(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng, const std::string& prefix) {
  MlpParams p;
  p.w1 = Param(prefix + ".w1", uniform_tensor({in, hidden}, 1.0 / std::sqrt(static_cast<double>(in)), rng));
  p.b1 = Param(prefix + ".b1", Tensor({1, hidden}));
  p.w2 = Param(prefix + ".w2", uniform_tensor({hidden, out}, 1.0 / std::sqrt(static_cast<double>(hidden)), rng));
  p.b2 = Param(prefix + ".b2", Tensor({1, out}));
  return p;
}

MlpParams MlpParams::identity(std::size_t d, const std::string& prefix) {
  MlpParams p;
  Tensor w1({d, 2 * d}), w2({2 * d, d});
  for (std::size_t i = 0; i < d; ++i) {
    w1(i, i) = 1.0;
    w2(i, i) = 1.0;
  }
  p.w1 = Param(prefix + ".w1", std::move(w1));
  p.b1 = Param(prefix + ".b1", Tensor({1, 2 * d}));
  p.w2 = Param(prefix + ".w2", std::move(w2));
  p.b2 = Param(prefix + ".b2", Tensor({1, d}));
  p.activation = Activation::identity;
  return p;
}

Var mlp(Var x, MlpParams& p) {
  Tape& tape = *x.tape;
  Var hidden = add_row(matmul(x, tape.param(p.w1)), tape.param(p.b1));
  if (p.activation == Activation::gelu) hidden = gelu(hidden);
  return add_row(matmul(hidden, tape.param(p.w2)), tape.param(p.b2));
}

CstaDirectionParams CstaDirectionParams::init(std::size_t d, Rng& rng, const std::string& prefix) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  CstaDirectionParams p;
  p.mlp_in = MlpParams::init(d, 2 * d, d, rng, prefix + ".mlp_in");
  p.wq = Param(prefix + ".wq", uniform_tensor({d, d}, bound, rng));
  p.wk = Param(prefix + ".wk", uniform_tensor({d, d}, bound, rng));
  p.wv = Param(prefix + ".wv", uniform_tensor({d, d}, bound, rng));
  p.mlp_out = MlpParams::init(d, 2 * d, d, rng, prefix + ".mlp_out");
  return p;
}

std::vector<Param*> CstaDirectionParams::params() {
  std::vector<Param*> out = mlp_in.params();
  out.insert(out.end(), {&wq, &wk, &wv});
  for (Param* p : mlp_out.params()) out.push_back(p);
  return out;
}

CstaParams CstaParams::init(std::size_t d, Rng& rng, const std::string& prefix) {
  CstaParams p;
  p.video_to_special = CstaDirectionParams::init(d, rng, prefix + ".v2s");
  p.special_to_video = CstaDirectionParams::init(d, rng, prefix + ".s2v");
  return p;
}

std::vector<Param*> CstaParams::params() {
  std::vector<Param*> out = video_to_special.params();
  for (Param* p : special_to_video.params()) out.push_back(p);
  return out;
}

Var csta_direction(Var cls_src, Var feat_other, CstaDirectionParams& params) {
  return trace_direction(cls_src, feat_other, params).out;
}

std::pair<TokenVars, TokenVars> csta_forward(const TokenVars& video, const TokenVars& special, CstaParams& params) {
  Var video_cls = csta_direction(video.cls, special.features, params.video_to_special);
  Var special_cls = csta_direction(special.cls, video.features, params.special_to_video);
  return {TokenVars{video.features, video_cls, video.modality},
          TokenVars{special.features, special_cls, special.modality}};
}

Tensor csta_attention_weights(const Tensor& cls_src, const Tensor& feat_other, const CstaDirectionParams& params) {
  Tape tape;
  CstaDirectionParams local = params;
  return trace_direction(tape.constant(cls_src), tape.constant(feat_other), local).attention.value();
}

Tensor csta_direction(const Tensor& cls_src, const Tensor& feat_other, const CstaDirectionParams& params) {
  Tape tape;
  CstaDirectionParams local = params;
  return csta_direction(tape.constant(cls_src), tape.constant(feat_other), local).value();
}

std::pair<TokenState, TokenState> csta_forward(const TokenState& video, const TokenState& special,
                                               const CstaParams& params) {
  Tape tape;
  CstaParams local = params;
  auto [v, s] = csta_forward(bind(tape, video), bind(tape, special), local);
  return {v.values(), s.values()};
}

}  // namespace hsta

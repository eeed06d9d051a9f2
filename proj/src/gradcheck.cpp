#include "hsta/gradcheck.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <memory>

#include "hsta/random.hpp"

namespace hsta {

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

void GradCheckReport::append(const GradCheckReport& other) {
  entries.insert(entries.end(), other.entries.begin(), other.entries.end());
  tolerance = other.tolerance;
}

std::string GradCheckReport::format() const {
  std::string out;
  char line[160];
  for (const auto& e : entries) {
    std::snprintf(line, sizeof(line), "%-10s %-28s max_rel_err=%.3e  %s\n", e.suite.c_str(), e.group.c_str(),
                  e.max_rel_error, e.passed ? "ok" : "FAIL");
    out += line;
  }
  std::snprintf(line, sizeof(line), "%s (tolerance %.1e)\n", passed() ? "PASS" : "FAIL", tolerance);
  out += line;
  return out;
}

namespace {

std::vector<std::pair<Tensor, Tensor>> analytic_and_numeric(std::span<Param* const> params,
                                                            const std::function<Var(Tape&)>& build, double step) {
  for (Param* p : params) p->zero_grad();
  {
    Tape tape;
    backward(tape, build(tape));
  }
  auto loss_value = [&] {
    Tape tape;
    return build(tape).value()[0];
  };
  std::vector<std::pair<Tensor, Tensor>> out;
  for (Param* p : params) out.emplace_back(p->grad, finite_diff_grad(loss_value, *p, step));
  return out;
}

}  // namespace

std::vector<double> compare_gradients(std::span<Param* const> params, const std::function<Var(Tape&)>& build,
                                      double step) {
  std::vector<double> errors;
  for (const auto& [analytic, numeric] : analytic_and_numeric(params, build, step)) {
    errors.push_back(relative_error(analytic, numeric));
  }
  return errors;
}

double compare_group_gradient(std::span<Param* const> params, const std::function<Var(Tape&)>& build, double step) {
  double diff = 0.0, scale = 0.0;
  for (const auto& [analytic, numeric] : analytic_and_numeric(params, build, step)) {
    if (analytic.empty()) continue;
    diff = std::max(diff, max_abs_diff(analytic, numeric));
    scale = std::max({scale, analytic.arr().abs().maxCoeff(), numeric.arr().abs().maxCoeff()});
  }
  return scale == 0.0 ? 0.0 : diff / scale;
}

namespace {

GradCheckEntry entry(std::string suite, std::string group, std::span<const double> errors, double tol) {
  const double worst = errors.empty() ? 0.0 : *std::max_element(errors.begin(), errors.end());
  return {std::move(suite), std::move(group), worst, worst < tol};
}

/// sum(out * R) for a fixed random R so that no primitive's output is
/// annihilated (softmax rows, for instance, always sum to one).
Var readout(Var out, Rng& rng) { return weighted_sum(out, uniform_tensor(out.shape(), 1.0, rng)); }

std::size_t extent(Rng& rng) { return std::uniform_int_distribution<std::size_t>(1, 8)(rng); }

}  // namespace

GradCheckReport check_primitives(const GradCheckOptions& opts) {
  GradCheckReport report;
  report.tolerance = opts.tolerance;
  Rng rng(opts.seed);
  constexpr int kTrials = 4;

  auto run = [&](const char* name, auto make, bool with_readout = true) {
    std::vector<double> errors;
    for (int trial = 0; trial < kTrials; ++trial) {
      auto [params, build] = make();
      std::vector<Param*> ptrs;
      for (auto& p : *params) ptrs.push_back(&p);
      const std::uint64_t readout_seed = rng();
      auto loss = [&, build](Tape& tape) {
        Rng r(readout_seed);
        const Var out = build(tape, ptrs);
        return with_readout ? readout(out, r) : out;
      };
      for (double e : compare_gradients(ptrs, loss, opts.step)) errors.push_back(e);
    }
    report.entries.push_back(entry("tensor", name, errors, opts.tolerance));
  };
  using Params = std::shared_ptr<std::vector<Param>>;
  using Build = std::function<Var(Tape&, std::vector<Param*>&)>;
  auto params_of = [&](std::initializer_list<Shape> shapes) {
    auto ps = std::make_shared<std::vector<Param>>();
    int i = 0;
    for (const auto& s : shapes) ps->emplace_back("x" + std::to_string(i++), uniform_tensor(s, 1.0, rng));
    return ps;
  };

  run("matmul", [&]() -> std::pair<Params, Build> {
    const std::size_t m = extent(rng), k = extent(rng), n = extent(rng);
    return {params_of({{m, k}, {k, n}}),
            [](Tape& t, std::vector<Param*>& p) { return matmul(t.param(*p[0]), t.param(*p[1])); }};
  });
  run("matmul_nt", [&]() -> std::pair<Params, Build> {
    const std::size_t m = extent(rng), k = extent(rng), n = extent(rng);
    return {params_of({{m, k}, {n, k}}),
            [](Tape& t, std::vector<Param*>& p) { return matmul_nt(t.param(*p[0]), t.param(*p[1])); }};
  });
  run("add", [&]() -> std::pair<Params, Build> {
    const std::size_t m = extent(rng), n = extent(rng);
    return {params_of({{m, n}, {m, n}}),
            [](Tape& t, std::vector<Param*>& p) { return t.param(*p[0]) + t.param(*p[1]); }};
  });
  run("add_row", [&]() -> std::pair<Params, Build> {
    const std::size_t m = extent(rng), n = extent(rng);
    return {params_of({{m, n}, {1, n}}),
            [](Tape& t, std::vector<Param*>& p) { return add_row(t.param(*p[0]), t.param(*p[1])); }};
  });
  run("scale", [&]() -> std::pair<Params, Build> {
    const std::size_t m = extent(rng), n = extent(rng);
    return {params_of({{m, n}}), [](Tape& t, std::vector<Param*>& p) { return scale(t.param(*p[0]), -1.75); }};
  });
  run("softmax_rows", [&]() -> std::pair<Params, Build> {
    const std::size_t m = extent(rng), n = extent(rng);
    return {params_of({{m, n}}), [](Tape& t, std::vector<Param*>& p) { return softmax_rows(t.param(*p[0])); }};
  });
  run("layer_norm", [&]() -> std::pair<Params, Build> {
    const std::size_t m = extent(rng), n = 1 + extent(rng);
    return {params_of({{m, n}, {1, n}, {1, n}}), [](Tape& t, std::vector<Param*>& p) {
              return layer_norm(t.param(*p[0]), t.param(*p[1]), t.param(*p[2]));
            }};
  });
  run("concat_rows", [&]() -> std::pair<Params, Build> {
    const std::size_t a = extent(rng), b = extent(rng), n = extent(rng);
    return {params_of({{a, n}, {b, n}}),
            [](Tape& t, std::vector<Param*>& p) { return concat_rows(t.param(*p[0]), t.param(*p[1])); }};
  });
  run("slice_rows", [&]() -> std::pair<Params, Build> {
    const std::size_t m = 1 + extent(rng), n = extent(rng);
    const std::size_t begin = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
    const std::size_t count = std::uniform_int_distribution<std::size_t>(1, m - begin)(rng);
    return {params_of({{m, n}}), [begin, count](Tape& t, std::vector<Param*>& p) {
              return slice_rows(t.param(*p[0]), begin, count);
            }};
  });
  run("gelu", [&]() -> std::pair<Params, Build> {
    const std::size_t m = extent(rng), n = extent(rng);
    return {params_of({{m, n}}), [](Tape& t, std::vector<Param*>& p) { return gelu(t.param(*p[0])); }};
  });
  run("sum", [&]() -> std::pair<Params, Build> {
    const std::size_t m = extent(rng), n = extent(rng);
    return {params_of({{m, n}}), [](Tape& t, std::vector<Param*>& p) { return sum(t.param(*p[0])); }};
  });
  run(
      "weighted_sum",
      [&]() -> std::pair<Params, Build> {
        const std::size_t m = extent(rng), n = extent(rng);
        Tensor w = uniform_tensor({m, n}, 1.0, rng);
        return {params_of({{m, n}}),
                [w](Tape& t, std::vector<Param*>& p) { return weighted_sum(t.param(*p[0]), w); }};
      },
      false);
  run("mse", [&]() -> std::pair<Params, Build> {
    const std::size_t c = 1 + extent(rng);
    const std::size_t label = std::uniform_int_distribution<std::size_t>(0, c - 1)(rng);
    return {params_of({{1, c}}),
            [label](Tape& t, std::vector<Param*>& p) { return mse_loss(t.param(*p[0]), label); }};
  });
  return report;
}

GradCheckReport check_usta(const GradCheckOptions& opts) {
  GradCheckReport report;
  report.tolerance = opts.tolerance;
  Rng rng(opts.seed + 1);
  for (std::size_t d : {4, 8}) {
    for (std::size_t n : {1, 3}) {
      UstaLayerParams layer = UstaLayerParams::init(d, rng, "usta");
      layer.gamma.value = uniform_tensor({1, d}, 1.0, rng);
      layer.beta.value = uniform_tensor({1, d}, 1.0, rng);
      Param features("features", uniform_tensor({n, d}, 1.0, rng));
      Param cls("cls", uniform_tensor({1, d}, 1.0, rng));
      std::vector<Param*> params = layer.params();
      params.push_back(&features);
      params.push_back(&cls);
      auto build = [&](Tape& t) {
        TokenVars out = usta_layer({t.param(features), t.param(cls), Modality::video}, layer);
        return sum(out.features) + sum(out.cls);
      };
      // sum(LayerNorm(.)) is insensitive to the pre-norm input, so the
      // features are also checked through a random readout.
      const std::uint64_t readout_seed = rng();
      auto build_readout = [&](Tape& t) {
        Rng r(readout_seed);
        TokenVars out = usta_layer({t.param(features), t.param(cls), Modality::video}, layer);
        return readout(concat_rows(out.features, out.cls), r);
      };
      const auto plain = compare_gradients(params, build, opts.step);
      const auto projected = compare_gradients(params, build_readout, opts.step);
      std::vector<double> errors(plain);
      errors.insert(errors.end(), projected.begin(), projected.end());
      char group[48];
      std::snprintf(group, sizeof(group), "layer d=%zu N=%zu", d, n);
      report.entries.push_back(entry("usta", group, errors, opts.tolerance));
    }
  }
  return report;
}

GradCheckReport check_csta(const GradCheckOptions& opts) {
  GradCheckReport report;
  report.tolerance = opts.tolerance;
  Rng rng(opts.seed + 2);
  const std::size_t d = 4, n = 2;
  CstaParams csta = CstaParams::init(d, rng, "csta");
  // Non-zero biases exercise every GELU regime.
  for (Param* p : csta.params()) {
    if (p->value.rows() == 1) p->value = uniform_tensor(p->value.shape(), 0.5, rng);
  }
  Param vf("video.features", uniform_tensor({n, d}, 1.0, rng));
  Param vc("video.cls", uniform_tensor({1, d}, 1.0, rng));
  Param sf("special.features", uniform_tensor({n, d}, 1.0, rng));
  Param sc("special.cls", uniform_tensor({1, d}, 1.0, rng));
  const std::uint64_t readout_seed = rng();
  auto build = [&](Tape& t) {
    Rng r(readout_seed);
    auto [v, s] = csta_forward({t.param(vf), t.param(vc), Modality::video},
                               {t.param(sf), t.param(sc), Modality::special}, csta);
    return readout(concat_rows(v.cls, s.cls), r);
  };
  std::vector<Param*> v2s = csta.video_to_special.params();
  std::vector<Param*> s2v = csta.special_to_video.params();
  std::vector<Param*> inputs = {&vf, &vc, &sf, &sc};
  report.entries.push_back(entry("csta", "video_to_special", compare_gradients(v2s, build, opts.step), opts.tolerance));
  report.entries.push_back(entry("csta", "special_to_video", compare_gradients(s2v, build, opts.step), opts.tolerance));
  report.entries.push_back(entry("csta", "inputs", compare_gradients(inputs, build, opts.step), opts.tolerance));
  return report;
}

HstaConfig tiny_model_config(std::size_t d, std::size_t video_tokens, std::size_t special_tokens,
                             std::size_t video_depth, std::size_t special_depth, std::size_t blocks) {
  if (video_tokens != 2 * special_tokens) {
    throw ConfigError("tiny geometry needs video_tokens == 2 * special_tokens");
  }
  HstaConfig c;
  c.d = d;
  c.video_depth = video_depth;
  c.special_depth = special_depth;
  c.blocks = blocks;
  c.num_classes = 3;
  c.frames = 4;
  c.embed.patch = 2;
  c.embed.tubelet = 2;
  c.embed.channels = 1;
  c.embed.height = 2 * special_tokens;
  c.embed.width = 2;
  return c;
}

namespace {

ClipInput random_input(const HstaConfig& c, Rng& rng) {
  const auto& e = c.embed;
  auto frame = [&](std::size_t t) {
    Tensor x = uniform_tensor({t, e.height, e.width, e.channels}, 0.5, rng);
    x.arr() += 0.5;
    return x;
  };
  return {frame(c.frames), frame(1).reshaped({e.height, e.width, e.channels}),
          frame(1).reshaped({e.height, e.width, e.channels})};
}

}  // namespace

GradCheckReport check_embedder(const GradCheckOptions& opts) {
  GradCheckReport report;
  report.tolerance = opts.tolerance;
  Rng rng(opts.seed + 3);
  const HstaConfig c = tiny_model_config(4, 4, 2, 1, 1, 1);
  EmbedderParams params = EmbedderParams::init(c.embed, c.frames, c.d, rng);
  const ClipInput input = random_input(c, rng);
  const std::uint64_t readout_seed = rng();
  auto build = [&](Tape& t) {
    Rng r(readout_seed);
    TokenVars v = embed_video(t, input.frames, c.embed, params);
    TokenVars s = embed_special(t, input.onset, input.apex, c.embed, params);
    Var all = concat_rows(concat_rows(v.features, v.cls), concat_rows(s.features, s.cls));
    return readout(all, r);
  };
  for (Param* p : params.params()) {
    std::vector<Param*> one = {p};
    report.entries.push_back(entry("embedder", p->name, compare_gradients(one, build, opts.step), opts.tolerance));
  }
  return report;
}

GradCheckReport check_model(const HstaConfig& config, const GradCheckOptions& opts) {
  GradCheckReport report;
  report.tolerance = opts.tolerance;
  Rng rng(opts.seed + 4);
  ModelParams model = ModelParams::init(config, rng());
  // Random affine LayerNorm parameters and biases so no gradient path is
  // trivially symmetric.
  for (Param* p : model.params()) {
    if (p->name.find("ln_") != std::string::npos || p->name.find(".b") != std::string::npos ||
        p->name == "head.bias") {
      p->value.arr() += uniform_tensor(p->value.shape(), 0.3, rng).arr();
    }
  }
  const ClipInput input = random_input(config, rng);
  const std::size_t label = std::uniform_int_distribution<std::size_t>(0, config.num_classes - 1)(rng);
  auto build = [&](Tape& t) { return mse_loss(model_logits(t, input, model), label); };

  char suite[48];
  std::snprintf(suite, sizeof(suite), "model");
  auto group = [&](const std::string& name, std::vector<Param*> params) {
    const double err = compare_group_gradient(params, build, opts.step);
    report.entries.push_back(entry(suite, name, std::span(&err, 1), opts.tolerance));
  };
  char tag[64];
  std::snprintf(tag, sizeof(tag), "[d=%zu Lv=%zu Ls=%zu M=%zu]", config.d, config.video_depth, config.special_depth,
                config.blocks);
  group(std::string(tag) + " embedder", model.embedder.params());
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    group(std::string(tag) + " block" + std::to_string(b), model.blocks[b].params());
  }
  group(std::string(tag) + " head", {&model.head.weight, &model.head.bias});
  return report;
}

GradCheckReport run_gradcheck_suite(const GradCheckOptions& opts) {
  GradCheckReport report;
  report.tolerance = opts.tolerance;
  report.append(check_primitives(opts));
  report.append(check_usta(opts));
  report.append(check_csta(opts));
  report.append(check_embedder(opts));
  report.append(check_model(tiny_model_config(4, 2, 1, 1, 1, 1), opts));
  report.append(check_model(tiny_model_config(8, 4, 2, 2, 1, 2), opts));
  return report;
}

}  // namespace hsta

#include "hsta/embedder.hpp"

#include <cmath>
#include <cstring>

namespace hsta {

void EmbedderConfig::validate(std::size_t frames) const {
  std::string problems;
  auto check = [&](const char* name, std::size_t extent, const char* unit_name, std::size_t unit) {
    if (unit == 0 || extent == 0 || extent % unit != 0) {
      if (!problems.empty()) problems += "; ";
      problems += std::string(name) + "=" + std::to_string(extent) + " not divisible by " + unit_name + "=" +
                  std::to_string(unit);
    }
  };
  check("frames", frames, "tubelet", tubelet);
  check("height", height, "patch", patch);
  check("width", width, "patch", patch);
  if (channels == 0) problems += problems.empty() ? "channels=0" : "; channels=0";
  if (!problems.empty()) throw ConfigError("embedder geometry invalid: " + problems);
}

EmbedderParams EmbedderParams::init(const EmbedderConfig& cfg, std::size_t frames, std::size_t d, Rng& rng) {
  cfg.validate(frames);
  const std::size_t nv = cfg.video_tokens(frames);
  const std::size_t ns = cfg.special_tokens();
  const double token_bound = 1.0 / std::sqrt(static_cast<double>(d));
  EmbedderParams p;
  p.video_proj = Param("embed.video_proj", uniform_tensor({cfg.video_patch_dim(), d},
                                                          1.0 / std::sqrt(double(cfg.video_patch_dim())), rng));
  p.special_proj = Param("embed.special_proj", uniform_tensor({cfg.special_patch_dim(), d},
                                                              1.0 / std::sqrt(double(cfg.special_patch_dim())), rng));
  p.video_pos = Param("embed.video_pos", uniform_tensor({nv, d}, token_bound, rng));
  p.special_pos = Param("embed.special_pos", uniform_tensor({ns, d}, token_bound, rng));
  p.video_cls = Param("embed.video_cls", uniform_tensor({1, d}, token_bound, rng));
  p.special_cls = Param("embed.special_cls", uniform_tensor({1, d}, token_bound, rng));
  return p;
}

Tensor extract_tubelets(const Tensor& frames, std::size_t depth, std::size_t patch) {
  if (frames.rank() != 4) throw DimensionError("expected T x H x W x ch frames, got " + to_string(frames.shape()));
  const std::size_t t = frames.shape()[0], h = frames.shape()[1], w = frames.shape()[2], ch = frames.shape()[3];
  EmbedderConfig geometry{h, w, ch, patch, depth};
  geometry.validate(t);
  const std::size_t nt = t / depth, ny = h / patch, nx = w / patch;
  const std::size_t row_len = depth * patch * patch * ch;
  Tensor out({nt * ny * nx, row_len});
  double* dst = out.data();
  for (std::size_t bt = 0; bt < nt; ++bt) {
    for (std::size_t by = 0; by < ny; ++by) {
      for (std::size_t bx = 0; bx < nx; ++bx) {
        for (std::size_t dt = 0; dt < depth; ++dt) {
          for (std::size_t dy = 0; dy < patch; ++dy) {
            const std::size_t frame = bt * depth + dt, y = by * patch + dy;
            const double* src = frames.data() + ((frame * h + y) * w + bx * patch) * ch;
            std::memcpy(dst, src, patch * ch * sizeof(double));
            dst += patch * ch;
          }
        }
      }
    }
  }
  return out;
}

Tensor stack_special_frames(const Tensor& onset, const Tensor& apex) {
  if (onset.rank() != 3 || onset.shape() != apex.shape()) {
    throw DimensionError("special frames must be matching H x W x ch tensors, got " + to_string(onset.shape()) +
                         " and " + to_string(apex.shape()));
  }
  std::vector<double> data(onset.values().begin(), onset.values().end());
  data.insert(data.end(), apex.values().begin(), apex.values().end());
  const Shape& s = onset.shape();
  return Tensor({2, s[0], s[1], s[2]}, std::move(data));
}

namespace {

void check_geometry(const Tensor& frames, const EmbedderConfig& cfg) {
  const Shape& s = frames.shape();
  if (frames.rank() != 4 || s[1] != cfg.height || s[2] != cfg.width || s[3] != cfg.channels) {
    throw DimensionError("frames " + to_string(s) + " do not match configured " + std::to_string(cfg.height) + "x" +
                         std::to_string(cfg.width) + "x" + std::to_string(cfg.channels));
  }
}

TokenVars embed(Tape& tape, const Tensor& patches, Param& proj, Param& pos, Param& cls, Modality modality) {
  if (patches.rows() != pos.value.rows()) {
    throw DimensionError("embedding produced " + std::to_string(patches.rows()) + " tokens but positional table has " +
                      std::to_string(pos.value.rows()));
  }
  Var tokens = matmul(tape.constant(patches), tape.param(proj)) + tape.param(pos);
  return {tokens, tape.param(cls), modality};
}

}  // namespace

TokenVars embed_video(Tape& tape, const Tensor& clip_frames, const EmbedderConfig& cfg, EmbedderParams& params) {
  check_geometry(clip_frames, cfg);
  cfg.validate(clip_frames.shape()[0]);
  return embed(tape, extract_tubelets(clip_frames, cfg.tubelet, cfg.patch), params.video_proj, params.video_pos,
               params.video_cls, Modality::video);
}

TokenVars embed_special(Tape& tape, const Tensor& onset, const Tensor& apex, const EmbedderConfig& cfg,
                        EmbedderParams& params) {
  const Tensor stacked = stack_special_frames(onset, apex);
  check_geometry(stacked, cfg);
  return embed(tape, extract_tubelets(stacked, 2, cfg.patch), params.special_proj, params.special_pos,
               params.special_cls, Modality::special);
}

TokenState embed_video(const Tensor& clip_frames, const EmbedderConfig& cfg, const EmbedderParams& params) {
  Tape tape;
  EmbedderParams local = params;
  return embed_video(tape, clip_frames, cfg, local).values();
}

TokenState embed_special(const Tensor& onset, const Tensor& apex, const EmbedderConfig& cfg,
                         const EmbedderParams& params) {
  Tape tape;
  EmbedderParams local = params;
  return embed_special(tape, onset, apex, cfg, local).values();
}

}  // namespace hsta

#pragma once

#include <string>
#include <vector>

#include "hsta/autodiff.hpp"
#include "hsta/random.hpp"
#include "hsta/usta.hpp"

namespace hsta {

/// Frame geometry and tubelet sizes shared by both modalities.
struct EmbedderConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 1;
  std::size_t patch = 8;
  std::size_t tubelet = 2;

  std::size_t patches_per_frame() const { return (height / patch) * (width / patch); }
  std::size_t video_tokens(std::size_t frames) const { return (frames / tubelet) * patches_per_frame(); }
  std::size_t special_tokens() const { return patches_per_frame(); }
  std::size_t video_patch_dim() const { return tubelet * patch * patch * channels; }
  std::size_t special_patch_dim() const { return 2 * patch * patch * channels; }

  /// Throws ConfigError naming every extent that does not divide evenly.
  void validate(std::size_t frames) const;
};

struct EmbedderParams {
  Param video_proj;
  Param special_proj;
  Param video_pos;
  Param special_pos;
  Param video_cls;
  Param special_cls;

  static EmbedderParams init(const EmbedderConfig& cfg, std::size_t frames, std::size_t d, Rng& rng);
  std::vector<Param*> params() {
    return {&video_proj, &special_proj, &video_pos, &special_pos, &video_cls, &special_cls};
  }
};

/// Non-overlapping depth x patch x patch tubelets of a T x H x W x ch clip,
/// one row per tubelet in (time, row, column) order. Row layout is
/// (dt, dy, dx, channel).
Tensor extract_tubelets(const Tensor& frames, std::size_t depth, std::size_t patch);

/// Stacks onset and apex (H x W x ch each) into a 2 x H x W x ch clip.
Tensor stack_special_frames(const Tensor& onset, const Tensor& apex);

TokenVars embed_video(Tape& tape, const Tensor& clip_frames, const EmbedderConfig& cfg, EmbedderParams& params);
TokenVars embed_special(Tape& tape, const Tensor& onset, const Tensor& apex, const EmbedderConfig& cfg,
                        EmbedderParams& params);

TokenState embed_video(const Tensor& clip_frames, const EmbedderConfig& cfg, const EmbedderParams& params);
TokenState embed_special(const Tensor& onset, const Tensor& apex, const EmbedderConfig& cfg,
                         const EmbedderParams& params);

}  // namespace hsta

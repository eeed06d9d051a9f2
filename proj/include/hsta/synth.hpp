#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hsta/random.hpp"
#include "hsta/tensor.hpp"

namespace hsta {

/// Metadata of one clip, everything but the pixels.
struct ClipRecord {
  std::size_t clip_id = 0;
  std::size_t subject_id = 0;
  std::size_t label = 0;
  std::size_t onset_idx = 0;
  std::size_t apex_idx = 0;
};

struct SyntheticClip {
  ClipRecord info;
  Tensor frames;  ///< T x H x W x ch, values in [0, 1]
};

struct GenSpec {
  std::size_t num_subjects = 30;
  std::size_t clips_per_subject = 12;
  std::size_t num_classes = 3;
  std::size_t frames = 12;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 1;
  double amplitude = 0.5;
  double noise = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Facial regions and motion patterns a class can combine.
inline constexpr std::size_t kRegionCount = 4;
inline constexpr std::size_t kPatternCount = 3;
inline constexpr std::size_t kMaxClasses = kRegionCount * kPatternCount;

enum class MotionPattern { raise, sweep_horizontal, sweep_vertical };

struct ClassSignature {
  std::size_t region;
  MotionPattern pattern;
};

/// Class c's (region, motion) pair. Early classes alternate both factors so
/// that region alone and motion alone are each insufficient.
ClassSignature class_signature(std::size_t label);

/// Signal strength of the overlay at frame t: 0 up to onset, linear to
/// `amplitude` at apex, then strictly decaying.
double expression_envelope(std::size_t t, std::size_t onset, std::size_t apex, std::size_t frames,
                           double amplitude);

std::vector<SyntheticClip> generate_dataset(const GenSpec& spec);
std::vector<ClipRecord> records(std::span<const SyntheticClip> clips);

/// Centered-bin indices round((i + 0.5) T / T_sample - 0.5), halves rounded up.
std::vector<std::size_t> uniform_sample_indices(std::size_t total, std::size_t count);
Tensor select_frames(const Tensor& frames, std::span<const std::size_t> indices);
Tensor uniform_sample_frames(const SyntheticClip& clip, std::size_t count);
/// Returns (onset frame, apex frame), each H x W x ch.
std::pair<Tensor, Tensor> extract_special_frames(const SyntheticClip& clip);

/// Class-balanced epochs: classes are visited round-robin, each drawing
/// from its own shuffled queue that is refilled (reshuffled) when empty.
class BalancedSampler {
 public:
  BalancedSampler(std::span<const ClipRecord> clips, std::size_t num_classes, std::size_t batch_size,
                  std::uint64_t seed);

  /// Batches of clip ids for one epoch; the epoch draws as many clips as the
  /// sampler holds.
  std::vector<std::vector<std::size_t>> epoch(std::size_t index) const;
  std::size_t batches_per_epoch() const { return (draws_ + batch_size_ - 1) / batch_size_; }

 private:
  std::vector<std::vector<std::size_t>> by_class_;
  std::size_t batch_size_;
  std::size_t draws_;
  std::uint64_t seed_;
};

std::vector<std::vector<std::size_t>> balanced_batches(std::span<const ClipRecord> clips, std::size_t num_classes,
                                                       std::size_t batch_size, std::uint64_t seed);

/// manifest.json plus one tensor payload per clip under clips/.
void save_dataset(const std::filesystem::path& dir, const GenSpec& spec, std::span<const SyntheticClip> clips);
struct Dataset {
  GenSpec spec;
  std::vector<SyntheticClip> clips;
};
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace hsta

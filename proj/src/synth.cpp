#include "hsta/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "hsta/config.hpp"
#include "hsta/tensor_io.hpp"
#include "json.hpp"

namespace hsta {

void GenSpec::validate() const {
  if (num_subjects == 0 || clips_per_subject == 0) throw ConfigError("dataset needs subjects and clips");
  if (num_classes < 2) throw ConfigError("at least two classes are required");
  if (num_classes > kMaxClasses) {
    throw ConfigError("num_classes=" + std::to_string(num_classes) + " exceeds the " + std::to_string(kMaxClasses) +
                      " available (region, motion) pairs");
  }
  if (frames < 4) throw ConfigError("clips need at least 4 frames to place onset and apex");
  if (height < 8 || width < 8 || channels == 0) throw ConfigError("frames must be at least 8x8 with one channel");
  if (!(amplitude >= 0.0)) throw ConfigError("motion amplitude must be non-negative");
  if (noise < 0.0) throw ConfigError("noise sigma must be non-negative");
}

ClassSignature class_signature(std::size_t label) {
  static constexpr std::size_t kOrder[kMaxClasses][2] = {
      {0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 0}, {3, 0}, {2, 1}, {3, 1}, {0, 2}, {1, 2}, {2, 2}, {3, 2},
  };
  if (label >= kMaxClasses) throw ConfigError("no signature for class " + std::to_string(label));
  return {kOrder[label][0], static_cast<MotionPattern>(kOrder[label][1])};
}

double expression_envelope(std::size_t t, std::size_t onset, std::size_t apex, std::size_t frames,
                           double amplitude) {
  if (t <= onset) return 0.0;
  if (t <= apex) return amplitude * static_cast<double>(t - onset) / static_cast<double>(apex - onset);
  const double tail = static_cast<double>(frames - apex);
  return amplitude * (1.0 - 0.6 * static_cast<double>(t - apex) / tail);
}

namespace {

// Region centers as fractions of (height, width): brows and mouth corners.
constexpr double kRegionCenters[kRegionCount][2] = {{0.3, 0.3}, {0.3, 0.7}, {0.7, 0.3}, {0.7, 0.7}};

Tensor subject_base(const GenSpec& spec, std::size_t subject) {
  Rng rng(mix_seed(spec.seed ^ 0x5ab1ec75ULL, subject));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t h = spec.height, w = spec.width;
  Tensor base({h, w});
  base.fill(0.1 + 0.05 * unit(rng));
  for (int blob = 0; blob < 6; ++blob) {
    const double cy = unit(rng) * h, cx = unit(rng) * w;
    const double radius = (0.12 + 0.2 * unit(rng)) * std::min(h, w);
    const double weight = 0.1 * (unit(rng) - 0.5);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double dy = (y - cy) / radius, dx = (x - cx) / radius;
        base(y, x) += weight * std::exp(-0.5 * (dy * dy + dx * dx));
      }
    }
  }
  for (double& v : base.values()) v = std::clamp(v, 0.05, 0.2);
  return base;
}

SyntheticClip make_clip(const GenSpec& spec, const Tensor& base, const ClipRecord& info) {
  Rng rng(mix_seed(spec.seed, info.clip_id));
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t t_total = spec.frames, h = spec.height, w = spec.width, ch = spec.channels;
  const ClassSignature sig = class_signature(info.label);
  const double extent = std::min(h, w);
  const double sigma = 0.15 * extent;
  const double travel = 0.25 * extent;
  const double cy0 = kRegionCenters[sig.region][0] * h;
  const double cx0 = kRegionCenters[sig.region][1] * w;

  SyntheticClip clip{info, Tensor({t_total, h, w, ch})};
  for (std::size_t t = 0; t < t_total; ++t) {
    const double strength = expression_envelope(t, info.onset_idx, info.apex_idx, t_total, spec.amplitude);
    // Sweeps move outward from the region center, reaching full travel at the apex.
    double progress = 1.0;
    if (t <= info.onset_idx) {
      progress = 0.0;
    } else if (t < info.apex_idx) {
      progress = static_cast<double>(t - info.onset_idx) / static_cast<double>(info.apex_idx - info.onset_idx);
    }
    double cy = cy0, cx = cx0;
    if (sig.pattern == MotionPattern::sweep_horizontal) cx += (cx0 < 0.5 * w ? -travel : travel) * progress;
    if (sig.pattern == MotionPattern::sweep_vertical) cy += (cy0 < 0.5 * h ? -travel : travel) * progress;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double dy = (y - cy) / sigma, dx = (x - cx) / sigma;
        const double value = base(y, x) + strength * std::exp(-0.5 * (dy * dy + dx * dx));
        for (std::size_t c = 0; c < ch; ++c) {
          const double noisy = spec.noise > 0.0 ? value + spec.noise * noise(rng) : value;
          clip.frames[((t * h + y) * w + x) * ch + c] = std::clamp(noisy, 0.0, 1.0);
        }
      }
    }
  }
  return clip;
}

}  // namespace

std::vector<SyntheticClip> generate_dataset(const GenSpec& spec) {
  spec.validate();
  std::vector<SyntheticClip> clips;
  clips.reserve(spec.num_subjects * spec.clips_per_subject);
  const std::size_t t = spec.frames;
  for (std::size_t subject = 0; subject < spec.num_subjects; ++subject) {
    const Tensor base = subject_base(spec, subject);
    for (std::size_t j = 0; j < spec.clips_per_subject; ++j) {
      ClipRecord info;
      info.clip_id = clips.size();
      info.subject_id = subject;
      info.label = info.clip_id % spec.num_classes;
      Rng timing(mix_seed(spec.seed ^ 0x7131ee5ULL, info.clip_id));
      std::uniform_int_distribution<std::size_t> onset(0, t / 4);
      info.onset_idx = onset(timing);
      const std::size_t latest_apex = std::max(info.onset_idx + 1, (7 * t) / 10);
      std::uniform_int_distribution<std::size_t> apex(std::min(info.onset_idx + 2, latest_apex), latest_apex);
      info.apex_idx = apex(timing);
      clips.push_back(make_clip(spec, base, info));
    }
  }
  return clips;
}

std::vector<ClipRecord> records(std::span<const SyntheticClip> clips) {
  std::vector<ClipRecord> out;
  out.reserve(clips.size());
  for (const auto& c : clips) out.push_back(c.info);
  return out;
}

std::vector<std::size_t> uniform_sample_indices(std::size_t total, std::size_t count) {
  if (count == 0 || count > total) {
    throw ContractError("cannot sample " + std::to_string(count) + " frames from " + std::to_string(total));
  }
  // round_half_up(p / q) with p = (2i + 1) T - Ts, q = 2 Ts, in integers.
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t p = (2 * i + 1) * total - count;
    const std::size_t q = 2 * count;
    idx[i] = std::min((2 * p + q) / (2 * q), total - 1);
  }
  return idx;
}

Tensor select_frames(const Tensor& frames, std::span<const std::size_t> indices) {
  if (frames.rank() != 4) throw DimensionError("expected T x H x W x ch frames, got " + to_string(frames.shape()));
  const Shape& s = frames.shape();
  const std::size_t frame_size = s[1] * s[2] * s[3];
  std::vector<double> data;
  data.reserve(indices.size() * frame_size);
  for (std::size_t i : indices) {
    if (i >= s[0]) throw ContractError("frame index " + std::to_string(i) + " out of range");
    const double* src = frames.data() + i * frame_size;
    data.insert(data.end(), src, src + frame_size);
  }
  return Tensor({indices.size(), s[1], s[2], s[3]}, std::move(data));
}

Tensor uniform_sample_frames(const SyntheticClip& clip, std::size_t count) {
  const auto idx = uniform_sample_indices(clip.frames.shape()[0], count);
  return select_frames(clip.frames, idx);
}

std::pair<Tensor, Tensor> extract_special_frames(const SyntheticClip& clip) {
  const Shape& s = clip.frames.shape();
  const auto& info = clip.info;
  if (!(info.onset_idx < info.apex_idx && info.apex_idx < s[0])) {
    throw ContractError("clip " + std::to_string(info.clip_id) + " has invalid onset/apex indices");
  }
  const std::size_t onset[] = {info.onset_idx};
  const std::size_t apex[] = {info.apex_idx};
  return {select_frames(clip.frames, onset).reshaped({s[1], s[2], s[3]}),
          select_frames(clip.frames, apex).reshaped({s[1], s[2], s[3]})};
}

BalancedSampler::BalancedSampler(std::span<const ClipRecord> clips, std::size_t num_classes, std::size_t batch_size,
                                 std::uint64_t seed)
    : by_class_(num_classes), batch_size_(batch_size), draws_(clips.size()), seed_(seed) {
  if (batch_size < num_classes) {
    throw ContractError("batch size " + std::to_string(batch_size) + " is smaller than the class count " +
                        std::to_string(num_classes));
  }
  for (const auto& c : clips) {
    if (c.label >= num_classes) throw ContractError("clip label out of range");
    by_class_[c.label].push_back(c.clip_id);
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (by_class_[c].empty()) throw ConfigError("class " + std::to_string(c) + " has no training clips");
  }
}

std::vector<std::vector<std::size_t>> BalancedSampler::epoch(std::size_t index) const {
  const std::size_t classes = by_class_.size();
  std::vector<std::vector<std::size_t>> queues(classes);
  std::vector<std::size_t> cursor(classes, 0), refills(classes, 0);
  auto refill = [&](std::size_t c) {
    queues[c] = by_class_[c];
    Rng rng(mix_seed(mix_seed(seed_, index), c * 1000003 + refills[c]++));
    std::shuffle(queues[c].begin(), queues[c].end(), rng);
    cursor[c] = 0;
  };
  for (std::size_t c = 0; c < classes; ++c) refill(c);

  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> batch;
  for (std::size_t k = 0; k < draws_; ++k) {
    const std::size_t c = k % classes;
    if (cursor[c] == queues[c].size()) refill(c);
    batch.push_back(queues[c][cursor[c]++]);
    if (batch.size() == batch_size_) batches.push_back(std::exchange(batch, {}));
  }
  if (!batch.empty()) batches.push_back(std::move(batch));
  return batches;
}

std::vector<std::vector<std::size_t>> balanced_batches(std::span<const ClipRecord> clips, std::size_t num_classes,
                                                       std::size_t batch_size, std::uint64_t seed) {
  return BalancedSampler(clips, num_classes, batch_size, seed).epoch(0);
}

void save_dataset(const std::filesystem::path& dir, const GenSpec& spec, std::span<const SyntheticClip> clips) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "clips");
  nlohmann::json manifest;
  manifest["gen_spec"] = spec;
  manifest["clips"] = nlohmann::json::array();
  for (const auto& clip : clips) {
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%05zu.hsta", clip.info.clip_id);
    const std::string rel = std::string("clips/") + name;
    save_tensor(dir / rel, clip.frames);
    manifest["clips"].push_back({{"clip_id", clip.info.clip_id},
                                 {"subject_id", clip.info.subject_id},
                                 {"label", clip.info.label},
                                 {"onset_idx", clip.info.onset_idx},
                                 {"apex_idx", clip.info.apex_idx},
                                 {"payload", rel}});
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset manifest not found: " + path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  Dataset ds;
  ds.spec = manifest.at("gen_spec").get<GenSpec>();
  for (const auto& rec : manifest.at("clips")) {
    SyntheticClip clip;
    clip.info.clip_id = rec.at("clip_id");
    clip.info.subject_id = rec.at("subject_id");
    clip.info.label = rec.at("label");
    clip.info.onset_idx = rec.at("onset_idx");
    clip.info.apex_idx = rec.at("apex_idx");
    clip.frames = load_tensor(dir / rec.at("payload").get<std::string>());
    ds.clips.push_back(std::move(clip));
  }
  return ds;
}

}  // namespace hsta

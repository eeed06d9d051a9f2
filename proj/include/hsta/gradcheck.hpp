#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hsta/autodiff.hpp"
#include "hsta/model.hpp"

namespace hsta {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-6;
  std::uint64_t seed = 2024;
};

/// Largest relative error seen for one parameter group.
struct GradCheckEntry {
  std::string suite;
  std::string group;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  bool passed() const;
  void append(const GradCheckReport& other);
  std::string format() const;
};

/// Analytic (tape) gradient and central-difference estimate for each param.
/// build records the scalar loss on the given tape.
std::vector<double> compare_gradients(std::span<Param* const> params, const std::function<Var(Tape&)>& build,
                                      double step);

/// Relative error of a whole parameter group: the largest absolute deviation
/// over all its params, divided by the largest gradient magnitude in the group.
double compare_group_gradient(std::span<Param* const> params, const std::function<Var(Tape&)>& build, double step);

GradCheckReport check_primitives(const GradCheckOptions& opts);
GradCheckReport check_usta(const GradCheckOptions& opts);
GradCheckReport check_csta(const GradCheckOptions& opts);
GradCheckReport check_embedder(const GradCheckOptions& opts);

/// Tiny geometry whose embedder yields the requested token counts.
/// Requires video_tokens == 2 * special_tokens.
HstaConfig tiny_model_config(std::size_t d, std::size_t video_tokens, std::size_t special_tokens,
                             std::size_t video_depth, std::size_t special_depth, std::size_t blocks);

/// End-to-end MSE loss through embedder, blocks and head; one entry per
/// parameter group (embedder, each block, head).
GradCheckReport check_model(const HstaConfig& config, const GradCheckOptions& opts);

/// Every suite, including both model configurations used for acceptance.
GradCheckReport run_gradcheck_suite(const GradCheckOptions& opts);

}  // namespace hsta

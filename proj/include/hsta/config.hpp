#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hsta/model.hpp"
#include "hsta/synth.hpp"
#include "hsta/trainer.hpp"
#include "json.hpp"

namespace hsta {

enum class Protocol { loso, kfold };

/// Everything one experiment needs, loadable from a JSON file.
struct ExperimentConfig {
  GenSpec gen;
  HstaConfig model;
  TrainConfig train;
  Protocol protocol = Protocol::kfold;
  std::size_t k = 5;
  std::filesystem::path out_dir = "out";
  std::filesystem::path data_dir;  ///< empty: <out_dir>/data
  std::uint64_t seed = 0;

  /// Desk-scale defaults: TrainConfig values with 30 epochs.
  static ExperimentConfig defaults();
  void validate() const;
  std::filesystem::path dataset_path() const { return data_dir.empty() ? out_dir / "data" : data_dir; }
};

void to_json(nlohmann::json& j, const GenSpec& s);
void from_json(const nlohmann::json& j, GenSpec& s);
void to_json(nlohmann::json& j, const EmbedderConfig& c);
void from_json(const nlohmann::json& j, EmbedderConfig& c);
void to_json(nlohmann::json& j, const HstaConfig& c);
void from_json(const nlohmann::json& j, HstaConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Applies "section.key=value" (or a bare key of a known section) to a
/// config; used by --set and --sweep.
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

std::string protocol_name(Protocol p);
std::string fusion_name(Fusion f);

}  // namespace hsta

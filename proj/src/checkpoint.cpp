#include "hsta/checkpoint.hpp"

#include <fstream>

#include "hsta/config.hpp"
#include "hsta/tensor_io.hpp"

namespace hsta {

void save_checkpoint(const std::filesystem::path& dir, ModelParams& model, std::uint64_t seed) {
  std::filesystem::create_directories(dir / "params");
  nlohmann::json manifest;
  manifest["config"] = model.config;
  manifest["seed"] = seed;
  manifest["params"] = nlohmann::json::array();
  for (Param* p : model.params()) {
    const std::string rel = "params/" + p->name + ".hsta";
    save_tensor(dir / rel, p->value);
    manifest["params"].push_back({{"name", p->name}, {"shape", p->value.shape()}, {"file", rel}});
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint manifest not found: " + path.string());
  const auto manifest = nlohmann::json::parse(in);
  Checkpoint ck;
  ck.seed = manifest.at("seed").get<std::uint64_t>();
  ck.model = ModelParams::init(manifest.at("config").get<HstaConfig>(), ck.seed);
  auto params = ck.model.params();
  const auto& entries = manifest.at("params");
  if (entries.size() != params.size()) {
    throw FormatError("checkpoint lists " + std::to_string(entries.size()) + " params, config implies " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = entries[i];
    if (e.at("name").get<std::string>() != params[i]->name) {
      throw FormatError("checkpoint param " + e.at("name").get<std::string>() + " where " + params[i]->name +
                        " was expected");
    }
    Tensor value = load_tensor(dir / e.at("file").get<std::string>());
    if (value.shape() != params[i]->value.shape()) {
      throw FormatError("checkpoint param " + params[i]->name + " has shape " + to_string(value.shape()));
    }
    params[i]->value = std::move(value);
  }
  return ck;
}

}  // namespace hsta

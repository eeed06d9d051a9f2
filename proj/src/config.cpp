#include "hsta/config.hpp"

#include <fstream>
#include <map>

namespace hsta {

using nlohmann::json;

namespace {

template <class T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

const std::map<std::string, std::string>& aliases() {
  static const std::map<std::string, std::string> table = {
      {"L_v", "model.video_depth"}, {"L_s", "model.special_depth"}, {"M", "model.blocks"},
      {"d", "model.d"},             {"T_sample", "model.frames"},   {"C", "gen.num_classes"},
  };
  return table;
}

}  // namespace

void to_json(json& j, const GenSpec& s) {
  j = json{{"num_subjects", s.num_subjects}, {"clips_per_subject", s.clips_per_subject},
           {"num_classes", s.num_classes},   {"frames", s.frames},
           {"height", s.height},             {"width", s.width},
           {"channels", s.channels},         {"amplitude", s.amplitude},
           {"noise", s.noise},               {"seed", s.seed}};
}

void from_json(const json& j, GenSpec& s) {
  read(j, "num_subjects", s.num_subjects);
  read(j, "clips_per_subject", s.clips_per_subject);
  read(j, "num_classes", s.num_classes);
  read(j, "frames", s.frames);
  read(j, "height", s.height);
  read(j, "width", s.width);
  read(j, "channels", s.channels);
  read(j, "amplitude", s.amplitude);
  read(j, "noise", s.noise);
  read(j, "seed", s.seed);
}

void to_json(json& j, const EmbedderConfig& c) {
  j = json{{"height", c.height}, {"width", c.width}, {"channels", c.channels}, {"patch", c.patch},
           {"tubelet", c.tubelet}};
}

void from_json(const json& j, EmbedderConfig& c) {
  read(j, "height", c.height);
  read(j, "width", c.width);
  read(j, "channels", c.channels);
  read(j, "patch", c.patch);
  read(j, "tubelet", c.tubelet);
}

std::string fusion_name(Fusion f) { return f == Fusion::csta ? "csta" : "concat"; }

std::string protocol_name(Protocol p) { return p == Protocol::loso ? "loso" : "kfold"; }

void to_json(json& j, const HstaConfig& c) {
  j = json{{"d", c.d},
           {"video_depth", c.video_depth},
           {"special_depth", c.special_depth},
           {"blocks", c.blocks},
           {"num_classes", c.num_classes},
           {"frames", c.frames},
           {"fusion", fusion_name(c.fusion)},
           {"embed", c.embed}};
}

void from_json(const json& j, HstaConfig& c) {
  read(j, "d", c.d);
  read(j, "video_depth", c.video_depth);
  read(j, "special_depth", c.special_depth);
  read(j, "blocks", c.blocks);
  read(j, "num_classes", c.num_classes);
  read(j, "frames", c.frames);
  if (j.contains("fusion")) {
    const auto name = j.at("fusion").get<std::string>();
    if (name == "csta") {
      c.fusion = Fusion::csta;
    } else if (name == "concat") {
      c.fusion = Fusion::concat;
    } else {
      throw ConfigError("unknown fusion '" + name + "' (expected csta or concat)");
    }
  }
  read(j, "embed", c.embed);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"batch_size", c.batch_size},   {"epochs", c.epochs},
           {"base_lr", c.base_lr},         {"warmup_epochs", c.warmup_epochs},
           {"warmup_init_lr", c.warmup_init_lr}, {"weight_decay", c.weight_decay},
           {"beta1", c.beta1},             {"beta2", c.beta2},
           {"eps", c.eps},                 {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  read(j, "batch_size", c.batch_size);
  read(j, "epochs", c.epochs);
  read(j, "base_lr", c.base_lr);
  read(j, "warmup_epochs", c.warmup_epochs);
  read(j, "warmup_init_lr", c.warmup_init_lr);
  read(j, "weight_decay", c.weight_decay);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "eps", c.eps);
  read(j, "seed", c.seed);
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"gen", c.gen},
           {"model", c.model},
           {"train", c.train},
           {"protocol", protocol_name(c.protocol)},
           {"k", c.k},
           {"out_dir", c.out_dir.string()},
           {"data_dir", c.data_dir.string()},
           {"seed", c.seed}};
}

void from_json(const json& j, ExperimentConfig& c) {
  read(j, "gen", c.gen);
  read(j, "model", c.model);
  read(j, "train", c.train);
  if (j.contains("protocol")) {
    const auto name = j.at("protocol").get<std::string>();
    if (name == "loso") {
      c.protocol = Protocol::loso;
    } else if (name == "kfold") {
      c.protocol = Protocol::kfold;
    } else {
      throw ConfigError("unknown protocol '" + name + "' (expected loso or kfold)");
    }
  }
  read(j, "k", c.k);
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("data_dir")) c.data_dir = j.at("data_dir").get<std::string>();
  read(j, "seed", c.seed);
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.train.epochs = 30;
  return c;
}

void ExperimentConfig::validate() const {
  gen.validate();
  model.validate();
  train.validate();
  if (model.num_classes != gen.num_classes) {
    throw ConfigError("model.num_classes=" + std::to_string(model.num_classes) + " but the generator produces " +
                      std::to_string(gen.num_classes) + " classes");
  }
  if (model.frames > gen.frames) {
    throw ConfigError("model.frames=" + std::to_string(model.frames) + " exceeds clip length " +
                      std::to_string(gen.frames));
  }
  if (model.embed.height != gen.height || model.embed.width != gen.width || model.embed.channels != gen.channels) {
    throw ConfigError("embedder geometry does not match generated frames");
  }
  if (protocol == Protocol::kfold && k < 2) throw ConfigError("k-fold needs k >= 2");
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    ExperimentConfig cfg = ExperimentConfig::defaults();
    from_json(json::parse(in), cfg);
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  std::string path = key;
  if (auto it = aliases().find(key); it != aliases().end()) path = it->second;
  json j = cfg;
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;
  }
  const auto dot = path.find('.');
  if (dot == std::string::npos) {
    if (!j.contains(path)) throw ConfigError("unknown config key '" + key + "'");
    j[path] = parsed;
  } else {
    const std::string section = path.substr(0, dot), field = path.substr(dot + 1);
    if (!j.contains(section) || !j[section].is_object() || !j[section].contains(field)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    j[section][field] = parsed;
  }
  // Class count is shared by generator and model.
  if (path == "gen.num_classes") j["model"]["num_classes"] = parsed;
  if (path == "model.num_classes") j["gen"]["num_classes"] = parsed;
  try {
    from_json(j, cfg);
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

}  // namespace hsta

#include "ctflow/tools/experiment.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <type_traits>

namespace ctflow::tools {
namespace {

using json = nlohmann::ordered_json;

// Reads one JSON object into C++ fields, failing on keys nobody claimed.
class Reader {
 public:
  Reader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ConfigError("config: '" + label() + "' must be an object");
  }

  template <class T>
  void field(const char* key, T& out) {
    claimed_.emplace(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_unsigned()) throw ConfigError("config: key '" + path(key) + "' must be a nonnegative integer");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_integer()) throw ConfigError("config: key '" + path(key) + "' must be an integer");
    }
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: key '" + path(key) + "' has the wrong type");
    }
  }

  void section(const char* key, const std::function<void(Reader&)>& body) {
    claimed_.emplace(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    Reader sub(*it, path(key));
    body(sub);
    sub.finish();
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!claimed_.count(it.key())) throw ConfigError("config: unknown key '" + path(it.key()) + "'");
    }
  }

 private:
  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }
  std::string label() const { return prefix_.empty() ? "<root>" : prefix_; }

  const json& obj_;
  std::string prefix_;
  std::set<std::string> claimed_;
};

json to_json(const ExperimentConfig& c) {
  json j;
  j["preset"] = c.preset;
  j["seed"] = c.seed;
  j["scheme"] = std::string(scheme_name(c.scheme));
  j["corpus"] = {
      {"train_count", c.corpus.train_count},   {"valid_count", c.corpus.valid_count},
      {"test_count", c.corpus.test_count},     {"num_samples", c.corpus.num_samples},
      {"sample_rate", c.corpus.sample_rate},   {"snr_min_db", c.corpus.snr_min_db},
      {"snr_max_db", c.corpus.snr_max_db},     {"noise_pole_min", c.corpus.noise_pole_min},
      {"noise_pole_max", c.corpus.noise_pole_max},
  };
  j["features"] = {
      {"fft_size", c.features.stft.fft_size},
      {"hop", c.features.stft.hop},
      {"frames", c.features.frames},
      {"compression_exponent", c.features.compression.exponent},
      {"compression_scale", c.features.compression.scale},
  };
  j["model"] = {{"width", c.model.width}, {"depth", c.model.depth}, {"embed_dim", c.model.embed_dim}};
  const TrainConfig& t = c.trainer;
  j["trainer"] = {
      {"learning_rate", t.learning_rate},
      {"batch_size", t.batch_size},
      {"max_epochs", t.max_epochs},
      {"patience", t.patience},
      {"ema_decay", t.ema_decay},
      {"clip_norm", t.clip_norm},
      {"weights",
       {{"lambda1", t.weights.lambda1},
        {"lambda2", t.weights.lambda2},
        {"lambda3", t.weights.lambda3},
        {"alpha", t.weights.alpha}}},
  };
  j["flow"] = {
      {"sigma", t.objective.sigma},
      {"t_delta", t.objective.t_delta},
      {"detach_crude_estimate", t.objective.detach_crude_estimate},
  };
  j["sampler"] = {{"steps", c.steps}};
  return j;
}

void overlay(ExperimentConfig& c, const json& j) {
  Reader r(j, "");
  std::string preset_ignored = c.preset;
  r.field("preset", preset_ignored);
  r.field("seed", c.seed);
  std::string scheme(scheme_name(c.scheme));
  r.field("scheme", scheme);
  try {
    c.scheme = parse_scheme(scheme);
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("config: key 'scheme': ") + e.what());
  }
  r.section("corpus", [&](Reader& s) {
    s.field("train_count", c.corpus.train_count);
    s.field("valid_count", c.corpus.valid_count);
    s.field("test_count", c.corpus.test_count);
    s.field("num_samples", c.corpus.num_samples);
    s.field("sample_rate", c.corpus.sample_rate);
    s.field("snr_min_db", c.corpus.snr_min_db);
    s.field("snr_max_db", c.corpus.snr_max_db);
    s.field("noise_pole_min", c.corpus.noise_pole_min);
    s.field("noise_pole_max", c.corpus.noise_pole_max);
  });
  r.section("features", [&](Reader& s) {
    s.field("fft_size", c.features.stft.fft_size);
    s.field("hop", c.features.stft.hop);
    s.field("frames", c.features.frames);
    s.field("compression_exponent", c.features.compression.exponent);
    s.field("compression_scale", c.features.compression.scale);
  });
  r.section("model", [&](Reader& s) {
    s.field("width", c.model.width);
    s.field("depth", c.model.depth);
    s.field("embed_dim", c.model.embed_dim);
  });
  r.section("trainer", [&](Reader& s) {
    TrainConfig& t = c.trainer;
    s.field("learning_rate", t.learning_rate);
    s.field("batch_size", t.batch_size);
    s.field("max_epochs", t.max_epochs);
    s.field("patience", t.patience);
    s.field("ema_decay", t.ema_decay);
    s.field("clip_norm", t.clip_norm);
    s.section("weights", [&](Reader& w) {
      w.field("lambda1", t.weights.lambda1);
      w.field("lambda2", t.weights.lambda2);
      w.field("lambda3", t.weights.lambda3);
      w.field("alpha", t.weights.alpha);
    });
  });
  r.section("flow", [&](Reader& s) {
    s.field("sigma", c.trainer.objective.sigma);
    s.field("t_delta", c.trainer.objective.t_delta);
    s.field("detach_crude_estimate", c.trainer.objective.detach_crude_estimate);
  });
  r.section("sampler", [&](Reader& s) { s.field("steps", c.steps); });
  r.finish();
}

json parse(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + origin + " is not valid JSON: " + e.what());
  }
}

}  // namespace

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t = trainer;
  t.seed = seed;
  if (scheme == Scheme::FlowSE) {
    t.weights.lambda2 = 0.0;
    t.weights.lambda3 = 0.0;
  }
  return t;
}

SamplerConfig ExperimentConfig::sampler_config() const {
  SamplerConfig s;
  s.scheme = scheme;
  s.steps = steps;
  s.sigma = trainer.objective.sigma;
  s.t_delta = trainer.objective.t_delta;
  s.seed = seed;
  return s;
}

void ExperimentConfig::validate() const {
  try {
    corpus.validate();
    features.stft.validate();
    features.compression.validate();
    if (features.frames == 0) throw ArgumentError("features.frames must be positive");
    if (model.width < 1 || model.depth < 1) throw ArgumentError("model.width and model.depth must be >= 1");
    time_embed_frequencies(model.embed_dim);
    train_config().validate();
    if (steps < 1) throw ArgumentError("sampler.steps must be >= 1");
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::toy() { return {}; }

ExperimentConfig ExperimentConfig::paper() {
  ExperimentConfig c;
  c.preset = "paper";
  c.corpus.sample_rate = 16000.0;
  c.corpus.num_samples = 32640;  // 256 frames at hop 128
  c.features.stft = StftParams{};
  c.features.frames = 256;
  c.model = ModelSettings{128, 4, 32};
  c.trainer = TrainConfig::paper();
  return c;
}

ExperimentConfig ExperimentConfig::preset_named(std::string_view name) {
  if (name == "toy") return toy();
  if (name == "paper") return paper();
  throw ConfigError("config: unknown preset '" + std::string(name) + "' (expected toy|paper)");
}

std::string to_json_text(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

ExperimentConfig apply_json_text(const ExperimentConfig& base, const std::string& text) {
  ExperimentConfig c = base;
  overlay(c, parse(text, "input"));
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path, std::string_view preset) {
  std::filesystem::path file = path;
  if (file.empty()) {
    if (const char* env = std::getenv(kConfigEnvVar); env && *env) file = env;
  }
  if (file.empty()) {
    ExperimentConfig c = ExperimentConfig::preset_named(preset.empty() ? "toy" : preset);
    c.validate();
    return c;
  }

  std::ifstream in(file);
  if (!in) throw ConfigError("config: cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const json j = parse(ss.str(), file.string());

  std::string base = preset.empty() ? "toy" : std::string(preset);
  if (j.is_object() && j.contains("preset")) {
    if (!j["preset"].is_string()) throw ConfigError("config: key 'preset' has the wrong type");
    const std::string named = j["preset"].get<std::string>();
    if (!preset.empty() && named != preset) {
      throw ConfigError("config: file preset '" + named + "' conflicts with --preset " + std::string(preset));
    }
    base = named;
  }
  ExperimentConfig c = ExperimentConfig::preset_named(base);
  overlay(c, j);
  c.validate();
  return c;
}

}  // namespace ctflow::tools

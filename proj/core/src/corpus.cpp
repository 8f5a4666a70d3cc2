#include "ctflow/corpus.hpp"

#include "ctflow/common.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace ctflow {

void CorpusSpec::validate() const {
  if (num_samples < 16) throw ArgumentError("corpus: num_samples must be >= 16");
  if (!(sample_rate > 0.0)) throw ArgumentError("corpus: sample_rate must be positive");
  if (!(snr_min_db <= snr_max_db) || !std::isfinite(snr_min_db) || !std::isfinite(snr_max_db)) {
    throw ArgumentError("corpus: need finite snr_min_db <= snr_max_db");
  }
  if (!(noise_pole_min <= noise_pole_max) || !(noise_pole_min > -1.0) || !(noise_pole_max < 1.0)) {
    throw ArgumentError("corpus: need -1 < noise_pole_min <= noise_pole_max < 1");
  }
  if (train_count + valid_count + test_count == 0) throw ArgumentError("corpus: no items requested");
}

const std::vector<CorpusItem>& Corpus::split(std::string_view name) const {
  if (name == "train") return train;
  if (name == "valid") return valid;
  if (name == "test") return test;
  throw ArgumentError("unknown split '" + std::string(name) + "'");
}

CorpusItem synth_item(const CorpusSpec& spec, const std::string& id, std::uint64_t item_seed) {
  Rng rng(item_seed);
  const std::size_t n = spec.num_samples;
  const double two_pi = 2.0 * std::numbers::pi;
  const double nyquist = spec.sample_rate / 2.0;

  CorpusItem item;
  item.id = id;
  item.seed = item_seed;
  item.clean.sample_rate = item.noisy.sample_rate = spec.sample_rate;
  item.clean.samples.assign(n, 0.0);

  const int tones = 2 + static_cast<int>(rng.next_u64() % 4);
  for (int k = 0; k < tones; ++k) {
    const double freq = rng.uniform(0.04, kCleanBandFraction - 0.04) * nyquist;
    const double amp = rng.uniform(0.2, 1.0);
    const double phase = rng.uniform(0.0, two_pi);
    const double am_depth = rng.uniform(0.0, 0.5);
    const double am_cycles = rng.uniform(0.5, 2.0);  // over the utterance
    const double am_phase = rng.uniform(0.0, two_pi);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = static_cast<double>(i) / static_cast<double>(n);
      const double env = 1.0 + am_depth * std::sin(two_pi * am_cycles * u + am_phase);
      item.clean.samples[i] += amp * env * std::sin(two_pi * freq * static_cast<double>(i) / spec.sample_rate + phase);
    }
  }
  // Raised-cosine fade over the first and last eighth.
  const std::size_t fade = std::max<std::size_t>(1, n / 8);
  for (std::size_t i = 0; i < fade; ++i) {
    const double g = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(fade));
    item.clean.samples[i] *= g;
    item.clean.samples[n - 1 - i] *= g;
  }

  // One-pole coloured noise; negative poles tilt energy toward high frequencies.
  Waveform noise;
  noise.sample_rate = spec.sample_rate;
  noise.samples.resize(n);
  const double pole = rng.uniform(spec.noise_pole_min, spec.noise_pole_max);
  double prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    prev = rng.normal() + pole * prev;
    noise.samples[i] = prev;
  }

  item.snr_db = spec.snr_min_db == spec.snr_max_db ? spec.snr_min_db : rng.uniform(spec.snr_min_db, spec.snr_max_db);
  item.noisy = mix_at_snr(item.clean, noise, item.snr_db);
  return item;
}

Corpus synth_corpus(const CorpusSpec& spec) {
  spec.validate();
  Corpus c;
  const std::size_t counts[] = {spec.train_count, spec.valid_count, spec.test_count};
  std::vector<CorpusItem>* outs[] = {&c.train, &c.valid, &c.test};
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t i = 0; i < counts[s]; ++i) {
      char id[64];
      std::snprintf(id, sizeof id, "%s_%04zu", std::string(kSplits[s]).c_str(), i);
      const std::uint64_t item_seed = Rng::derive(spec.seed, s, i).next_u64();
      outs[s]->push_back(synth_item(spec, id, item_seed));
    }
  }
  return c;
}

void write_f32(const std::filesystem::path& path, const std::vector<double>& samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (double v : samples) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    const char b[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                       static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
    out.write(b, 4);
  }
  if (!out) throw DataError("short write to " + path.string());
}

std::vector<double> read_f32(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0) throw DataError(path.string() + ": size is not a multiple of 4 bytes");
  std::vector<double> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) | (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    out[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& root, bool force) {
  namespace fs = std::filesystem;
  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!force) throw DataError(root.string() + " exists and is not empty (use --force to overwrite)");
    for (auto split : kSplits) fs::remove_all(root / std::string(split));
  }
  for (auto split : kSplits) {
    const fs::path dir = root / std::string(split);
    fs::create_directories(dir);
    std::ofstream manifest(dir / "manifest.jsonl", std::ios::trunc);
    if (!manifest) throw DataError("cannot write manifest in " + dir.string());
    for (const auto& item : corpus.split(split)) {
      write_f32(dir / (item.id + ".clean.f32"), item.clean.samples);
      write_f32(dir / (item.id + ".noisy.f32"), item.noisy.samples);
      nlohmann::ordered_json line;
      line["id"] = item.id;
      line["snr_db"] = item.snr_db;
      line["duration"] = static_cast<double>(item.clean.samples.size()) / item.clean.sample_rate;
      line["seed"] = item.seed;
      line["num_samples"] = item.clean.samples.size();
      line["sample_rate"] = item.clean.sample_rate;
      manifest << line.dump() << '\n';
    }
  }
}

std::vector<CorpusItem> read_split(const std::filesystem::path& root, std::string_view split) {
  namespace fs = std::filesystem;
  const fs::path dir = root / std::string(split);
  std::ifstream manifest(dir / "manifest.jsonl");
  if (!manifest) throw DataError("missing manifest: " + (dir / "manifest.jsonl").string());
  std::vector<CorpusItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CorpusItem item;
      item.id = j.at("id").get<std::string>();
      item.snr_db = j.at("snr_db").get<double>();
      item.seed = j.at("seed").get<std::uint64_t>();
      const double sr = j.at("sample_rate").get<double>();
      item.clean.sample_rate = item.noisy.sample_rate = sr;
      item.clean.samples = read_f32(dir / (item.id + ".clean.f32"));
      item.noisy.samples = read_f32(dir / (item.id + ".noisy.f32"));
      if (item.clean.samples.size() != item.noisy.samples.size() ||
          item.clean.samples.size() != j.at("num_samples").get<std::size_t>()) {
        throw DataError("sample counts disagree with manifest");
      }
      items.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(dir.string() + "/manifest.jsonl:" + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(dir.string() + "/manifest.jsonl:" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return items;
}

}  // namespace ctflow

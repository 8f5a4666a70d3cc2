#include "ctflow/tools/commands.hpp"

#include "ctflow/checkpoint.hpp"
#include "ctflow/corpus.hpp"
#include "ctflow/features.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

namespace ctflow::tools {
namespace {

// Stream tag for per-item sampler noise, independent of the training streams.
constexpr std::uint64_t kEnhanceStream = 0x656e68616e6365ull;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<CorpusItem> sorted_split(const fs::path& corpus, std::string_view split) {
  if (!fs::is_directory(corpus)) throw DataError("corpus directory not found: " + corpus.string());
  auto items = read_split(corpus, split);
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return items;
}

std::optional<double> finite_or_none(double v) {
  if (std::isfinite(v)) return v;
  return std::nullopt;
}

struct Enhanced {
  Waveform waveform;
  int nfe = 0;
};

Enhanced enhance_one(const ModelBundle& models, const FeatureCodec& codec, const SamplerConfig& sc,
                     const Waveform& noisy, std::uint64_t index) {
  const double scale = FeatureCodec::normalization(noisy);
  const StateVector y = codec.encode(noisy, scale);
  Rng rng = Rng::derive(sc.seed, kEnhanceStream, index);
  const Predictor* predictor = models.predictor ? &*models.predictor : nullptr;
  const SampleResult r = sample(models.field, predictor, y, sc, rng);
  return {codec.decode(r.estimate, noisy.samples.size(), noisy.sample_rate, scale), r.nfe};
}

Checkpoint load_for(const fs::path& path, std::optional<Scheme> scheme, Eigen::Index dim) {
  Checkpoint ck = load_checkpoint(path);
  require_compatible(ck, scheme.value_or(ck.scheme), dim);
  return ck;
}

void write_curves_header(std::ostream& out) { out << "epoch,l1,l2,l3,total,valid_total,best_valid\n"; }

void write_curve_row(std::ostream& out, const EpochRecord& r) {
  out << r.epoch << ',' << format_double(r.l1) << ',' << format_double(r.l2) << ',' << format_double(r.l3) << ','
      << format_double(r.total) << ',' << format_double(r.valid_total) << ',' << format_double(r.best_valid) << '\n';
}

// Keeps the header and rows up to `epoch` from an earlier run's curves file.
std::string curves_prefix(const fs::path& path, std::uint64_t epoch) {
  std::ifstream in(path);
  std::ostringstream kept;
  write_curves_header(kept);
  if (!in) return kept.str();
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    std::uint64_t e = 0;
    try {
      e = std::stoull(line.substr(0, comma));
    } catch (const std::exception&) {
      throw DataError(path.string() + ": malformed row '" + line + "'");
    }
    if (e <= epoch) kept << line << '\n';
  }
  return kept.str();
}

}  // namespace

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) {
    s.mean = s.ci95 = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n < 2) {
    s.ci95 = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  const double sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  double q = 1.959963984540054;
  if (s.n < 30) {
    boost::math::students_t dist(static_cast<double>(s.n - 1));
    q = boost::math::quantile(dist, 0.975);
  }
  s.ci95 = q * sd / std::sqrt(static_cast<double>(s.n));
  return s;
}

fs::path last_checkpoint_path(const fs::path& checkpoint) { return fs::path(checkpoint.string() + ".last"); }
fs::path default_curves_path(const fs::path& checkpoint) { return fs::path(checkpoint.string() + ".csv"); }

void require_compatible(const Checkpoint& ck, Scheme scheme, Eigen::Index dim) {
  if (ck.scheme != scheme) {
    throw ConfigError("checkpoint was trained for scheme '" + std::string(scheme_name(ck.scheme)) +
                      "' and cannot be used with '" + std::string(scheme_name(scheme)) + "'");
  }
  if (ck.model.state_dim != dim) {
    throw ConfigError("checkpoint expects feature length " + std::to_string(ck.model.state_dim) +
                      " but the feature settings give " + std::to_string(dim));
  }
}

void cmd_synth(const ExperimentConfig& cfg, const fs::path& out_dir, bool force) {
  CorpusSpec spec = cfg.corpus;
  spec.seed = cfg.seed;
  write_corpus(synth_corpus(spec), out_dir, force);
}

TrainSummary cmd_train(const ExperimentConfig& cfg, const TrainOptions& opt) {
  const FeatureCodec codec(cfg.features);
  const auto train_items = sorted_split(opt.corpus, "train");
  const auto valid_items = sorted_split(opt.corpus, "valid");
  if (train_items.empty() || valid_items.empty()) throw DataError("corpus needs nonempty train and valid splits");
  const auto train_set = codec.encode_pairs(train_items);
  const auto valid_set = codec.encode_pairs(valid_items);

  const TrainConfig tc = cfg.train_config();
  const fs::path last_path = last_checkpoint_path(opt.checkpoint);
  const fs::path curves_path = opt.curves.empty() ? default_curves_path(opt.checkpoint) : opt.curves;
  if (!opt.checkpoint.parent_path().empty()) fs::create_directories(opt.checkpoint.parent_path());

  std::optional<Checkpoint> resume_last, resume_best;
  std::string curves_text;
  if (opt.resume) {
    resume_last = load_checkpoint(last_path);
    resume_best = load_checkpoint(opt.checkpoint);
    for (const Checkpoint* ck : {&*resume_last, &*resume_best}) {
      require_compatible(*ck, cfg.scheme, codec.dim());
      if (!(ck->model == cfg.field_config())) throw ConfigError("checkpoint model shape differs from the config");
    }
    curves_text = curves_prefix(curves_path, resume_last->epoch);
  } else {
    std::ostringstream h;
    write_curves_header(h);
    curves_text = h.str();
  }

  std::ofstream curves(curves_path, std::ios::trunc);
  if (!curves) throw DataError("cannot write " + curves_path.string());
  curves << curves_text;
  curves.flush();

  const std::uint64_t start_epoch = resume_last ? resume_last->epoch : 0;
  std::uint64_t best_epoch_saved = resume_best ? resume_best->epoch : 0;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& rec, const Checkpoint& last, const Checkpoint& best) {
    write_curve_row(curves, rec);
    curves.flush();
    save_checkpoint(last, last_path);
    if (best.epoch != best_epoch_saved) {
      save_checkpoint(best, opt.checkpoint);
      best_epoch_saved = best.epoch;
    }
    if (opt.log) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "epoch %4llu  train %.5f  valid %.5f  best %.5f\n",
                    static_cast<unsigned long long>(rec.epoch), rec.total, rec.valid_total, rec.best_valid);
      *opt.log << buf << std::flush;
    }
  };
  if (opt.epochs_this_run > 0) {
    hooks.interrupt = [&](std::uint64_t epoch) {
      return epoch - start_epoch >= static_cast<std::uint64_t>(opt.epochs_this_run);
    };
  }

  TrainResult result;
  if (opt.resume) {
    result = resume(tc, *resume_last, *resume_best, train_set, valid_set, hooks);
  } else {
    const ModelBundle init = ModelBundle::initialized(cfg.scheme, cfg.field_config(), cfg.seed);
    result = train(tc, init, train_set, valid_set, hooks);
  }
  save_checkpoint(result.last, last_path);
  save_checkpoint(result.best, opt.checkpoint);

  TrainSummary s;
  s.epochs = result.last.epoch;
  s.best_valid = result.best.best_valid;
  s.early_stopped = result.early_stopped;
  s.interrupted = result.interrupted;
  return s;
}

std::vector<EnhanceRow> cmd_enhance(const ExperimentConfig& cfg, const EnhanceOptions& opt) {
  const FeatureCodec codec(cfg.features);
  const Checkpoint ck = load_for(opt.checkpoint, opt.scheme, codec.dim());
  const ModelBundle models = ck.bundle(true);

  SamplerConfig sc = cfg.sampler_config();
  sc.scheme = ck.scheme;
  if (opt.nfe_budget) sc.steps = steps_for_budget(ck.scheme, *opt.nfe_budget);

  std::vector<CorpusItem> items;
  bool have_reference = true;
  if (!opt.input.empty()) {
    if (!opt.corpus.empty()) throw ConfigError("enhance: give either a corpus or a single input file, not both");
    CorpusItem item;
    item.id = opt.input.stem().string();
    item.noisy.samples = read_f32(opt.input);
    item.noisy.sample_rate = opt.input_sample_rate;
    if (item.noisy.samples.empty()) throw DataError(opt.input.string() + " holds no samples");
    items.push_back(std::move(item));
    have_reference = false;
  } else if (!opt.corpus.empty()) {
    items = sorted_split(opt.corpus, opt.split);
  } else {
    throw ConfigError("enhance: need a corpus directory or an input file");
  }

  if (fs::exists(opt.out_dir) && !fs::is_empty(opt.out_dir) && !opt.force) {
    throw DataError(opt.out_dir.string() + " exists and is not empty (use --force to overwrite)");
  }
  fs::create_directories(opt.out_dir);

  std::vector<EnhanceRow> rows;
  rows.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    const Enhanced e = enhance_one(models, codec, sc, item.noisy, i);
    write_f32(opt.out_dir / (item.id + ".f32"), e.waveform.samples);
    EnhanceRow row;
    row.id = item.id;
    row.scheme = std::string(scheme_name(sc.scheme));
    row.steps = sc.steps;
    row.nfe = e.nfe;
    if (have_reference) {
      row.si_sdr = finite_or_none(si_sdr(e.waveform, item.clean));
      row.noisy_si_sdr = finite_or_none(si_sdr(item.noisy, item.clean));
    }
    rows.push_back(std::move(row));
  }

  std::ofstream log(opt.out_dir / "log.jsonl", std::ios::trunc);
  if (!log) throw DataError("cannot write " + (opt.out_dir / "log.jsonl").string());
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["scheme"] = r.scheme;
    j["steps"] = r.steps;
    j["nfe"] = r.nfe;
    j["si_sdr"] = r.si_sdr ? nlohmann::ordered_json(*r.si_sdr) : nlohmann::ordered_json(nullptr);
    j["noisy_si_sdr"] = r.noisy_si_sdr ? nlohmann::ordered_json(*r.noisy_si_sdr) : nlohmann::ordered_json(nullptr);
    log << j.dump() << '\n';
  }
  return rows;
}

std::vector<SweepRow> cmd_sweep_nfe(const ExperimentConfig& cfg, const SweepOptions& opt) {
  if (opt.checkpoints.empty()) throw ConfigError("sweep-nfe: need at least one checkpoint");
  if (opt.steps.empty() == opt.nfe_budgets.empty()) {
    throw ConfigError("sweep-nfe: give exactly one nonempty list, --steps or --nfe");
  }
  const FeatureCodec codec(cfg.features);
  const auto items = sorted_split(opt.corpus, opt.split);
  if (items.empty()) throw DataError("split '" + opt.split + "' is empty");

  std::vector<SweepRow> rows;
  std::set<Scheme> seen;
  for (const auto& path : opt.checkpoints) {
    const Checkpoint ck = load_for(path, std::nullopt, codec.dim());
    if (!seen.insert(ck.scheme).second) {
      throw ConfigError("sweep-nfe: two checkpoints share scheme '" + std::string(scheme_name(ck.scheme)) + "'");
    }
    const ModelBundle models = ck.bundle(true);

    std::set<int> steps;
    for (int n : opt.steps) {
      if (n < 1) throw ConfigError("sweep-nfe: N must be >= 1, got " + std::to_string(n));
      steps.insert(n);
    }
    for (int b : opt.nfe_budgets) {
      if (b < 1) throw ConfigError("sweep-nfe: NFE must be >= 1, got " + std::to_string(b));
      if (nfe_for(ck.scheme, 1) > b) continue;  // below this scheme's minimum
      steps.insert(steps_for_budget(ck.scheme, b));
    }

    for (int n : steps) {
      SamplerConfig sc = cfg.sampler_config();
      sc.scheme = ck.scheme;
      sc.steps = n;
      std::vector<double> scores;
      scores.reserve(items.size());
      for (std::size_t i = 0; i < items.size(); ++i) {
        const Enhanced e = enhance_one(models, codec, sc, items[i].noisy, i);
        scores.push_back(si_sdr(e.waveform, items[i].clean));
      }
      rows.push_back({std::string(scheme_name(ck.scheme)), n, nfe_for(ck.scheme, n), summarize(scores)});
    }
  }
  std::sort(rows.begin(), rows.end(),
            [](const SweepRow& a, const SweepRow& b) { return std::tie(a.scheme, a.steps) < std::tie(b.scheme, b.steps); });

  if (!opt.out_csv.empty()) {
    if (!opt.out_csv.parent_path().empty()) fs::create_directories(opt.out_csv.parent_path());
    std::ofstream out(opt.out_csv, std::ios::trunc);
    if (!out) throw DataError("cannot write " + opt.out_csv.string());
    out << "scheme,N,nfe,mean_si_sdr,ci95,n\n";
    for (const auto& r : rows) {
      out << r.scheme << ',' << r.steps << ',' << r.nfe << ',' << format_double(r.si_sdr.mean) << ','
          << format_double(r.si_sdr.ci95) << ',' << r.si_sdr.n << '\n';
    }
  }
  return rows;
}

EvalReport cmd_eval(const EvalOptions& opt) {
  const auto items = sorted_split(opt.corpus, opt.split);
  if (items.empty()) throw DataError("split '" + opt.split + "' is empty");
  std::vector<double> noisy, enhanced, delta;
  for (const auto& item : items) {
    const fs::path p = opt.enhanced_dir / (item.id + ".f32");
    if (!fs::exists(p)) throw DataError("missing enhanced file " + p.string());
    Waveform est{read_f32(p), item.clean.sample_rate};
    if (est.samples.size() != item.clean.samples.size()) {
      throw DataError(p.string() + ": length differs from the reference");
    }
    const double a = si_sdr(item.noisy, item.clean);
    const double b = si_sdr(est, item.clean);
    noisy.push_back(a);
    enhanced.push_back(b);
    delta.push_back(b - a);
  }
  return {summarize(noisy), summarize(enhanced), summarize(delta)};
}

}  // namespace ctflow::tools

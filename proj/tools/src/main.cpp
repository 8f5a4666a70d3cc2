#include "ctflow/checkpoint.hpp"
#include "ctflow/tools/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>

namespace {

using namespace ctflow;
using namespace ctflow::tools;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

const char* kFooter = R"(Exit codes: 0 ok, 2 config or argument error, 3 data error, 4 numerical error.
Default config path: $CTFLOW_CONFIG (JSON; unknown keys are rejected). `ctflow config show` prints every key.

Outputs
  train      <ckpt> (best EMA weights), <ckpt>.last (resumable), <ckpt>.csv:
             epoch,l1,l2,l3,total,valid_total,best_valid
  enhance    <out>/<id>.f32 (float32 LE) and <out>/log.jsonl, one object per item in id order:
             {"id","scheme","steps","nfe","si_sdr","noisy_si_sdr"} (null when undefined)
  sweep-nfe  CSV: scheme,N,nfe,mean_si_sdr,ci95,n  (sorted by scheme, N)
  eval       JSON on stdout: {"n","noisy","enhanced","improvement"}, each {"mean","ci95"})";

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

nlohmann::ordered_json summary_json(const Summary& s) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
  return {{"mean", num(s.mean)}, {"ci95", num(s.ci95)}};
}

int run(int argc, char** argv) {
  CLI::App app{"Conditional flow-matching speech enhancement toolkit", "ctflow"};
  app.footer(kFooter);
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string scheme_flag;
  app.add_option("--config", config_path, "experiment config (JSON)");
  app.add_option("--preset", preset, "base preset")->check(CLI::IsMember({"toy", "paper"}));
  app.add_option("--seed", seed, "overrides the config seed");
  app.add_option("--scheme", scheme_flag, "flowse | ctfse | pred-cascade")
      ->check(CLI::IsMember({"flowse", "ctfse", "pred-cascade"}));

  auto* synth = app.add_subcommand("synth", "write the synthetic paired corpus");
  std::string synth_out;
  bool synth_force = false;
  synth->add_option("--out", synth_out, "corpus directory")->required();
  synth->add_flag("--force", synth_force, "overwrite a non-empty directory");

  auto* train = app.add_subcommand("train", "train a model for the configured scheme");
  TrainOptions topt;
  std::string t_corpus, t_out, t_curves;
  bool t_quiet = false;
  train->add_option("--corpus", t_corpus, "corpus directory")->required();
  train->add_option("--out", t_out, "checkpoint path")->required();
  train->add_option("--curves", t_curves, "training-curve CSV (default <out>.csv)");
  train->add_flag("--resume", topt.resume, "continue from <out>.last");
  train->add_option("--epochs-this-run", topt.epochs_this_run, "stop resumably after this many epochs");
  train->add_flag("--quiet", t_quiet, "no per-epoch log");

  auto* enhance = app.add_subcommand("enhance", "enhance a corpus split or one float32 file");
  EnhanceOptions eopt;
  std::string e_ckpt, e_corpus, e_input, e_out;
  std::optional<int> e_steps;
  enhance->add_option("--checkpoint", e_ckpt, "trained checkpoint")->required();
  auto* e_corpus_opt = enhance->add_option("--corpus", e_corpus, "corpus directory");
  enhance->add_option("--split", eopt.split, "split to enhance")->capture_default_str();
  auto* e_input_opt = enhance->add_option("--input", e_input, "single raw float32 waveform");
  enhance->add_option("--sample-rate", eopt.input_sample_rate, "sample rate of --input")->capture_default_str();
  enhance->add_option("--out", e_out, "output directory")->required();
  auto* e_budget_opt = enhance->add_option("--nfe-budget", eopt.nfe_budget, "total model evaluations per item");
  auto* e_steps_opt = enhance->add_option("--steps", e_steps, "Euler steps N");
  enhance->add_flag("--force", eopt.force, "overwrite a non-empty output directory");
  e_corpus_opt->excludes(e_input_opt);
  e_budget_opt->excludes(e_steps_opt);

  auto* sweep = app.add_subcommand("sweep-nfe", "SI-SDR against the number of function evaluations");
  SweepOptions sopt;
  std::vector<std::string> s_ckpts;
  std::string s_corpus, s_out;
  sweep->add_option("--checkpoint", s_ckpts, "checkpoint, one per scheme (repeatable)")->required();
  sweep->add_option("--corpus", s_corpus, "corpus directory")->required();
  sweep->add_option("--split", sopt.split, "split to score")->capture_default_str();
  auto* s_steps_opt = sweep->add_option("--steps", sopt.steps, "comma-separated N values")->delimiter(',');
  auto* s_nfe_opt = sweep->add_option("--nfe", sopt.nfe_budgets, "comma-separated NFE values")->delimiter(',');
  sweep->add_option("--out", s_out, "output CSV")->required();
  s_steps_opt->excludes(s_nfe_opt);

  auto* eval = app.add_subcommand("eval", "score enhanced waveforms against the corpus references");
  EvalOptions vopt;
  std::string v_corpus, v_enh;
  eval->add_option("--corpus", v_corpus, "corpus directory")->required();
  eval->add_option("--split", vopt.split, "split to score")->capture_default_str();
  eval->add_option("--enhanced", v_enh, "directory of <id>.f32 files")->required();

  auto* config = app.add_subcommand("config", "configuration utilities");
  config->require_subcommand(1);
  auto* show = config->add_subcommand("show", "print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  ExperimentConfig cfg = load_experiment(config_path, preset);
  if (seed) cfg.seed = *seed;
  if (!scheme_flag.empty()) cfg.scheme = parse_scheme(scheme_flag);
  cfg.validate();

  if (*show) {
    std::cout << to_json_text(cfg);
  } else if (*synth) {
    cmd_synth(cfg, synth_out, synth_force);
    std::cerr << "wrote corpus to " << synth_out << "\n";
  } else if (*train) {
    topt.corpus = t_corpus;
    topt.checkpoint = t_out;
    topt.curves = t_curves;
    if (!t_quiet) topt.log = &std::cerr;
    const TrainSummary s = cmd_train(cfg, topt);
    std::cerr << (s.interrupted ? "paused" : s.early_stopped ? "early-stopped" : "finished") << " after epoch "
              << s.epochs << ", best validation " << fmt(s.best_valid) << "\n";
  } else if (*enhance) {
    eopt.checkpoint = e_ckpt;
    eopt.corpus = e_corpus;
    eopt.input = e_input;
    eopt.out_dir = e_out;
    if (!scheme_flag.empty()) eopt.scheme = cfg.scheme;
    if (e_steps) cfg.steps = *e_steps;
    cfg.validate();
    const auto rows = cmd_enhance(cfg, eopt);
    std::cerr << "enhanced " << rows.size() << " item(s) into " << e_out << "\n";
  } else if (*sweep) {
    for (const auto& c : s_ckpts) sopt.checkpoints.emplace_back(c);
    sopt.corpus = s_corpus;
    sopt.out_csv = s_out;
    const auto rows = cmd_sweep_nfe(cfg, sopt);
    for (const auto& r : rows) {
      std::cerr << r.scheme << "  N=" << r.steps << "  nfe=" << r.nfe << "  si_sdr " << fmt(r.si_sdr.mean) << " +/- "
                << fmt(r.si_sdr.ci95) << "\n";
    }
  } else if (*eval) {
    vopt.corpus = v_corpus;
    vopt.enhanced_dir = v_enh;
    const EvalReport rep = cmd_eval(vopt);
    nlohmann::ordered_json j;
    j["n"] = rep.enhanced.n;
    j["noisy"] = summary_json(rep.noisy);
    j["enhanced"] = summary_json(rep.enhanced);
    j["improvement"] = summary_json(rep.improvement);
    std::cout << j.dump(2) << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "ctflow: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "ctflow: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "ctflow: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ctflow::Error& e) {
    std::cerr << "ctflow: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "ctflow: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "ctflow: unexpected error: " << e.what() << "\n";
    return 1;
  }
}

#include "arguq/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "arguq/common.hpp"
#include "arguq/evalharness.hpp"
#include "arguq/gateways.hpp"
#include "arguq/pipeline.hpp"
#include "arguq/uq.hpp"

namespace arguq::cli {

namespace {

std::string format4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

struct RunArgs {
  std::string config_path;
  std::string dataset;
  std::string method;
  int depth = 0;
  std::string base_score;
  int samples = 0;
  int uq_samples = 0;
  std::uint64_t seed = 0;
  std::string llm_url;
  std::string llm_model;
  bool llm_logprobs = false;
  std::string nli_url;
  std::string mock_script;
  std::string cache_dir;
  std::string out_dir = ".";
  int jobs = 1;
};

struct Backends {
  std::shared_ptr<gateways::LlmGateway> llm;
  std::shared_ptr<gateways::NliGateway> nli;
};

Backends build_backends(const RunArgs& args, const std::string& model_name,
                        std::vector<std::string>& problems) {
  Backends backends;
  if (!args.mock_script.empty()) {
    if (!args.llm_url.empty() || !args.nli_url.empty()) {
      problems.emplace_back(
          "--mock-script cannot be combined with --llm-url/--nli-url");
      return backends;
    }
    nlohmann::json script = gateways::load_mock_script(args.mock_script);
    if (!script.contains("llm") || !script.contains("nli")) {
      throw ConfigError("mock script '" + args.mock_script +
                        "' needs both \"llm\" and \"nli\" sections");
    }
    backends.llm = std::make_shared<gateways::MockLlmGateway>(script["llm"]);
    backends.nli = std::make_shared<gateways::MockNliGateway>(script["nli"]);
    return backends;
  }

  if (args.llm_url.empty()) {
    problems.emplace_back("an LLM backend is required: --llm-url or --mock-script");
  }
  if (args.nli_url.empty()) {
    problems.emplace_back("an NLI backend is required: --nli-url or --mock-script");
  }
  if (model_name.empty()) {
    problems.emplace_back(
        "a model name is required for HTTP backends: --llm-model or the "
        "config file's llm field");
  }
  if (!problems.empty()) return backends;

  gateways::HttpLlmConfig llm_config;
  llm_config.base_url = args.llm_url;
  llm_config.model = model_name;
  if (const char* key = std::getenv("ARGUQ_LLM_API_KEY")) {
    llm_config.api_key = key;
  }
  llm_config.supports_logprobs = args.llm_logprobs;
  backends.llm = std::make_shared<gateways::HttpLlmGateway>(llm_config);

  gateways::HttpNliConfig nli_config;
  nli_config.base_url = args.nli_url;
  backends.nli = std::make_shared<gateways::HttpNliGateway>(nli_config);
  return backends;
}

int cmd_run(const CLI::App& sub, const RunArgs& args, std::ostream& out) {
  pipeline::ExperimentConfig config;
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) {
      throw ConfigError("cannot open config file '" + args.config_path + "'");
    }
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config file '" + args.config_path +
                        "' is not valid JSON: " + e.what());
    }
    try {
      config = pipeline::config_from_json(j);
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  }

  std::vector<std::string> problems;
  if (sub.count("--dataset")) config.dataset_path = args.dataset;
  if (sub.count("--method")) {
    if (auto m = uq::method_from_name(args.method)) {
      config.method = *m;
    } else {
      problems.push_back("unknown method '" + args.method +
                         "' (expected direct, semantic-entropy, "
                         "eccentricity, or luq)");
    }
  }
  if (sub.count("--depth")) config.depth = args.depth;
  if (sub.count("--base-score")) {
    if (auto m = pipeline::base_score_mode_from_name(args.base_score)) {
      config.base_score_mode = *m;
    } else {
      problems.push_back("unknown base-score mode '" + args.base_score +
                         "' (expected fixed or estimated)");
    }
  }
  if (sub.count("--samples")) config.sample_count = args.samples;
  if (sub.count("--uq-samples")) config.n_uq_samples = args.uq_samples;
  if (sub.count("--seed")) config.seed = args.seed;
  if (sub.count("--llm-model")) config.llm_name = args.llm_model;

  Backends backends = build_backends(args, config.llm_name, problems);
  try {
    pipeline::validate_config(config);
  } catch (const ConfigError& e) {
    problems.emplace_back(e.what());
  }
  if (!problems.empty()) {
    std::string joined;
    for (const auto& p : problems) {
      if (!joined.empty()) joined += "\n";
      joined += p;
    }
    throw ConfigError(joined);
  }

  // Artifacts record the backend identities actually used.
  config.llm_name = backends.llm->capabilities().name;
  config.nli_name = backends.nli->name();

  if (!args.cache_dir.empty()) {
    backends.llm = std::make_shared<gateways::CachingLlmGateway>(
        backends.llm, gateways::ResponseCache(args.cache_dir));
    backends.nli = std::make_shared<gateways::CachingNliGateway>(
        backends.nli, gateways::ResponseCache(args.cache_dir));
  }

  pipeline::RunOptions options;
  options.jobs = args.jobs;
  pipeline::RunRecord run =
      pipeline::run_experiment(config, *backends.llm, *backends.nli, options);
  pipeline::WrittenFiles files = pipeline::write_run_files(run, args.out_dir);

  out << "wrote " << files.json_path.string() << "\n";
  out << "wrote " << files.csv_path.string() << "\n";
  evalharness::MethodOutcome outcome = evalharness::outcome_from_run(run);
  if (!outcome.correct.empty()) {
    out << "accuracy=" << format4(evalharness::accuracy(outcome)) << " brier="
        << format4(evalharness::brier(outcome.strengths, outcome.labels))
        << "\n";
  }
  out << "claims=" << run.totals.claims << " failed="
      << run.totals.failed_claims << " na_generations="
      << run.totals.na_generations << " parse_fallbacks="
      << run.totals.parse_fallbacks << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  std::vector<std::string> run_files;
  std::string out_dir = "report";
  evalharness::BootstrapOptions bootstrap;
};

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out) {
  std::vector<pipeline::RunRecord> runs;
  runs.reserve(args.run_files.size());
  for (const auto& path : args.run_files) {
    runs.push_back(pipeline::load_run_file(path));
  }
  evalharness::ReportPaths paths =
      evalharness::emit_report(runs, args.out_dir, args.bootstrap);
  for (const auto& run : runs) {
    evalharness::MethodOutcome outcome = evalharness::outcome_from_run(run);
    out << uq::method_name(run.config.method) << " "
        << run.config.dataset_path << ": accuracy="
        << format4(evalharness::accuracy(outcome)) << " brier="
        << format4(evalharness::brier(outcome.strengths, outcome.labels))
        << "\n";
  }
  out << "wrote " << paths.results_csv.string() << "\n";
  out << "wrote " << paths.intervals_csv.string() << "\n";
  out << "wrote " << paths.summary_md.string() << "\n";
  return kExitOk;
}

struct CompareArgs {
  std::string run_a;
  std::string run_b;
  evalharness::BootstrapOptions bootstrap;
};

int cmd_compare(const CompareArgs& args, std::ostream& out) {
  pipeline::RunRecord a = pipeline::load_run_file(args.run_a);
  pipeline::RunRecord b = pipeline::load_run_file(args.run_b);
  if (a.config.dataset_path != b.config.dataset_path) {
    throw ConfigError("runs cover different datasets ('" +
                      a.config.dataset_path + "' vs '" +
                      b.config.dataset_path +
                      "'); a paired comparison needs the same claims");
  }
  evalharness::MethodOutcome oa = evalharness::outcome_from_run(a);
  evalharness::MethodOutcome ob = evalharness::outcome_from_run(b);
  if (oa.claim_indexes != ob.claim_indexes) {
    throw ConfigError(
        "runs resolved different claim subsets; a paired comparison "
        "needs identical claim order (check failed claims in both runs)");
  }
  evalharness::ConfidenceInterval ci =
      evalharness::bootstrap_ci_diff(oa, ob, args.bootstrap);
  out << "(" << format4(ci.lower) << ", " << format4(ci.upper) << "), "
      << (ci.significant() ? "significant" : "not significant") << "\n";
  out << "dataset,model,depth,base_score,method_a,method_b,lower,upper,"
         "significant\n";
  out << a.config.dataset_path << "," << a.config.llm_name << ","
      << a.config.depth << ","
      << pipeline::base_score_mode_name(a.config.base_score_mode) << ","
      << oa.method_id << "," << ob.method_id << "," << format4(ci.lower)
      << "," << format4(ci.upper) << ","
      << (ci.significant() ? "yes" : "no") << "\n";
  return kExitOk;
}

struct SummarizeArgs {
  std::string accuracies_csv;
  std::string intervals_csv;
  std::string out_dir = "report";
};

int cmd_summarize(const SummarizeArgs& args, std::ostream& out) {
  evalharness::AccuracyGrid accuracies =
      evalharness::load_accuracy_csv(args.accuracies_csv);
  evalharness::SignificanceGrid significance =
      evalharness::load_ci_csv(args.intervals_csv);
  evalharness::ReportPaths paths =
      evalharness::emit_grid_report(accuracies, significance, args.out_dir);

  auto counts = evalharness::summarize_best_counts(accuracies, significance);
  std::vector<std::string> methods;
  for (const auto& [m, c] : counts) methods.push_back(m);
  std::sort(methods.begin(), methods.end(), [](const auto& a, const auto& b) {
    return std::pair(evalharness::method_rank(a), std::string_view(a)) <
           std::pair(evalharness::method_rank(b), std::string_view(b));
  });
  for (const auto& m : methods) {
    const evalharness::MethodCounts& c = counts.at(m);
    out << m << ": best=" << c.times_best << " not_sig_worse="
        << c.not_sig_worse << " participated=" << c.participated << "\n";
  }
  out << "wrote " << paths.intervals_csv.string() << "\n";
  out << "wrote " << paths.summary_md.string() << "\n";
  return kExitOk;
}

int cmd_replay(const std::string& run_file, std::ostream& out,
               std::ostream& err) {
  pipeline::RunRecord run = pipeline::load_run_file(run_file);
  pipeline::ReplayReport report = pipeline::replay_run(run);
  if (report.ok()) {
    out << "replay OK, " << report.claims_checked << "/"
        << report.claims_checked << " identical\n";
    return kExitOk;
  }
  for (const auto& d : report.drift) {
    char stored[32], recomputed[32];
    std::snprintf(stored, sizeof stored, "%.12g", d.stored_root);
    std::snprintf(recomputed, sizeof recomputed, "%.12g", d.recomputed_root);
    err << "drift at claim " << d.claim_index << ": root_strength " << stored
        << " -> " << recomputed << ", prediction "
        << (d.stored_prediction ? "true" : "false") << " -> "
        << (d.recomputed_prediction ? "true" : "false") << "\n";
  }
  err << report.drift.size() << " of " << report.claims_checked
      << " claims drifted\n";
  return kExitReplayDrift;
}

void add_bootstrap_flags(CLI::App* sub, evalharness::BootstrapOptions* opts) {
  sub->add_option("--resamples", opts->resamples, "Bootstrap resample count")
      ->capture_default_str();
  sub->add_option("--level", opts->level, "Confidence level in (0,1)")
      ->capture_default_str();
  sub->add_option("--seed", opts->seed, "Bootstrap stream seed")
      ->capture_default_str();
  sub->add_flag("--parallel", opts->parallel,
                "Compute resamples in parallel (bit-identical to serial)");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"arguq: argumentative claim verification with LLM "
               "uncertainty quantification"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run_cmd =
      app.add_subcommand("run", "Execute an experiment and write run files");
  run_cmd->add_option("--config", run_args.config_path,
                      "JSON experiment config; flags override its fields");
  run_cmd->add_option("--dataset", run_args.dataset,
                      "Claims dataset (JSON Lines)");
  run_cmd->add_option("--method", run_args.method,
                      "direct | semantic-entropy | eccentricity | luq");
  run_cmd->add_option("--depth", run_args.depth, "Argument tree depth (1 or 2)");
  run_cmd->add_option("--base-score", run_args.base_score,
                      "fixed | estimated");
  run_cmd->add_option("--samples", run_args.samples,
                      "Number of dataset claims to process");
  run_cmd->add_option("--uq-samples", run_args.uq_samples,
                      "Generations per uncertainty estimate");
  run_cmd->add_option("--seed", run_args.seed, "Run seed");
  run_cmd->add_option("--llm-url", run_args.llm_url,
                      "Chat-completions base URL, e.g. http://host:8000/v1");
  run_cmd->add_option("--llm-model", run_args.llm_model,
                      "Model name sent to the LLM backend");
  run_cmd->add_flag("--llm-logprobs", run_args.llm_logprobs,
                    "Backend returns token logprobs (needed for "
                    "semantic-entropy)");
  run_cmd->add_option("--nli-url", run_args.nli_url,
                      "NLI service base URL (POST {url}/nli)");
  run_cmd->add_option("--mock-script", run_args.mock_script,
                      "Offline scripted backends (replaces both URLs)");
  run_cmd->add_option("--cache", run_args.cache_dir,
                      "Response cache directory");
  run_cmd->add_option("--out", run_args.out_dir, "Output directory")
      ->capture_default_str();
  run_cmd->add_option("--jobs", run_args.jobs,
                      "Concurrent claims during collection")
      ->capture_default_str();

  EvaluateArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand(
      "evaluate", "Score run files and emit results/intervals/summary");
  eval_cmd->add_option("runs", eval_args.run_files, "Run JSON files")
      ->required()
      ->expected(-1);
  eval_cmd->add_option("--out", eval_args.out_dir, "Report directory")
      ->capture_default_str();
  add_bootstrap_flags(eval_cmd, &eval_args.bootstrap);

  CompareArgs compare_args;
  CLI::App* compare_cmd = app.add_subcommand(
      "compare", "Paired bootstrap interval for two run files");
  compare_cmd->add_option("run_a", compare_args.run_a, "First run JSON file")
      ->required();
  compare_cmd->add_option("run_b", compare_args.run_b, "Second run JSON file")
      ->required();
  add_bootstrap_flags(compare_cmd, &compare_args.bootstrap);

  SummarizeArgs summarize_args;
  CLI::App* summarize_cmd = app.add_subcommand(
      "summarize", "Best-method counts from accuracy and interval CSVs");
  summarize_cmd
      ->add_option("--accuracies", summarize_args.accuracies_csv,
                   "dataset,model,depth,base_score,method,accuracy")
      ->required();
  summarize_cmd
      ->add_option("--intervals", summarize_args.intervals_csv,
                   "dataset,model,depth,base_score,method_a,method_b,lower,"
                   "upper")
      ->required();
  summarize_cmd->add_option("--out", summarize_args.out_dir,
                            "Report directory")
      ->capture_default_str();

  std::string replay_file;
  CLI::App* replay_cmd = app.add_subcommand(
      "replay", "Recompute predictions from a run file's raw scores");
  replay_cmd->add_option("run", replay_file, "Run JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    CLI::App* active = &app;
    while (!active->get_subcommands().empty()) {
      active = active->get_subcommands().back();
    }
    out << active->help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(*run_cmd, run_args, out);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_args, out);
    if (compare_cmd->parsed()) return cmd_compare(compare_args, out);
    if (summarize_cmd->parsed()) return cmd_summarize(summarize_args, out);
    if (replay_cmd->parsed()) return cmd_replay(replay_file, out, err);
    err << "error: no subcommand given\n";
    return kExitConfig;
  } catch (const CapabilityError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUnavailable;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRunError;
  }
}

}  // namespace arguq::cli

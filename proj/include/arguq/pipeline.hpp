#pragma once

// Experiment pipeline: dataset in, verdicts out.
//
// A run processes claims in three phases. Phase one builds the argument
// tree for every claim and collects raw uncertainty scores for each
// generated argument. Phase two turns the raw population into base scores;
// sampling-based methods are normalized against the whole run, so no base
// score exists until every raw score has been collected. Phase three
// evaluates the gradual semantics and records predictions. Run records
// serialize with everything needed to repeat phases two and three offline.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arguq/gateways.hpp"
#include "arguq/qbaf.hpp"
#include "arguq/uq.hpp"

namespace arguq::pipeline {

enum class BaseScoreMode { Fixed05, Estimated };

std::string base_score_mode_name(BaseScoreMode mode);
std::optional<BaseScoreMode> base_score_mode_from_name(std::string_view name);

struct ExperimentConfig {
  std::string dataset_path;
  std::string llm_name;  // backend identity recorded with results
  std::string nli_name;
  uq::Method method = uq::Method::DirectPrompt;
  int depth = 1;  // 1 or 2
  BaseScoreMode base_score_mode = BaseScoreMode::Fixed05;
  int n_uq_samples = 10;
  int sample_count = 500;
  std::uint64_t seed = 42;
  gateways::SamplingParams generation = gateways::kGenerationDefaults;
  gateways::SamplingParams uq_sampling = gateways::kUqSamplingDefaults;
};

// Throws ConfigError listing every violated constraint, one per line.
void validate_config(const ExperimentConfig& config);

nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);

// Hex digest of the canonical config JSON; names run artifacts.
std::string config_hash(const ExperimentConfig& config);

struct DatasetClaim {
  std::string claim;
  bool label = false;
};

// JSON Lines, one {"claim": ..., "label": ...} object per line. Blank lines
// are skipped; anything else malformed reports its line number.
std::vector<DatasetClaim> load_dataset_jsonl(const std::filesystem::path& path);

// Prompt construction. The argument prompt asks for a single short support
// or attack for the statement and for the literal reply "N/A" when the
// model sees no convincing one; the confidence prompt asks for a decimal
// confidence in [0,1].
std::string render_argument_prompt(const std::string& statement,
                                   qbaf::Polarity polarity);
std::string render_confidence_prompt(const std::string& statement);

// A reply counts as "no argument" when, after trimming, it is empty or
// starts with "N/A" in any casing.
bool is_na_response(std::string_view text);

// One generated argument plus its phase-one raw score.
struct ArgumentRecord {
  std::string node_id;  // "root.s", "root.s.a", ...
  qbaf::Polarity polarity = qbaf::Polarity::Support;
  std::string parent_text;  // the statement this argument addresses
  std::string text;
  double raw_score = 0.0;
  // Method-specific audit detail: cluster count for semantic entropy,
  // embedding dimension for eccentricity, otherwise 0.
  int detail = 0;
};

struct ClaimOutcome {
  int index = 0;
  std::string claim;
  bool label = false;
  bool failed = false;
  std::string failure;
  double claim_base_score = 0.5;
  std::vector<ArgumentRecord> arguments;
  int parse_fallbacks = 0;
  int na_generations = 0;
  // Filled by phases two and three:
  std::map<std::string, double> confidences;  // node id -> base score
  qbaf::ArgumentNode tree;
  std::map<std::string, double> strengths;
  double root_strength = 0.0;
  bool prediction = false;
};

struct RunTotals {
  int claims = 0;
  int failed_claims = 0;
  int parse_fallbacks = 0;
  int na_generations = 0;
};

struct RunRecord {
  ExperimentConfig config;
  std::string hash;
  bool se_available = false;
  std::vector<ClaimOutcome> claims;
  RunTotals totals;
};

struct RunOptions {
  int jobs = 1;  // worker threads for per-claim phases
};

// Executes all three phases. Throws CapabilityError up front when the
// method needs logprobs the backend cannot provide, and DataError when
// more than five percent of claims fail.
RunRecord run_experiment(const ExperimentConfig& config,
                         gateways::LlmGateway& llm, gateways::NliGateway& nli,
                         const RunOptions& options = {});

nlohmann::ordered_json run_to_json(const RunRecord& run);
RunRecord run_from_json(const nlohmann::json& j);
RunRecord load_run_file(const std::filesystem::path& path);

struct WrittenFiles {
  std::filesystem::path json_path;
  std::filesystem::path csv_path;
};

// Writes run-<hash>.json plus a run-<hash>.csv of
// (claim_index, prediction, root_strength, label).
WrittenFiles write_run_files(const RunRecord& run,
                             const std::filesystem::path& out_dir);

struct ReplayDrift {
  int claim_index = 0;
  double stored_root = 0.0;
  double recomputed_root = 0.0;
  bool stored_prediction = false;
  bool recomputed_prediction = false;
};

struct ReplayReport {
  int claims_checked = 0;
  std::vector<ReplayDrift> drift;
  bool ok() const { return drift.empty(); }
};

// Re-runs phases two and three from the stored raw scores and compares
// strengths and predictions against the record.
ReplayReport replay_run(const RunRecord& run);

}  // namespace arguq::pipeline

#include "arguq/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "arguq/common.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace arguq::pipeline {

namespace {

constexpr int kSchemaVersion = 1;
// Attempts per verbalized-confidence prompt before falling back to 0.5.
constexpr int kConfidenceAttempts = 3;
// A run tolerating more failed claims than this fraction is itself a failure.
constexpr double kMaxFailureFraction = 0.05;

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

double prompted_confidence(gateways::LlmGateway& llm,
                           const gateways::SamplingParams& params,
                           const std::string& prompt, int& parse_fallbacks) {
  for (int attempt = 0; attempt < kConfidenceAttempts; ++attempt) {
    auto samples = llm.chat_complete(prompt, params, 1);
    if (auto v = uq::parse_verbalized_confidence(samples.at(0).text)) {
      return *v;
    }
  }
  ++parse_fallbacks;
  return 0.5;
}

double raw_score_for(ArgumentRecord& rec, const ExperimentConfig& cfg,
                     gateways::LlmGateway& llm, gateways::NliGateway& nli,
                     int& parse_fallbacks) {
  switch (cfg.method) {
    case uq::Method::DirectPrompt:
      return prompted_confidence(llm, cfg.generation,
                                 render_confidence_prompt(rec.text),
                                 parse_fallbacks);
    case uq::Method::SemanticEntropy: {
      auto params = cfg.uq_sampling;
      params.want_logprobs = true;
      auto samples = llm.chat_complete(
          render_argument_prompt(rec.parent_text, rec.polarity), params,
          cfg.n_uq_samples);
      auto partition = uq::cluster_bidirectional_entailment(samples, nli);
      rec.detail = static_cast<int>(partition.cluster_logprob.size());
      return uq::semantic_entropy(partition);
    }
    case uq::Method::Eccentricity:
    case uq::Method::Luq: {
      auto samples = llm.chat_complete(
          render_argument_prompt(rec.parent_text, rec.polarity),
          cfg.uq_sampling, cfg.n_uq_samples);
      std::vector<std::string> texts;
      texts.reserve(samples.size());
      for (const auto& s : samples) texts.push_back(s.text);
      if (cfg.method == uq::Method::Eccentricity) {
        auto sim = uq::build_similarity_matrix(
            texts, nli, uq::SimilarityMode::EntailSoftmaxAllClasses);
        auto r = uq::eccentricity_full(sim);
        rec.detail = r.embedding_dim;
        return r.value;
      }
      auto sim = uq::build_similarity_matrix(
          texts, nli, uq::SimilarityMode::EntailVsContradict);
      return uq::luq(sim);
    }
  }
  throw DomainError("unknown scoring method");
}

// Phase one for a single claim: argument tree shape plus raw scores.
// Any backend or scoring failure marks this claim failed without touching
// the rest of the run.
ClaimOutcome collect_claim(int index, const DatasetClaim& dc,
                           const ExperimentConfig& cfg,
                           gateways::LlmGateway& llm,
                           gateways::NliGateway& nli) {
  ClaimOutcome out;
  out.index = index;
  out.claim = dc.claim;
  out.label = dc.label;
  try {
    out.claim_base_score =
        cfg.base_score_mode == BaseScoreMode::Estimated
            ? prompted_confidence(llm, cfg.generation,
                                  render_confidence_prompt(dc.claim),
                                  out.parse_fallbacks)
            : 0.5;

    struct Slot {
      std::string parent_id;
      std::string parent_text;
      int level;
    };
    std::vector<Slot> frontier{{"root", dc.claim, 1}};
    while (!frontier.empty() && frontier.front().level <= cfg.depth) {
      std::vector<Slot> next;
      for (const Slot& slot : frontier) {
        for (auto polarity :
             {qbaf::Polarity::Support, qbaf::Polarity::Attack}) {
          auto samples = llm.chat_complete(
              render_argument_prompt(slot.parent_text, polarity),
              cfg.generation, 1);
          std::string text{trim_view(samples.at(0).text)};
          if (text.empty()) {
            std::cerr << "warning: empty generation for claim " << index
                      << "; treating as N/A\n";
          }
          if (is_na_response(text)) {
            ++out.na_generations;
            continue;
          }
          ArgumentRecord rec;
          rec.node_id = slot.parent_id +
                        (polarity == qbaf::Polarity::Support ? ".s" : ".a");
          rec.polarity = polarity;
          rec.parent_text = slot.parent_text;
          rec.text = std::move(text);
          out.arguments.push_back(std::move(rec));
          next.push_back(
              {out.arguments.back().node_id, out.arguments.back().text,
               slot.level + 1});
        }
      }
      frontier = std::move(next);
    }

    for (ArgumentRecord& rec : out.arguments) {
      rec.raw_score = raw_score_for(rec, cfg, llm, nli, out.parse_fallbacks);
    }
  } catch (const std::exception& e) {
    ClaimOutcome failed;
    failed.index = index;
    failed.claim = dc.claim;
    failed.label = dc.label;
    failed.failed = true;
    failed.failure = e.what();
    return failed;
  }
  return out;
}

qbaf::ArgumentNode* find_node(qbaf::ArgumentNode& node, const std::string& id) {
  if (node.id == id) return &node;
  for (auto& child : node.children) {
    if (auto* hit = find_node(child, id)) return hit;
  }
  return nullptr;
}

qbaf::ArgumentNode build_tree(const ClaimOutcome& claim) {
  qbaf::ArgumentNode root;
  root.id = "root";
  root.text = claim.claim;
  root.base_score = claim.claim_base_score;
  // Records were appended level by level, so parents always exist already.
  for (const ArgumentRecord& rec : claim.arguments) {
    std::string parent_id = rec.node_id.substr(0, rec.node_id.size() - 2);
    qbaf::ArgumentNode* parent = find_node(root, parent_id);
    if (!parent) {
      throw StructureError("argument '" + rec.node_id +
                           "' has no parent in the tree");
    }
    qbaf::ArgumentNode node;
    node.id = rec.node_id;
    node.text = rec.text;
    node.base_score = claim.confidences.at(rec.node_id);
    node.polarity = rec.polarity;
    parent->children.push_back(std::move(node));
  }
  return root;
}

// Phases two and three over already-collected claims. Shared verbatim by
// run_experiment and replay, which is what makes replays meaningful.
void apply_scores(RunRecord& run, bool parallel) {
  // Phase two: base scores for every generated argument.
  if (run.config.method == uq::Method::DirectPrompt) {
    for (ClaimOutcome& claim : run.claims) {
      if (claim.failed) continue;
      claim.confidences.clear();
      for (const ArgumentRecord& rec : claim.arguments) {
        claim.confidences[rec.node_id] =
            require_unit(rec.raw_score, "direct-prompt confidence");
      }
    }
  } else {
    std::vector<uq::RawScoreRecord> population;
    for (const ClaimOutcome& claim : run.claims) {
      if (claim.failed) continue;
      for (const ArgumentRecord& rec : claim.arguments) {
        population.push_back({std::to_string(claim.index) + "/" + rec.node_id,
                              run.config.method, rec.raw_score,
                              uq::Direction::UncertaintyLike});
      }
    }
    std::map<std::string, double> confidences;
    if (!population.empty()) {
      confidences = uq::quantile_bin_normalize(population);
    }
    for (ClaimOutcome& claim : run.claims) {
      if (claim.failed) continue;
      claim.confidences.clear();
      for (const ArgumentRecord& rec : claim.arguments) {
        claim.confidences[rec.node_id] =
            confidences.at(std::to_string(claim.index) + "/" + rec.node_id);
      }
    }
  }

  // Phase three: materialize trees and evaluate the semantics.
  std::vector<qbaf::ArgumentNode> trees;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < run.claims.size(); ++i) {
    if (run.claims[i].failed) continue;
    trees.push_back(build_tree(run.claims[i]));
    owner.push_back(i);
  }
  auto results = qbaf::evaluate_strength_batch(trees, parallel);
  for (std::size_t t = 0; t < trees.size(); ++t) {
    ClaimOutcome& claim = run.claims[owner[t]];
    claim.tree = std::move(trees[t]);
    claim.strengths = std::move(results[t].strengths);
    claim.root_strength = results[t].root_strength;
    claim.prediction = qbaf::predict(claim.root_strength);
  }
}

void fill_totals(RunRecord& run) {
  RunTotals totals;
  totals.claims = static_cast<int>(run.claims.size());
  for (const ClaimOutcome& claim : run.claims) {
    totals.failed_claims += claim.failed ? 1 : 0;
    totals.parse_fallbacks += claim.parse_fallbacks;
    totals.na_generations += claim.na_generations;
  }
  run.totals = totals;
}

nlohmann::ordered_json sampling_to_json(const gateways::SamplingParams& p) {
  return gateways::params_to_json(p);
}

gateways::SamplingParams sampling_from_json(const nlohmann::json& j) {
  gateways::SamplingParams p;
  p.temperature = j.at("temperature").get<double>();
  p.top_p = j.at("top_p").get<double>();
  p.repetition_penalty = j.at("repetition_penalty").get<double>();
  p.max_tokens = j.at("max_tokens").get<int>();
  p.want_logprobs = j.at("want_logprobs").get<bool>();
  return p;
}

}  // namespace

std::string base_score_mode_name(BaseScoreMode mode) {
  return mode == BaseScoreMode::Fixed05 ? "fixed" : "estimated";
}

std::optional<BaseScoreMode> base_score_mode_from_name(std::string_view name) {
  if (name == "fixed") return BaseScoreMode::Fixed05;
  if (name == "estimated") return BaseScoreMode::Estimated;
  return std::nullopt;
}

void validate_config(const ExperimentConfig& config) {
  std::vector<std::string> problems;
  if (config.dataset_path.empty()) {
    problems.push_back("dataset path is empty");
  }
  if (config.depth != 1 && config.depth != 2) {
    problems.push_back("depth must be 1 or 2, got " +
                       std::to_string(config.depth));
  }
  if (config.sample_count < 1) {
    problems.push_back("sample count must be positive");
  }
  if (config.method != uq::Method::DirectPrompt && config.n_uq_samples < 2) {
    problems.push_back("sampling-based methods need at least 2 UQ samples");
  }
  for (const auto& [label, p] :
       {std::pair{"generation", config.generation},
        std::pair{"uq", config.uq_sampling}}) {
    if (p.temperature < 0.0) {
      problems.push_back(std::string(label) + " temperature must be >= 0");
    }
    if (!(p.top_p > 0.0 && p.top_p <= 1.0)) {
      problems.push_back(std::string(label) + " top_p must lie in (0,1]");
    }
    if (p.max_tokens < 1) {
      problems.push_back(std::string(label) + " max_tokens must be positive");
    }
  }
  if (!problems.empty()) {
    std::string joined;
    for (const auto& p : problems) {
      if (!joined.empty()) joined += "\n";
      joined += p;
    }
    throw ConfigError(joined);
  }
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& config) {
  nlohmann::ordered_json j;
  j["dataset"] = config.dataset_path;
  j["llm"] = config.llm_name;
  j["nli"] = config.nli_name;
  j["method"] = uq::method_name(config.method);
  j["depth"] = config.depth;
  j["base_score"] = base_score_mode_name(config.base_score_mode);
  j["n_uq_samples"] = config.n_uq_samples;
  j["sample_count"] = config.sample_count;
  j["seed"] = config.seed;
  j["sampling"]["generation"] = sampling_to_json(config.generation);
  j["sampling"]["uq"] = sampling_to_json(config.uq_sampling);
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig config;
  try {
    config.dataset_path = j.at("dataset").get<std::string>();
    config.llm_name = j.at("llm").get<std::string>();
    config.nli_name = j.at("nli").get<std::string>();
    auto method = uq::method_from_name(j.at("method").get<std::string>());
    if (!method) {
      throw DataError("unknown method '" +
                      j.at("method").get<std::string>() + "'");
    }
    config.method = *method;
    config.depth = j.at("depth").get<int>();
    auto mode =
        base_score_mode_from_name(j.at("base_score").get<std::string>());
    if (!mode) {
      throw DataError("unknown base-score mode '" +
                      j.at("base_score").get<std::string>() + "'");
    }
    config.base_score_mode = *mode;
    config.n_uq_samples = j.at("n_uq_samples").get<int>();
    config.sample_count = j.at("sample_count").get<int>();
    config.seed = j.at("seed").get<std::uint64_t>();
    config.generation = sampling_from_json(j.at("sampling").at("generation"));
    config.uq_sampling = sampling_from_json(j.at("sampling").at("uq"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed experiment config: ") + e.what());
  }
  return config;
}

std::string config_hash(const ExperimentConfig& config) {
  return gateways::sha256_hex(config_to_json(config).dump()).substr(0, 12);
}

std::vector<DatasetClaim> load_dataset_jsonl(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open dataset '" + path.string() + "'");
  }
  std::vector<DatasetClaim> claims;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_view(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      DatasetClaim dc;
      dc.claim = j.at("claim").get<std::string>();
      dc.label = j.at("label").get<bool>();
      if (dc.claim.empty()) {
        throw DataError("empty claim");
      }
      claims.push_back(std::move(dc));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return claims;
}

std::string render_argument_prompt(const std::string& statement,
                                   qbaf::Polarity polarity) {
  const bool support = polarity == qbaf::Polarity::Support;
  std::string p = "Please provide a single short argument ";
  p += support ? "supporting" : "attacking";
  p +=
      " the following claim. Construct the argument so it refers to the "
      "truthfulness of the claim. Only provide an argument if you think "
      "there is a valid and convincing ";
  p += support ? "support" : "attack";
  p += " for this claim (there is a non-zero probability that the claim is ";
  p += support ? "true" : "false";
  p += "), otherwise return: N/A.\nClaim: ";
  p += statement;
  p += "\nNow take a deep breath and come up with an argument.\nArgument:";
  return p;
}

std::string render_confidence_prompt(const std::string& statement) {
  std::string p =
      "Please evaluate whether the following statement is true. Reply with "
      "your confidence that the statement is true, as a decimal number "
      "between 0.0 and 1.0.\nStatement: ";
  p += statement;
  p += "\nConfidence:";
  return p;
}

bool is_na_response(std::string_view text) {
  auto t = trim_view(text);
  if (t.empty()) return true;
  if (t.size() < 3) return false;
  auto lower = [](char c) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  };
  return lower(t[0]) == 'n' && t[1] == '/' && lower(t[2]) == 'a';
}

RunRecord run_experiment(const ExperimentConfig& config,
                         gateways::LlmGateway& llm, gateways::NliGateway& nli,
                         const RunOptions& options) {
  validate_config(config);
  const auto caps = llm.capabilities();
  if (config.method == uq::Method::SemanticEntropy &&
      !caps.supports_logprobs) {
    throw CapabilityError(
        "method unavailable: semantic-entropy requires sequence "
        "log-probabilities, which backend '" +
        caps.name + "' does not supply (result is N/A)");
  }

  auto dataset = load_dataset_jsonl(config.dataset_path);
  if (dataset.empty()) {
    throw DataError("dataset '" + config.dataset_path + "' has no claims");
  }
  const int n = std::min<int>(config.sample_count,
                              static_cast<int>(dataset.size()));

  RunRecord run;
  run.config = config;
  run.hash = config_hash(config);
  run.se_available = caps.supports_logprobs;
  run.claims.resize(static_cast<std::size_t>(n));

  const int jobs = std::max(1, options.jobs);
#ifdef _OPENMP
#pragma omp parallel for num_threads(jobs) schedule(dynamic) if (jobs > 1)
#endif
  for (int i = 0; i < n; ++i) {
    run.claims[static_cast<std::size_t>(i)] =
        collect_claim(i, dataset[static_cast<std::size_t>(i)], config, llm,
                      nli);
  }

  fill_totals(run);
  if (run.totals.failed_claims >
      kMaxFailureFraction * static_cast<double>(n)) {
    std::string first;
    for (const ClaimOutcome& claim : run.claims) {
      if (claim.failed) {
        first = "; first failure (claim " + std::to_string(claim.index) +
                "): " + claim.failure;
        break;
      }
    }
    throw DataError(std::to_string(run.totals.failed_claims) + " of " +
                    std::to_string(n) +
                    " claims failed, which exceeds the 5% tolerance" + first);
  }

  apply_scores(run, jobs > 1);
  return run;
}

nlohmann::ordered_json run_to_json(const RunRecord& run) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = config_to_json(run.config);
  j["config_hash"] = run.hash;
  j["se_available"] = run.se_available;
  j["totals"] = {{"claims", run.totals.claims},
                 {"failed_claims", run.totals.failed_claims},
                 {"parse_fallbacks", run.totals.parse_fallbacks},
                 {"na_generations", run.totals.na_generations}};
  auto claims = nlohmann::ordered_json::array();
  for (const ClaimOutcome& claim : run.claims) {
    nlohmann::ordered_json c;
    c["index"] = claim.index;
    c["claim"] = claim.claim;
    c["label"] = claim.label;
    c["failed"] = claim.failed;
    if (claim.failed) {
      c["failure"] = claim.failure;
      claims.push_back(std::move(c));
      continue;
    }
    c["claim_base_score"] = claim.claim_base_score;
    c["parse_fallbacks"] = claim.parse_fallbacks;
    c["na_generations"] = claim.na_generations;
    auto args = nlohmann::ordered_json::array();
    for (const ArgumentRecord& rec : claim.arguments) {
      nlohmann::ordered_json a;
      a["id"] = rec.node_id;
      a["polarity"] =
          rec.polarity == qbaf::Polarity::Support ? "support" : "attack";
      a["parent_text"] = rec.parent_text;
      a["text"] = rec.text;
      a["raw_score"] = rec.raw_score;
      a["detail"] = rec.detail;
      args.push_back(std::move(a));
    }
    c["arguments"] = std::move(args);
    nlohmann::ordered_json conf;
    for (const auto& [id, v] : claim.confidences) conf[id] = v;
    c["confidences"] = std::move(conf);
    c["tree"] = qbaf::node_to_json(claim.tree);
    nlohmann::ordered_json strengths;
    for (const auto& [id, v] : claim.strengths) strengths[id] = v;
    c["strengths"] = std::move(strengths);
    c["root_strength"] = claim.root_strength;
    c["prediction"] = claim.prediction;
    claims.push_back(std::move(c));
  }
  j["claims"] = std::move(claims);
  return j;
}

RunRecord run_from_json(const nlohmann::json& j) {
  int version = j.value("schema_version", -1);
  if (version != kSchemaVersion) {
    throw SchemaError("run file has schema version " +
                      std::to_string(version) + "; this build reads version " +
                      std::to_string(kSchemaVersion) +
                      " and cannot migrate it");
  }
  RunRecord run;
  try {
    run.config = config_from_json(j.at("config"));
    run.hash = j.at("config_hash").get<std::string>();
    run.se_available = j.at("se_available").get<bool>();
    const auto& totals = j.at("totals");
    run.totals.claims = totals.at("claims").get<int>();
    run.totals.failed_claims = totals.at("failed_claims").get<int>();
    run.totals.parse_fallbacks = totals.at("parse_fallbacks").get<int>();
    run.totals.na_generations = totals.at("na_generations").get<int>();
    for (const auto& c : j.at("claims")) {
      ClaimOutcome claim;
      claim.index = c.at("index").get<int>();
      claim.claim = c.at("claim").get<std::string>();
      claim.label = c.at("label").get<bool>();
      claim.failed = c.at("failed").get<bool>();
      if (claim.failed) {
        claim.failure = c.at("failure").get<std::string>();
        run.claims.push_back(std::move(claim));
        continue;
      }
      claim.claim_base_score = c.at("claim_base_score").get<double>();
      claim.parse_fallbacks = c.at("parse_fallbacks").get<int>();
      claim.na_generations = c.at("na_generations").get<int>();
      for (const auto& a : c.at("arguments")) {
        ArgumentRecord rec;
        rec.node_id = a.at("id").get<std::string>();
        rec.polarity = a.at("polarity").get<std::string>() == "support"
                           ? qbaf::Polarity::Support
                           : qbaf::Polarity::Attack;
        rec.parent_text = a.at("parent_text").get<std::string>();
        rec.text = a.at("text").get<std::string>();
        rec.raw_score = a.at("raw_score").get<double>();
        rec.detail = a.at("detail").get<int>();
        claim.arguments.push_back(std::move(rec));
      }
      for (const auto& [id, v] : c.at("confidences").items()) {
        claim.confidences[id] = v.get<double>();
      }
      claim.tree = qbaf::node_from_json(c.at("tree"));
      for (const auto& [id, v] : c.at("strengths").items()) {
        claim.strengths[id] = v.get<double>();
      }
      claim.root_strength = c.at("root_strength").get<double>();
      claim.prediction = c.at("prediction").get<bool>();
      run.claims.push_back(std::move(claim));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed run file: ") + e.what());
  }
  return run;
}

RunRecord load_run_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open run file '" + path.string() + "'");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("run file '" + path.string() +
                      "' is not valid JSON: " + e.what());
  }
  return run_from_json(j);
}

WrittenFiles write_run_files(const RunRecord& run,
                             const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("cannot create output directory '" + out_dir.string() +
                  "': " + ec.message());
  }

  WrittenFiles files;
  files.json_path = out_dir / ("run-" + run.hash + ".json");
  files.csv_path = out_dir / ("run-" + run.hash + ".csv");

  {
    std::ofstream out(files.json_path);
    if (!out) {
      throw IoError("cannot write '" + files.json_path.string() + "'");
    }
    out << run_to_json(run).dump(2) << "\n";
  }
  {
    std::ofstream out(files.csv_path);
    if (!out) {
      throw IoError("cannot write '" + files.csv_path.string() + "'");
    }
    out << "claim_index,prediction,root_strength,label\n";
    char buf[64];
    for (const ClaimOutcome& claim : run.claims) {
      if (claim.failed) continue;
      std::snprintf(buf, sizeof buf, "%.12g", claim.root_strength);
      out << claim.index << "," << (claim.prediction ? "true" : "false")
          << "," << buf << "," << (claim.label ? "true" : "false") << "\n";
    }
  }
  return files;
}

ReplayReport replay_run(const RunRecord& run) {
  RunRecord recomputed = run;
  apply_scores(recomputed, /*parallel=*/false);

  ReplayReport report;
  for (std::size_t i = 0; i < run.claims.size(); ++i) {
    const ClaimOutcome& stored = run.claims[i];
    const ClaimOutcome& fresh = recomputed.claims[i];
    if (stored.failed) continue;
    ++report.claims_checked;

    bool strength_drift =
        std::abs(stored.root_strength - fresh.root_strength) > 1e-9;
    if (!strength_drift) {
      for (const auto& [id, v] : fresh.strengths) {
        auto it = stored.strengths.find(id);
        if (it == stored.strengths.end() || std::abs(it->second - v) > 1e-9) {
          strength_drift = true;
          break;
        }
      }
    }
    if (strength_drift || stored.prediction != fresh.prediction) {
      report.drift.push_back({stored.index, stored.root_strength,
                              fresh.root_strength, stored.prediction,
                              fresh.prediction});
    }
  }
  return report;
}

}  // namespace arguq::pipeline

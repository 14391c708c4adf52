#include <doctest.h>

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arguq/common.hpp"
#include "arguq/gateways.hpp"
#include "arguq/pipeline.hpp"
#include "arguq/qbaf.hpp"
#include "arguq/uq.hpp"

using nlohmann::json;
using arguq::CapabilityError;
using arguq::ConfigError;
using arguq::DataError;
using arguq::SchemaError;
using arguq::gateways::MockLlmGateway;
using arguq::gateways::MockNliGateway;
using namespace arguq::pipeline;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("arguq-pl-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  static std::atomic<int>& counter() {
    static std::atomic<int> n{0};
    return n;
  }
};

// Writes a JSONL dataset of synthetic claims; claim i carries a marker token
// so scripted rules can target individual claims through their prompts.
std::filesystem::path write_dataset(const TempDir& dir, int n,
                                    const std::string& name = "claims.jsonl") {
  auto file = dir.path / name;
  std::ofstream out(file);
  for (int i = 0; i < n; ++i) {
    json line = {{"claim", "Claim number " + std::to_string(i) +
                               " (marker-" + std::to_string(i) + ")"},
                 {"label", i % 2 == 0}};
    out << line.dump() << "\n";
  }
  return file;
}

json standard_llm_script(bool logprobs = true) {
  json s = {{"name", logprobs ? "pl-llm" : "pl-llm-nolp"},
            {"supports_logprobs", logprobs},
            {"seed", 17}};
  s["rules"] = json::array(
      {{{"contains", "your confidence that the statement is true"},
        {"kind", "confidence"}},
       {{"contains", "single short argument"},
        {"kind", "argument"},
        {"na_rate", 0.2}}});
  return s;
}

ExperimentConfig small_config(const std::filesystem::path& dataset,
                              arguq::uq::Method method, int depth = 1) {
  ExperimentConfig cfg;
  cfg.dataset_path = dataset.string();
  cfg.llm_name = "pl-llm";
  cfg.nli_name = "pl-nli";
  cfg.method = method;
  cfg.depth = depth;
  cfg.n_uq_samples = 6;
  cfg.sample_count = 1000;
  cfg.seed = 42;
  return cfg;
}

RunRecord run_with_mocks(const ExperimentConfig& cfg,
                         json llm_script = standard_llm_script(),
                         const RunOptions& options = {}) {
  MockLlmGateway llm(std::move(llm_script));
  MockNliGateway nli(json{{"name", "pl-nli"}, {"seed", 31}});
  return run_experiment(cfg, llm, nli, options);
}

}  // namespace

TEST_CASE("base score mode names round trip") {
  CHECK(base_score_mode_name(BaseScoreMode::Fixed05) == "fixed");
  CHECK(base_score_mode_name(BaseScoreMode::Estimated) == "estimated");
  CHECK(base_score_mode_from_name("fixed") == BaseScoreMode::Fixed05);
  CHECK(base_score_mode_from_name("estimated") == BaseScoreMode::Estimated);
  CHECK_FALSE(base_score_mode_from_name("adaptive").has_value());
}

TEST_CASE("config validation reports every violation at once") {
  ExperimentConfig cfg;
  cfg.dataset_path = "x.jsonl";
  CHECK_NOTHROW(validate_config(cfg));

  cfg.dataset_path = "";
  cfg.depth = 3;
  cfg.sample_count = 0;
  cfg.method = arguq::uq::Method::Luq;
  cfg.n_uq_samples = 1;
  cfg.generation.temperature = -0.5;
  cfg.uq_sampling.top_p = 0.0;
  cfg.uq_sampling.max_tokens = 0;
  try {
    validate_config(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    for (const char* expect :
         {"dataset path is empty", "depth must be 1 or 2, got 3",
          "sample count must be positive", "at least 2 UQ samples",
          "generation temperature", "uq top_p", "uq max_tokens"}) {
      INFO("missing: " << expect);
      CHECK(msg.find(expect) != std::string::npos);
    }
  }
}

TEST_CASE("config json round trip and hashing") {
  ExperimentConfig cfg;
  cfg.dataset_path = "data/x.jsonl";
  cfg.llm_name = "m";
  cfg.nli_name = "n";
  cfg.method = arguq::uq::Method::Eccentricity;
  cfg.depth = 2;
  cfg.base_score_mode = BaseScoreMode::Estimated;
  cfg.n_uq_samples = 7;
  cfg.sample_count = 33;
  cfg.seed = 1234567;
  cfg.generation.temperature = 0.65;
  cfg.uq_sampling.max_tokens = 99;

  auto j = config_to_json(cfg);
  auto back = config_from_json(j);
  CHECK(back.dataset_path == cfg.dataset_path);
  CHECK(back.method == cfg.method);
  CHECK(back.depth == cfg.depth);
  CHECK(back.base_score_mode == cfg.base_score_mode);
  CHECK(back.n_uq_samples == cfg.n_uq_samples);
  CHECK(back.sample_count == cfg.sample_count);
  CHECK(back.seed == cfg.seed);
  CHECK(back.generation.temperature == cfg.generation.temperature);
  CHECK(back.uq_sampling.max_tokens == cfg.uq_sampling.max_tokens);
  CHECK(config_to_json(back).dump() == j.dump());

  auto h = config_hash(cfg);
  CHECK(h.size() == 12);
  CHECK(h == config_hash(cfg));
  auto tweaked = cfg;
  tweaked.seed = 1234568;
  CHECK(config_hash(tweaked) != h);
  tweaked = cfg;
  tweaked.method = arguq::uq::Method::Luq;
  CHECK(config_hash(tweaked) != h);

  auto bad = j;
  bad["method"] = "divination";
  CHECK_THROWS_AS(config_from_json(bad), DataError);
  bad = j;
  bad["base_score"] = "lucky";
  CHECK_THROWS_AS(config_from_json(bad), DataError);
  bad = j;
  bad.erase("sampling");
  CHECK_THROWS_AS(config_from_json(bad), DataError);
}

TEST_CASE("dataset loading") {
  TempDir dir;
  auto file = dir.path / "claims.jsonl";
  {
    std::ofstream out(file);
    out << R"({"claim": "Water boils.", "label": true})" << "\n";
    out << "\n";
    out << "   \n";
    out << R"({"claim": "Fire is cold.", "label": false})" << "\n";
  }
  auto claims = load_dataset_jsonl(file);
  REQUIRE(claims.size() == 2);
  CHECK(claims[0].claim == "Water boils.");
  CHECK(claims[0].label);
  CHECK(claims[1].claim == "Fire is cold.");
  CHECK_FALSE(claims[1].label);

  CHECK_THROWS_AS(load_dataset_jsonl(dir.path / "absent.jsonl"), DataError);

  auto bad = dir.path / "bad.jsonl";
  std::ofstream(bad) << R"({"claim": "ok", "label": true})" << "\n"
                     << "{broken\n";
  try {
    load_dataset_jsonl(bad);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  auto empty_claim = dir.path / "empty.jsonl";
  std::ofstream(empty_claim) << R"({"claim": "", "label": true})" << "\n";
  try {
    load_dataset_jsonl(empty_claim);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    std::string msg = e.what();
    CHECK(msg.find(":1:") != std::string::npos);
    CHECK(msg.find("empty claim") != std::string::npos);
  }

  auto missing_label = dir.path / "nolabel.jsonl";
  std::ofstream(missing_label) << R"({"claim": "x"})" << "\n";
  CHECK_THROWS_AS(load_dataset_jsonl(missing_label), DataError);
}

TEST_CASE("prompt templates") {
  auto sup = render_argument_prompt("The sky is blue.",
                                    arguq::qbaf::Polarity::Support);
  CHECK(sup.find("supporting") != std::string::npos);
  CHECK(sup.find("valid and convincing support") != std::string::npos);
  CHECK(sup.find("claim is true") != std::string::npos);
  CHECK(sup.find("Claim: The sky is blue.") != std::string::npos);
  CHECK(sup.find("N/A") != std::string::npos);

  auto att = render_argument_prompt("The sky is blue.",
                                    arguq::qbaf::Polarity::Attack);
  CHECK(att.find("attacking") != std::string::npos);
  CHECK(att.find("valid and convincing attack") != std::string::npos);
  CHECK(att.find("claim is false") != std::string::npos);
  CHECK(att.find("supporting") == std::string::npos);

  auto conf = render_confidence_prompt("The sky is blue.");
  CHECK(conf.find("your confidence that the statement is true") !=
        std::string::npos);
  CHECK(conf.find("decimal number") != std::string::npos);
  CHECK(conf.find("Statement: The sky is blue.") != std::string::npos);
  CHECK(conf.find("Confidence:") != std::string::npos);
}

TEST_CASE("na response detection") {
  CHECK(is_na_response("N/A"));
  CHECK(is_na_response("n/a"));
  CHECK(is_na_response("  N/A  "));
  CHECK(is_na_response("N/A - nothing convincing comes to mind."));
  CHECK(is_na_response(""));
  CHECK(is_na_response("   "));
  CHECK_FALSE(is_na_response("No"));
  CHECK_FALSE(is_na_response("Not applicable"));
  CHECK_FALSE(is_na_response("A solid argument."));
  CHECK_FALSE(is_na_response("an/a oddity"));
}

TEST_CASE("direct run shapes trees by depth") {
  TempDir dir;
  auto dataset = write_dataset(dir, 12);

  auto cfg = small_config(dataset, arguq::uq::Method::DirectPrompt, 1);
  auto run = run_with_mocks(cfg);
  CHECK(run.totals.claims == 12);
  CHECK(run.totals.failed_claims == 0);
  CHECK(run.hash == config_hash(cfg));
  CHECK(run.se_available);

  const std::set<std::string> depth1_ids{"root.s", "root.a"};
  for (const auto& claim : run.claims) {
    CHECK(claim.arguments.size() <= 2);
    for (const auto& rec : claim.arguments) {
      CHECK(depth1_ids.count(rec.node_id) == 1);
      CHECK(rec.parent_text == claim.claim);
      // Direct prompting stores the verbalized confidence as the raw score.
      CHECK(rec.raw_score >= 0.0);
      CHECK(rec.raw_score <= 1.0);
      CHECK(claim.confidences.at(rec.node_id) == rec.raw_score);
    }
    CHECK(claim.claim_base_score == 0.5);
    CHECK(claim.tree.base_score == 0.5);
    CHECK(claim.strengths.size() == claim.arguments.size() + 1);
    CHECK(claim.prediction == (claim.root_strength > 0.5));
  }

  cfg.depth = 2;
  auto deep = run_with_mocks(cfg);
  const std::set<std::string> depth2_ids{"root.s",   "root.a",   "root.s.s",
                                         "root.s.a", "root.a.s", "root.a.a"};
  bool saw_second_level = false;
  for (const auto& claim : deep.claims) {
    CHECK(claim.arguments.size() <= 6);
    for (const auto& rec : claim.arguments) {
      CHECK(depth2_ids.count(rec.node_id) == 1);
      if (rec.node_id.size() > 6) saw_second_level = true;
    }
  }
  CHECK(saw_second_level);
}

TEST_CASE("run truncates to sample_count and requires data") {
  TempDir dir;
  auto dataset = write_dataset(dir, 9);
  auto cfg = small_config(dataset, arguq::uq::Method::DirectPrompt);
  cfg.sample_count = 4;
  auto run = run_with_mocks(cfg);
  CHECK(run.totals.claims == 4);
  CHECK(run.claims.size() == 4);
  CHECK(run.claims.back().index == 3);

  auto empty = dir.path / "none.jsonl";
  std::ofstream(empty) << "\n";
  cfg.dataset_path = empty.string();
  CHECK_THROWS_AS(run_with_mocks(cfg), DataError);
}

TEST_CASE("all-na generations leave bare roots that predict false") {
  TempDir dir;
  auto dataset = write_dataset(dir, 5);
  auto cfg = small_config(dataset, arguq::uq::Method::DirectPrompt);

  json script = standard_llm_script();
  script["rules"][1]["na_rate"] = 1.0;
  auto run = run_with_mocks(cfg, script);
  CHECK(run.totals.na_generations == 10);  // two prompts per claim, all N/A
  for (const auto& claim : run.claims) {
    CHECK(claim.arguments.empty());
    CHECK(claim.tree.children.empty());
    CHECK(claim.root_strength == 0.5);
    CHECK_FALSE(claim.prediction);  // the verdict threshold is strict
  }
}

TEST_CASE("estimated base scores come from prompted confidence") {
  TempDir dir;
  auto dataset = write_dataset(dir, 8);
  auto cfg = small_config(dataset, arguq::uq::Method::DirectPrompt);
  cfg.base_score_mode = BaseScoreMode::Estimated;
  auto run = run_with_mocks(cfg);

  bool saw_non_default = false;
  for (const auto& claim : run.claims) {
    CHECK(claim.claim_base_score >= 0.0);
    CHECK(claim.claim_base_score <= 1.0);
    CHECK(claim.tree.base_score == claim.claim_base_score);
    if (claim.claim_base_score != 0.5) saw_non_default = true;
  }
  CHECK(saw_non_default);
  CHECK(run.totals.parse_fallbacks == 0);
}

TEST_CASE("semantic entropy needs logprobs and records cluster counts") {
  TempDir dir;
  auto dataset = write_dataset(dir, 6);
  auto cfg = small_config(dataset, arguq::uq::Method::SemanticEntropy);

  CHECK_THROWS_AS(run_with_mocks(cfg, standard_llm_script(false)),
                  CapabilityError);

  auto run = run_with_mocks(cfg);
  CHECK(run.se_available);
  for (const auto& claim : run.claims) {
    for (const auto& rec : claim.arguments) {
      CHECK(rec.detail >= 1);  // cluster count
      CHECK(rec.raw_score >= 0.0);
    }
  }
}

TEST_CASE("sampling methods normalize confidences onto the bin grid") {
  TempDir dir;
  auto dataset = write_dataset(dir, 10);
  auto cfg = small_config(dataset, arguq::uq::Method::Luq);
  auto run = run_with_mocks(cfg);

  int seen = 0;
  for (const auto& claim : run.claims) {
    for (const auto& [id, conf] : claim.confidences) {
      // Every normalized confidence sits at a bin midpoint 1 - (b + 0.5)/20.
      double b = 20.0 * (1.0 - conf) - 0.5;
      CHECK(std::abs(b - std::round(b)) < 1e-9);
      CHECK(conf > 0.0);
      CHECK(conf < 1.0);
      ++seen;
    }
  }
  CHECK(seen > 0);

  auto ecc = small_config(dataset, arguq::uq::Method::Eccentricity);
  auto ecc_run = run_with_mocks(ecc);
  for (const auto& claim : ecc_run.claims) {
    for (const auto& rec : claim.arguments) {
      CHECK(rec.detail >= 1);  // embedding dimension
    }
  }
}

TEST_CASE("isolated claim failures are tolerated up to five percent") {
  TempDir dir;
  auto dataset = write_dataset(dir, 25);
  auto cfg = small_config(dataset, arguq::uq::Method::DirectPrompt);

  json script = standard_llm_script();
  script["rules"].insert(
      script["rules"].begin(),
      json{{"contains", "(marker-7)"}, {"kind", "error"},
           {"message", "backend refused claim seven"}});
  // The confidence rule must still match first for confidence prompts.
  std::swap(script["rules"][0], script["rules"][1]);

  auto run = run_with_mocks(cfg, script);
  CHECK(run.totals.claims == 25);
  CHECK(run.totals.failed_claims == 1);
  REQUIRE(run.claims[7].failed);
  CHECK(run.claims[7].failure.find("backend refused claim seven") !=
        std::string::npos);
  CHECK(run.claims[7].arguments.empty());
  CHECK_FALSE(run.claims[6].failed);
  CHECK_FALSE(run.claims[8].failed);

  script["rules"][1]["contains"] = "(marker-";  // now every claim fails
  try {
    run_with_mocks(cfg, script);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    std::string msg = e.what();
    CHECK(msg.find("exceeds the 5% tolerance") != std::string::npos);
    CHECK(msg.find("first failure (claim 0)") != std::string::npos);
    CHECK(msg.find("backend refused claim seven") != std::string::npos);
  }
}

TEST_CASE("run records serialize losslessly") {
  TempDir dir;
  auto dataset = write_dataset(dir, 6);
  auto cfg = small_config(dataset, arguq::uq::Method::Luq);
  cfg.base_score_mode = BaseScoreMode::Estimated;
  auto run = run_with_mocks(cfg, standard_llm_script(), {});

  auto j = run_to_json(run);
  CHECK(j["schema_version"] == 1);
  auto back = run_from_json(j);
  CHECK(run_to_json(back).dump() == j.dump());

  auto old = j;
  old["schema_version"] = 0;
  try {
    run_from_json(old);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("cannot migrate") != std::string::npos);
  }
  CHECK_THROWS_AS(run_from_json(json::object()), SchemaError);

  auto mangled = j;
  mangled["claims"][0].erase("root_strength");
  CHECK_THROWS_AS(run_from_json(mangled), DataError);
}

TEST_CASE("run files land on disk with the hash in the name") {
  TempDir dir;
  auto dataset = write_dataset(dir, 6);
  auto cfg = small_config(dataset, arguq::uq::Method::DirectPrompt);
  auto run = run_with_mocks(cfg);

  auto files = write_run_files(run, dir.path / "out");
  CHECK(files.json_path.filename() == "run-" + run.hash + ".json");
  CHECK(files.csv_path.filename() == "run-" + run.hash + ".csv");

  auto reloaded = load_run_file(files.json_path);
  CHECK(run_to_json(reloaded).dump() == run_to_json(run).dump());

  std::ifstream csv(files.csv_path);
  std::string line;
  std::getline(csv, line);
  CHECK(line == "claim_index,prediction,root_strength,label");
  int rows = 0;
  while (std::getline(csv, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 6);

  CHECK_THROWS_AS(load_run_file(dir.path / "missing.json"), DataError);
  auto truncated = dir.path / "torn.json";
  std::ofstream(truncated) << R"({"schema_version": 1, "config)";
  CHECK_THROWS_AS(load_run_file(truncated), SchemaError);
}

TEST_CASE("replay confirms intact runs and localizes drift") {
  TempDir dir;
  auto dataset = write_dataset(dir, 8);
  auto cfg = small_config(dataset, arguq::uq::Method::DirectPrompt);
  auto run = run_with_mocks(cfg);

  auto report = replay_run(run);
  CHECK(report.ok());
  CHECK(report.claims_checked == 8);

  // Claim 3 gets a doctored raw score; recomputation must disagree there
  // and only there.
  auto tampered = run;
  REQUIRE_FALSE(tampered.claims[3].arguments.empty());
  auto& raw = tampered.claims[3].arguments[0].raw_score;
  raw = raw < 0.5 ? raw + 0.4 : raw - 0.4;
  auto drifted = replay_run(tampered);
  REQUIRE(drifted.drift.size() == 1);
  CHECK(drifted.drift[0].claim_index == 3);
  CHECK(drifted.drift[0].stored_root ==
        doctest::Approx(run.claims[3].root_strength));
  CHECK(drifted.drift[0].stored_root != drifted.drift[0].recomputed_root);

  // A doctored verdict is caught even when strengths agree.
  auto flipped = run;
  flipped.claims[5].prediction = !flipped.claims[5].prediction;
  auto caught = replay_run(flipped);
  REQUIRE(caught.drift.size() == 1);
  CHECK(caught.drift[0].claim_index == 5);
}

TEST_CASE("parallel collection matches serial output byte for byte") {
  TempDir dir;
  auto dataset = write_dataset(dir, 10);
  auto cfg = small_config(dataset, arguq::uq::Method::Eccentricity);

  auto serial = run_with_mocks(cfg, standard_llm_script(), RunOptions{1});
  auto parallel = run_with_mocks(cfg, standard_llm_script(), RunOptions{4});
  CHECK(run_to_json(serial).dump() == run_to_json(parallel).dump());
}

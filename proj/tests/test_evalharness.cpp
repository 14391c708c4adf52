#include <doctest.h>

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "arguq/common.hpp"
#include "arguq/evalharness.hpp"
#include "arguq/pipeline.hpp"
#include "oracles.hpp"

using arguq::DataError;
using arguq::DomainError;
using namespace arguq::evalharness;

namespace {

const std::filesystem::path kDataDir = ARGUQ_DATA_DIR;

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("arguq-ev-" + std::to_string(::getpid()) + "-" +
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

MethodOutcome outcome_of(std::string id, std::vector<std::uint8_t> correct) {
  MethodOutcome o;
  o.method_id = std::move(id);
  o.correct = std::move(correct);
  for (std::size_t i = 0; i < o.correct.size(); ++i) {
    o.claim_indexes.push_back(static_cast<int>(i));
  }
  return o;
}

// Bernoulli correctness vector with a fixed hit rate, deterministic per seed.
std::vector<std::uint8_t> bernoulli(std::size_t n, double p,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::uint8_t> v(n);
  for (auto& x : v) x = unit(rng) < p ? 1 : 0;
  return v;
}

bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof a) == 0;
}

std::filesystem::path write_lines(const TempDir& dir, const std::string& name,
                                  const std::vector<std::string>& lines) {
  auto file = dir.path / name;
  std::ofstream out(file);
  for (const auto& l : lines) out << l << "\n";
  return file;
}

}  // namespace

TEST_CASE("accuracy and brier match their closed forms") {
  auto o = outcome_of("direct", {1, 0, 1, 1});
  CHECK(accuracy(o) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK_THROWS_AS(accuracy(outcome_of("direct", {})), DomainError);

  std::vector<double> sure{1.0, 0.0};
  std::vector<std::uint8_t> labels{1, 0};
  CHECK(brier(sure, labels) == 0.0);

  std::vector<double> half{0.5};
  std::vector<std::uint8_t> t{1};
  CHECK(brier(half, t) == doctest::Approx(0.25).epsilon(1e-15));

  std::vector<double> mixed{0.8, 0.3};
  std::vector<std::uint8_t> both_true{1, 1};
  CHECK(brier(mixed, both_true) == doctest::Approx(0.265).epsilon(1e-12));

  std::vector<double> none;
  std::vector<std::uint8_t> no_labels;
  CHECK_THROWS_AS(brier(none, no_labels), DomainError);
  CHECK_THROWS_AS(brier(half, both_true), DomainError);
  std::vector<double> out_of_range{1.5};
  CHECK_THROWS_AS(brier(out_of_range, t), DomainError);

  // Random inputs against the reference loops.
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int round = 0; round < 40; ++round) {
    std::size_t n = 1 + rng() % 400;
    std::vector<double> strengths(n);
    std::vector<std::uint8_t> lab(n);
    std::vector<std::uint8_t> correct(n);
    for (std::size_t i = 0; i < n; ++i) {
      strengths[i] = unit(rng);
      lab[i] = rng() % 2;
      correct[i] = rng() % 2;
    }
    CHECK(brier(strengths, lab) ==
          doctest::Approx(oracles::brier(strengths, lab)).epsilon(1e-13));
    auto oc = outcome_of("direct", correct);
    CHECK(accuracy(oc) ==
          doctest::Approx(oracles::accuracy(correct)).epsilon(1e-13));
  }
}

TEST_CASE("outcomes skip failed claims but keep pairing indexes") {
  arguq::pipeline::RunRecord run;
  run.config.method = arguq::uq::Method::Eccentricity;
  for (int i = 0; i < 5; ++i) {
    arguq::pipeline::ClaimOutcome c;
    c.index = i;
    c.label = i % 2 == 0;
    c.failed = i == 2;
    c.root_strength = 0.1 * static_cast<double>(i + 1);
    c.prediction = i >= 3;
    run.claims.push_back(std::move(c));
  }
  auto o = outcome_from_run(run);
  CHECK(o.method_id == "eccentricity");
  REQUIRE(o.correct.size() == 4);
  CHECK(o.claim_indexes == std::vector<int>{0, 1, 3, 4});
  CHECK(o.labels == std::vector<std::uint8_t>{1, 0, 0, 1});
  CHECK(o.strengths[2] == doctest::Approx(0.4));
  // claim 0: true/false -> wrong; claim 1: false/false -> right;
  // claim 3: false/true -> wrong; claim 4: true/true -> right.
  CHECK(o.correct == std::vector<std::uint8_t>{0, 1, 0, 1});
}

TEST_CASE("bootstrap intervals: degenerate, separated, and validated") {
  BootstrapOptions opts;
  opts.resamples = 2000;

  auto a = outcome_of("direct", std::vector<std::uint8_t>(200, 1));
  auto same = outcome_of("luq", std::vector<std::uint8_t>(200, 1));
  auto ci = bootstrap_ci_diff(a, same, opts);
  CHECK(ci.lower == 0.0);
  CHECK(ci.upper == 0.0);
  CHECK_FALSE(ci.significant());
  CHECK_FALSE(std::signbit(ci.lower));  // -0.0 never leaks out

  auto zeros = outcome_of("luq", std::vector<std::uint8_t>(500, 0));
  auto ones = outcome_of("direct", std::vector<std::uint8_t>(500, 1));
  auto wide = bootstrap_ci_diff(ones, zeros, opts);
  CHECK(wide.lower == 1.0);
  CHECK(wide.upper == 1.0);
  CHECK(wide.significant());

  auto short_one = outcome_of("luq", {1, 0});
  CHECK_THROWS_AS(bootstrap_ci_diff(a, short_one, opts), DomainError);

  auto misaligned = outcome_of("luq", std::vector<std::uint8_t>(200, 1));
  misaligned.claim_indexes[7] = 999;
  CHECK_THROWS_AS(bootstrap_ci_diff(a, misaligned, opts), DomainError);

  auto bad_level = opts;
  bad_level.level = 1.0;
  CHECK_THROWS_AS(bootstrap_ci_diff(a, same, bad_level), DomainError);
  auto bad_resamples = opts;
  bad_resamples.resamples = 0;
  CHECK_THROWS_AS(bootstrap_ci_diff(a, same, bad_resamples), DomainError);
}

TEST_CASE("bootstrap is deterministic, symmetric, and thread-stable") {
  auto a = outcome_of("direct", bernoulli(400, 0.8, 11));
  auto b = outcome_of("eccentricity", bernoulli(400, 0.74, 12));
  BootstrapOptions opts;
  opts.resamples = 3000;

  auto ci1 = bootstrap_ci_diff(a, b, opts);
  auto ci2 = bootstrap_ci_diff(a, b, opts);
  CHECK(same_bits(ci1.lower, ci2.lower));
  CHECK(same_bits(ci1.upper, ci2.upper));

  // Swapping the methods mirrors the interval exactly, not approximately.
  auto flipped = bootstrap_ci_diff(b, a, opts);
  CHECK(same_bits(flipped.lower, -ci1.upper == 0.0 ? 0.0 : -ci1.upper));
  CHECK(same_bits(flipped.upper, -ci1.lower == 0.0 ? 0.0 : -ci1.lower));

  auto par = opts;
  par.parallel = true;
  auto threaded = bootstrap_ci_diff(a, b, par);
  CHECK(same_bits(threaded.lower, ci1.lower));
  CHECK(same_bits(threaded.upper, ci1.upper));

  auto reseeded = opts;
  reseeded.seed = 43;
  auto other = bootstrap_ci_diff(a, b, reseeded);
  CHECK(other.lower != ci1.lower);

  // Raw diff samples respect their own determinism contract.
  auto d1 = bootstrap_diff_samples(a.correct, b.correct, 123, 500, false);
  auto d2 = bootstrap_diff_samples(a.correct, b.correct, 123, 500, true);
  CHECK(d1 == d2);
  CHECK_THROWS_AS(bootstrap_diff_samples(a.correct, b.correct, 123, 0, false),
                  DomainError);
}

TEST_CASE("bootstrap separates genuinely different hit rates") {
  // 80% vs 60% on 500 paired claims is a comfortably significant gap.
  auto a = outcome_of("direct", bernoulli(500, 0.8, 42));
  auto b = outcome_of("luq", bernoulli(500, 0.6, 43));
  BootstrapOptions opts;
  auto ci = bootstrap_ci_diff(a, b, opts);
  CHECK(ci.lower > 0.0);
  CHECK(ci.significant());

  // A plain mt19937-based resampler at a different seed agrees on the
  // qualitative call even though it shares no random stream.
  auto independent =
      oracles::bootstrap_ci(a.correct, b.correct, 5000, 0.95, 777);
  CHECK(independent.first > 0.0);
}

TEST_CASE("method ranking orders the canonical table") {
  CHECK(method_rank("direct") < method_rank("semantic-entropy"));
  CHECK(method_rank("semantic-entropy") < method_rank("eccentricity"));
  CHECK(method_rank("eccentricity") < method_rank("luq"));
  CHECK(method_rank("luq") < method_rank("anything-else"));

  CHECK(PairKey{"direct", "luq"} < PairKey{"semantic-entropy", "luq"});
  CHECK(PairKey{"direct", "semantic-entropy"} < PairKey{"direct", "luq"});
  CHECK_FALSE(PairKey{"direct", "luq"} < PairKey{"direct", "luq"});
}

TEST_CASE("best counts on hand-built grids") {
  ConfigKey cfg{"ds", "model", 1, "fixed"};

  SUBCASE("clear winner with a significant margin") {
    AccuracyGrid acc{{cfg, {{"direct", 0.7}, {"luq", 0.6}}}};
    SignificanceGrid sig{{cfg, {{PairKey{"direct", "luq"}, {0.02, 0.18}}}}};
    auto counts = summarize_best_counts(acc, sig);
    CHECK(counts["direct"].times_best == 1);
    CHECK(counts["direct"].not_sig_worse == 0);
    CHECK(counts["luq"].times_best == 0);
    CHECK(counts["luq"].not_sig_worse == 0);
    CHECK(counts["luq"].participated == 1);
  }

  SUBCASE("runner-up inside the interval is not significantly worse") {
    AccuracyGrid acc{{cfg, {{"direct", 0.7}, {"luq", 0.68}}}};
    SignificanceGrid sig{{cfg, {{PairKey{"direct", "luq"}, {-0.03, 0.07}}}}};
    auto counts = summarize_best_counts(acc, sig);
    CHECK(counts["direct"].times_best == 1);
    CHECK(counts["luq"].not_sig_worse == 1);
  }

  SUBCASE("ties make every method at the top best") {
    AccuracyGrid acc{{cfg, {{"direct", 0.7}, {"luq", 0.7}, {"ecc-x", 0.5}}}};
    SignificanceGrid sig{
        {cfg,
         {{PairKey{"direct", "luq"}, {0.0, 0.0}},
          {PairKey{"direct", "ecc-x"}, {0.1, 0.3}},
          {PairKey{"luq", "ecc-x"}, {-0.05, 0.25}}}}};
    auto counts = summarize_best_counts(acc, sig);
    CHECK(counts["direct"].times_best == 1);
    CHECK(counts["luq"].times_best == 1);
    CHECK(counts["ecc-x"].times_best == 0);
    // direct beats ecc-x significantly, so one tied best suffices to
    // disqualify it from the not-significantly-worse column.
    CHECK(counts["ecc-x"].not_sig_worse == 0);
  }

  SUBCASE("interval orientation is honored when the loser comes first") {
    // Canonical pair is (direct, luq) for accuracy(direct) - accuracy(luq);
    // luq is best, so being beaten means upper < 0 from direct's side.
    AccuracyGrid acc{{cfg, {{"direct", 0.55}, {"luq", 0.7}}}};
    SignificanceGrid sig{{cfg, {{PairKey{"direct", "luq"}, {-0.25, -0.05}}}}};
    auto counts = summarize_best_counts(acc, sig);
    CHECK(counts["luq"].times_best == 1);
    CHECK(counts["direct"].not_sig_worse == 0);

    SignificanceGrid loose{{cfg, {{PairKey{"direct", "luq"}, {-0.25, 0.01}}}}};
    auto relaxed = summarize_best_counts(acc, loose);
    CHECK(relaxed["direct"].not_sig_worse == 1);
  }

  SUBCASE("missing pairs and empty grids are data errors") {
    AccuracyGrid acc{{cfg, {{"direct", 0.7}, {"luq", 0.6}}}};
    CHECK_THROWS_AS(summarize_best_counts(acc, SignificanceGrid{}), DataError);
    SignificanceGrid wrong_pair{
        {cfg, {{PairKey{"direct", "semantic-entropy"}, {0.0, 0.1}}}}};
    CHECK_THROWS_AS(summarize_best_counts(acc, wrong_pair), DataError);
    CHECK_THROWS_AS(summarize_best_counts(AccuracyGrid{}, SignificanceGrid{}),
                    DataError);
  }
}

TEST_CASE("csv loaders validate structure") {
  TempDir dir;
  const std::string acc_header = "dataset,model,depth,base_score,method,accuracy";

  auto good = write_lines(dir, "acc.csv",
                          {acc_header, "d,m,1,fixed,direct,0.75",
                           "d,m,1,fixed,luq,0.7", "d,m,2,fixed,direct,0.66"});
  auto grid = load_accuracy_csv(good);
  CHECK(grid.size() == 2);
  CHECK(grid.at({"d", "m", 1, "fixed"}).at("direct") == 0.75);

  CHECK_THROWS_AS(load_accuracy_csv(dir.path / "absent.csv"), DataError);
  CHECK_THROWS_AS(load_accuracy_csv(write_lines(
                      dir, "h.csv", {"dataset,model", "d,m"})),
                  DataError);
  CHECK_THROWS_AS(load_accuracy_csv(write_lines(
                      dir, "f.csv", {acc_header, "d,m,1,fixed,direct"})),
                  DataError);
  CHECK_THROWS_AS(load_accuracy_csv(write_lines(
                      dir, "r.csv", {acc_header, "d,m,1,fixed,direct,1.2"})),
                  DataError);
  CHECK_THROWS_AS(
      load_accuracy_csv(write_lines(dir, "dup.csv",
                                    {acc_header, "d,m,1,fixed,direct,0.7",
                                     "d,m,1,fixed,direct,0.8"})),
      DataError);
  CHECK_THROWS_AS(load_accuracy_csv(write_lines(
                      dir, "p.csv", {acc_header, "d,m,one,fixed,direct,0.7"})),
                  DataError);

  const std::string ci_header =
      "dataset,model,depth,base_score,method_a,method_b,lower,upper";
  auto cis = write_lines(dir, "ci.csv",
                         {ci_header, "d,m,1,fixed,direct,luq,-0.1,0.2"});
  auto sig = load_ci_csv(cis);
  auto ci = sig.at({"d", "m", 1, "fixed"}).at(PairKey{"direct", "luq"});
  CHECK(ci.lower == -0.1);
  CHECK(ci.upper == 0.2);

  // A flipped pair lands under the canonical key with a negated interval.
  auto flipped = write_lines(dir, "ci2.csv",
                             {ci_header, "d,m,1,fixed,luq,direct,-0.2,0.1"});
  auto sig2 = load_ci_csv(flipped);
  auto ci2 = sig2.at({"d", "m", 1, "fixed"}).at(PairKey{"direct", "luq"});
  CHECK(ci2.lower == -0.1);
  CHECK(ci2.upper == 0.2);

  CHECK_THROWS_AS(load_ci_csv(write_lines(
                      dir, "ci3.csv",
                      {ci_header, "d,m,1,fixed,direct,luq,0.3,0.1"})),
                  DataError);
  CHECK_THROWS_AS(
      load_ci_csv(write_lines(dir, "ci4.csv",
                              {ci_header, "d,m,1,fixed,direct,luq,-0.1,0.2",
                               "d,m,1,fixed,luq,direct,-0.2,0.1"})),
      DataError);
}

TEST_CASE("published grid reproduces the reported best counts") {
  auto acc = load_accuracy_csv(kDataDir / "reference" / "accuracies.csv");
  auto sig =
      load_ci_csv(kDataDir / "reference" / "confidence_intervals.csv");
  CHECK(acc.size() == 36);

  auto counts = summarize_best_counts(acc, sig);
  REQUIRE(counts.size() == 4);
  CHECK(counts.at("direct").times_best == 25);
  CHECK(counts.at("direct").not_sig_worse == 11);
  CHECK(counts.at("direct").participated == 36);
  CHECK(counts.at("semantic-entropy").times_best == 1);
  CHECK(counts.at("semantic-entropy").not_sig_worse == 15);
  CHECK(counts.at("semantic-entropy").participated == 24);
  CHECK(counts.at("eccentricity").times_best == 1);
  CHECK(counts.at("eccentricity").not_sig_worse == 8);
  CHECK(counts.at("eccentricity").participated == 36);
  CHECK(counts.at("luq").times_best == 10);
  CHECK(counts.at("luq").not_sig_worse == 13);
  CHECK(counts.at("luq").participated == 36);
}

TEST_CASE("grid report writes the full interval table") {
  TempDir dir;
  auto acc = load_accuracy_csv(kDataDir / "reference" / "accuracies.csv");
  auto sig =
      load_ci_csv(kDataDir / "reference" / "confidence_intervals.csv");
  auto paths = emit_grid_report(acc, sig, dir.path / "report");
  CHECK(paths.results_csv.empty());

  std::ifstream in(paths.intervals_csv);
  std::string line;
  std::getline(in, line);
  CHECK(line ==
        "dataset,model,depth,base_score,method_a,method_b,lower,upper,"
        "significant");
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 180);

  std::ifstream md(paths.summary_md);
  std::string all((std::istreambuf_iterator<char>(md)),
                  std::istreambuf_iterator<char>());
  CHECK(all.find("## Accuracy") != std::string::npos);
  CHECK(all.find("## Best-method counts") != std::string::npos);
  CHECK(all.find("| direct | 25 (0.69) | 11 (0.31) | 36 |") !=
        std::string::npos);
  // Semantic entropy never ran on gpt-4o-mini, so that row is dropped
  // entirely rather than rendered as a strip of N/A cells.
  CHECK(all.find("| gpt-4o-mini | semantic-entropy |") == std::string::npos);
  CHECK(all.find("| llama-3.1-8b | semantic-entropy |") != std::string::npos);
}

TEST_CASE("summary marks partially covered methods with gaps") {
  ConfigKey c1{"ds", "m", 1, "fixed"};
  ConfigKey c2{"ds", "m", 2, "fixed"};
  AccuracyGrid acc{{c1, {{"direct", 0.7}, {"luq", 0.6}}},
                   {c2, {{"direct", 0.65}}}};
  SignificanceGrid sig{{c1, {{PairKey{"direct", "luq"}, {0.02, 0.2}}}},
                       {c2, {}}};
  TempDir dir;
  auto paths = emit_grid_report(acc, sig, dir.path);
  std::ifstream md(paths.summary_md);
  std::string all((std::istreambuf_iterator<char>(md)),
                  std::istreambuf_iterator<char>());
  // luq exists at depth 1 only; its depth-2 cell renders as N/A.
  CHECK(all.find("| m | luq | 0.600 | N/A |") != std::string::npos);
  CHECK(all.find("| m | direct | 0.700 | 0.650 |") != std::string::npos);
}

TEST_CASE("run report computes metrics and pairwise intervals") {
  // Two methods sharing one configuration, built directly as run records.
  auto make_run = [](arguq::uq::Method method,
                     const std::vector<std::uint8_t>& correct) {
    arguq::pipeline::RunRecord run;
    run.config.dataset_path = "ds.jsonl";
    run.config.llm_name = "model-x";
    run.config.method = method;
    run.hash = "h";
    for (std::size_t i = 0; i < correct.size(); ++i) {
      arguq::pipeline::ClaimOutcome c;
      c.index = static_cast<int>(i);
      c.label = true;
      c.prediction = correct[i] == 1;
      c.root_strength = c.prediction ? 0.8 : 0.2;
      run.claims.push_back(std::move(c));
    }
    return run;
  };

  std::vector<arguq::pipeline::RunRecord> runs;
  runs.push_back(make_run(arguq::uq::Method::DirectPrompt,
                          bernoulli(60, 0.8, 5)));
  runs.push_back(make_run(arguq::uq::Method::Luq, bernoulli(60, 0.7, 6)));
  runs.push_back(make_run(arguq::uq::Method::Eccentricity,
                          bernoulli(60, 0.6, 7)));

  TempDir dir;
  BootstrapOptions opts;
  opts.resamples = 500;
  auto paths = emit_report(runs, dir.path / "rep", opts);

  std::ifstream res(paths.results_csv);
  std::string line;
  std::getline(res, line);
  CHECK(line == "dataset,model,depth,base_score,method,claims,accuracy,brier");
  std::vector<std::string> rows;
  while (std::getline(res, line)) {
    if (!line.empty()) rows.push_back(line);
  }
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].find(",direct,60,") != std::string::npos);
  CHECK(rows[1].find(",eccentricity,") != std::string::npos);
  CHECK(rows[2].find(",luq,") != std::string::npos);

  std::ifstream ci(paths.intervals_csv);
  std::getline(ci, line);
  int pair_rows = 0;
  while (std::getline(ci, line)) {
    if (!line.empty()) ++pair_rows;
  }
  CHECK(pair_rows == 3);  // C(3,2) pairs in one configuration

  std::ifstream md(paths.summary_md);
  std::string all((std::istreambuf_iterator<char>(md)),
                  std::istreambuf_iterator<char>());
  CHECK(all.find("paired bootstrap") != std::string::npos);

  // The same method twice in one configuration cannot be paired.
  runs.push_back(make_run(arguq::uq::Method::DirectPrompt,
                          bernoulli(60, 0.5, 8)));
  CHECK_THROWS_AS(emit_report(runs, dir.path / "rep2", opts), DataError);
  CHECK_THROWS_AS(
      emit_report(std::vector<arguq::pipeline::RunRecord>{}, dir.path, opts),
      DataError);
}

#pragma once

// Statistical comparison harness.
//
// Accuracy and Brier scores per run, paired bootstrap confidence intervals
// for accuracy differences between methods, and a grid summarizer that
// counts how often each method is best (or statistically indistinguishable
// from the best) across experiment configurations. The summarizer also
// accepts externally published accuracy and interval grids from CSV, so a
// results table can be reproduced without touching any backend.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "arguq/pipeline.hpp"

namespace arguq::evalharness {

// Per-run prediction outcomes in dataset order (failed claims excluded).
struct MethodOutcome {
  std::string method_id;
  std::vector<std::uint8_t> correct;    // 1 when prediction == label
  std::vector<double> strengths;        // root strengths for Brier
  std::vector<std::uint8_t> labels;     // 1 = claim true
  std::vector<int> claim_indexes;       // for pairing checks
};

MethodOutcome outcome_from_run(const pipeline::RunRecord& run);

double accuracy(const MethodOutcome& outcome);

// Mean squared distance between strength and binary label.
double brier(std::span<const double> strengths,
             std::span<const std::uint8_t> labels);

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  // Zero outside the closed interval means the difference is significant.
  bool significant() const { return lower > 0.0 || upper < 0.0; }
};

struct BootstrapOptions {
  int resamples = 5000;
  double level = 0.95;
  std::uint64_t seed = 42;
  bool parallel = false;
};

// Accuracy-difference resamples (a minus b) over shared index draws. The
// stream is partitioned per resample from `stream_key`, so the parallel
// path reproduces the serial path bit for bit.
std::vector<double> bootstrap_diff_samples(std::span<const std::uint8_t> a,
                                           std::span<const std::uint8_t> b,
                                           std::uint64_t stream_key,
                                           int resamples, bool parallel);

// Percentile interval for accuracy(a) - accuracy(b). Both outcomes must
// cover the same claims in the same order. The random stream is keyed on
// the seed and the unordered pair of method ids, which pins down every
// pair's interval independently and makes swapping the arguments mirror
// the interval exactly.
ConfidenceInterval bootstrap_ci_diff(const MethodOutcome& a,
                                     const MethodOutcome& b,
                                     const BootstrapOptions& options);

// One experiment configuration in the comparison grid.
struct ConfigKey {
  std::string dataset;
  std::string model;
  int depth = 1;
  std::string base_score;
  auto operator<=>(const ConfigKey&) const = default;
};

// Canonical presentation order of methods in tables and pair keys.
int method_rank(std::string_view method);

// Unordered method pair stored in canonical orientation.
struct PairKey {
  std::string a;
  std::string b;
  bool operator<(const PairKey& o) const;
};

using AccuracyGrid = std::map<ConfigKey, std::map<std::string, double>>;
using SignificanceGrid = std::map<ConfigKey, std::map<PairKey, ConfidenceInterval>>;

struct MethodCounts {
  int times_best = 0;
  int not_sig_worse = 0;  // non-best configs indistinguishable from the best
  int participated = 0;
};

// Ties: every method at the maximum counts as best; a non-best method
// counts under not_sig_worse only when no tied-best method beats it
// significantly. Missing intervals for a needed pair raise DataError.
std::map<std::string, MethodCounts> summarize_best_counts(
    const AccuracyGrid& accuracies, const SignificanceGrid& significance);

// CSV loaders for externally published grids.
// accuracies: dataset,model,depth,base_score,method,accuracy
// intervals:  dataset,model,depth,base_score,method_a,method_b,lower,upper
AccuracyGrid load_accuracy_csv(const std::filesystem::path& path);
SignificanceGrid load_ci_csv(const std::filesystem::path& path);

struct ReportPaths {
  std::filesystem::path results_csv;  // empty when no run metrics exist
  std::filesystem::path intervals_csv;
  std::filesystem::path summary_md;
};

// Full report from run records: per-run metrics, pairwise intervals within
// each configuration, and a Markdown summary with the best-counts table.
ReportPaths emit_report(std::span<const pipeline::RunRecord> runs,
                        const std::filesystem::path& out_dir,
                        const BootstrapOptions& options);

// Same summary from already-published grids (no bootstrap is run).
ReportPaths emit_grid_report(const AccuracyGrid& accuracies,
                             const SignificanceGrid& significance,
                             const std::filesystem::path& out_dir);

}  // namespace arguq::evalharness

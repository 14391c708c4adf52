#include "arguq/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "arguq/common.hpp"
#include "arguq/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace arguq::evalharness {

namespace {

constexpr char kSep = '\x1f';

// Type-7 percentile (linear interpolation between order statistics) on an
// ascending-sorted vector.
double percentile_sorted(const std::vector<double>& sorted, double q) {
  double h = q * static_cast<double>(sorted.size() - 1);
  auto i = static_cast<std::size_t>(h);
  double f = h - static_cast<double>(i);
  if (f == 0.0 || i + 1 == sorted.size()) return sorted[i];
  return sorted[i] + f * (sorted[i + 1] - sorted[i]);
}

double scrub_zero(double v) { return v == 0.0 ? 0.0 : v; }

bool rank_then_name(const std::string& a, const std::string& b) {
  return std::pair(method_rank(a), std::string_view(a)) <
         std::pair(method_rank(b), std::string_view(b));
}

std::uint64_t pair_stream_key(std::uint64_t seed, const std::string& a,
                              const std::string& b) {
  const std::string& lo = std::min(a, b);
  const std::string& hi = std::max(a, b);
  std::string material = std::to_string(seed);
  material += kSep;
  material += lo;
  material += kSep;
  material += hi;
  return fnv1a64(material);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("cannot parse " + what + " from '" + s + "'");
  }
}

int parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("cannot parse " + what + " from '" + s + "'");
  }
}

std::vector<std::string> read_csv(const std::filesystem::path& path,
                                  const std::string& expected_header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV '" + path.string() + "'");
  auto chomp = [](std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  };
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("CSV '" + path.string() + "' is empty");
  }
  chomp(line);
  if (line != expected_header) {
    throw DataError("CSV '" + path.string() + "' has header '" + line +
                    "', expected '" + expected_header + "'");
  }
  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    chomp(line);
    if (!line.empty()) rows.push_back(line);
  }
  return rows;
}

// m significantly worse than best, judged by the interval for their pair?
bool significantly_worse(const SignificanceGrid& significance,
                         const ConfigKey& config, const std::string& m,
                         const std::string& best) {
  auto grid_it = significance.find(config);
  if (grid_it == significance.end()) {
    throw DataError("no significance entries for configuration '" +
                    config.dataset + "/" + config.model + "'");
  }
  PairKey key{m, best};
  if (method_rank(best) < method_rank(m) ||
      (method_rank(best) == method_rank(m) && best < m)) {
    key = PairKey{best, m};
  }
  auto it = grid_it->second.find(key);
  if (it == grid_it->second.end()) {
    throw DataError("missing confidence interval for pair " + key.a + "," +
                    key.b + " in configuration '" + config.dataset + "/" +
                    config.model + "'");
  }
  // Interval is for accuracy(key.a) - accuracy(key.b).
  return key.a == m ? it->second.upper < 0.0 : it->second.lower > 0.0;
}

std::string format3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string format4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void write_intervals_csv(const std::filesystem::path& path,
                         const SignificanceGrid& significance) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "dataset,model,depth,base_score,method_a,method_b,lower,upper,"
         "significant\n";
  for (const auto& [config, pairs] : significance) {
    for (const auto& [pair, ci] : pairs) {
      out << config.dataset << "," << config.model << "," << config.depth
          << "," << config.base_score << "," << pair.a << "," << pair.b << ","
          << format4(ci.lower) << "," << format4(ci.upper) << ","
          << (ci.significant() ? "yes" : "no") << "\n";
    }
  }
}

void write_summary_md(const std::filesystem::path& path,
                      const AccuracyGrid& accuracies,
                      const SignificanceGrid& significance,
                      const std::string& interval_note) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");

  out << "# Method comparison summary\n\n";
  out << interval_note << "\n";
  out << "Accuracy differences count as significant when zero lies outside "
         "the closed interval.\n\n";

  // Column per (dataset, depth, base-score) triple, row per model x method.
  std::set<std::tuple<std::string, int, std::string>> columns;
  std::set<std::string> models;
  std::set<std::string> methods_seen;
  for (const auto& [config, methods] : accuracies) {
    columns.insert({config.dataset, config.depth, config.base_score});
    models.insert(config.model);
    for (const auto& [m, v] : methods) methods_seen.insert(m);
  }
  std::vector<std::string> methods(methods_seen.begin(), methods_seen.end());
  std::sort(methods.begin(), methods.end(), rank_then_name);

  out << "## Accuracy\n\n";
  out << "| Model | Method |";
  for (const auto& [dataset, depth, bs] : columns) {
    out << " " << dataset << " D" << depth << " " << bs << " |";
  }
  out << "\n|---|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out << "---|";
  out << "\n";
  for (const auto& model : models) {
    for (const auto& method : methods) {
      bool any = false;
      std::string row = "| " + model + " | " + method + " |";
      for (const auto& [dataset, depth, bs] : columns) {
        auto config_it = accuracies.find({dataset, model, depth, bs});
        const double* value = nullptr;
        if (config_it != accuracies.end()) {
          auto m_it = config_it->second.find(method);
          if (m_it != config_it->second.end()) value = &m_it->second;
        }
        row += value ? " " + format3(*value) + " |" : " N/A |";
        any = any || value != nullptr;
      }
      if (any) out << row << "\n";
    }
  }

  out << "\n## Best-method counts\n\n";
  auto counts = summarize_best_counts(accuracies, significance);
  out << "| Method | Times best | Not significantly worse | Configurations "
         "|\n|---|---|---|---|\n";
  for (const auto& method : methods) {
    auto it = counts.find(method);
    if (it == counts.end()) continue;
    const MethodCounts& c = it->second;
    char frac_best[32], frac_nsw[32];
    std::snprintf(frac_best, sizeof frac_best, "%.2f",
                  static_cast<double>(c.times_best) /
                      static_cast<double>(c.participated));
    std::snprintf(frac_nsw, sizeof frac_nsw, "%.2f",
                  static_cast<double>(c.not_sig_worse) /
                      static_cast<double>(c.participated));
    out << "| " << method << " | " << c.times_best << " (" << frac_best
        << ") | " << c.not_sig_worse << " (" << frac_nsw << ") | "
        << c.participated << " |\n";
  }
}

}  // namespace

MethodOutcome outcome_from_run(const pipeline::RunRecord& run) {
  MethodOutcome outcome;
  outcome.method_id = uq::method_name(run.config.method);
  for (const auto& claim : run.claims) {
    if (claim.failed) continue;
    outcome.correct.push_back(claim.prediction == claim.label ? 1 : 0);
    outcome.strengths.push_back(claim.root_strength);
    outcome.labels.push_back(claim.label ? 1 : 0);
    outcome.claim_indexes.push_back(claim.index);
  }
  return outcome;
}

double accuracy(const MethodOutcome& outcome) {
  if (outcome.correct.empty()) {
    throw DomainError("accuracy of an empty outcome is undefined");
  }
  int correct = 0;
  for (std::uint8_t c : outcome.correct) correct += c;
  return static_cast<double>(correct) /
         static_cast<double>(outcome.correct.size());
}

double brier(std::span<const double> strengths,
             std::span<const std::uint8_t> labels) {
  if (strengths.empty() || strengths.size() != labels.size()) {
    throw DomainError("brier needs equally sized, non-empty inputs");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < strengths.size(); ++i) {
    require_unit(strengths[i], "brier strength");
    double d = strengths[i] - static_cast<double>(labels[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(strengths.size());
}

std::vector<double> bootstrap_diff_samples(std::span<const std::uint8_t> a,
                                           std::span<const std::uint8_t> b,
                                           std::uint64_t stream_key,
                                           int resamples, bool parallel) {
  if (a.size() != b.size() || a.empty()) {
    throw DomainError("paired bootstrap needs equally sized, non-empty "
                      "correctness vectors");
  }
  if (resamples < 1) throw DomainError("resamples must be positive");
  const std::size_t n = a.size();
  std::vector<double> diffs(static_cast<std::size_t>(resamples));
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (int r = 0; r < resamples; ++r) {
    SubStream stream(stream_key, static_cast<std::uint64_t>(r));
    int ca = 0;
    int cb = 0;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t idx = stream.next_index(n);
      ca += a[idx];
      cb += b[idx];
    }
    diffs[static_cast<std::size_t>(r)] =
        static_cast<double>(ca - cb) / static_cast<double>(n);
  }
  return diffs;
}

ConfidenceInterval bootstrap_ci_diff(const MethodOutcome& a,
                                     const MethodOutcome& b,
                                     const BootstrapOptions& options) {
  if (a.correct.size() != b.correct.size() || a.correct.empty()) {
    throw DomainError("outcomes cover different numbers of claims");
  }
  if (a.claim_indexes != b.claim_indexes) {
    throw DomainError("outcomes cover different claims; pairing is invalid");
  }
  if (!(options.level > 0.0 && options.level < 1.0)) {
    throw DomainError("confidence level must lie in (0,1)");
  }

  std::uint64_t key = pair_stream_key(options.seed, a.method_id, b.method_id);
  std::vector<double> diffs = bootstrap_diff_samples(
      a.correct, b.correct, key, options.resamples, options.parallel);
  std::sort(diffs.begin(), diffs.end());

  const double alpha = (1.0 - options.level) / 2.0;
  double lower = percentile_sorted(diffs, alpha);

  // The upper bound is computed as the mirrored lower bound of the negated,
  // reversed sample. That makes swapping the two methods produce the exact
  // negated-and-reversed interval, bit for bit.
  std::vector<double> mirrored(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    mirrored[i] = -diffs[diffs.size() - 1 - i];
  }
  double upper = -percentile_sorted(mirrored, alpha);

  return {scrub_zero(lower), scrub_zero(upper)};
}

int method_rank(std::string_view method) {
  if (method == "direct") return 0;
  if (method == "semantic-entropy") return 1;
  if (method == "eccentricity") return 2;
  if (method == "luq") return 3;
  return 4;
}

bool PairKey::operator<(const PairKey& o) const {
  auto key = [](const PairKey& p) {
    return std::tuple(method_rank(p.a), std::string_view(p.a),
                      method_rank(p.b), std::string_view(p.b));
  };
  return key(*this) < key(o);
}

std::map<std::string, MethodCounts> summarize_best_counts(
    const AccuracyGrid& accuracies, const SignificanceGrid& significance) {
  if (accuracies.empty()) {
    throw DataError("accuracy grid is empty; nothing to summarize");
  }
  std::map<std::string, MethodCounts> counts;
  for (const auto& [config, methods] : accuracies) {
    if (methods.empty()) continue;
    double top = methods.begin()->second;
    for (const auto& [m, v] : methods) top = std::max(top, v);

    std::vector<std::string> bests;
    for (const auto& [m, v] : methods) {
      counts[m].participated++;
      if (v == top) bests.push_back(m);
    }
    for (const auto& m : bests) counts[m].times_best++;

    for (const auto& [m, v] : methods) {
      if (v == top) continue;
      bool beaten = false;
      for (const auto& best : bests) {
        if (significantly_worse(significance, config, m, best)) {
          beaten = true;
          break;
        }
      }
      if (!beaten) counts[m].not_sig_worse++;
    }
  }
  return counts;
}

AccuracyGrid load_accuracy_csv(const std::filesystem::path& path) {
  AccuracyGrid grid;
  for (const auto& line : read_csv(
           path, "dataset,model,depth,base_score,method,accuracy")) {
    auto f = split_csv_line(line);
    if (f.size() != 6) {
      throw DataError("accuracy row '" + line + "' does not have 6 fields");
    }
    ConfigKey key{f[0], f[1], parse_int(f[2], "depth"), f[3]};
    double value = parse_double(f[5], "accuracy");
    if (!(value >= 0.0 && value <= 1.0)) {
      throw DataError("accuracy in '" + line + "' must lie in [0,1]");
    }
    if (!grid[key].emplace(f[4], value).second) {
      throw DataError("duplicate accuracy entry in '" + line + "'");
    }
  }
  return grid;
}

SignificanceGrid load_ci_csv(const std::filesystem::path& path) {
  SignificanceGrid grid;
  for (const auto& line : read_csv(
           path,
           "dataset,model,depth,base_score,method_a,method_b,lower,upper")) {
    auto f = split_csv_line(line);
    if (f.size() != 8) {
      throw DataError("interval row '" + line + "' does not have 8 fields");
    }
    ConfigKey key{f[0], f[1], parse_int(f[2], "depth"), f[3]};
    std::string ma = f[4];
    std::string mb = f[5];
    ConfidenceInterval ci{parse_double(f[6], "lower"),
                          parse_double(f[7], "upper")};
    if (ci.lower > ci.upper) {
      throw DataError("interval row '" + line + "' has lower > upper");
    }
    // Store in canonical orientation, negating when the pair is flipped.
    if (rank_then_name(mb, ma)) {
      std::swap(ma, mb);
      ci = {-ci.upper, -ci.lower};
    }
    if (!grid[key].emplace(PairKey{ma, mb}, ci).second) {
      throw DataError("duplicate interval entry in '" + line + "'");
    }
  }
  return grid;
}

ReportPaths emit_report(std::span<const pipeline::RunRecord> runs,
                        const std::filesystem::path& out_dir,
                        const BootstrapOptions& options) {
  if (runs.empty()) throw DataError("no runs to report on");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("cannot create output directory '" + out_dir.string() +
                  "': " + ec.message());
  }

  struct Entry {
    MethodOutcome outcome;
    double acc = 0.0;
    double brier_score = 0.0;
  };
  std::map<ConfigKey, std::map<std::string, Entry>> grid;
  AccuracyGrid acc_grid;
  for (const auto& run : runs) {
    ConfigKey key{run.config.dataset_path, run.config.llm_name,
                  run.config.depth,
                  pipeline::base_score_mode_name(run.config.base_score_mode)};
    Entry entry;
    entry.outcome = outcome_from_run(run);
    entry.acc = accuracy(entry.outcome);
    entry.brier_score = brier(entry.outcome.strengths, entry.outcome.labels);
    std::string method = entry.outcome.method_id;
    if (!grid[key].emplace(method, std::move(entry)).second) {
      throw DataError("two runs cover method '" + method +
                      "' in the same configuration");
    }
    acc_grid[key][method] = grid[key][method].acc;
  }

  ReportPaths paths;
  paths.results_csv = out_dir / "results.csv";
  paths.intervals_csv = out_dir / "confidence_intervals.csv";
  paths.summary_md = out_dir / "summary.md";

  {
    std::ofstream out(paths.results_csv);
    if (!out) throw IoError("cannot write '" + paths.results_csv.string() + "'");
    out << "dataset,model,depth,base_score,method,claims,accuracy,brier\n";
    for (const auto& [key, methods] : grid) {
      std::vector<std::string> ordered;
      for (const auto& [m, e] : methods) ordered.push_back(m);
      std::sort(ordered.begin(), ordered.end(), rank_then_name);
      for (const auto& m : ordered) {
        const Entry& e = methods.at(m);
        out << key.dataset << "," << key.model << "," << key.depth << ","
            << key.base_score << "," << m << "," << e.outcome.correct.size()
            << "," << format4(e.acc) << "," << format4(e.brier_score) << "\n";
      }
    }
  }

  SignificanceGrid sig_grid;
  for (const auto& [key, methods] : grid) {
    std::vector<std::string> ordered;
    for (const auto& [m, e] : methods) ordered.push_back(m);
    std::sort(ordered.begin(), ordered.end(), rank_then_name);
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      for (std::size_t j = i + 1; j < ordered.size(); ++j) {
        const Entry& ea = methods.at(ordered[i]);
        const Entry& eb = methods.at(ordered[j]);
        sig_grid[key][PairKey{ordered[i], ordered[j]}] =
            bootstrap_ci_diff(ea.outcome, eb.outcome, options);
      }
    }
  }
  write_intervals_csv(paths.intervals_csv, sig_grid);

  char note[256];
  std::snprintf(note, sizeof note,
                "Intervals come from a paired bootstrap with shared resample "
                "indices across methods: %d resamples, percentile method at "
                "%.0f%% confidence, seed %llu.",
                options.resamples, options.level * 100.0,
                static_cast<unsigned long long>(options.seed));
  write_summary_md(paths.summary_md, acc_grid, sig_grid, note);
  return paths;
}

ReportPaths emit_grid_report(const AccuracyGrid& accuracies,
                             const SignificanceGrid& significance,
                             const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("cannot create output directory '" + out_dir.string() +
                  "': " + ec.message());
  }
  ReportPaths paths;
  paths.intervals_csv = out_dir / "confidence_intervals.csv";
  paths.summary_md = out_dir / "summary.md";
  write_intervals_csv(paths.intervals_csv, significance);
  write_summary_md(paths.summary_md, accuracies, significance,
                   "Intervals were supplied as an external grid; no "
                   "bootstrap was run.");
  return paths;
}

}  // namespace arguq::evalharness

#include "arguq/uq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "arguq/common.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace arguq::uq {

namespace {

// Numerically stable log(sum(exp(xs))).
double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

enum class NliClass { Entail, Neutral, Contradict };

// Ties resolve in favor of entailment, then neutral; they only occur on
// hand-scripted judgments anyway.
NliClass argmax_class(const gateways::NliJudgment& j) {
  if (j.entail >= j.neutral && j.entail >= j.contradict) {
    return NliClass::Entail;
  }
  if (j.neutral >= j.contradict) return NliClass::Neutral;
  return NliClass::Contradict;
}

void validate_similarity(const SimilarityMatrix& sim) {
  const int n = sim.size();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double v = sim.at(i, j);
      if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) {
        throw DomainError("similarity entry (" + std::to_string(i) + "," +
                          std::to_string(j) + ") = " + std::to_string(v) +
                          " is outside [0,1]");
      }
      if (std::abs(v - sim.at(j, i)) > 1e-9) {
        throw DomainError("similarity matrix is not symmetric at (" +
                          std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
}

}  // namespace

Direction direction_of(Method m) {
  return m == Method::DirectPrompt ? Direction::ConfidenceLike
                                   : Direction::UncertaintyLike;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::DirectPrompt:
      return "direct";
    case Method::SemanticEntropy:
      return "semantic-entropy";
    case Method::Eccentricity:
      return "eccentricity";
    case Method::Luq:
      return "luq";
  }
  throw DomainError("unknown method enum value");
}

std::optional<Method> method_from_name(std::string_view name) {
  if (name == "direct") return Method::DirectPrompt;
  if (name == "semantic-entropy") return Method::SemanticEntropy;
  if (name == "eccentricity") return Method::Eccentricity;
  if (name == "luq") return Method::Luq;
  return std::nullopt;
}

SimilarityMatrix::SimilarityMatrix(int n) : n_(n) {
  if (n < 1) throw DomainError("similarity matrix needs at least one sample");
  values_.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n),
                 0.0);
  for (int i = 0; i < n; ++i) set(i, i, 1.0);
}

std::optional<double> parse_verbalized_confidence(std::string_view text) {
  const char* p = text.data();
  const char* end = p + text.size();
  while (p < end) {
    bool negative = false;
    const char* start = p;
    if (*p == '-' && p + 1 < end &&
        (std::isdigit(static_cast<unsigned char>(p[1])) ||
         (p[1] == '.' && p + 2 < end &&
          std::isdigit(static_cast<unsigned char>(p[2]))))) {
      negative = true;
      ++p;
    }
    bool starts_number =
        std::isdigit(static_cast<unsigned char>(*p)) ||
        (*p == '.' && p + 1 < end &&
         std::isdigit(static_cast<unsigned char>(p[1])));
    if (!starts_number) {
      p = start + 1;
      continue;
    }
    char* num_end = nullptr;
    double value = std::strtod(p, &num_end);
    if (num_end == p) {
      ++p;
      continue;
    }
    if (negative) value = -value;
    if (num_end < end && *num_end == '%') {
      value /= 100.0;
      ++num_end;
    }
    if (value >= 0.0 && value <= 1.0) return value;
    p = num_end;
  }
  return std::nullopt;
}

ClusterPartition cluster_bidirectional_entailment(
    std::span<const gateways::GenerationSample> samples,
    gateways::NliGateway& nli) {
  if (samples.empty()) throw DomainError("cannot cluster zero samples");
  for (const auto& s : samples) {
    if (!s.seq_logprob) {
      throw CapabilityError(
          "semantic entropy needs sequence log-probabilities, but a sample "
          "arrived without one");
    }
  }

  ClusterPartition part;
  part.assignment.resize(samples.size(), -1);
  std::vector<std::size_t> representative;  // first member per cluster

  for (std::size_t i = 0; i < samples.size(); ++i) {
    int joined = -1;
    for (std::size_t c = 0; c < representative.size(); ++c) {
      const std::string& rep = samples[representative[c]].text;
      const std::string& cand = samples[i].text;
      if (argmax_class(nli.nli_score(rep, cand)) == NliClass::Entail &&
          argmax_class(nli.nli_score(cand, rep)) == NliClass::Entail) {
        joined = static_cast<int>(c);
        break;
      }
    }
    if (joined < 0) {
      joined = static_cast<int>(representative.size());
      representative.push_back(i);
    }
    part.assignment[i] = joined;
  }

  // Likelihood-weighted cluster probabilities, normalized in log space so
  // very negative sequence logprobs cannot underflow to zero.
  std::vector<double> all_logprobs;
  all_logprobs.reserve(samples.size());
  for (const auto& s : samples) all_logprobs.push_back(*s.seq_logprob);
  const double total = log_sum_exp(all_logprobs);
  if (!std::isfinite(total)) {
    throw DomainError("all sequence log-probabilities are -inf");
  }

  part.cluster_logprob.resize(representative.size());
  for (std::size_t c = 0; c < representative.size(); ++c) {
    std::vector<double> members;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (part.assignment[i] == static_cast<int>(c)) {
        members.push_back(*samples[i].seq_logprob);
      }
    }
    part.cluster_logprob[c] = log_sum_exp(members) - total;
  }
  return part;
}

double semantic_entropy(const ClusterPartition& partition) {
  if (partition.cluster_logprob.empty()) {
    throw DomainError("partition has no clusters");
  }
  double acc = 0.0;
  for (double lp : partition.cluster_logprob) {
    if (!std::isfinite(lp)) {
      throw DomainError("cluster probability underflowed to zero");
    }
    acc += lp;
  }
  return -acc / static_cast<double>(partition.cluster_logprob.size());
}

double entail_similarity(const gateways::NliJudgment& j, SimilarityMode mode) {
  if (mode == SimilarityMode::EntailVsContradict) {
    double m = std::max(j.entail, j.contradict);
    double e = std::exp(j.entail - m);
    return e / (e + std::exp(j.contradict - m));
  }
  double m = std::max({j.entail, j.neutral, j.contradict});
  double e = std::exp(j.entail - m);
  return e / (e + std::exp(j.neutral - m) + std::exp(j.contradict - m));
}

SimilarityMatrix build_similarity_matrix(std::span<const std::string> texts,
                                         gateways::NliGateway& nli,
                                         SimilarityMode mode) {
  const int n = static_cast<int>(texts.size());
  if (n < 2) {
    throw DomainError("similarity matrix needs at least two samples");
  }
  SimilarityMatrix sim(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double forward = entail_similarity(
          nli.nli_score(texts[static_cast<std::size_t>(i)],
                        texts[static_cast<std::size_t>(j)]),
          mode);
      double backward = entail_similarity(
          nli.nli_score(texts[static_cast<std::size_t>(j)],
                        texts[static_cast<std::size_t>(i)]),
          mode);
      double v = 0.5 * (forward + backward);
      sim.set(i, j, v);
      sim.set(j, i, v);
    }
  }
  return sim;
}

EccentricityResult eccentricity_full(const SimilarityMatrix& sim) {
  validate_similarity(sim);
  const int n = sim.size();

  Eigen::MatrixXd w(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      // Enforce exact symmetry before the eigensolve; the input is already
      // symmetric within tolerance.
      w(i, j) = 0.5 * (sim.at(i, j) + sim.at(j, i));
    }
  }

  // Degrees include the unit diagonal, which keeps them strictly positive.
  Eigen::VectorXd inv_sqrt_deg(n);
  for (int i = 0; i < n; ++i) {
    inv_sqrt_deg(i) = 1.0 / std::sqrt(w.row(i).sum());
  }
  Eigen::MatrixXd lap =
      Eigen::MatrixXd::Identity(n, n) -
      inv_sqrt_deg.asDiagonal() * w * inv_sqrt_deg.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success) {
    throw DomainError("Laplacian eigendecomposition failed to converge");
  }

  // Keep the eigenvectors of all eigenvalues below 0.9, never fewer than
  // one; eigenvalues come back in ascending order.
  int k = 0;
  while (k < n && solver.eigenvalues()(k) < 0.9) ++k;
  k = std::max(k, 1);

  Eigen::MatrixXd embed = solver.eigenvectors().leftCols(k);
  Eigen::RowVectorXd mean = embed.colwise().mean();
  embed.rowwise() -= mean;

  return {embed.norm(), k};
}

double eccentricity(const SimilarityMatrix& sim) {
  return eccentricity_full(sim).value;
}

std::vector<double> eccentricity_batch(std::span<const SimilarityMatrix> sims,
                                       bool parallel) {
  std::vector<double> out(sims.size(), 0.0);
  std::exception_ptr failure;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(sims.size()); ++i) {
    try {
      out[static_cast<std::size_t>(i)] =
          eccentricity(sims[static_cast<std::size_t>(i)]);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

double luq(const SimilarityMatrix& sim) {
  validate_similarity(sim);
  const int n = sim.size();
  if (n < 2) throw DomainError("luq needs at least two samples");
  double mean_of_means = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j != i) row += sim.at(i, j);
    }
    mean_of_means += row / static_cast<double>(n - 1);
  }
  return 1.0 - mean_of_means / static_cast<double>(n);
}

std::vector<double> quantile_bin_edges(std::vector<double> values, int bins) {
  if (values.empty()) throw DomainError("quantile edges need a population");
  if (bins < 2) throw DomainError("need at least two bins");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  std::vector<double> edges;
  edges.reserve(static_cast<std::size_t>(bins) - 1);
  for (int k = 1; k < bins; ++k) {
    double pos = static_cast<double>(k) / static_cast<double>(bins) *
                 static_cast<double>(n - 1);
    auto lo = static_cast<std::size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    if (frac == 0.0 || lo + 1 == n) {
      edges.push_back(values[lo]);
    } else {
      edges.push_back(values[lo] + frac * (values[lo + 1] - values[lo]));
    }
  }
  return edges;
}

std::map<std::string, double> quantile_bin_normalize(
    std::span<const RawScoreRecord> records) {
  if (records.empty()) {
    throw DomainError("cannot normalize an empty score population");
  }
  const Method method = records.front().method;
  if (method == Method::DirectPrompt) {
    throw DomainError(
        "direct-prompt scores are already confidences; normalization does "
        "not apply");
  }
  for (const auto& r : records) {
    if (r.method != method) {
      throw DomainError("normalization population mixes methods");
    }
    if (!std::isfinite(r.raw_value)) {
      throw DomainError("raw score for '" + r.argument_id + "' is not finite");
    }
  }

  constexpr int kBins = 20;
  std::vector<double> population;
  population.reserve(records.size());
  for (const auto& r : records) population.push_back(r.raw_value);

  std::map<std::string, double> out;
  auto [lo, hi] = std::minmax_element(population.begin(), population.end());
  if (*lo == *hi) {
    // Degenerate population: no ordering information, everyone sits mid-scale.
    for (const auto& r : records) out[r.argument_id] = 0.5;
    return out;
  }

  std::vector<double> edges = quantile_bin_edges(population, kBins);
  for (const auto& r : records) {
    // Bin index = number of edges strictly below the value, so a value that
    // ties an edge falls into the lower bin.
    auto it = std::lower_bound(edges.begin(), edges.end(), r.raw_value);
    int bin = static_cast<int>(it - edges.begin());
    double confidence =
        1.0 - (static_cast<double>(bin) + 0.5) / static_cast<double>(kBins);
    if (!out.emplace(r.argument_id, confidence).second) {
      throw DomainError("duplicate argument id '" + r.argument_id +
                        "' in normalization population");
    }
  }
  return out;
}

}  // namespace arguq::uq

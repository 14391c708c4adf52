#pragma once

// Uncertainty quantification over sampled LLM generations.
//
// Four estimators feed the argumentation pipeline:
//  - direct prompting: the model verbalizes a confidence, parsed from text
//  - semantic entropy: Monte Carlo entropy over bidirectional-entailment
//    clusters weighted by sequence likelihood
//  - eccentricity: spread of spectral graph-Laplacian embeddings of the
//    sample similarity graph
//  - LUQ: one minus the mean pairwise entailment-based similarity
//
// Direct prompting yields confidences directly; the other three yield raw
// uncertainty scores on arbitrary scales, which quantile_bin_normalize maps
// onto comparable confidences per run.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arguq/gateways.hpp"

namespace arguq::uq {

enum class Method { DirectPrompt, SemanticEntropy, Eccentricity, Luq };

// Raw score orientation: verbalized confidences are already "higher is more
// confident"; sampling-based scores are "higher is more uncertain".
enum class Direction { ConfidenceLike, UncertaintyLike };

Direction direction_of(Method m);
std::string method_name(Method m);
std::optional<Method> method_from_name(std::string_view name);

struct RawScoreRecord {
  std::string argument_id;
  Method method = Method::DirectPrompt;
  double raw_value = 0.0;
  Direction direction = Direction::ConfidenceLike;
};

// Result of greedy bidirectional-entailment clustering. cluster_logprob
// holds the log of each cluster's likelihood-weighted probability; the
// probabilities sum to one.
struct ClusterPartition {
  std::vector<int> assignment;          // sample index -> cluster index
  std::vector<double> cluster_logprob;  // cluster index -> log p(cluster)
};

// Symmetric matrix of pairwise sample similarities in [0,1], unit diagonal.
class SimilarityMatrix {
 public:
  explicit SimilarityMatrix(int n);
  int size() const { return n_; }
  double at(int i, int j) const { return values_[idx(i, j)]; }
  void set(int i, int j, double v) { values_[idx(i, j)] = v; }

 private:
  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) +
           static_cast<std::size_t>(j);
  }
  int n_;
  std::vector<double> values_;
};

enum class SimilarityMode {
  // Softmax over all three logits, take the entailment probability.
  EntailSoftmaxAllClasses,
  // Two-way softmax between entailment and contradiction only.
  EntailVsContradict,
};

// Scans left to right for the first decimal number that lands in [0,1]
// (a trailing '%' divides by 100 first); nullopt when none qualifies.
std::optional<double> parse_verbalized_confidence(std::string_view text);

// Greedy clustering: each sample joins the first existing cluster whose
// representative (first member) it entails in both directions, judged by
// the argmax NLI class; otherwise it opens a new cluster. Cluster
// probabilities are likelihood-weighted, so every sample needs a
// seq_logprob (CapabilityError otherwise).
ClusterPartition cluster_bidirectional_entailment(
    std::span<const gateways::GenerationSample> samples,
    gateways::NliGateway& nli);

// Discrete entropy estimate: mean negative log cluster probability.
double semantic_entropy(const ClusterPartition& partition);

// Queries every ordered pair (i != j) and symmetrizes by averaging the two
// directions. Requires at least two samples.
SimilarityMatrix build_similarity_matrix(std::span<const std::string> texts,
                                         gateways::NliGateway& nli,
                                         SimilarityMode mode);

// Entailment probability of a single judgment under the given mode.
double entail_similarity(const gateways::NliJudgment& judgment,
                         SimilarityMode mode);

// Spectral spread of the samples: build the symmetric normalized graph
// Laplacian of the similarity matrix, embed each sample with the
// eigenvectors whose eigenvalues fall below 0.9 (at least one), center the
// embeddings and return their Frobenius norm.
double eccentricity(const SimilarityMatrix& sim);

struct EccentricityResult {
  double value = 0.0;
  int embedding_dim = 0;  // number of Laplacian eigenvectors used
};
EccentricityResult eccentricity_full(const SimilarityMatrix& sim);

// Batch variant over many matrices; with parallel=true the loop runs under
// OpenMP, producing values identical to the serial path.
std::vector<double> eccentricity_batch(std::span<const SimilarityMatrix> sims,
                                       bool parallel);

// 1 - mean over samples of their mean similarity to every other sample.
// The matrix must come from SimilarityMode::EntailVsContradict.
double luq(const SimilarityMatrix& sim);

// Maps raw uncertainty scores of one method onto confidences through 20
// equal-mass quantile bins over the whole population: bin edges interpolate
// linearly between order statistics, values tied with an edge fall into the
// lower bin, and bin b maps to confidence 1 - (b + 0.5) / 20. A population
// with a single distinct value collapses to 0.5 everywhere. DirectPrompt
// records must not be passed here; their raw values already are confidences.
std::map<std::string, double> quantile_bin_normalize(
    std::span<const RawScoreRecord> records);

// Internal edges of the equal-mass binning, exposed for tests.
std::vector<double> quantile_bin_edges(std::vector<double> values, int bins);

}  // namespace arguq::uq

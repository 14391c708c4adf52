#pragma once

// Backend gateways: chat-completion LLMs and NLI scorers.
//
// Two transport families implement each interface. HTTP gateways speak an
// OpenAI-style chat-completions protocol (and a small /nli endpoint for
// entailment logits); mock gateways synthesize responses deterministically
// from a JSON script so entire experiments can run offline and reproduce
// byte-for-byte. A content-addressed disk cache can wrap either.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace arguq::gateways {

struct SamplingParams {
  double temperature = 0.7;
  double top_p = 0.95;
  double repetition_penalty = 1.0;
  int max_tokens = 256;
  bool want_logprobs = false;
};

// Argument generation and verbalized-confidence prompting share one set of
// sampling knobs; uncertainty resampling runs fully stochastic.
inline constexpr SamplingParams kGenerationDefaults{0.7, 0.95, 1.0, 256, false};
inline constexpr SamplingParams kUqSamplingDefaults{1.0, 1.0, 1.0, 256, false};

struct GenerationSample {
  std::string text;
  // Sum of token log-probabilities; absent when the backend cannot supply it.
  std::optional<double> seq_logprob;
};

struct NliJudgment {
  double entail = 0.0;
  double neutral = 0.0;
  double contradict = 0.0;
};

struct Capabilities {
  std::string name;
  bool supports_logprobs = false;
};

// Observable call accounting, mainly for tests: `attempts` counts transport
// attempts including retries, `upstream_calls` counts calls that reached the
// wrapped/underlying backend (i.e. cache misses when a cache is involved).
struct GatewayStats {
  std::atomic<std::uint64_t> calls{0};
  std::atomic<std::uint64_t> attempts{0};
  std::atomic<std::uint64_t> upstream_calls{0};
  std::atomic<std::uint64_t> cache_hits{0};
};

class LlmGateway {
 public:
  virtual ~LlmGateway() = default;
  // Returns exactly n_samples generations for the prompt.
  virtual std::vector<GenerationSample> chat_complete(
      const std::string& prompt, const SamplingParams& params,
      int n_samples) = 0;
  virtual Capabilities capabilities() const = 0;
  const GatewayStats& stats() const { return stats_; }

 protected:
  GatewayStats stats_;
};

class NliGateway {
 public:
  virtual ~NliGateway() = default;
  // Raw (unnormalized) logits for entail / neutral / contradict.
  virtual NliJudgment nli_score(const std::string& premise,
                                const std::string& hypothesis) = 0;
  virtual std::string name() const = 0;
  const GatewayStats& stats() const { return stats_; }

 protected:
  GatewayStats stats_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double backoff_factor = 2.0;
};

// ---- mock backends -------------------------------------------------------

// Scripts are JSON documents with an "llm" and/or "nli" section:
//
//   {"llm": {"name": "...", "supports_logprobs": true, "seed": 7,
//            "rules": [
//              {"match": "<exact prompt>", "samples": [{"text": ..,
//               "seq_logprob": ..}, ...]},
//              {"contains": "<substring>", "kind": "confidence"},
//              {"contains": "<substring>", "kind": "argument",
//               "na_rate": 0.15},
//              {"contains": "<substring>", "kind": "error",
//               "message": "..."}]},
//    "nli": {"name": "...", "seed": 9,
//            "pairs": [{"premise": .., "hypothesis": .., "entail": ..,
//                       "neutral": .., "contradict": ..}]}}
//
// The first matching rule wins. Scripted "samples" cycle when more samples
// are requested than provided. The procedural kinds derive their text from
// a hash of (prompt, params, seed, sample index), so identical requests on
// the same script always produce identical output, in any call order.
class MockLlmGateway : public LlmGateway {
 public:
  explicit MockLlmGateway(nlohmann::json script);
  std::vector<GenerationSample> chat_complete(const std::string& prompt,
                                              const SamplingParams& params,
                                              int n_samples) override;
  Capabilities capabilities() const override;

 private:
  nlohmann::json script_;
  std::uint64_t seed_ = 0;
};

class MockNliGateway : public NliGateway {
 public:
  explicit MockNliGateway(nlohmann::json script);
  NliJudgment nli_score(const std::string& premise,
                        const std::string& hypothesis) override;
  std::string name() const override;

 private:
  nlohmann::json script_;
  std::uint64_t seed_ = 0;
};

// Parses the script file; hand each gateway its own section afterwards.
nlohmann::json load_mock_script(const std::filesystem::path& path);

// ---- HTTP backends -------------------------------------------------------

struct HttpLlmConfig {
  std::string base_url;          // e.g. http://host:8000/v1
  std::string model;             // value of the "model" request field
  std::string api_key;           // sent as a bearer token when non-empty
  bool supports_logprobs = false;
  bool accepts_repetition_penalty = false;
  int max_in_flight = 4;         // per-backend concurrent request bound
  std::chrono::seconds timeout{30};
  RetryPolicy retry;
};

class HttpLlmGateway : public LlmGateway {
 public:
  explicit HttpLlmGateway(HttpLlmConfig config);
  ~HttpLlmGateway() override;
  std::vector<GenerationSample> chat_complete(const std::string& prompt,
                                              const SamplingParams& params,
                                              int n_samples) override;
  Capabilities capabilities() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct HttpNliConfig {
  std::string base_url;          // POST {base_url}/nli
  int max_in_flight = 4;
  std::chrono::seconds timeout{30};
  RetryPolicy retry;
};

class HttpNliGateway : public NliGateway {
 public:
  explicit HttpNliGateway(HttpNliConfig config);
  ~HttpNliGateway() override;
  NliJudgment nli_score(const std::string& premise,
                        const std::string& hypothesis) override;
  std::string name() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ---- disk cache ----------------------------------------------------------

// One JSON file per response, named by the SHA-256 of
// (backend name, prompt or premise/hypothesis pair, sampling params,
// sample index). Writes go through a temp file plus rename, so concurrent
// writers degrade to last-writer-wins and readers never see torn files.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);
  std::optional<nlohmann::json> get(const std::string& key_material) const;
  void put(const std::string& key_material, const nlohmann::json& payload) const;

 private:
  std::filesystem::path dir_;
};

class CachingLlmGateway : public LlmGateway {
 public:
  CachingLlmGateway(std::shared_ptr<LlmGateway> inner, ResponseCache cache);
  std::vector<GenerationSample> chat_complete(const std::string& prompt,
                                              const SamplingParams& params,
                                              int n_samples) override;
  Capabilities capabilities() const override;

 private:
  std::shared_ptr<LlmGateway> inner_;
  ResponseCache cache_;
};

class CachingNliGateway : public NliGateway {
 public:
  CachingNliGateway(std::shared_ptr<NliGateway> inner, ResponseCache cache);
  NliJudgment nli_score(const std::string& premise,
                        const std::string& hypothesis) override;
  std::string name() const override;

 private:
  std::shared_ptr<NliGateway> inner_;
  ResponseCache cache_;
};

// Hex SHA-256 of arbitrary bytes (used for cache keys and config hashes).
std::string sha256_hex(std::string_view data);

// Canonical JSON used whenever sampling params feed a cache key.
nlohmann::ordered_json params_to_json(const SamplingParams& params);

}  // namespace arguq::gateways

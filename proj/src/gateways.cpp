#include "arguq/gateways.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <semaphore>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "arguq/common.hpp"
#include "arguq/rng.hpp"

namespace arguq::gateways {

namespace {

constexpr char kSep = '\x1f';  // unambiguous field separator for key material

// Default phrase bank for procedurally synthesized mock arguments. Small on
// purpose: repeated texts are what make clustering and similarity matrices
// exercise their interesting paths.
const char* const kPhrases[] = {
    "Multiple independent sources corroborate the statement.",
    "The statement is consistent with well documented evidence.",
    "Established reference material directly confirms this point.",
    "Expert consensus lines up with the underlying assertion.",
    "Observed data fits the claim without contradiction.",
    "The claim contradicts widely reported findings.",
    "Reliable references dispute the central premise.",
    "Key figures cited in the claim do not match the record.",
    "The reasoning overstates what the available evidence shows.",
    "Documented counterexamples undermine the statement.",
};
constexpr std::size_t kPhraseCount = std::size(kPhrases);

std::uint64_t mix_key(std::uint64_t seed, const std::string& prompt,
                      const std::string& params_dump) {
  std::uint64_t h = seed;
  h ^= fnv1a64(prompt) * 0x9E3779B97F4A7C15ull;
  h ^= fnv1a64(params_dump) + 0x632BE59BD9B4E019ull;
  return h;
}

double scripted_or(const nlohmann::json& j, const char* field, double fallback) {
  auto it = j.find(field);
  return it == j.end() ? fallback : it->get<double>();
}

void sleep_backoff(const RetryPolicy& policy, int attempt) {
  if (policy.initial_backoff.count() <= 0) return;
  auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(
      policy.initial_backoff *
      std::pow(policy.backoff_factor, static_cast<double>(attempt - 1)));
  std::this_thread::sleep_for(wait);
}

// Splits "http://host:port/prefix" into client origin and path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("backend URL '" + url + "' lacks a scheme");
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

// Bounded in-flight requests per backend instance.
class RequestSlot {
 public:
  explicit RequestSlot(int limit) : sem_(limit) {}
  struct Guard {
    std::counting_semaphore<1024>& sem;
    ~Guard() { sem.release(); }
  };
  Guard acquire() {
    sem_.acquire();
    return Guard{sem_};
  }

 private:
  std::counting_semaphore<1024> sem_;
};

}  // namespace

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) !=
      1) {
    throw Error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

nlohmann::ordered_json params_to_json(const SamplingParams& params) {
  nlohmann::ordered_json j;
  j["temperature"] = params.temperature;
  j["top_p"] = params.top_p;
  j["repetition_penalty"] = params.repetition_penalty;
  j["max_tokens"] = params.max_tokens;
  j["want_logprobs"] = params.want_logprobs;
  return j;
}

nlohmann::json load_mock_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open mock script '" + path.string() + "'");
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("mock script '" + path.string() +
                      "' is not valid JSON: " + e.what());
  }
}

// ---- MockLlmGateway --------------------------------------------------------

MockLlmGateway::MockLlmGateway(nlohmann::json script)
    : script_(std::move(script)) {
  if (!script_.is_object()) {
    throw ConfigError("mock llm script section must be a JSON object");
  }
  seed_ = script_.value("seed", 0ull);
  for (const auto& rule : script_.value("rules", nlohmann::json::array())) {
    if (!rule.contains("match") && !rule.contains("contains")) {
      throw ConfigError("mock llm rule needs a 'match' or 'contains' key");
    }
    if (!rule.contains("samples") && !rule.contains("kind")) {
      throw ConfigError("mock llm rule needs 'samples' or a 'kind'");
    }
  }
}

Capabilities MockLlmGateway::capabilities() const {
  return {script_.value("name", std::string("mock-llm")),
          script_.value("supports_logprobs", false)};
}

std::vector<GenerationSample> MockLlmGateway::chat_complete(
    const std::string& prompt, const SamplingParams& params, int n_samples) {
  stats_.calls++;
  stats_.attempts++;
  stats_.upstream_calls++;
  if (n_samples < 1) throw DomainError("n_samples must be at least 1");

  const bool attach_logprobs =
      params.want_logprobs && script_.value("supports_logprobs", false);
  const std::string params_dump = params_to_json(params).dump();
  const std::uint64_t key = mix_key(seed_, prompt, params_dump);

  // The matched rule must outlive the loop, so iterate the stored script
  // rather than a value() copy.
  const nlohmann::json* rule = nullptr;
  if (auto rules = script_.find("rules"); rules != script_.end()) {
    for (const auto& r : *rules) {
      if (r.contains("match") && r["match"].get<std::string>() == prompt) {
        rule = &r;
        break;
      }
      if (r.contains("contains") &&
          prompt.find(r["contains"].get<std::string>()) != std::string::npos) {
        rule = &r;
        break;
      }
    }
  }

  auto synth_logprob = [&](const std::string& text) {
    // Tied to (prompt, text) so identical regenerations carry identical
    // likelihoods, the way a deterministic scorer would.
    return -(1.0 + 14.0 * hash_unit(key ^ fnv1a64(text)));
  };

  std::vector<GenerationSample> out;
  out.reserve(static_cast<std::size_t>(n_samples));

  if (rule && rule->contains("samples")) {
    const auto& scripted = (*rule)["samples"];
    if (!scripted.is_array() || scripted.empty()) {
      throw ConfigError("mock llm rule 'samples' must be a non-empty array");
    }
    for (int i = 0; i < n_samples; ++i) {
      const auto& s = scripted[static_cast<std::size_t>(i) % scripted.size()];
      GenerationSample sample;
      sample.text = s.at("text").get<std::string>();
      if (attach_logprobs) {
        sample.seq_logprob = s.contains("seq_logprob")
                                 ? s["seq_logprob"].get<double>()
                                 : synth_logprob(sample.text);
      }
      out.push_back(std::move(sample));
    }
    return out;
  }

  const std::string kind = rule ? rule->value("kind", std::string("argument"))
                                : std::string("argument");
  if (kind == "error") {
    throw GatewayError(rule->value("message", std::string("scripted failure")));
  }

  const double na_rate = rule ? rule->value("na_rate", 0.0) : 0.0;
  for (int i = 0; i < n_samples; ++i) {
    SubStream stream(key, static_cast<std::uint64_t>(i));
    GenerationSample sample;
    if (kind == "fixed") {
      sample.text = rule->at("text").get<std::string>();
    } else if (kind == "confidence") {
      double v = 0.05 + 0.9 * stream.next_double();
      char buf[16];
      std::snprintf(buf, sizeof buf, "%.2f", v);
      sample.text = buf;
    } else if (kind == "argument") {
      if (stream.next_double() < na_rate) {
        sample.text = "N/A";
      } else {
        // Each prompt gets a small personal pool of phrases, so repeated
        // draws collide often enough to form non-trivial clusters.
        std::size_t pool_size = 1 + ((key >> 17) % 4);
        std::size_t pool_offset = (key >> 23) % kPhraseCount;
        std::size_t pick = stream.next_index(pool_size);
        sample.text = kPhrases[(pool_offset + pick) % kPhraseCount];
      }
    } else {
      throw ConfigError("mock llm rule kind '" + kind + "' is unknown");
    }
    if (attach_logprobs) sample.seq_logprob = synth_logprob(sample.text);
    out.push_back(std::move(sample));
  }
  return out;
}

// ---- MockNliGateway --------------------------------------------------------

MockNliGateway::MockNliGateway(nlohmann::json script)
    : script_(std::move(script)) {
  if (!script_.is_object()) {
    throw ConfigError("mock nli script section must be a JSON object");
  }
  seed_ = script_.value("seed", 0ull);
  for (const auto& pair : script_.value("pairs", nlohmann::json::array())) {
    if (!pair.contains("premise") || !pair.contains("hypothesis")) {
      throw ConfigError("mock nli pair needs 'premise' and 'hypothesis'");
    }
  }
}

std::string MockNliGateway::name() const {
  return script_.value("name", std::string("mock-nli"));
}

NliJudgment MockNliGateway::nli_score(const std::string& premise,
                                      const std::string& hypothesis) {
  stats_.calls++;
  stats_.attempts++;
  stats_.upstream_calls++;

  for (const auto& pair : script_.value("pairs", nlohmann::json::array())) {
    if (pair["premise"].get<std::string>() == premise &&
        pair["hypothesis"].get<std::string>() == hypothesis) {
      return {scripted_or(pair, "entail", 0.0),
              scripted_or(pair, "neutral", 0.0),
              scripted_or(pair, "contradict", 0.0)};
    }
  }

  // Textually identical statements entail each other, always.
  if (premise == hypothesis) return {4.2, -1.3, -3.8};

  std::uint64_t h =
      seed_ ^ fnv1a64(premise + std::string(1, kSep) + hypothesis);
  SubStream stream(h, 0);
  double jitter[3] = {0.4 * (stream.next_double() - 0.5),
                      0.4 * (stream.next_double() - 0.5),
                      0.4 * (stream.next_double() - 0.5)};
  switch (stream.next_index(4)) {
    case 0:
      return {2.8 + jitter[0], -0.2 + jitter[1], -2.4 + jitter[2]};
    case 3:
      return {-2.2 + jitter[0], -0.5 + jitter[1], 2.9 + jitter[2]};
    default:
      return {-0.7 + jitter[0], 2.4 + jitter[1], -1.0 + jitter[2]};
  }
}

// ---- HTTP gateways ---------------------------------------------------------

namespace {

// Shared POST-with-retries helper. `parse` must throw ProtocolError on any
// payload it cannot accept; protocol errors are never retried.
nlohmann::json post_json_with_retries(httplib::Client& client,
                                      const std::string& path,
                                      const httplib::Headers& headers,
                                      const std::string& body,
                                      const RetryPolicy& policy,
                                      GatewayStats& stats,
                                      const std::string& what) {
  std::string last_error;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    stats.attempts++;
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(what + ": response is not JSON: " + e.what());
      }
    } else if (res->status >= 500 || res->status == 429) {
      last_error = "HTTP " + std::to_string(res->status);
    } else {
      throw GatewayError(what + ": HTTP " + std::to_string(res->status) +
                         " (not retryable): " + res->body);
    }
    if (attempt < policy.max_attempts) sleep_backoff(policy, attempt);
  }
  throw GatewayError(what + " failed after " +
                     std::to_string(policy.max_attempts) +
                     " attempts; last error: " + last_error);
}

}  // namespace

struct HttpLlmGateway::Impl {
  HttpLlmConfig cfg;
  std::string prefix;
  httplib::Client client;
  RequestSlot slots;
  std::once_flag rep_penalty_warned;

  Impl(HttpLlmConfig c, std::string origin, std::string path_prefix)
      : cfg(std::move(c)),
        prefix(std::move(path_prefix)),
        client(origin),
        slots(cfg.max_in_flight) {
    client.set_connection_timeout(cfg.timeout);
    client.set_read_timeout(cfg.timeout);
    client.set_write_timeout(cfg.timeout);
  }
};

HttpLlmGateway::HttpLlmGateway(HttpLlmConfig config) {
  if (config.base_url.empty()) throw ConfigError("LLM backend URL is empty");
  if (config.model.empty()) throw ConfigError("LLM model name is empty");
  if (config.max_in_flight < 1 || config.max_in_flight > 1024) {
    throw ConfigError("LLM max_in_flight must lie in [1,1024]");
  }
  if (config.retry.max_attempts < 1) {
    throw ConfigError("LLM retry budget must allow at least one attempt");
  }
  auto [origin, prefix] = split_base_url(config.base_url);
  impl_ = std::make_unique<Impl>(std::move(config), origin, prefix);
}

HttpLlmGateway::~HttpLlmGateway() = default;

Capabilities HttpLlmGateway::capabilities() const {
  return {impl_->cfg.model, impl_->cfg.supports_logprobs};
}

std::vector<GenerationSample> HttpLlmGateway::chat_complete(
    const std::string& prompt, const SamplingParams& params, int n_samples) {
  stats_.calls++;
  stats_.upstream_calls++;
  if (n_samples < 1) throw DomainError("n_samples must be at least 1");

  nlohmann::ordered_json body;
  body["model"] = impl_->cfg.model;
  body["messages"] = {{{"role", "user"}, {"content", prompt}}};
  body["temperature"] = params.temperature;
  body["top_p"] = params.top_p;
  body["n"] = n_samples;
  body["max_tokens"] = params.max_tokens;
  if (impl_->cfg.accepts_repetition_penalty) {
    body["repetition_penalty"] = params.repetition_penalty;
  } else if (params.repetition_penalty != 1.0) {
    std::call_once(impl_->rep_penalty_warned, [&] {
      std::cerr << "warning: backend '" << impl_->cfg.model
                << "' does not accept repetition_penalty; dropping "
                << params.repetition_penalty << "\n";
    });
  }
  const bool ask_logprobs = params.want_logprobs && impl_->cfg.supports_logprobs;
  if (ask_logprobs) body["logprobs"] = true;

  httplib::Headers headers;
  if (!impl_->cfg.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + impl_->cfg.api_key);
  }

  auto slot = impl_->slots.acquire();
  nlohmann::json reply = post_json_with_retries(
      impl_->client, impl_->prefix + "/chat/completions", headers, body.dump(),
      impl_->cfg.retry, stats_, "chat completion");

  auto choices = reply.find("choices");
  if (choices == reply.end() || !choices->is_array() || choices->empty()) {
    throw ProtocolError("chat completion reply lacks a 'choices' array");
  }
  if (static_cast<int>(choices->size()) != n_samples) {
    throw ProtocolError("asked for " + std::to_string(n_samples) +
                        " samples, got " + std::to_string(choices->size()));
  }

  std::vector<GenerationSample> out;
  out.reserve(choices->size());
  for (const auto& choice : *choices) {
    GenerationSample sample;
    try {
      sample.text = choice.at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(std::string("malformed chat choice: ") + e.what());
    }
    // Logprobs are summed over content tokens when present; a backend that
    // cannot produce them simply leaves the field out and the sample's
    // seq_logprob stays absent.
    auto lp = choice.find("logprobs");
    if (ask_logprobs && lp != choice.end() && !lp->is_null()) {
      auto content = lp->find("content");
      if (content != lp->end() && content->is_array()) {
        double total = 0.0;
        try {
          for (const auto& tok : *content) {
            total += tok.at("logprob").get<double>();
          }
        } catch (const nlohmann::json::exception& e) {
          throw ProtocolError(std::string("malformed logprobs block: ") +
                              e.what());
        }
        sample.seq_logprob = total;
      }
    }
    out.push_back(std::move(sample));
  }
  return out;
}

struct HttpNliGateway::Impl {
  HttpNliConfig cfg;
  std::string prefix;
  httplib::Client client;
  RequestSlot slots;

  Impl(HttpNliConfig c, std::string origin, std::string path_prefix)
      : cfg(std::move(c)),
        prefix(std::move(path_prefix)),
        client(origin),
        slots(cfg.max_in_flight) {
    client.set_connection_timeout(cfg.timeout);
    client.set_read_timeout(cfg.timeout);
    client.set_write_timeout(cfg.timeout);
  }
};

HttpNliGateway::HttpNliGateway(HttpNliConfig config) {
  if (config.base_url.empty()) throw ConfigError("NLI backend URL is empty");
  if (config.max_in_flight < 1 || config.max_in_flight > 1024) {
    throw ConfigError("NLI max_in_flight must lie in [1,1024]");
  }
  auto [origin, prefix] = split_base_url(config.base_url);
  impl_ = std::make_unique<Impl>(std::move(config), origin, prefix);
}

HttpNliGateway::~HttpNliGateway() = default;

std::string HttpNliGateway::name() const {
  return "nli@" + impl_->cfg.base_url;
}

NliJudgment HttpNliGateway::nli_score(const std::string& premise,
                                      const std::string& hypothesis) {
  stats_.calls++;
  stats_.upstream_calls++;

  nlohmann::ordered_json body;
  body["premise"] = premise;
  body["hypothesis"] = hypothesis;

  auto slot = impl_->slots.acquire();
  nlohmann::json reply =
      post_json_with_retries(impl_->client, impl_->prefix + "/nli", {},
                             body.dump(), impl_->cfg.retry, stats_, "nli");
  try {
    return {reply.at("entail").get<double>(),
            reply.at("neutral").get<double>(),
            reply.at("contradict").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed nli reply: ") + e.what());
  }
}

// ---- ResponseCache ---------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) {
    throw ConfigError("cannot create cache directory '" + dir_.string() +
                      "': " + ec.message());
  }
}

std::optional<nlohmann::json> ResponseCache::get(
    const std::string& key_material) const {
  auto file = dir_ / (sha256_hex(key_material) + ".json");
  std::ifstream in(file);
  if (!in) return std::nullopt;
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;  // torn or stale entry: treat as a miss
  }
}

void ResponseCache::put(const std::string& key_material,
                        const nlohmann::json& payload) const {
  auto file = dir_ / (sha256_hex(key_material) + ".json");
  std::ostringstream tmp_name;
  tmp_name << file.filename().string() << ".tmp."
           << std::hash<std::thread::id>{}(std::this_thread::get_id());
  auto tmp = dir_ / tmp_name.str();
  {
    std::ofstream out(tmp);
    if (!out) return;  // cache is best-effort; a failed write is not fatal
    out << payload.dump();
  }
  std::error_code ec;
  std::filesystem::rename(tmp, file, ec);
  if (ec) std::filesystem::remove(tmp, ec);
}

// ---- caching decorators ----------------------------------------------------

namespace {

std::string llm_sample_key(const std::string& backend,
                           const std::string& prompt,
                           const std::string& params_dump, int index) {
  std::string key;
  key.reserve(backend.size() + prompt.size() + params_dump.size() + 16);
  key += backend;
  key += kSep;
  key += prompt;
  key += kSep;
  key += params_dump;
  key += kSep;
  key += std::to_string(index);
  return key;
}

}  // namespace

CachingLlmGateway::CachingLlmGateway(std::shared_ptr<LlmGateway> inner,
                                     ResponseCache cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

Capabilities CachingLlmGateway::capabilities() const {
  return inner_->capabilities();
}

std::vector<GenerationSample> CachingLlmGateway::chat_complete(
    const std::string& prompt, const SamplingParams& params, int n_samples) {
  stats_.calls++;
  const std::string backend = inner_->capabilities().name;
  const std::string params_dump = params_to_json(params).dump();

  std::vector<GenerationSample> out;
  out.reserve(static_cast<std::size_t>(n_samples));
  bool all_hit = true;
  for (int i = 0; i < n_samples && all_hit; ++i) {
    auto hit = cache_.get(llm_sample_key(backend, prompt, params_dump, i));
    if (!hit) {
      all_hit = false;
      break;
    }
    GenerationSample sample;
    sample.text = hit->at("text").get<std::string>();
    if (hit->contains("seq_logprob") && !(*hit)["seq_logprob"].is_null()) {
      sample.seq_logprob = (*hit)["seq_logprob"].get<double>();
    }
    out.push_back(std::move(sample));
  }
  if (all_hit) {
    stats_.cache_hits++;
    return out;
  }

  out = inner_->chat_complete(prompt, params, n_samples);
  stats_.upstream_calls++;
  for (int i = 0; i < n_samples; ++i) {
    nlohmann::ordered_json payload;
    payload["text"] = out[static_cast<std::size_t>(i)].text;
    if (out[static_cast<std::size_t>(i)].seq_logprob) {
      payload["seq_logprob"] = *out[static_cast<std::size_t>(i)].seq_logprob;
    } else {
      payload["seq_logprob"] = nullptr;
    }
    cache_.put(llm_sample_key(backend, prompt, params_dump, i), payload);
  }
  return out;
}

CachingNliGateway::CachingNliGateway(std::shared_ptr<NliGateway> inner,
                                     ResponseCache cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

std::string CachingNliGateway::name() const { return inner_->name(); }

NliJudgment CachingNliGateway::nli_score(const std::string& premise,
                                         const std::string& hypothesis) {
  stats_.calls++;
  std::string key;
  key.reserve(name().size() + premise.size() + hypothesis.size() + 4);
  key += name();
  key += kSep;
  key += premise;
  key += kSep;
  key += hypothesis;
  key += kSep;
  key += '0';
  if (auto hit = cache_.get(key)) {
    stats_.cache_hits++;
    return {hit->at("entail").get<double>(), hit->at("neutral").get<double>(),
            hit->at("contradict").get<double>()};
  }
  NliJudgment j = inner_->nli_score(premise, hypothesis);
  stats_.upstream_calls++;
  nlohmann::ordered_json payload;
  payload["entail"] = j.entail;
  payload["neutral"] = j.neutral;
  payload["contradict"] = j.contradict;
  cache_.put(key, payload);
  return j;
}

}  // namespace arguq::gateways

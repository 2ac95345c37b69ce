#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "embkit/data.hpp"
#include "embkit/error.hpp"
#include "embkit/tokenizer.hpp"

namespace embkit {

inline constexpr std::string_view kSyntheticTask = "synthetic-retrieval";

// ISO-639 codes of the generation languages with the English names used in
// the prompt.
inline constexpr std::array<std::pair<std::string_view, std::string_view>, 20> kGenerationLanguages{{
    {"en", "English"},    {"fr", "French"},   {"es", "Spanish"},  {"de", "German"},
    {"zh", "Chinese"},    {"it", "Italian"},  {"ja", "Japanese"}, {"ko", "Korean"},
    {"fa", "Persian"},    {"hi", "Hindi"},    {"id", "Indonesian"}, {"ar", "Arabic"},
    {"bn", "Bengali"},    {"fi", "Finnish"},  {"sw", "Swahili"},  {"te", "Telugu"},
    {"th", "Thai"},       {"jv", "Javanese"}, {"ms", "Malay"},    {"sq", "Albanian"},
}};

inline std::optional<std::string> language_name(std::string_view iso) {
  for (const auto& [code, name] : kGenerationLanguages) {
    if (code == iso) {
      return std::string(name);
    }
  }
  return std::nullopt;
}

inline std::size_t whitespace_token_count(std::string_view text) {
  return normalized_tokens(text, false).size();
}

// Reservoir sample (Algorithm R) of n records whose whitespace-token count
// lies in [min_len, max_len].
template <typename Range>
std::vector<Document> sample_documents(const Range& stream, std::size_t n, std::uint64_t seed,
                                       std::size_t min_len = 100, std::size_t max_len = 1000) {
  std::vector<Document> reservoir;
  reservoir.reserve(n);
  std::mt19937_64 rng(seed);
  std::size_t seen = 0;
  for (const Document& d : stream) {
    const std::size_t len = whitespace_token_count(d.text);
    if (len < min_len || len > max_len) {
      continue;
    }
    ++seen;
    if (reservoir.size() < n) {
      reservoir.push_back(d);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, seen - 1);
      const std::size_t j = pick(rng);
      if (j < n) {
        reservoir[j] = d;
      }
    }
  }
  if (reservoir.size() < n) {
    throw Error(ErrorCode::InsufficientDocuments, std::to_string(seen) + " documents qualify, " +
                                                      std::to_string(n) + " requested");
  }
  return reservoir;
}

inline constexpr std::string_view kPromptHead =
    "You are a curious AI assistant, please generate one specific and valuable question based on the "
    "following text. If the text is not ";
inline constexpr std::string_view kPromptMid = ", please reply with Non-";
inline constexpr std::string_view kPromptTail =
    ". The generated question should revolve around the core content of this text, and avoid using "
    "pronouns (e.g., 'this'). Note that you should generate only one question, without including "
    "additional content:\n";

// Single pass substitution: placeholder-like text inside the document or the
// language name is never expanded.
inline std::string render_prompt(std::string_view document, std::string_view language) {
  std::string out;
  out.reserve(kPromptHead.size() + kPromptMid.size() + kPromptTail.size() + 2 * language.size() +
              document.size());
  out.append(kPromptHead);
  out.append(language);
  out.append(kPromptMid);
  out.append(language);
  out.append(kPromptTail);
  out.append(document);
  return out;
}

struct GenerationRequest {
  std::string document;
  std::string language;  // ISO code
  std::string rendered_prompt;
};

inline GenerationRequest make_request(const std::string& document, const std::string& iso) {
  const auto name = language_name(iso);
  if (!name) {
    throw Error(ErrorCode::InvalidConfig, "language '" + iso + "' is not in the generation language list");
  }
  return {document, iso, render_prompt(document, *name)};
}

// A text-generation backend. Implementations throw Error(TransportError) on
// failures worth retrying and must be callable from several threads.
class GenerationClient {
 public:
  virtual ~GenerationClient() = default;
  virtual std::string complete(const GenerationRequest& request) = 0;
};

// Offline deterministic client: echoes the document prefix up to and
// including its 8th whitespace token, then "?". Languages in reject_languages
// get the "Non-<Name>" reply.
class MockGenerationClient : public GenerationClient {
 public:
  MockGenerationClient() = default;
  explicit MockGenerationClient(std::set<std::string> reject_languages)
      : reject_(std::move(reject_languages)) {}

  std::string complete(const GenerationRequest& request) override {
    if (reject_.count(request.language)) {
      return "Non-" + language_name(request.language).value_or(request.language);
    }
    return prefix_tokens(request.document, 8) + "?";
  }

  static std::string prefix_tokens(std::string_view text, std::size_t count) {
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    std::size_t i = 0;
    std::size_t end = 0;
    for (std::size_t t = 0; t < count; ++t) {
      while (i < text.size() && is_space(text[i])) {
        ++i;
      }
      if (i == text.size()) {
        break;
      }
      while (i < text.size() && !is_space(text[i])) {
        ++i;
      }
      end = i;
    }
    return std::string(text.substr(0, end));
  }

 private:
  std::set<std::string> reject_;
};

struct HttpClientConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  std::string api_key;  // usually from EMBKIT_GEN_KEY
  double temperature = 0.7;
  int timeout_seconds = 60;

  static HttpClientConfig from_json(const nlohmann::json& j) {
    HttpClientConfig c;
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model = j.value("model", c.model);
    c.temperature = j.value("temperature", c.temperature);
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    if (const char* key = std::getenv("EMBKIT_GEN_KEY")) {
      c.api_key = key;
    }
    return c;
  }
};

// Minimal chat-completion client: one user message, one completion.
class HttpGenerationClient : public GenerationClient {
 public:
  explicit HttpGenerationClient(HttpClientConfig cfg) : cfg_(std::move(cfg)) {
    const auto scheme_end = cfg_.endpoint.find("://");
    if (scheme_end == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, "endpoint must be an absolute URL: " + cfg_.endpoint);
    }
    const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
    base_ = cfg_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : cfg_.endpoint.substr(path_start);
  }

  static nlohmann::json request_body(const HttpClientConfig& cfg, const std::string& prompt) {
    return {{"model", cfg.model},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
            {"temperature", cfg.temperature},
            {"n", 1}};
  }

  std::string complete(const GenerationRequest& request) override {
    httplib::Client cli(base_);
    cli.set_connection_timeout(cfg_.timeout_seconds);
    cli.set_read_timeout(cfg_.timeout_seconds);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    }
    const auto res = cli.Post(path_, headers, request_body(cfg_, request.rendered_prompt).dump(), "application/json");
    if (!res) {
      throw Error(ErrorCode::TransportError, "request to " + cfg_.endpoint + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw Error(ErrorCode::TransportError, "HTTP " + std::to_string(res->status) + " from " + cfg_.endpoint);
    }
    try {
      const auto j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::TransportError, std::string("malformed completion response: ") + e.what());
    }
  }

 private:
  HttpClientConfig cfg_;
  std::string base_;
  std::string path_;
};

struct RetryPolicy {
  std::size_t max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

struct GenerationOutcome {
  std::optional<std::string> query;  // empty when rejected
  bool rejected = false;
  std::size_t attempts = 0;
};

inline std::string trim(std::string_view s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline GenerationOutcome generate_query(GenerationClient& client, const GenerationRequest& request,
                                        const RetryPolicy& retry = {}) {
  GenerationOutcome out;
  std::string response;
  auto backoff = retry.initial_backoff;
  for (std::size_t attempt = 1;; ++attempt) {
    out.attempts = attempt;
    try {
      response = client.complete(request);
      break;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TransportError || attempt >= retry.max_attempts) {
        if (e.code() == ErrorCode::TransportError) {
          throw Error(ErrorCode::TransportError,
                      "giving up after " + std::to_string(attempt) + " attempts: " + e.what());
        }
        throw;
      }
    }
    if (retry.sleep) {
      retry.sleep(backoff);
    }
    backoff = std::min(retry.max_backoff, std::chrono::milliseconds(static_cast<std::int64_t>(
                                              static_cast<double>(backoff.count()) * retry.multiplier)));
  }
  std::string text = trim(response);
  if (text.empty()) {
    throw Error(ErrorCode::EmptyResponse, "generation service returned an empty response");
  }
  const std::string marker = "Non-" + language_name(request.language).value_or(request.language);
  if (text.rfind(marker, 0) == 0) {
    out.rejected = true;
    return out;
  }
  out.query = std::move(text);
  return out;
}

struct SyntheticPair {
  std::string query;
  std::string document;
  std::string language;
  std::string source_doc_id;
  std::string task = std::string(kSyntheticTask);
};

inline nlohmann::json synthetic_pair_to_json(const SyntheticPair& p) {
  return {{"query", p.query}, {"document", p.document}, {"language", p.language},
          {"source_doc_id", p.source_doc_id}, {"task", p.task}};
}

struct LanguageStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t transport_errors = 0;
  std::size_t empty_responses = 0;
  std::optional<std::string> error;  // set when the language could not run at all
};

struct DatasetOptions {
  std::uint64_t seed = 0;
  std::size_t min_len = 100;
  std::size_t max_len = 1000;
  std::size_t max_in_flight = 4;
  RetryPolicy retry;
};

struct DatasetResult {
  std::vector<SyntheticPair> pairs;
  std::map<std::string, LanguageStats> stats;

  bool complete() const {
    return std::all_of(stats.begin(), stats.end(), [](const auto& kv) { return !kv.second.error; });
  }
};

inline nlohmann::json stats_to_json(const std::map<std::string, LanguageStats>& stats) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [lang, s] : stats) {
    nlohmann::json e = {{"accepted", s.accepted}, {"rejected", s.rejected},
                        {"transport_errors", s.transport_errors}, {"empty_responses", s.empty_responses}};
    if (s.error) {
      e["error"] = *s.error;
    }
    j[lang] = e;
  }
  return j;
}

// Per language: sample per_language_count documents, generate one question
// each (bounded in-flight requests), keep non-rejected answers. A language
// that fails is recorded in its stats entry; the others still run.
inline DatasetResult build_synthetic_dataset(const std::vector<Document>& corpus, const std::vector<std::string>& languages,
                                             std::size_t per_language_count, GenerationClient& client,
                                             const DatasetOptions& opt = {}) {
  if (per_language_count == 0) {
    throw Error(ErrorCode::InvalidConfig, "per_language_count must be >= 1");
  }
  DatasetResult result;
  for (std::size_t li = 0; li < languages.size(); ++li) {
    const std::string& lang = languages[li];
    LanguageStats& stats = result.stats[lang];
    if (!language_name(lang)) {
      stats.error = "InvalidConfig: language not in the generation language list";
      continue;
    }
    std::vector<Document> pool;
    for (const auto& d : corpus) {
      if (d.lang == lang) {
        pool.push_back(d);
      }
    }
    std::vector<Document> sample;
    try {
      sample = sample_documents(pool, per_language_count, opt.seed + li, opt.min_len, opt.max_len);
    } catch (const Error& e) {
      stats.error = e.what();
      continue;
    }

    const std::size_t window = std::max<std::size_t>(1, opt.max_in_flight);
    for (std::size_t start = 0; start < sample.size(); start += window) {
      const std::size_t stop = std::min(sample.size(), start + window);
      std::vector<std::future<GenerationOutcome>> inflight;
      for (std::size_t i = start; i < stop; ++i) {
        GenerationRequest req = make_request(sample[i].text, lang);
        inflight.push_back(std::async(std::launch::async, [&client, &opt, req = std::move(req)] {
          return generate_query(client, req, opt.retry);
        }));
      }
      for (std::size_t i = start; i < stop; ++i) {
        try {
          GenerationOutcome o = inflight[i - start].get();
          if (o.rejected) {
            ++stats.rejected;
            continue;
          }
          result.pairs.push_back({*o.query, sample[i].text, lang, sample[i].id});
          ++stats.accepted;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::EmptyResponse) {
            ++stats.empty_responses;
          } else {
            ++stats.transport_errors;
          }
        }
      }
    }
  }
  return result;
}

inline DatasetResult build_synthetic_dataset(const std::filesystem::path& corpus_path,
                                             const std::vector<std::string>& languages, std::size_t per_language_count,
                                             GenerationClient& client, const DatasetOptions& opt = {}) {
  return build_synthetic_dataset(read_documents(corpus_path), languages, per_language_count, client, opt);
}

inline void write_synthetic_dataset(const DatasetResult& r, const std::filesystem::path& out,
                                    const std::filesystem::path& stats_path) {
  std::vector<nlohmann::json> rows;
  rows.reserve(r.pairs.size());
  for (const auto& p : r.pairs) {
    rows.push_back(synthetic_pair_to_json(p));
  }
  write_lines(out, rows);
  write_lines(stats_path, {stats_to_json(r.stats)});
}

}  // namespace embkit

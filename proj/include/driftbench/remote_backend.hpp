#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "driftbench/backend.hpp"
#include "driftbench/error.hpp"

namespace driftbench {

constexpr const char* kApiKeyEnvVar = "DRIFTBENCH_API_KEY";

inline std::string api_key_from_env() {
  const char* key = std::getenv(kApiKeyEnvVar);
  return key ? std::string(key) : std::string();
}

namespace detail {

// Splits "http://host:port/prefix" into the origin httplib wants and the
// path prefix to prepend to endpoint paths.
inline std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  const std::size_t scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw UsageError("base url must include a scheme: " + base_url);
  }
  const std::size_t path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {base_url, ""};
  }
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') {
    prefix.pop_back();
  }
  return {base_url.substr(0, path_start), prefix};
}

}  // namespace detail

// Talks to any chat-completions endpoint that reports token logprobs.
// Errors are classified for the orchestrator's retry policy: transport
// failures and 429/5xx are retryable, everything else is not.
class RemoteHttpBackend : public Backend {
public:
  explicit RemoteHttpBackend(ModelSpec model, std::string api_key = api_key_from_env())
      : model_(std::move(model)), api_key_(std::move(api_key)) {
    model_.kind = BackendKind::RemoteHttp;
    if (model_.base_url.empty()) {
      throw UsageError("remote backend requires a base url");
    }
    auto [origin, prefix] = detail::split_base_url(model_.base_url);
    origin_ = origin;
    path_prefix_ = prefix;
  }

  const ModelSpec& spec() const override { return model_; }

private:
  nlohmann::json build_request_body(const PromptText& prompt) const {
    nlohmann::json body;
    body["model"] = model_.model_name;
    body["messages"] = nlohmann::json::array(
        {nlohmann::json{{"role", "user"}, {"content", prompt.text}}});
    body["temperature"] = model_.temperature;
    body["max_tokens"] = model_.max_answer_tokens;
    body["logprobs"] = true;
    body["top_logprobs"] = model_.top_logprobs_requested;
    if (model_.seed) {
      body["seed"] = *model_.seed;
    }
    return body;
  }

  static Generation parse_response_body(const std::string& body, const std::string& model) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& ex) {
      throw ProtocolError(std::string("malformed response body: ") + ex.what());
    }
    if (!doc.contains("choices") || !doc.at("choices").is_array() ||
        doc.at("choices").empty()) {
      throw ProtocolError("response has no choices");
    }
    const auto& choice = doc.at("choices").at(0);
    Generation gen;
    gen.model_spec_id = doc.value("model", model);
    try {
      gen.answer_text = choice.at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError("choice has no message content");
    }
    if (!choice.contains("logprobs") || choice.at("logprobs").is_null()) {
      throw CapabilityError("model did not return token logprobs");
    }
    const auto& logprobs = choice.at("logprobs");
    if (!logprobs.contains("content") || !logprobs.at("content").is_array()) {
      throw CapabilityError("logprobs present but has no content array");
    }
    for (const auto& entry : logprobs.at("content")) {
      TokenLogprob tok;
      try {
        tok.token = entry.at("token").get<std::string>();
        tok.logprob = entry.at("logprob").get<double>();
      } catch (const nlohmann::json::exception&) {
        throw ProtocolError("logprob entry missing token or logprob");
      }
      if (entry.contains("top_logprobs") && entry.at("top_logprobs").is_array()) {
        // Recorded exactly as returned; candidates are never fabricated.
        for (const auto& cand : entry.at("top_logprobs")) {
          try {
            tok.top_candidates.push_back({cand.at("token").get<std::string>(),
                                          cand.at("logprob").get<double>()});
          } catch (const nlohmann::json::exception&) {
            throw ProtocolError("top_logprobs entry missing token or logprob");
          }
        }
      }
      gen.tokens.push_back(std::move(tok));
    }
    if (gen.tokens.empty() && !gen.answer_text.empty()) {
      throw CapabilityError("response carried text but zero token logprobs");
    }
    return gen;
  }

  Generation do_generate(const PromptText& prompt, const GenerateContext&) override {
    httplib::Client client(origin_);
    const auto timeout = model_.request_timeout;
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout));
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!api_key_.empty()) {
      headers.emplace("Authorization", "Bearer " + api_key_);
    }

    const std::string path = path_prefix_ + "/chat/completions";
    const std::string body = build_request_body(prompt).dump();
    httplib::Result result = client.Post(path, headers, body, "application/json");
    if (!result) {
      throw TransportError("transport failure: " + httplib::to_string(result.error()));
    }
    if (result->status == 429 || result->status >= 500) {
      throw TransportError("server returned HTTP " + std::to_string(result->status),
                           result->status);
    }
    if (result->status != 200) {
      throw ProtocolError("unexpected HTTP " + std::to_string(result->status) + ": " +
                          result->body.substr(0, 400));
    }
    return parse_response_body(result->body, model_.model_name);
  }

  ModelSpec model_;
  std::string api_key_;
  std::string origin_;
  std::string path_prefix_;
};

}  // namespace driftbench

#include "narrative/provider.hpp"

#include <httplib.h>

namespace narrative {

JsonHttpClient::JsonHttpClient(Endpoint endpoint) : endpoint_(std::move(endpoint)) {
  const auto scheme = endpoint_.url.find("://");
  if (scheme == std::string::npos) throw UsageError("endpoint url needs a scheme: " + endpoint_.url);
  const auto path = endpoint_.url.find('/', scheme + 3);
  base_ = endpoint_.url.substr(0, path);
  path_ = path == std::string::npos ? "/" : endpoint_.url.substr(path);
}

nlohmann::json JsonHttpClient::post(const nlohmann::json& body) const {
  httplib::Client client(base_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  const auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) {
    throw ProviderError(ProviderError::Kind::kUnreachable,
                        base_ + path_ + ": " + httplib::to_string(res.error()));
  }
  if (res->status >= 500 || res->status == 429) {
    throw ProviderError(ProviderError::Kind::kUnreachable,
                        base_ + path_ + ": HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ProviderError(ProviderError::Kind::kMalformedResponse,
                        base_ + path_ + ": HTTP " + std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(ProviderError::Kind::kMalformedResponse,
                        std::string("malformed_response: ") + e.what());
  }
}

nlohmann::json JsonHttpClient::post_with_retry(const nlohmann::json& body) const {
  for (int attempt = 0;; ++attempt) {
    try {
      return post(body);
    } catch (const ProviderError& e) {
      if (!e.transient() || attempt >= endpoint_.retries) throw;
    }
  }
}

std::vector<EmbeddingVector> HttpEmbeddingProvider::embed(const std::vector<std::string>& texts) {
  const auto reply = client_.post({{"texts", texts}});
  try {
    return reply.at("vectors").get<std::vector<EmbeddingVector>>();
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(ProviderError::Kind::kMalformedResponse,
                        std::string("malformed_response: ") + e.what());
  }
}

std::vector<EmbeddingVector> embed_remote(const std::vector<std::string>& texts,
                                          EmbeddingProvider& provider, std::size_t dimension) {
  if (texts.empty()) return {};
  std::vector<EmbeddingVector> vectors;
  for (int attempt = 0;; ++attempt) {
    try {
      vectors = provider.embed(texts);
      break;
    } catch (const ProviderError& e) {
      if (!e.transient() || attempt >= provider.retries()) throw;
    }
  }
  if (vectors.size() != texts.size()) {
    throw ProviderError(ProviderError::Kind::kMalformedResponse,
                        "malformed_response: " + std::to_string(vectors.size()) + " vectors for " +
                            std::to_string(texts.size()) + " texts");
  }
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto check = validate_and_normalize(vectors[i], dimension);
    if (check.issue) {
      throw ProviderError(ProviderError::Kind::kMalformedResponse,
                          "malformed_response: vector " + std::to_string(i) + " " +
                              to_string(*check.issue));
    }
  }
  return vectors;
}

}  // namespace narrative

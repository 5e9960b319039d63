#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "narrative/embedding.hpp"
#include "narrative/error.hpp"

namespace narrative {

// Failure talking to an external model service. Transient failures
// (connection refused, timeouts, 5xx) are retried; malformed responses are not.
class ProviderError : public ServiceError {
 public:
  enum class Kind { kUnreachable, kMalformedResponse };

  ProviderError(Kind kind, const std::string& what) : ServiceError(what), kind_(kind) {}
  Kind kind() const { return kind_; }
  bool transient() const { return kind_ == Kind::kUnreachable; }

 private:
  Kind kind_;
};

struct Endpoint {
  std::string url;  // http://host:port/path
  std::chrono::milliseconds timeout{10000};
  int retries = 2;
};

// Structured JSON bodies over HTTP POST.
class JsonHttpClient {
 public:
  explicit JsonHttpClient(Endpoint endpoint);

  const Endpoint& endpoint() const { return endpoint_; }
  // One attempt; throws ProviderError.
  nlohmann::json post(const nlohmann::json& body) const;
  // Retries transient failures up to endpoint.retries extra attempts.
  nlohmann::json post_with_retry(const nlohmann::json& body) const;

 private:
  Endpoint endpoint_;
  std::string base_;
  std::string path_;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Vectors in input order. May return any count; embed_remote checks arity.
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
  virtual int retries() const { return 0; }
};

// {"texts": [...]} -> {"vectors": [[...], ...]}
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(Endpoint endpoint) : client_(std::move(endpoint)) {}
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  int retries() const override { return client_.endpoint().retries; }

 private:
  JsonHttpClient client_;
};

// Returns unit vectors in input order. Transient provider failures are
// retried provider.retries() times; wrong arity or invalid vectors fail the
// whole batch with kMalformedResponse.
std::vector<EmbeddingVector> embed_remote(const std::vector<std::string>& texts,
                                          EmbeddingProvider& provider, std::size_t dimension);

}  // namespace narrative

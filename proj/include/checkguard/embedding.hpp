#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace checkguard::rag {

using Vector = std::vector<float>;

class ProviderUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Maps texts to fixed-dimension dense vectors. embed() is one provider
/// call; batching is done by embed_batch().
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string name() const = 0;
    virtual std::size_t dimension() const = 0;
    virtual std::vector<Vector> embed(std::span<const std::string> texts) = 0;
};

/// Offline provider: word unigrams and bigrams are hashed (64-bit FNV-1a,
/// seeded) into signed integer bucket counts, then L2-normalized. Output is
/// identical across runs and platforms. Text without word tokens maps to
/// the zero vector.
class HashingProvider final : public EmbeddingProvider {
public:
    explicit HashingProvider(std::size_t dimension = 384, std::uint64_t seed = 0);

    std::string name() const override { return "hashing"; }
    std::size_t dimension() const override { return dimension_; }
    std::vector<Vector> embed(std::span<const std::string> texts) override;

    Vector embed_one(std::string_view text) const;

private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

struct RemoteEmbeddingConfig {
    std::string base_url = "http://127.0.0.1:8080";
    std::string model = "all-MiniLM-L6-v2";
    std::size_t dimension = 384;
    std::string api_key_env = "CHECKGUARD_EMBEDDING_API_KEY";
    std::chrono::milliseconds timeout{30000};
    int max_retries = 3;
    std::chrono::milliseconds backoff{200};
};

/// Client for an OpenAI-compatible POST {base_url}/v1/embeddings endpoint.
/// Transient failures (connection errors, 429, 5xx) are retried with
/// exponential backoff; after the last retry ProviderUnavailable is thrown.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit RemoteEmbeddingProvider(RemoteEmbeddingConfig config);

    std::string name() const override { return "remote:" + config_.model; }
    std::size_t dimension() const override { return config_.dimension; }
    std::vector<Vector> embed(std::span<const std::string> texts) override;

private:
    RemoteEmbeddingConfig config_;
};

/// Embeds `texts` in provider calls of at most `batch_size` texts. Output
/// order matches input; every vector is checked for dimension and
/// finiteness.
std::vector<Vector> embed_batch(EmbeddingProvider& provider, std::span<const std::string> texts,
                                std::size_t batch_size = 50);

/// L2-normalized copy; the zero vector stays zero.
Vector normalized(std::span<const float> v);

} // namespace checkguard::rag

#include "checkguard/embedding.hpp"

#include "checkguard/text.hpp"

#include <cmath>

namespace checkguard::rag {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed)
{
    std::uint64_t h = kFnvOffset ^ seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

} // namespace

HashingProvider::HashingProvider(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension)
    , seed_(seed)
{
    if (dimension_ == 0)
        throw std::invalid_argument("HashingProvider: dimension must be positive");
}

Vector HashingProvider::embed_one(std::string_view text) const
{
    std::vector<std::int64_t> counts(dimension_, 0);
    const auto tokens = text::word_tokens(text);
    auto add = [&](const std::string& feature) {
        auto h = fnv1a(feature, seed_);
        auto bucket = static_cast<std::size_t>(h % dimension_);
        counts[bucket] += (h >> 63) ? -1 : 1;
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        add("u:" + tokens[i]);
        if (i + 1 < tokens.size())
            add("b:" + tokens[i] + " " + tokens[i + 1]);
    }
    std::int64_t sq = 0;
    for (auto c : counts)
        sq += c * c;
    Vector v(dimension_, 0.0f);
    if (sq == 0)
        return v;
    const double norm = std::sqrt(static_cast<double>(sq));
    for (std::size_t i = 0; i < dimension_; ++i)
        v[i] = static_cast<float>(static_cast<double>(counts[i]) / norm);
    return v;
}

std::vector<Vector> HashingProvider::embed(std::span<const std::string> texts)
{
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts)
        out.push_back(embed_one(t));
    return out;
}

std::vector<Vector> embed_batch(EmbeddingProvider& provider, std::span<const std::string> texts, std::size_t batch_size)
{
    if (batch_size < 1)
        throw std::invalid_argument("embed_batch: batch_size must be >= 1");
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += batch_size) {
        auto chunk = texts.subspan(start, std::min(batch_size, texts.size() - start));
        auto vecs = provider.embed(chunk);
        if (vecs.size() != chunk.size())
            throw ProviderUnavailable(provider.name() + " returned " + std::to_string(vecs.size()) + " vectors for "
                                      + std::to_string(chunk.size()) + " texts");
        for (auto& v : vecs) {
            if (v.size() != provider.dimension())
                throw ProviderUnavailable(provider.name() + " returned a vector of dimension "
                                          + std::to_string(v.size()));
            for (float x : v)
                if (!std::isfinite(x))
                    throw ProviderUnavailable(provider.name() + " returned a non-finite vector");
            out.push_back(std::move(v));
        }
    }
    return out;
}

Vector normalized(std::span<const float> v)
{
    double sq = 0.0;
    for (float x : v)
        sq += static_cast<double>(x) * x;
    Vector out(v.begin(), v.end());
    if (sq == 0.0)
        return out;
    const double norm = std::sqrt(sq);
    for (auto& x : out)
        x = static_cast<float>(x / norm);
    return out;
}

} // namespace checkguard::rag

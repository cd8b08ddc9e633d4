#pragma once

#include "checkguard/embedding.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace checkguard::rag {

struct EmbeddedDocument {
    std::string doc_id;
    std::string text;
    Vector vector;
    std::map<std::string, std::string> metadata;
};

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;

    bool operator==(const ScoredDoc&) const = default;
};

class CorruptIndex : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class StorageFull : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyStore : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exact cosine-similarity store persisted in a directory:
///
///   manifest.json  {"format", "version", "dimension", "provider", "count"}
///   vectors.f32    little-endian float32, row-major, count x dimension
///   docs.jsonl     one {"id", "text", "metadata"} record per row
///
/// Vectors are L2-normalized on insert. Writers are serialized; readers
/// work on an immutable snapshot, so a retrieval never observes a
/// half-applied index() call.
class VectorStore {
public:
    /// Opens `dir` if it holds a store (dimension and provider must match),
    /// otherwise creates an empty one.
    static VectorStore open_or_create(const std::filesystem::path& dir, std::size_t dimension, std::string provider);

    /// Throws CorruptIndex when the directory does not hold a consistent store.
    static VectorStore open(const std::filesystem::path& dir);

    VectorStore(VectorStore&&) noexcept;
    VectorStore& operator=(VectorStore&&) noexcept;
    ~VectorStore();

    /// Upserts `docs` and persists the store. Re-indexing an existing
    /// doc_id replaces it in place. Returns docs.size().
    std::size_t index(std::span<const EmbeddedDocument> docs);

    /// Top-k by cosine similarity, descending, ties by doc_id ascending.
    /// Zero vectors are never returned. Throws EmptyStore on an empty store.
    std::vector<ScoredDoc> retrieve(std::span<const float> query, std::size_t k) const;

    std::size_t size() const;
    std::size_t dimension() const;
    std::string provider_name() const;
    const std::filesystem::path& directory() const;
    std::optional<EmbeddedDocument> get(const std::string& doc_id) const;

private:
    struct Snapshot;
    struct State;

    explicit VectorStore(std::unique_ptr<State> state);
    std::shared_ptr<const Snapshot> snapshot() const;

    std::unique_ptr<State> state_;
};

/// Embeds `query` with `provider` and retrieves from `store`.
std::vector<ScoredDoc> retrieve_text(const VectorStore& store, EmbeddingProvider& provider, const std::string& query,
                                     std::size_t k);

/// Cosine similarity computed in double precision. Zero if either side is
/// the zero vector.
double cosine(std::span<const float> a, std::span<const float> b);

} // namespace checkguard::rag

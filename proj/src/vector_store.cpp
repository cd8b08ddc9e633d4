#include "checkguard/vector_store.hpp"

#include "checkguard/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unistd.h>

namespace checkguard::rag {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "checkguard-vector-store";
constexpr int kVersion = 1;

double norm_of(std::span<const float> v)
{
    double sq = 0.0;
    for (float x : v)
        sq += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(sq);
}

double dot(std::span<const float> a, std::span<const float> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

std::uint32_t to_le(std::uint32_t v)
{
    if constexpr (std::endian::native == std::endian::big)
        return __builtin_bswap32(v);
    return v;
}

void write_store_file(const fs::path& path, std::string_view data)
{
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
        throw io::IoError("cannot write " + tmp.string() + ": " + std::strerror(errno));
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) {
        int err = errno;
        out.close();
        std::error_code ec;
        fs::remove(tmp, ec);
        if (err == ENOSPC || err == EDQUOT)
            throw StorageFull("no space left writing " + path.string());
        throw io::IoError("write failed for " + path.string() + ": " + std::strerror(err));
    }
    out.close();
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec)
        throw io::IoError("cannot replace " + path.string() + ": " + ec.message());
}

} // namespace

struct VectorStore::Snapshot {
    std::size_t dimension = 0;
    std::string provider;
    std::vector<std::string> ids;
    std::vector<std::string> texts;
    std::vector<std::map<std::string, std::string>> metadata;
    std::vector<float> vectors;
    std::vector<double> norms;
    std::unordered_map<std::string, std::size_t> row_of;

    std::span<const float> row(std::size_t i) const { return {vectors.data() + i * dimension, dimension}; }
};

struct VectorStore::State {
    fs::path dir;
    mutable std::mutex mu;
    std::shared_ptr<const Snapshot> snap;
};

VectorStore::VectorStore(std::unique_ptr<State> state)
    : state_(std::move(state))
{
}

VectorStore::VectorStore(VectorStore&&) noexcept = default;
VectorStore& VectorStore::operator=(VectorStore&&) noexcept = default;
VectorStore::~VectorStore() = default;

std::shared_ptr<const VectorStore::Snapshot> VectorStore::snapshot() const
{
    std::lock_guard lock(state_->mu);
    return state_->snap;
}

VectorStore VectorStore::open(const fs::path& dir)
{
    const auto manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path))
        throw CorruptIndex("no manifest in " + dir.string());

    auto snap = std::make_shared<Snapshot>();
    std::size_t count = 0;
    try {
        auto m = nlohmann::json::parse(io::read_file(manifest_path));
        if (m.at("format").get<std::string>() != kFormat || m.at("version").get<int>() != kVersion)
            throw CorruptIndex("unsupported store format in " + dir.string());
        snap->dimension = m.at("dimension").get<std::size_t>();
        snap->provider = m.at("provider").get<std::string>();
        count = m.at("count").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw CorruptIndex("bad manifest in " + dir.string() + ": " + e.what());
    }
    if (snap->dimension == 0)
        throw CorruptIndex("zero dimension in " + dir.string());

    const std::string raw = io::read_file(dir / "vectors.f32");
    if (raw.size() != count * snap->dimension * sizeof(float))
        throw CorruptIndex("vector file size " + std::to_string(raw.size()) + " does not match manifest count "
                           + std::to_string(count) + " in " + dir.string());
    snap->vectors.resize(count * snap->dimension);
    for (std::size_t i = 0; i < snap->vectors.size(); ++i) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, raw.data() + i * 4, 4);
        bits = to_le(bits);
        float f = std::bit_cast<float>(bits);
        if (!std::isfinite(f))
            throw CorruptIndex("non-finite vector component in " + dir.string());
        snap->vectors[i] = f;
    }

    std::vector<io::NumberedRecord> recs;
    try {
        recs = io::read_jsonl(dir / "docs.jsonl");
    } catch (const std::exception& e) {
        throw CorruptIndex(std::string("bad document file: ") + e.what());
    }
    if (recs.size() != count)
        throw CorruptIndex("document count " + std::to_string(recs.size()) + " does not match manifest count "
                           + std::to_string(count));
    for (const auto& r : recs) {
        try {
            auto id = r.value.at("id").get<std::string>();
            if (!snap->row_of.emplace(id, snap->ids.size()).second)
                throw CorruptIndex("duplicate doc id " + id);
            snap->ids.push_back(std::move(id));
            snap->texts.push_back(r.value.value("text", std::string{}));
            snap->metadata.push_back(r.value.value("metadata", std::map<std::string, std::string>{}));
        } catch (const nlohmann::json::exception& e) {
            throw CorruptIndex("bad document record at line " + std::to_string(r.line) + ": " + e.what());
        }
    }
    snap->norms.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        snap->norms[i] = norm_of(snap->row(i));

    auto state = std::make_unique<State>();
    state->dir = dir;
    state->snap = std::move(snap);
    return VectorStore(std::move(state));
}

VectorStore VectorStore::open_or_create(const fs::path& dir, std::size_t dimension, std::string provider)
{
    if (fs::exists(dir / "manifest.json")) {
        auto store = open(dir);
        if (store.dimension() != dimension)
            throw CorruptIndex("store dimension " + std::to_string(store.dimension()) + " differs from requested "
                               + std::to_string(dimension));
        if (store.provider_name() != provider)
            throw CorruptIndex("store was built with provider '" + store.provider_name() + "', not '" + provider + "'");
        return store;
    }
    if (dimension == 0)
        throw std::invalid_argument("vector store dimension must be positive");
    fs::create_directories(dir);
    auto snap = std::make_shared<Snapshot>();
    snap->dimension = dimension;
    snap->provider = std::move(provider);
    auto state = std::make_unique<State>();
    state->dir = dir;
    state->snap = std::move(snap);
    VectorStore store(std::move(state));
    store.index({});
    return store;
}

std::size_t VectorStore::index(std::span<const EmbeddedDocument> docs)
{
    std::lock_guard lock(state_->mu);
    const auto& old = *state_->snap;

    std::set<std::string> batch_ids;
    for (const auto& d : docs) {
        if (d.doc_id.empty())
            throw std::invalid_argument("document with empty id");
        if (!batch_ids.insert(d.doc_id).second)
            throw std::invalid_argument("duplicate doc id in batch: " + d.doc_id);
        if (d.vector.size() != old.dimension)
            throw std::invalid_argument("document " + d.doc_id + " has dimension " + std::to_string(d.vector.size())
                                        + ", store expects " + std::to_string(old.dimension));
        for (float x : d.vector)
            if (!std::isfinite(x))
                throw std::invalid_argument("document " + d.doc_id + " has a non-finite vector");
    }

    auto next = std::make_shared<Snapshot>(old);
    for (const auto& d : docs) {
        auto v = normalized(d.vector);
        auto it = next->row_of.find(d.doc_id);
        std::size_t row = 0;
        if (it == next->row_of.end()) {
            row = next->ids.size();
            next->row_of.emplace(d.doc_id, row);
            next->ids.push_back(d.doc_id);
            next->texts.push_back(d.text);
            next->metadata.push_back(d.metadata);
            next->vectors.insert(next->vectors.end(), v.begin(), v.end());
            next->norms.push_back(0.0);
        } else {
            row = it->second;
            next->texts[row] = d.text;
            next->metadata[row] = d.metadata;
            std::copy(v.begin(), v.end(), next->vectors.begin() + static_cast<std::ptrdiff_t>(row * next->dimension));
        }
        next->norms[row] = norm_of(next->row(row));
    }

    std::string raw(next->vectors.size() * sizeof(float), '\0');
    for (std::size_t i = 0; i < next->vectors.size(); ++i) {
        auto bits = to_le(std::bit_cast<std::uint32_t>(next->vectors[i]));
        std::memcpy(raw.data() + i * 4, &bits, 4);
    }
    std::vector<nlohmann::json> recs;
    recs.reserve(next->ids.size());
    for (std::size_t i = 0; i < next->ids.size(); ++i)
        recs.push_back({{"id", next->ids[i]}, {"text", next->texts[i]}, {"metadata", next->metadata[i]}});
    nlohmann::json manifest = {{"format", kFormat},
                               {"version", kVersion},
                               {"dimension", next->dimension},
                               {"provider", next->provider},
                               {"count", next->ids.size()}};

    // The manifest goes last: a crash in between leaves a count mismatch
    // that open() reports as CorruptIndex.
    write_store_file(state_->dir / "vectors.f32", raw);
    write_store_file(state_->dir / "docs.jsonl", io::dump_jsonl(recs));
    write_store_file(state_->dir / "manifest.json", manifest.dump(2) + "\n");

    state_->snap = std::move(next);
    return docs.size();
}

std::vector<ScoredDoc> VectorStore::retrieve(std::span<const float> query, std::size_t k) const
{
    if (k < 1)
        throw std::invalid_argument("retrieve: k must be >= 1");
    auto snap = snapshot();
    if (snap->ids.empty())
        throw EmptyStore("vector store " + state_->dir.string() + " is empty");
    if (query.size() != snap->dimension)
        throw std::invalid_argument("query dimension " + std::to_string(query.size()) + " does not match store "
                                    + std::to_string(snap->dimension));
    const double qn = norm_of(query);
    if (qn == 0.0)
        return {};

    std::vector<ScoredDoc> scored;
    scored.reserve(snap->ids.size());
    for (std::size_t i = 0; i < snap->ids.size(); ++i) {
        if (snap->norms[i] == 0.0)
            continue;
        scored.push_back({snap->ids[i], dot(query, snap->row(i)) / (qn * snap->norms[i])});
    }
    auto better = [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score)
            return a.score > b.score;
        return a.doc_id < b.doc_id;
    };
    const auto n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);
    scored.resize(n);
    return scored;
}

std::size_t VectorStore::size() const { return snapshot()->ids.size(); }
std::size_t VectorStore::dimension() const { return snapshot()->dimension; }
std::string VectorStore::provider_name() const { return snapshot()->provider; }
const fs::path& VectorStore::directory() const { return state_->dir; }

std::optional<EmbeddedDocument> VectorStore::get(const std::string& doc_id) const
{
    auto snap = snapshot();
    auto it = snap->row_of.find(doc_id);
    if (it == snap->row_of.end())
        return std::nullopt;
    auto row = snap->row(it->second);
    return EmbeddedDocument{doc_id, snap->texts[it->second], Vector(row.begin(), row.end()),
                            snap->metadata[it->second]};
}

std::vector<ScoredDoc> retrieve_text(const VectorStore& store, EmbeddingProvider& provider, const std::string& query,
                                     std::size_t k)
{
    auto vecs = embed_batch(provider, std::span<const std::string>(&query, 1), 1);
    return store.retrieve(vecs.front(), k);
}

double cosine(std::span<const float> a, std::span<const float> b)
{
    if (a.size() != b.size())
        throw std::invalid_argument("cosine: dimension mismatch");
    const double na = norm_of(a);
    const double nb = norm_of(b);
    if (na == 0.0 || nb == 0.0)
        return 0.0;
    return dot(a, b) / (na * nb);
}

} // namespace checkguard::rag

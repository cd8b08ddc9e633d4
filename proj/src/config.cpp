#include "checkguard/config.hpp"

#include "checkguard/io.hpp"
#include "checkguard/prompts.hpp"
#include "checkguard/text.hpp"

#include <set>

namespace checkguard::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where)
{
    if (!obj.is_object())
        throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.contains(key))
            throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
}

template <class T>
void read(const json& obj, const char* key, T& dst, const std::string& where)
{
    if (!obj.contains(key))
        return;
    try {
        dst = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + where + key + "' has the wrong type");
    }
}

void read_path(const json& obj, const char* key, std::optional<fs::path>& dst, const fs::path& base)
{
    if (!obj.contains(key) || obj.at(key).is_null())
        return;
    if (!obj.at(key).is_string())
        throw ConfigError(std::string("config key '") + key + "' must be a path string");
    fs::path p = obj.at(key).get<std::string>();
    dst = p.is_absolute() ? p : base / p;
}

void require_file(const std::optional<fs::path>& p, const char* what)
{
    if (p && !fs::is_regular_file(*p))
        throw ConfigError(std::string(what) + " not found: " + p->string());
}

void require_parent(const std::optional<fs::path>& p, const char* what)
{
    if (!p)
        return;
    auto parent = fs::absolute(*p).parent_path();
    if (!fs::is_directory(parent))
        throw ConfigError(std::string(what) + " directory does not exist: " + parent.string());
}

json path_json(const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); }

} // namespace

PipelineConfig PipelineConfig::load(const fs::path& path)
{
    json doc;
    try {
        doc = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    } catch (const std::exception& e) {
        throw ConfigError("cannot read config " + path.string() + ": " + e.what());
    }
    return from_json(doc, fs::absolute(path).parent_path());
}

PipelineConfig PipelineConfig::from_json(const json& doc, const fs::path& base)
{
    reject_unknown(doc,
                   {"repos", "since", "until", "keywords", "stoplist", "eval", "strategy", "unit", "backend",
                    "embedding", "store", "retrieval", "ruleset", "detection_shots", "shots", "lexicon",
                    "transcripts", "runs", "concurrency", "seed"},
                   "");
    PipelineConfig c;
    if (doc.contains("repos")) {
        std::vector<std::string> repos;
        read(doc, "repos", repos, "");
        for (const auto& r : repos) {
            fs::path p = r;
            c.repos.push_back(p.is_absolute() ? p : base / p);
        }
    }
    read(doc, "since", c.since, "");
    read(doc, "until", c.until, "");
    read_path(doc, "keywords", c.keywords, base);
    read_path(doc, "stoplist", c.stoplist, base);
    if (doc.contains("eval")) {
        const auto& e = doc.at("eval");
        reject_unknown(e, {"max_files", "max_loc"}, "eval");
        read(e, "max_files", c.eval.max_files, "eval.");
        read(e, "max_loc", c.eval.max_loc, "eval.");
    }
    read(doc, "strategy", c.strategy, "");
    read(doc, "unit", c.unit, "");
    if (doc.contains("backend")) {
        const auto& b = doc.at("backend");
        reject_unknown(b,
                       {"kind", "model", "temperature", "max_tokens", "script", "default_response", "base_url",
                        "api_key_env", "timeout_ms", "max_retries"},
                       "backend");
        read(b, "kind", c.backend.kind, "backend.");
        read(b, "model", c.backend.model, "backend.");
        read(b, "temperature", c.backend.temperature, "backend.");
        if (b.contains("max_tokens") && !b.at("max_tokens").is_null()) {
            int mt = 0;
            read(b, "max_tokens", mt, "backend.");
            c.backend.max_tokens = mt;
        }
        read_path(b, "script", c.backend.script, base);
        read(b, "default_response", c.backend.default_response, "backend.");
        read(b, "base_url", c.backend.base_url, "backend.");
        read(b, "api_key_env", c.backend.api_key_env, "backend.");
        read(b, "timeout_ms", c.backend.timeout_ms, "backend.");
        read(b, "max_retries", c.backend.max_retries, "backend.");
    }
    if (doc.contains("embedding")) {
        const auto& e = doc.at("embedding");
        reject_unknown(e,
                       {"provider", "dimension", "batch_size", "base_url", "model", "api_key_env", "timeout_ms",
                        "max_retries"},
                       "embedding");
        read(e, "provider", c.embedding.provider, "embedding.");
        read(e, "dimension", c.embedding.dimension, "embedding.");
        read(e, "batch_size", c.embedding.batch_size, "embedding.");
        read(e, "base_url", c.embedding.base_url, "embedding.");
        read(e, "model", c.embedding.model, "embedding.");
        read(e, "api_key_env", c.embedding.api_key_env, "embedding.");
        read(e, "timeout_ms", c.embedding.timeout_ms, "embedding.");
        read(e, "max_retries", c.embedding.max_retries, "embedding.");
    }
    read_path(doc, "store", c.store, base);
    if (doc.contains("retrieval")) {
        const auto& r = doc.at("retrieval");
        reject_unknown(r, {"enabled", "k"}, "retrieval");
        read(r, "enabled", c.retrieval_enabled, "retrieval.");
        read(r, "k", c.retrieval_k, "retrieval.");
    }
    read_path(doc, "ruleset", c.ruleset, base);
    read_path(doc, "detection_shots", c.detection_shots, base);
    read(doc, "shots", c.shots, "");
    read_path(doc, "lexicon", c.lexicon, base);
    read_path(doc, "transcripts", c.transcripts, base);
    read(doc, "runs", c.runs, "");
    read(doc, "concurrency", c.concurrency, "");
    read(doc, "seed", c.seed, "");
    return c;
}

void PipelineConfig::validate() const
{
    for (const auto& r : repos)
        if (!fs::is_directory(r))
            throw ConfigError("repository not found: " + r.string());
    try {
        if (text::parse_iso8601(since) > text::parse_iso8601(until))
            throw ConfigError("since (" + since + ") is after until (" + until + ")");
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("bad date: ") + e.what());
    }
    require_file(keywords, "keyword file");
    require_file(stoplist, "stoplist file");
    require_file(backend.script, "backend script");
    require_file(ruleset, "rule set");
    require_file(detection_shots, "detection shots file");
    require_file(lexicon, "lexicon file");
    require_parent(transcripts, "transcript");
    require_parent(store, "store");
    if (eval.max_files < 1 || eval.max_loc < 1)
        throw ConfigError("eval thresholds must be positive");
    try {
        agents::parse_strategy(strategy);
        agents::parse_granularity(unit);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (backend.kind != "scripted" && backend.kind != "remote")
        throw ConfigError("backend.kind must be scripted or remote, got '" + backend.kind + "'");
    if (!(backend.temperature >= 0.0 && backend.temperature <= 2.0))
        throw ConfigError("backend.temperature must be in [0, 2]");
    if (backend.max_tokens && *backend.max_tokens < 1)
        throw ConfigError("backend.max_tokens must be positive");
    if (backend.timeout_ms < 1 || backend.max_retries < 0)
        throw ConfigError("backend timeout must be positive and retries non-negative");
    if (embedding.provider != "hashing" && embedding.provider != "remote")
        throw ConfigError("embedding.provider must be hashing or remote, got '" + embedding.provider + "'");
    if (embedding.dimension < 1 || embedding.batch_size < 1)
        throw ConfigError("embedding dimension and batch_size must be positive");
    if (retrieval_k < 1)
        throw ConfigError("retrieval.k must be >= 1");
    if (shots < 1)
        throw ConfigError("shots must be >= 1");
    if (runs < 1)
        throw ConfigError("runs must be >= 1");
    if (concurrency < 1)
        throw ConfigError("concurrency must be >= 1");
}

json PipelineConfig::to_json() const
{
    std::vector<std::string> repo_strings;
    for (const auto& r : repos)
        repo_strings.push_back(r.string());
    return {
        {"repos", repo_strings},
        {"since", since},
        {"until", until},
        {"keywords", path_json(keywords)},
        {"stoplist", path_json(stoplist)},
        {"eval", {{"max_files", eval.max_files}, {"max_loc", eval.max_loc}}},
        {"strategy", strategy},
        {"unit", unit},
        {"backend",
         {{"kind", backend.kind},
          {"model", backend.model},
          {"temperature", backend.temperature},
          {"max_tokens", backend.max_tokens ? json(*backend.max_tokens) : json(nullptr)},
          {"script", path_json(backend.script)},
          {"default_response", backend.default_response},
          {"base_url", backend.base_url},
          {"api_key_env", backend.api_key_env},
          {"timeout_ms", backend.timeout_ms},
          {"max_retries", backend.max_retries}}},
        {"embedding",
         {{"provider", embedding.provider},
          {"dimension", embedding.dimension},
          {"batch_size", embedding.batch_size},
          {"base_url", embedding.base_url},
          {"model", embedding.model},
          {"api_key_env", embedding.api_key_env},
          {"timeout_ms", embedding.timeout_ms},
          {"max_retries", embedding.max_retries}}},
        {"store", path_json(store)},
        {"retrieval", {{"enabled", retrieval_enabled}, {"k", retrieval_k}}},
        {"ruleset", path_json(ruleset)},
        {"detection_shots", path_json(detection_shots)},
        {"shots", shots},
        {"lexicon", path_json(lexicon)},
        {"transcripts", path_json(transcripts)},
        {"runs", runs},
        {"concurrency", concurrency},
        {"seed", seed},
    };
}

json PipelineConfig::snapshot() const
{
    return {{"strategy", strategy},           {"backend", backend.kind}, {"model", backend.model},
            {"temperature", backend.temperature}, {"seed", seed},        {"unit", unit}};
}

} // namespace checkguard::cli

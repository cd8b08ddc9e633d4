#pragma once

#include "checkguard/agents.hpp"
#include "checkguard/miner.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace checkguard::cli {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BackendConfig {
    std::string kind = "scripted"; ///< scripted | remote
    std::string model = "gpt-3.5-turbo";
    double temperature = 0.0;
    std::optional<int> max_tokens;
    std::optional<std::filesystem::path> script;
    std::string default_response;
    std::string base_url = "https://api.openai.com";
    std::string api_key_env = "OPENAI_API_KEY";
    int timeout_ms = 60000;
    int max_retries = 3;
};

struct EmbeddingConfig {
    std::string provider = "hashing"; ///< hashing | remote
    std::size_t dimension = 384;
    std::size_t batch_size = 50;
    std::string base_url = "http://127.0.0.1:8080";
    std::string model = "all-MiniLM-L6-v2";
    std::string api_key_env = "CHECKGUARD_EMBEDDING_API_KEY";
    int timeout_ms = 30000;
    int max_retries = 3;
};

/// One JSON document. Relative paths resolve against the config file's
/// directory; unknown keys are rejected.
struct PipelineConfig {
    std::vector<std::filesystem::path> repos;
    std::string since = "1970-01-01";
    std::string until = "2100-01-01";
    std::optional<std::filesystem::path> keywords;
    std::optional<std::filesystem::path> stoplist;
    miner::EvalThresholds eval;
    std::string strategy = "cot";
    std::string unit = "commit";
    BackendConfig backend;
    EmbeddingConfig embedding;
    std::optional<std::filesystem::path> store;
    bool retrieval_enabled = true;
    std::size_t retrieval_k = 1;
    std::optional<std::filesystem::path> ruleset;
    std::optional<std::filesystem::path> detection_shots;
    std::size_t shots = 2;
    std::optional<std::filesystem::path> lexicon;
    std::optional<std::filesystem::path> transcripts;
    int runs = 5;
    int concurrency = 4;
    std::uint64_t seed = 0;

    /// Throws ConfigError.
    static PipelineConfig load(const std::filesystem::path& path);
    static PipelineConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);

    /// Checks value ranges and that every referenced input path exists and
    /// every output path has an existing parent. Throws ConfigError.
    void validate() const;

    nlohmann::json to_json() const;
    /// strategy, backend, model, temperature, seed and unit.
    nlohmann::json snapshot() const;
};

} // namespace checkguard::cli

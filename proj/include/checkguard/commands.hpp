#pragma once

#include "checkguard/config.hpp"
#include "checkguard/embedding.hpp"
#include "checkguard/llm.hpp"

#include <json.hpp>

#include <exception>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace checkguard::cli {

enum ExitCode : int { kExitOk = 0, kExitOther = 1, kExitConfig = 2, kExitInput = 3, kExitBackend = 4 };

/// Bad input data that is not covered by a module-specific error type.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

int exit_code_for(const std::exception& e);

std::unique_ptr<llm::Backend> make_backend(const PipelineConfig& cfg);
std::unique_ptr<rag::EmbeddingProvider> make_embedding_provider(const PipelineConfig& cfg);

/// Reproducibility record written next to a command's main output as
/// "<output>.manifest.json".
class RunManifest {
public:
    RunManifest(std::string command, nlohmann::json config);

    void add_input(const std::filesystem::path& path);
    void add_output(const std::filesystem::path& path);
    /// Stamps the end time and writes atomically.
    void write(const std::filesystem::path& path);

private:
    std::string command_;
    nlohmann::json config_;
    std::string started_at_;
    nlohmann::json inputs_ = nlohmann::json::object();
    nlohmann::json outputs_ = nlohmann::json::object();
};

/// SHA-256 of a file, or of the sorted (relative name, file digest) list
/// of a directory.
std::string digest_path(const std::filesystem::path& path);

struct MineArgs {
    std::filesystem::path out;
    bool eval_filter = false;
    std::size_t suggest = 0;
};

struct BuildRagArgs {
    std::filesystem::path changes;
};

struct PipelineArgs {
    std::filesystem::path commits;
    std::filesystem::path out;
    bool repair = false;
};

struct EvalArgs {
    std::vector<std::filesystem::path> outcomes;
    std::filesystem::path dataset;
    std::optional<int> runs;
    std::filesystem::path report;
    std::optional<std::filesystem::path> review_queue;
};

struct ScanArgs {
    std::filesystem::path repo;
    std::filesystem::path out_dir;
};

struct ReportArgs {
    std::vector<std::filesystem::path> reports;
    std::optional<std::filesystem::path> json_out;
};

struct ReviewImportArgs {
    std::filesystem::path report;
    std::filesystem::path overrides;
};

/// Each command returns a short human-readable summary for stdout.
std::string cmd_mine(const PipelineConfig& cfg, const MineArgs& args);
std::string cmd_build_rag(const PipelineConfig& cfg, const BuildRagArgs& args);
std::string cmd_detect(const PipelineConfig& cfg, const PipelineArgs& args);
std::string cmd_eval(const PipelineConfig& cfg, const EvalArgs& args);
std::string cmd_report(const ReportArgs& args);
std::string cmd_review_import(const ReviewImportArgs& args);

/// Mines `repo`, keyword-filters, runs the per-change pipeline with repair
/// and writes commits.jsonl, outcomes.jsonl, review_queue.jsonl and
/// scan_report.json into `out_dir`. Returns the scan report.
nlohmann::json cmd_scan(const PipelineConfig& cfg, const ScanArgs& args);

} // namespace checkguard::cli

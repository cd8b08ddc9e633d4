#pragma once

#include "checkguard/diff.hpp"
#include "checkguard/embedding.hpp"
#include "checkguard/llm.hpp"
#include "checkguard/miner.hpp"
#include "checkguard/prompts.hpp"
#include "checkguard/taxonomy.hpp"
#include "checkguard/vector_store.hpp"

#include <json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace checkguard::agents {

enum class Verdict { Bug, Clean };
enum class ParsePath { ExactToken, LastToken, Fallback };
enum class AgentKind { Detection, RootCause, PatchGen };

struct DetectionDecision {
    Verdict verdict = Verdict::Clean;
    std::string raw;
    ParsePath parse_path = ParsePath::Fallback;

    /// Fallback decisions are conservative guesses and need a human look.
    bool flagged() const { return parse_path == ParsePath::Fallback; }
};

/// Standalone YES/NO tokens, case-insensitive. A response whose only word
/// is YES or NO parses as ExactToken; otherwise the last YES/NO token
/// decides (LastToken); no such token gives Clean via Fallback.
DetectionDecision parse_decision(std::string_view raw);

struct RootCauseExplanation {
    std::string text;
    std::string source_sha;
};

struct PatchResult {
    std::string think_steps;
    std::string patch;
    std::vector<std::string> retrieved_doc_ids;
};

class EmptyPatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PatchExtraction {
    std::string think_steps;
    std::string patch;
};

/// The first fenced ``` block; else the text after a line starting with
/// "Patch" (leading '#'/'*' decoration and a trailing ':' are ignored).
/// nullopt when neither yields non-blank text.
std::optional<PatchExtraction> extract_patch(std::string_view response);

struct AgentSettings {
    std::string model = "gpt-3.5-turbo";
    double temperature = 0.0;
    std::optional<int> max_tokens;
};

/// Everything an agent call needs: the gateway backend, request settings
/// and an optional transcript sink.
struct AgentRuntime {
    llm::Backend& backend;
    AgentSettings settings;
    llm::TranscriptLog* transcripts = nullptr;
};

/// Store plus embedding provider. Retrieval is disabled when either is null.
struct Retrieval {
    const rag::VectorStore* store = nullptr;
    rag::EmbeddingProvider* provider = nullptr;
    std::size_t k = 1;

    bool enabled() const { return store != nullptr && provider != nullptr; }
};

/// Ordered keyword lists mapping root-cause text to a rule-set element.
/// Keywords match as contiguous word-token runs; the first matching entry
/// wins and Others is the fallback.
class ElementLexicon {
public:
    struct Entry {
        taxonomy::Element element;
        std::vector<std::string> keywords;
    };

    static ElementLexicon defaults();
    /// [{"element": "<Element>", "keywords": [...]}, ...]
    static ElementLexicon from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;

    taxonomy::Element classify(std::string_view text) const;
    const std::vector<Entry>& entries() const { return entries_; }

private:
    std::vector<Entry> entries_;
};

/// One detection subject: a whole commit or a single file change of it.
struct WorkUnit {
    std::string sha;
    std::optional<std::string> file;
    std::string message;
    diff::CodeChange change;
};

enum class Granularity { Commit, Change };

Granularity parse_granularity(std::string_view name);
std::string to_string(Granularity g);

/// All changes of a commit as one: paths joined with ", ", hunks and
/// removed/added lines concatenated in file order.
diff::CodeChange merge_changes(const std::vector<diff::CodeChange>& changes);

std::vector<WorkUnit> make_units(const std::vector<miner::Commit>& commits, Granularity granularity);

/// Throws std::invalid_argument when the unit has no changed lines.
DetectionDecision detect(AgentRuntime& rt, const PromptStrategy& strategy, const WorkUnit& unit);

/// Throws std::invalid_argument for an empty message.
RootCauseExplanation analyze_root_cause(AgentRuntime& rt, std::string_view commit_message, std::string source_sha);

/// Queries the store with exactly `explanation.text`. Throws EmptyPatch when
/// the response carries no patch and rag::EmptyStore when retrieval is
/// enabled on an empty store. `shots_from_fallback` is noted in the
/// transcript.
PatchResult generate_patch(AgentRuntime& rt, const RootCauseExplanation& explanation, const Retrieval& retrieval,
                           const diff::CodeChange& snippet, const std::vector<taxonomy::RuleExample>& shots,
                           bool shots_from_fallback = false);

struct PipelineOptions {
    Granularity granularity = Granularity::Commit;
    /// false stops every unit after detection.
    bool repair = true;
    std::size_t patch_shots = 2;
    std::size_t concurrency = 1;
};

struct Outcome {
    std::string sha;
    std::optional<std::string> file;
    std::optional<DetectionDecision> decision;
    std::optional<std::string> root_cause;
    std::optional<std::string> element;
    std::optional<std::string> think_steps;
    std::optional<std::string> patch;
    std::optional<std::vector<std::string>> retrieved_doc_ids;
    bool fewshot_fallback = false;
    std::optional<std::string> error;

    bool errored() const { return error.has_value(); }
    bool is_bug() const { return decision && decision->verdict == Verdict::Bug; }
};

/// Detection, then for Bug verdicts root-cause analysis and patch
/// generation. Failures are recorded per outcome and never abort the batch.
/// Outcomes follow unit order regardless of concurrency.
std::vector<Outcome> run_pipeline(AgentRuntime& rt, const PromptStrategy& strategy, const Retrieval& retrieval,
                                  const taxonomy::RuleSet* ruleset, const ElementLexicon& lexicon,
                                  const std::vector<WorkUnit>& units, const PipelineOptions& options = {});

std::string to_string(Verdict v);
std::string to_string(ParsePath p);
std::string to_string(AgentKind k);
Verdict parse_verdict_name(std::string_view name);
ParsePath parse_parse_path(std::string_view name);

nlohmann::json to_json(const Outcome& outcome);
Outcome outcome_from_json(const nlohmann::json& j);

} // namespace checkguard::agents

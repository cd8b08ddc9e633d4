#pragma once

#include "checkguard/diff.hpp"
#include "checkguard/taxonomy.hpp"

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace checkguard::agents {

enum class StrategyKind { ChainOfThought, ZeroShot, FewShot };

class MissingShots : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct PromptStrategy {
    StrategyKind kind = StrategyKind::ChainOfThought;
    std::vector<taxonomy::RuleExample> shots;

    static PromptStrategy chain_of_thought() { return {StrategyKind::ChainOfThought, {}}; }
    static PromptStrategy zero_shot() { return {StrategyKind::ZeroShot, {}}; }
    /// Throws MissingShots when `shots` is empty.
    static PromptStrategy few_shot(std::vector<taxonomy::RuleExample> shots);

    /// Throws MissingShots for FewShot without shots and std::invalid_argument
    /// for shots on any other kind.
    void validate() const;
};

/// "cot", "zero" and "few" (also the long names). Throws std::invalid_argument.
StrategyKind parse_strategy(std::string_view name);
std::string to_string(StrategyKind kind);

/// Shown in the patch prompt's context slot when retrieval is disabled.
inline constexpr std::string_view kNoRetrievedContext = "(retrieval disabled: no context retrieved)";

/// The {code_removed}{code_added} pair. Removed lines are '-'-prefixed,
/// added lines '+'-prefixed, one per line; together they equal
/// diff::render_change(change).
std::string code_removed(const diff::CodeChange& change);
std::string code_added(const diff::CodeChange& change);

std::string render_detection_prompt(const PromptStrategy& strategy, std::string_view commit_message,
                                    const diff::CodeChange& change);

/// Throws std::invalid_argument for an empty message.
std::string render_root_cause_prompt(std::string_view commit_message);

/// `examples` fill the "Example One"/"Example Two" slots in order; a
/// missing example leaves its slot empty.
std::string render_patch_prompt(const std::vector<taxonomy::RuleExample>& examples, std::string_view bug_explanation,
                                std::string_view retrieved_knowledge, const diff::CodeChange& snippet);

} // namespace checkguard::agents

#include "checkguard/prompts.hpp"

#include <array>

namespace checkguard::agents {

namespace {

constexpr std::string_view kDetectionIntro =
    "You are an AI trained to detect bugs in a deep-learning library based on commit messages and code changes. "
    "Your task is to determine whether a given commit introduces a bug or not. Follow the steps below to reason "
    "through the problem and arrive at a conclusion.";

constexpr std::string_view kCotStep1 =
    "1. Understand the commit message: Analyze the commit message to understand the context and purpose of the "
    "code change.";
constexpr std::string_view kCotStep2 =
    "2. Review the code change: Examine the deleted and added lines of code to identify the modifications made.";
constexpr std::string_view kCotTail =
    "3. Identify potential issues: Look for any missing, improper, or insufficient checkers within the code "
    "change. Checkers may include error handling, input validation, boundary checks, or other safety "
    "mechanisms.\n"
    "4. Analyze the impact: Consider the impact of the identified issues on the functionality and reliability of "
    "the deep learning libraries.\n"
    "5. Make a decision: Based on the above analysis, decide whether the commit introduces a bug or not.\n"
    "6. Output the conclusion: Generate a clear output of \"YES\" if the commit introduces a bug, or \"NO\" if it "
    "does not.";

constexpr std::string_view kRootCause =
    "Please describe the root cause of the bug based on the following commit message:";

constexpr std::string_view kPatchIntro =
    "You are given a bug explanation and an external context for fixing a checker bug. Please think step by step "
    "and generate a patch to fix the bug in the code snippet. Please neglect any issues related to the indentation "
    "in the code snippet. Fixing indentation is not the goal of this task. If you think the given pattern can be "
    "applied, generate the patch.";

constexpr std::array<std::string_view, 10> kOrdinals{"One", "Two",   "Three", "Four", "Five",
                                                     "Six", "Seven", "Eight", "Nine", "Ten"};

std::string prefixed(const std::vector<std::string>& lines, char tag)
{
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i)
            out += '\n';
        out += tag;
        out += lines[i];
    }
    return out;
}

std::string code_pair(const diff::CodeChange& change) { return code_removed(change) + code_added(change); }

std::string commit_section(std::string_view message, const diff::CodeChange& change)
{
    std::string out = "Commit message: ";
    out += message;
    out += "\nCode change:\n";
    out += code_pair(change);
    return out;
}

} // namespace

PromptStrategy PromptStrategy::few_shot(std::vector<taxonomy::RuleExample> shots)
{
    PromptStrategy s{StrategyKind::FewShot, std::move(shots)};
    s.validate();
    return s;
}

void PromptStrategy::validate() const
{
    if (kind == StrategyKind::FewShot) {
        if (shots.empty())
            throw MissingShots("few-shot strategy has no examples");
        if (shots.size() > kOrdinals.size())
            throw std::invalid_argument("at most 10 few-shot examples are supported");
    } else if (!shots.empty()) {
        throw std::invalid_argument("shots are only valid for the few-shot strategy");
    }
}

StrategyKind parse_strategy(std::string_view name)
{
    if (name == "cot" || name == "chain-of-thought")
        return StrategyKind::ChainOfThought;
    if (name == "zero" || name == "zero-shot")
        return StrategyKind::ZeroShot;
    if (name == "few" || name == "few-shot")
        return StrategyKind::FewShot;
    throw std::invalid_argument("unknown strategy '" + std::string(name) + "' (expected cot, zero or few)");
}

std::string to_string(StrategyKind kind)
{
    switch (kind) {
    case StrategyKind::ChainOfThought: return "cot";
    case StrategyKind::ZeroShot: return "zero";
    case StrategyKind::FewShot: return "few";
    }
    return {};
}

std::string code_removed(const diff::CodeChange& change)
{
    std::string out = prefixed(change.removed_lines, '-');
    if (!change.removed_lines.empty() && !change.added_lines.empty())
        out += '\n';
    return out;
}

std::string code_added(const diff::CodeChange& change) { return prefixed(change.added_lines, '+'); }

std::string render_detection_prompt(const PromptStrategy& strategy, std::string_view commit_message,
                                    const diff::CodeChange& change)
{
    strategy.validate();
    std::string out(kDetectionIntro);
    switch (strategy.kind) {
    case StrategyKind::ChainOfThought:
        out += '\n';
        out += kCotStep1;
        out += '\n';
        out += commit_message;
        out += '\n';
        out += kCotStep2;
        out += '\n';
        out += code_pair(change);
        out += '\n';
        out += kCotTail;
        break;
    case StrategyKind::ZeroShot:
        out += "\n\n";
        out += commit_section(commit_message, change);
        break;
    case StrategyKind::FewShot:
        for (std::size_t i = 0; i < strategy.shots.size(); ++i) {
            out += "\n\nExample Checker Bug ";
            out += kOrdinals[i];
            out += ":\n";
            out += commit_section(strategy.shots[i].message, strategy.shots[i].change);
        }
        out += "\n\nTask:\n";
        out += commit_section(commit_message, change);
        break;
    }
    return out;
}

std::string render_root_cause_prompt(std::string_view commit_message)
{
    if (commit_message.empty())
        throw std::invalid_argument("root-cause analysis needs a non-empty commit message");
    std::string out(kRootCause);
    out += commit_message;
    return out;
}

std::string render_patch_prompt(const std::vector<taxonomy::RuleExample>& examples, std::string_view bug_explanation,
                                std::string_view retrieved_knowledge, const diff::CodeChange& snippet)
{
    std::string out(kPatchIntro);
    out += "\n\nExample One:\n";
    if (!examples.empty())
        out += code_pair(examples[0].change);
    out += "\nExample Two:\n";
    if (examples.size() > 1)
        out += code_pair(examples[1].change);
    out += "\n\nBug explanation:\n";
    out += bug_explanation;
    out += "\nRetrieved context:\n";
    out += retrieved_knowledge;
    out += "\nCode snippet:\n";
    out += diff::render_change(snippet);
    return out;
}

} // namespace checkguard::agents

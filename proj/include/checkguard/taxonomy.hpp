#pragma once

#include "checkguard/diff.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace checkguard::taxonomy {

enum class Violation { Missing, Improper, Insufficient, Misleading, Unnecessary };

enum class Element {
    EdgeCases,
    TypeChecking,
    NullValue,
    BoundaryValue,
    DeviceAvailability,
    ErrorMessage,
    DeviceType,
    DeviceVersion,
    ExecutionMode,
    ComputationGraph,
    TensorQuantization,
    BackendType,
    Others,
};

enum class Symptom { ProgramCrash, UnexpectedBehavior, ConfusingErrorMessage, PerformanceDegradation, NumericalError, Others };

enum class Action { Add, Extend, Update, Improve, Replace, Relocate, Remove };

enum class Condition {
    IfChecker,
    MacroChecker,
    TypeCheckingAPI,
    AssertionStatement,
    CheckerAPI,
    BooleanExpression,
    TernaryOperator,
};

enum class FixElement { Tensor, RegularObject, Device, ErrorMessage, IntegerVariable, ComputationGraph, Backend, Others };

template <class E>
struct EnumNames;

#define CHECKGUARD_ENUM_NAMES(E, N, ...)                                     \
    template <>                                                              \
    struct EnumNames<E> {                                                    \
        static constexpr std::array<std::pair<E, std::string_view>, N> table{ \
            {__VA_ARGS__}};                                                  \
    }

CHECKGUARD_ENUM_NAMES(Violation, 5, {Violation::Missing, "Missing"}, {Violation::Improper, "Improper"},
                      {Violation::Insufficient, "Insufficient"}, {Violation::Misleading, "Misleading"},
                      {Violation::Unnecessary, "Unnecessary"});
CHECKGUARD_ENUM_NAMES(Element, 13, {Element::EdgeCases, "EdgeCases"}, {Element::TypeChecking, "TypeChecking"},
                      {Element::NullValue, "NullValue"}, {Element::BoundaryValue, "BoundaryValue"},
                      {Element::DeviceAvailability, "DeviceAvailability"}, {Element::ErrorMessage, "ErrorMessage"},
                      {Element::DeviceType, "DeviceType"}, {Element::DeviceVersion, "DeviceVersion"},
                      {Element::ExecutionMode, "ExecutionMode"}, {Element::ComputationGraph, "ComputationGraph"},
                      {Element::TensorQuantization, "TensorQuantization"}, {Element::BackendType, "BackendType"},
                      {Element::Others, "Others"});
CHECKGUARD_ENUM_NAMES(Symptom, 6, {Symptom::ProgramCrash, "ProgramCrash"},
                      {Symptom::UnexpectedBehavior, "UnexpectedBehavior"},
                      {Symptom::ConfusingErrorMessage, "ConfusingErrorMessage"},
                      {Symptom::PerformanceDegradation, "PerformanceDegradation"},
                      {Symptom::NumericalError, "NumericalError"}, {Symptom::Others, "Others"});
CHECKGUARD_ENUM_NAMES(Action, 7, {Action::Add, "Add"}, {Action::Extend, "Extend"}, {Action::Update, "Update"},
                      {Action::Improve, "Improve"}, {Action::Replace, "Replace"}, {Action::Relocate, "Relocate"},
                      {Action::Remove, "Remove"});
CHECKGUARD_ENUM_NAMES(Condition, 7, {Condition::IfChecker, "IfChecker"}, {Condition::MacroChecker, "MacroChecker"},
                      {Condition::TypeCheckingAPI, "TypeCheckingAPI"},
                      {Condition::AssertionStatement, "AssertionStatement"}, {Condition::CheckerAPI, "CheckerAPI"},
                      {Condition::BooleanExpression, "BooleanExpression"},
                      {Condition::TernaryOperator, "TernaryOperator"});
CHECKGUARD_ENUM_NAMES(FixElement, 8, {FixElement::Tensor, "Tensor"}, {FixElement::RegularObject, "RegularObject"},
                      {FixElement::Device, "Device"}, {FixElement::ErrorMessage, "ErrorMessage"},
                      {FixElement::IntegerVariable, "IntegerVariable"},
                      {FixElement::ComputationGraph, "ComputationGraph"}, {FixElement::Backend, "Backend"},
                      {FixElement::Others, "Others"});

#undef CHECKGUARD_ENUM_NAMES

template <class E>
constexpr std::string_view to_string(E value)
{
    for (const auto& [v, n] : EnumNames<E>::table)
        if (v == value)
            return n;
    return {};
}

template <class E>
constexpr std::optional<E> parse_enum(std::string_view name)
{
    for (const auto& [v, n] : EnumNames<E>::table)
        if (n == name)
            return v;
    return std::nullopt;
}

template <class E>
constexpr auto all_values()
{
    std::array<E, EnumNames<E>::table.size()> out{};
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = EnumNames<E>::table[i].first;
    return out;
}

struct TaxonomyLabel {
    Violation violation = Violation::Missing;
    Element element = Element::Others;
    Symptom symptom = Symptom::Others;
    Action action = Action::Add;
    Condition condition = Condition::IfChecker;
    FixElement fix_element = FixElement::Others;

    bool operator==(const TaxonomyLabel&) const = default;
};

/// Misleading checks only concern error messages.
bool is_consistent(const TaxonomyLabel& label);

struct LabeledBug {
    std::string commit_sha;
    std::string repo;
    TaxonomyLabel label;
    std::string message;
    diff::CodeChange change;
};

class UnknownCategory : public std::runtime_error {
public:
    UnknownCategory(std::size_t line, std::string field, const std::string& value)
        : std::runtime_error("line " + std::to_string(line) + ": unknown " + field + " '" + value + "'")
        , line_(line)
        , field_(std::move(field))
    {
    }

    std::size_t line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

class UnknownFacet : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class UnknownElementKey : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Line-delimited records {sha, repo, violation, element, symptom, action,
/// condition, fix_element, message, diff}. Throws io::RecordParseError for
/// malformed lines and UnknownCategory for invalid enum values.
std::vector<LabeledBug> load_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const std::vector<LabeledBug>& bugs);
nlohmann::json to_record(const LabeledBug& bug);

enum class Facet { Violation, Element, Symptom, Action, Condition, FixElement };

/// Throws UnknownFacet.
Facet parse_facet(std::string_view name);

/// Every category of the facet is present, zero when unused.
std::map<std::string, std::size_t> marginals(std::span<const LabeledBug> bugs, Facet facet);
std::map<std::string, std::size_t> marginals(std::span<const LabeledBug> bugs, std::string_view facet);

struct RuleExample {
    std::string message;
    diff::CodeChange change;
};

/// Few-shot examples keyed by root-cause element, plus an optional generic
/// pair used when a key has no entry.
class RuleSet {
public:
    void add(Element key, RuleExample example);
    void set_fallback(std::vector<RuleExample> examples) { fallback_ = std::move(examples); }

    const std::vector<RuleExample>* find(Element key) const;
    const std::vector<RuleExample>& fallback() const { return fallback_; }
    const std::map<Element, std::vector<RuleExample>>& entries() const { return entries_; }

    /// Nested document: {"<Element>": [{"message", "diff"}...], "fallback": [...]}.
    static RuleSet load(const std::filesystem::path& path);
    static RuleSet from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;

private:
    std::map<Element, std::vector<RuleExample>> entries_;
    std::vector<RuleExample> fallback_;
};

/// Groups a labeled dataset by element, keeping the first `per_element`
/// examples of each and skipping Others.
RuleSet build_ruleset(std::span<const LabeledBug> bugs, std::size_t per_element);

struct FewShotSelection {
    std::vector<RuleExample> examples;
    bool used_fallback = false;
};

/// First min(k, available) examples stored under `key`, in insertion order.
/// Others, or a key without entries, falls back to the generic pair; with no
/// fallback configured that throws UnknownElementKey.
FewShotSelection select_fewshot_examples(const RuleSet& ruleset, Element key, std::size_t k);

/// Deterministic synthetic dataset of 527 checker bugs whose published
/// marginals (and the element x violation and condition x action two-way
/// tables) are reproduced exactly. Joint structure beyond those is random.
std::vector<LabeledBug> generate_synthetic_dataset(std::uint64_t seed);

/// Two hand-written generic examples (a TORCH_CHECK extension and an
/// OP_REQUIRES addition) used as the rule-set fallback.
std::vector<RuleExample> default_fallback_examples();

/// Unified diff text of a single-file change.
std::string to_unified_diff(const diff::CodeChange& change);

} // namespace checkguard::taxonomy

#pragma once

#include "checkguard/agents.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace checkguard::eval {

enum class GroundTruth { Buggy, Clean };

struct EvalItem {
    std::string sha;
    std::string repo;
    GroundTruth truth = GroundTruth::Clean;
    std::optional<std::string> ground_truth_patch;
};

class LengthMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class UnknownOverrideSha : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SchemaMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MissingOutcome : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EvalDataset {
    std::vector<EvalItem> items;

    std::size_t buggy() const;
    std::size_t clean() const;
    const EvalItem* find(std::string_view sha) const;

    /// Line-delimited {sha, repo?, label: "Buggy"|"Clean", ground_truth_patch?}.
    /// Duplicate shas and unknown labels are errors.
    static EvalDataset load(const std::filesystem::path& path);
};

GroundTruth parse_ground_truth(std::string_view name);
std::string to_string(GroundTruth g);

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    bool operator==(const Confusion&) const = default;
};

/// Percentages. A ratio with a zero denominator is absent, never 0.
struct Metrics {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;

    bool operator==(const Metrics&) const = default;
};

struct RunMetrics {
    Confusion confusion;
    Metrics metrics;

    bool operator==(const RunMetrics&) const = default;
};

Metrics metrics_from(const Confusion& c);

/// Harmonic mean; absent unless both are present and P+R > 0.
std::optional<double> f1_score(std::optional<double> precision, std::optional<double> recall);

/// Throws LengthMismatch unless both spans have the same, non-zero length.
RunMetrics compute_metrics(std::span<const agents::Verdict> predictions, std::span<const GroundTruth> labels);

/// Arithmetic mean of each metric over the runs where it is present.
/// Throws std::invalid_argument for an empty input.
Metrics average_runs(std::span<const Metrics> runs);

enum class PatchVerdict { ExactMatch, NormalizedMatch, NeedsReview };

std::string to_string(PatchVerdict v);
PatchVerdict parse_patch_verdict(std::string_view name);

struct PatchAssessment {
    std::string sha;
    std::optional<std::string> file;
    PatchVerdict verdict = PatchVerdict::NeedsReview;
    std::string candidate;
    std::string ground_truth;
};

/// Removes //, /* */ and # comments outside string literals, collapses
/// whitespace runs to one space, trims lines and drops blank ones.
std::string normalize_code(std::string_view code);

PatchAssessment assess_patch(std::string_view candidate, std::string_view ground_truth);

struct RepairAccuracy {
    std::size_t generated = 0;
    std::size_t correct = 0;
    std::optional<double> accuracy;
};

/// 100 * correct / generated, absent when nothing was generated.
std::optional<double> accuracy_percent(std::size_t generated, std::size_t correct);

/// Exact and normalized matches count as correct; a NeedsReview item only
/// with an override set to true. Overrides of decided items are ignored.
/// Throws UnknownOverrideSha for an override naming no assessment.
RepairAccuracy repair_accuracy(std::span<const PatchAssessment> assessments,
                               const std::map<std::string, bool>& overrides);

/// Writes the NeedsReview items as {sha, file?, candidate, ground_truth,
/// verdict_slot: null} records. Returns the number written.
std::size_t export_review_queue(std::span<const PatchAssessment> assessments, const std::filesystem::path& path);

/// Reads a filled-in review queue: records whose verdict_slot is a boolean.
std::map<std::string, bool> load_overrides(const std::filesystem::path& path);

struct MetricsReport {
    std::vector<RunMetrics> per_run;
    Metrics average;
};

MetricsReport summarize(std::vector<RunMetrics> runs);

inline constexpr int kReportSchemaVersion = 1;

struct EvaluationReport {
    int schema_version = kReportSchemaVersion;
    nlohmann::json config = nlohmann::json::object();
    std::size_t buggy = 0;
    std::size_t clean = 0;
    std::map<std::string, MetricsReport> libraries;
    MetricsReport overall;
    std::vector<PatchAssessment> assessments;
    std::map<std::string, bool> overrides;
    RepairAccuracy repair;
};

/// Scores each run's outcomes against the dataset. Outcomes are folded per
/// commit (Bug when any unit of the commit is Bug; errored detection counts
/// as Clean). Repair is assessed on the first run's generated patches.
/// Throws MissingOutcome when a dataset commit has no outcome in a run.
EvaluationReport evaluate(const EvalDataset& dataset, const std::vector<std::vector<agents::Outcome>>& runs,
                          nlohmann::json config_snapshot);

/// Recomputes `report.repair` with `overrides`.
void apply_overrides(EvaluationReport& report, const std::map<std::string, bool>& overrides);

nlohmann::json to_json(const EvaluationReport& report);
/// Throws SchemaMismatch for a different schema_version.
EvaluationReport report_from_json(const nlohmann::json& j);

struct ComparisonTable {
    std::vector<std::string> strategies;
    /// Library rows in name order, then "Average".
    std::vector<std::pair<std::string, std::map<std::string, Metrics>>> rows;

    std::string render_text() const;
    nlohmann::json to_json() const;
};

/// One column group per strategy (cot, zero, few order), one row per
/// library plus an Average row holding the mean of the library rows.
/// Throws SchemaMismatch when reports disagree on schema_version and
/// std::invalid_argument on an empty list or a repeated strategy.
ComparisonTable compare_reports(const std::vector<EvaluationReport>& reports);

} // namespace checkguard::eval

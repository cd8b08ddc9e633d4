#include "checkguard/eval.hpp"

#include "checkguard/io.hpp"
#include "checkguard/text.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace checkguard::eval {

using nlohmann::json;

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_double(const json& j, const char* key)
{
    if (!j.contains(key) || j.at(key).is_null())
        return std::nullopt;
    return j.at(key).get<double>();
}

json metrics_json(const Metrics& m)
{
    return {{"precision", opt_json(m.precision)}, {"recall", opt_json(m.recall)}, {"f1", opt_json(m.f1)}};
}

Metrics metrics_from_json(const json& j)
{
    return {opt_double(j, "precision"), opt_double(j, "recall"), opt_double(j, "f1")};
}

json report_json(const MetricsReport& r)
{
    json runs = json::array();
    for (const auto& run : r.per_run) {
        json j = metrics_json(run.metrics);
        j["confusion"] = {{"tp", run.confusion.tp}, {"fp", run.confusion.fp}, {"tn", run.confusion.tn},
                          {"fn", run.confusion.fn}};
        runs.push_back(std::move(j));
    }
    return {{"per_run", std::move(runs)}, {"average", metrics_json(r.average)}};
}

MetricsReport report_from(const json& j)
{
    MetricsReport r;
    for (const auto& run : j.at("per_run")) {
        RunMetrics rm;
        rm.metrics = metrics_from_json(run);
        if (run.contains("confusion")) {
            const auto& c = run.at("confusion");
            rm.confusion = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(),
                            c.at("tn").get<std::size_t>(), c.at("fn").get<std::size_t>()};
        }
        r.per_run.push_back(rm);
    }
    r.average = metrics_from_json(j.at("average"));
    return r;
}

std::optional<double> mean_of(std::span<const Metrics> runs, std::optional<double> Metrics::*field)
{
    double sum = 0;
    std::size_t n = 0;
    for (const auto& m : runs)
        if (m.*field) {
            sum += *(m.*field);
            ++n;
        }
    if (n == 0)
        return std::nullopt;
    return sum / static_cast<double>(n);
}

std::string display(const std::optional<double>& v) { return v ? text::format_fixed(*v, 2) : "-"; }

} // namespace

std::size_t EvalDataset::buggy() const
{
    return static_cast<std::size_t>(
        std::count_if(items.begin(), items.end(), [](const EvalItem& i) { return i.truth == GroundTruth::Buggy; }));
}

std::size_t EvalDataset::clean() const { return items.size() - buggy(); }

const EvalItem* EvalDataset::find(std::string_view sha) const
{
    for (const auto& i : items)
        if (i.sha == sha)
            return &i;
    return nullptr;
}

EvalDataset EvalDataset::load(const std::filesystem::path& path)
{
    EvalDataset ds;
    std::set<std::string> seen;
    for (const auto& rec : io::read_jsonl(path)) {
        const auto& j = rec.value;
        try {
            EvalItem item;
            item.sha = j.at("sha").get<std::string>();
            item.repo = j.value("repo", std::string("all"));
            item.truth = parse_ground_truth(j.at("label").get<std::string>());
            if (j.contains("ground_truth_patch") && !j.at("ground_truth_patch").is_null())
                item.ground_truth_patch = j.at("ground_truth_patch").get<std::string>();
            if (!seen.insert(item.sha).second)
                throw std::invalid_argument("duplicate sha " + item.sha);
            ds.items.push_back(std::move(item));
        } catch (const io::RecordParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw io::RecordParseError(e.what(), rec.line);
        }
    }
    return ds;
}

GroundTruth parse_ground_truth(std::string_view name)
{
    if (name == "Buggy")
        return GroundTruth::Buggy;
    if (name == "Clean")
        return GroundTruth::Clean;
    throw std::invalid_argument("unknown label '" + std::string(name) + "' (expected Buggy or Clean)");
}

std::string to_string(GroundTruth g) { return g == GroundTruth::Buggy ? "Buggy" : "Clean"; }

std::optional<double> f1_score(std::optional<double> precision, std::optional<double> recall)
{
    if (!precision || !recall || *precision + *recall <= 0.0)
        return std::nullopt;
    return 2.0 * *precision * *recall / (*precision + *recall);
}

Metrics metrics_from(const Confusion& c)
{
    Metrics m;
    if (c.tp + c.fp > 0)
        m.precision = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0)
        m.recall = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    m.f1 = f1_score(m.precision, m.recall);
    return m;
}

RunMetrics compute_metrics(std::span<const agents::Verdict> predictions, std::span<const GroundTruth> labels)
{
    if (predictions.size() != labels.size())
        throw LengthMismatch("predictions and labels differ in length (" + std::to_string(predictions.size())
                             + " vs " + std::to_string(labels.size()) + ")");
    if (predictions.empty())
        throw LengthMismatch("no predictions to score");
    Confusion c;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        bool predicted = predictions[i] == agents::Verdict::Bug;
        bool actual = labels[i] == GroundTruth::Buggy;
        if (predicted && actual)
            ++c.tp;
        else if (predicted)
            ++c.fp;
        else if (actual)
            ++c.fn;
        else
            ++c.tn;
    }
    return {c, metrics_from(c)};
}

Metrics average_runs(std::span<const Metrics> runs)
{
    if (runs.empty())
        throw std::invalid_argument("average_runs needs at least one run");
    Metrics m;
    m.precision = mean_of(runs, &Metrics::precision);
    m.recall = mean_of(runs, &Metrics::recall);
    m.f1 = mean_of(runs, &Metrics::f1);
    return m;
}

std::string to_string(PatchVerdict v)
{
    switch (v) {
    case PatchVerdict::ExactMatch: return "ExactMatch";
    case PatchVerdict::NormalizedMatch: return "NormalizedMatch";
    case PatchVerdict::NeedsReview: return "NeedsReview";
    }
    return {};
}

PatchVerdict parse_patch_verdict(std::string_view name)
{
    for (auto v : {PatchVerdict::ExactMatch, PatchVerdict::NormalizedMatch, PatchVerdict::NeedsReview})
        if (to_string(v) == name)
            return v;
    throw std::invalid_argument("unknown patch verdict '" + std::string(name) + "'");
}

std::string normalize_code(std::string_view code)
{
    enum class State { Code, String, LineComment, BlockComment };
    std::string stripped;
    stripped.reserve(code.size());
    State st = State::Code;
    char quote = 0;
    for (std::size_t i = 0; i < code.size(); ++i) {
        char c = code[i];
        char next = i + 1 < code.size() ? code[i + 1] : '\0';
        switch (st) {
        case State::Code:
            if (c == '/' && next == '/') {
                st = State::LineComment;
                ++i;
            } else if (c == '/' && next == '*') {
                st = State::BlockComment;
                stripped += ' ';
                ++i;
            } else if (c == '#') {
                st = State::LineComment;
            } else {
                if (c == '"' || c == '\'') {
                    st = State::String;
                    quote = c;
                }
                stripped += c;
            }
            break;
        case State::String:
            stripped += c;
            if (c == '\\' && next != '\0' && next != '\n') {
                stripped += next;
                ++i;
            } else if (c == quote || c == '\n') {
                st = State::Code;
            }
            break;
        case State::LineComment:
            if (c == '\n') {
                stripped += c;
                st = State::Code;
            }
            break;
        case State::BlockComment:
            if (c == '\n')
                stripped += c;
            else if (c == '*' && next == '/') {
                st = State::Code;
                ++i;
            }
            break;
        }
    }

    std::vector<std::string> lines;
    for (auto line : text::split_lines(stripped)) {
        std::string collapsed;
        bool space = false;
        for (char c : line) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                space = true;
                continue;
            }
            if (space && !collapsed.empty())
                collapsed += ' ';
            space = false;
            collapsed += c;
        }
        if (!collapsed.empty())
            lines.push_back(std::move(collapsed));
    }
    return text::join(lines, "\n");
}

PatchAssessment assess_patch(std::string_view candidate, std::string_view ground_truth)
{
    PatchAssessment a;
    a.candidate = std::string(candidate);
    a.ground_truth = std::string(ground_truth);
    if (candidate == ground_truth)
        a.verdict = PatchVerdict::ExactMatch;
    else if (normalize_code(candidate) == normalize_code(ground_truth))
        a.verdict = PatchVerdict::NormalizedMatch;
    else
        a.verdict = PatchVerdict::NeedsReview;
    return a;
}

std::optional<double> accuracy_percent(std::size_t generated, std::size_t correct)
{
    if (generated == 0)
        return std::nullopt;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(generated);
}

RepairAccuracy repair_accuracy(std::span<const PatchAssessment> assessments,
                               const std::map<std::string, bool>& overrides)
{
    std::set<std::string> shas;
    for (const auto& a : assessments)
        shas.insert(a.sha);
    for (const auto& [sha, _] : overrides)
        if (!shas.contains(sha))
            throw UnknownOverrideSha("override for unknown sha " + sha);

    RepairAccuracy r;
    r.generated = assessments.size();
    for (const auto& a : assessments) {
        if (a.verdict != PatchVerdict::NeedsReview) {
            ++r.correct;
        } else if (auto it = overrides.find(a.sha); it != overrides.end() && it->second) {
            ++r.correct;
        }
    }
    r.accuracy = accuracy_percent(r.generated, r.correct);
    return r;
}

std::size_t export_review_queue(std::span<const PatchAssessment> assessments, const std::filesystem::path& path)
{
    std::vector<json> records;
    for (const auto& a : assessments) {
        if (a.verdict != PatchVerdict::NeedsReview)
            continue;
        json j = {{"sha", a.sha}};
        if (a.file)
            j["file"] = *a.file;
        j["candidate"] = a.candidate;
        j["ground_truth"] = a.ground_truth;
        j["verdict_slot"] = nullptr;
        records.push_back(std::move(j));
    }
    try {
        io::write_file_atomic(path, io::dump_jsonl(records));
    } catch (const std::exception& e) {
        throw io::IoError(std::string("cannot write review queue: ") + e.what());
    }
    return records.size();
}

std::map<std::string, bool> load_overrides(const std::filesystem::path& path)
{
    std::map<std::string, bool> out;
    for (const auto& rec : io::read_jsonl(path)) {
        const auto& j = rec.value;
        if (!j.is_object() || !j.contains("sha"))
            throw io::RecordParseError("override record needs a sha", rec.line);
        const auto& slot = j.value("verdict_slot", json(nullptr));
        if (slot.is_null())
            continue;
        if (!slot.is_boolean())
            throw io::RecordParseError("verdict_slot must be true, false or null", rec.line);
        out[j.at("sha").get<std::string>()] = slot.get<bool>();
    }
    return out;
}

MetricsReport summarize(std::vector<RunMetrics> runs)
{
    MetricsReport r;
    r.per_run = std::move(runs);
    std::vector<Metrics> ms;
    for (const auto& run : r.per_run)
        ms.push_back(run.metrics);
    r.average = average_runs(ms);
    return r;
}

EvaluationReport evaluate(const EvalDataset& dataset, const std::vector<std::vector<agents::Outcome>>& runs,
                          json config_snapshot)
{
    if (runs.empty())
        throw std::invalid_argument("evaluate needs at least one run");
    if (dataset.items.empty())
        throw std::invalid_argument("evaluation dataset is empty");

    EvaluationReport report;
    report.config = std::move(config_snapshot);
    report.buggy = dataset.buggy();
    report.clean = dataset.clean();

    std::map<std::string, std::vector<RunMetrics>> per_library;
    std::vector<RunMetrics> overall;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        std::map<std::string, agents::Verdict> folded;
        for (const auto& o : runs[r]) {
            auto v = o.is_bug() ? agents::Verdict::Bug : agents::Verdict::Clean;
            auto [it, fresh] = folded.emplace(o.sha, v);
            if (!fresh && v == agents::Verdict::Bug)
                it->second = v;
        }
        std::map<std::string, std::pair<std::vector<agents::Verdict>, std::vector<GroundTruth>>> by_lib;
        std::vector<agents::Verdict> all_pred;
        std::vector<GroundTruth> all_truth;
        for (const auto& item : dataset.items) {
            auto it = folded.find(item.sha);
            if (it == folded.end())
                throw MissingOutcome("run " + std::to_string(r) + " has no outcome for " + item.sha);
            by_lib[item.repo].first.push_back(it->second);
            by_lib[item.repo].second.push_back(item.truth);
            all_pred.push_back(it->second);
            all_truth.push_back(item.truth);
        }
        for (const auto& [lib, pair] : by_lib)
            per_library[lib].push_back(compute_metrics(pair.first, pair.second));
        overall.push_back(compute_metrics(all_pred, all_truth));
    }
    for (auto& [lib, rs] : per_library)
        report.libraries[lib] = summarize(std::move(rs));
    report.overall = summarize(std::move(overall));

    for (const auto& o : runs.front()) {
        if (!o.patch)
            continue;
        const EvalItem* item = dataset.find(o.sha);
        PatchAssessment a;
        if (item && item->ground_truth_patch) {
            a = assess_patch(*o.patch, *item->ground_truth_patch);
        } else {
            a.candidate = *o.patch;
            a.verdict = PatchVerdict::NeedsReview;
        }
        a.sha = o.sha;
        a.file = o.file;
        report.assessments.push_back(std::move(a));
    }
    report.repair = repair_accuracy(report.assessments, {});
    return report;
}

void apply_overrides(EvaluationReport& report, const std::map<std::string, bool>& overrides)
{
    report.repair = repair_accuracy(report.assessments, overrides);
    report.overrides = overrides;
}

json to_json(const EvaluationReport& report)
{
    json libs = json::object();
    for (const auto& [lib, r] : report.libraries)
        libs[lib] = report_json(r);
    json assessments = json::array();
    for (const auto& a : report.assessments) {
        json j = {{"sha", a.sha}, {"verdict", to_string(a.verdict)}, {"candidate", a.candidate},
                  {"ground_truth", a.ground_truth}};
        if (a.file)
            j["file"] = *a.file;
        assessments.push_back(std::move(j));
    }
    json overrides = json::object();
    for (const auto& [sha, ok] : report.overrides)
        overrides[sha] = ok;
    return {{"schema_version", report.schema_version},
            {"config", report.config},
            {"dataset", {{"buggy", report.buggy}, {"clean", report.clean}}},
            {"libraries", std::move(libs)},
            {"overall", report_json(report.overall)},
            {"repair",
             {{"generated", report.repair.generated},
              {"correct", report.repair.correct},
              {"accuracy", opt_json(report.repair.accuracy)},
              {"assessments", std::move(assessments)},
              {"overrides", std::move(overrides)}}}};
}

EvaluationReport report_from_json(const json& j)
{
    int version = j.value("schema_version", 0);
    if (version != kReportSchemaVersion)
        throw SchemaMismatch("report schema_version " + std::to_string(version) + ", expected "
                             + std::to_string(kReportSchemaVersion));
    EvaluationReport r;
    r.schema_version = version;
    r.config = j.value("config", json::object());
    if (j.contains("dataset")) {
        r.buggy = j.at("dataset").value("buggy", std::size_t{0});
        r.clean = j.at("dataset").value("clean", std::size_t{0});
    }
    for (const auto& [lib, body] : j.at("libraries").items())
        r.libraries[lib] = report_from(body);
    if (j.contains("overall"))
        r.overall = report_from(j.at("overall"));
    if (j.contains("repair")) {
        const auto& rep = j.at("repair");
        r.repair.generated = rep.value("generated", std::size_t{0});
        r.repair.correct = rep.value("correct", std::size_t{0});
        r.repair.accuracy = opt_double(rep, "accuracy");
        for (const auto& a : rep.value("assessments", json::array())) {
            PatchAssessment pa;
            pa.sha = a.at("sha").get<std::string>();
            if (a.contains("file"))
                pa.file = a.at("file").get<std::string>();
            pa.verdict = parse_patch_verdict(a.at("verdict").get<std::string>());
            pa.candidate = a.value("candidate", std::string());
            pa.ground_truth = a.value("ground_truth", std::string());
            r.assessments.push_back(std::move(pa));
        }
        const auto overrides = rep.value("overrides", json::object());
        for (const auto& [sha, ok] : overrides.items())
            r.overrides[sha] = ok.get<bool>();
    }
    return r;
}

ComparisonTable compare_reports(const std::vector<EvaluationReport>& reports)
{
    if (reports.empty())
        throw std::invalid_argument("no reports to compare");
    for (const auto& r : reports)
        if (r.schema_version != reports.front().schema_version)
            throw SchemaMismatch("reports mix schema versions " + std::to_string(reports.front().schema_version)
                                 + " and " + std::to_string(r.schema_version));

    static const std::vector<std::string> kOrder{"cot", "zero", "few"};
    std::map<std::string, const EvaluationReport*> by_strategy;
    for (const auto& r : reports) {
        auto s = r.config.value("strategy", std::string("unknown"));
        if (!by_strategy.emplace(s, &r).second)
            throw std::invalid_argument("two reports for strategy '" + s + "'");
    }

    ComparisonTable t;
    for (const auto& s : kOrder)
        if (by_strategy.contains(s))
            t.strategies.push_back(s);
    for (const auto& [s, _] : by_strategy)
        if (std::find(kOrder.begin(), kOrder.end(), s) == kOrder.end())
            t.strategies.push_back(s);

    std::set<std::string> libraries;
    for (const auto& r : reports)
        for (const auto& [lib, _] : r.libraries)
            libraries.insert(lib);

    std::map<std::string, std::vector<Metrics>> column_values;
    for (const auto& lib : libraries) {
        std::map<std::string, Metrics> row;
        for (const auto& s : t.strategies) {
            const auto& libs = by_strategy.at(s)->libraries;
            if (auto it = libs.find(lib); it != libs.end()) {
                row[s] = it->second.average;
                column_values[s].push_back(it->second.average);
            }
        }
        t.rows.emplace_back(lib, std::move(row));
    }
    std::map<std::string, Metrics> avg;
    for (const auto& [s, values] : column_values)
        avg[s] = average_runs(values);
    t.rows.emplace_back("Average", std::move(avg));
    return t;
}

std::string ComparisonTable::render_text() const
{
    std::size_t name_w = 7;
    for (const auto& [name, _] : rows)
        name_w = std::max(name_w, name.size());
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w)
            s.insert(0, w - s.size(), ' ');
        return s;
    };

    std::ostringstream out;
    out << std::string(name_w, ' ');
    for (const auto& s : strategies)
        out << " | " << pad(s, 8) << pad("", 16);
    out << '\n' << std::string(name_w, ' ');
    for (std::size_t i = 0; i < strategies.size(); ++i)
        out << " | " << pad("P", 8) << pad("R", 8) << pad("F1", 8);
    out << '\n';
    for (const auto& [name, cells] : rows) {
        out << name << std::string(name_w - name.size(), ' ');
        for (const auto& s : strategies) {
            auto it = cells.find(s);
            Metrics m = it == cells.end() ? Metrics{} : it->second;
            out << " | " << pad(display(m.precision), 8) << pad(display(m.recall), 8) << pad(display(m.f1), 8);
        }
        out << '\n';
    }
    return out.str();
}

json ComparisonTable::to_json() const
{
    json rows_json = json::array();
    for (const auto& [name, cells] : rows) {
        json c = json::object();
        for (const auto& [s, m] : cells)
            c[s] = metrics_json(m);
        rows_json.push_back({{"library", name}, {"cells", std::move(c)}});
    }
    return {{"strategies", strategies}, {"rows", std::move(rows_json)}};
}

} // namespace checkguard::eval

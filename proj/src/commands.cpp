#include "checkguard/commands.hpp"

#include "checkguard/agents.hpp"
#include "checkguard/digest.hpp"
#include "checkguard/eval.hpp"
#include "checkguard/io.hpp"
#include "checkguard/miner.hpp"
#include "checkguard/taxonomy.hpp"
#include "checkguard/text.hpp"
#include "checkguard/vector_store.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>

#ifndef CHECKGUARD_VERSION
#define CHECKGUARD_VERSION "dev"
#endif

namespace checkguard::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string now_iso()
{
    return text::format_iso8601(std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now()));
}

void write_records(const fs::path& path, const std::vector<json>& records)
{
    io::write_file_atomic(path, io::dump_jsonl(records));
}

std::vector<json> outcome_records(const std::vector<agents::Outcome>& outcomes)
{
    std::vector<json> out;
    out.reserve(outcomes.size());
    for (const auto& o : outcomes)
        out.push_back(agents::to_json(o));
    return out;
}

// Detection shots: the first `cfg.shots` records of the configured
// labeled dataset, else the built-in generic pair.
std::vector<taxonomy::RuleExample> detection_shots(const PipelineConfig& cfg)
{
    std::vector<taxonomy::RuleExample> shots;
    if (cfg.detection_shots) {
        for (const auto& bug : taxonomy::load_dataset(*cfg.detection_shots)) {
            if (shots.size() == cfg.shots)
                break;
            shots.push_back({bug.message, bug.change});
        }
    } else {
        shots = taxonomy::default_fallback_examples();
        if (shots.size() > cfg.shots)
            shots.resize(cfg.shots);
    }
    if (shots.empty())
        throw agents::MissingShots("few-shot strategy configured but no detection examples are available");
    return shots;
}

agents::PromptStrategy make_strategy(const PipelineConfig& cfg)
{
    switch (agents::parse_strategy(cfg.strategy)) {
    case agents::StrategyKind::ChainOfThought: return agents::PromptStrategy::chain_of_thought();
    case agents::StrategyKind::ZeroShot: return agents::PromptStrategy::zero_shot();
    case agents::StrategyKind::FewShot: return agents::PromptStrategy::few_shot(detection_shots(cfg));
    }
    throw ConfigError("unknown strategy");
}

agents::ElementLexicon make_lexicon(const PipelineConfig& cfg)
{
    if (!cfg.lexicon)
        return agents::ElementLexicon::defaults();
    try {
        return agents::ElementLexicon::from_json(json::parse(io::read_file(*cfg.lexicon)));
    } catch (const std::exception& e) {
        throw ConfigError("lexicon " + cfg.lexicon->string() + ": " + e.what());
    }
}

std::unique_ptr<llm::TranscriptLog> open_transcripts(const PipelineConfig& cfg, const fs::path& out)
{
    fs::path path = cfg.transcripts ? *cfg.transcripts : fs::path(out.string() + ".transcripts.jsonl");
    fs::remove(path);
    return std::make_unique<llm::TranscriptLog>(path);
}

struct RetrievalSetup {
    std::optional<rag::VectorStore> store;
    std::unique_ptr<rag::EmbeddingProvider> provider;

    agents::Retrieval view(std::size_t k) const
    {
        agents::Retrieval r;
        if (store && provider) {
            r.store = &*store;
            r.provider = provider.get();
        }
        r.k = k;
        return r;
    }
};

RetrievalSetup open_retrieval(const PipelineConfig& cfg, bool required)
{
    RetrievalSetup s;
    if (!cfg.retrieval_enabled)
        return s;
    if (!cfg.store) {
        if (required)
            throw ConfigError("retrieval is enabled but no store is configured (set store or disable retrieval)");
        return s;
    }
    s.store = rag::VectorStore::open(*cfg.store);
    s.provider = make_embedding_provider(cfg);
    if (s.store->provider_name() != s.provider->name() || s.store->dimension() != s.provider->dimension())
        throw ConfigError("store " + cfg.store->string() + " was built with provider " + s.store->provider_name()
                          + "/" + std::to_string(s.store->dimension()) + ", configured "
                          + s.provider->name() + "/" + std::to_string(s.provider->dimension()));
    return s;
}

taxonomy::RuleSet load_ruleset(const PipelineConfig& cfg)
{
    if (cfg.ruleset)
        return taxonomy::RuleSet::load(*cfg.ruleset);
    taxonomy::RuleSet rs;
    rs.set_fallback(taxonomy::default_fallback_examples());
    return rs;
}

std::vector<miner::Commit> load_commit_like(const fs::path& path)
{
    // Mined commits carry "changes"; labeled dataset records carry "diff".
    std::vector<miner::Commit> out;
    std::set<std::string> seen;
    for (const auto& rec : io::read_jsonl(path)) {
        const auto& j = rec.value;
        try {
            miner::Commit c;
            if (j.contains("changes")) {
                c = j.get<miner::Commit>();
            } else {
                c.sha = j.at("sha").get<std::string>();
                c.repo = j.value("repo", std::string());
                c.message = j.value("message", std::string());
                c.changes = diff::parse_diff(j.at("diff").get<std::string>());
                c.file_count = miner::count_files(c.changes);
            }
            if (!seen.insert(c.sha).second)
                throw InputError("duplicate sha " + c.sha);
            out.push_back(std::move(c));
        } catch (const diff::MalformedDiff&) {
            throw;
        } catch (const InputError& e) {
            throw io::RecordParseError(e.what(), rec.line);
        } catch (const json::exception& e) {
            throw io::RecordParseError(e.what(), rec.line);
        }
    }
    return out;
}

std::string fmt_metric(const std::optional<double>& v) { return v ? text::format_fixed(*v, 2) : "n/a"; }

} // namespace

int exit_code_for(const std::exception& e)
{
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const miner::InvalidDateRange*>(&e)
        || dynamic_cast<const agents::MissingShots*>(&e))
        return kExitConfig;
    if (dynamic_cast<const llm::GatewayError*>(&e) || dynamic_cast<const rag::ProviderUnavailable*>(&e))
        return kExitBackend;
    if (dynamic_cast<const InputError*>(&e) || dynamic_cast<const io::IoError*>(&e)
        || dynamic_cast<const io::RecordParseError*>(&e) || dynamic_cast<const diff::MalformedDiff*>(&e)
        || dynamic_cast<const miner::RepoUnreadable*>(&e) || dynamic_cast<const rag::CorruptIndex*>(&e)
        || dynamic_cast<const rag::EmptyStore*>(&e) || dynamic_cast<const taxonomy::UnknownCategory*>(&e)
        || dynamic_cast<const taxonomy::UnknownElementKey*>(&e) || dynamic_cast<const eval::MissingOutcome*>(&e)
        || dynamic_cast<const eval::SchemaMismatch*>(&e) || dynamic_cast<const eval::UnknownOverrideSha*>(&e)
        || dynamic_cast<const eval::LengthMismatch*>(&e) || dynamic_cast<const json::exception*>(&e))
        return kExitInput;
    return kExitOther;
}

std::unique_ptr<llm::Backend> make_backend(const PipelineConfig& cfg)
{
    if (cfg.backend.kind == "scripted") {
        if (cfg.backend.script)
            return std::make_unique<llm::ScriptedBackend>(
                llm::ScriptedBackend::from_file(*cfg.backend.script, cfg.backend.default_response));
        return std::make_unique<llm::ScriptedBackend>(cfg.backend.default_response);
    }
    llm::RemoteConfig rc;
    rc.base_url = cfg.backend.base_url;
    rc.api_key_env = cfg.backend.api_key_env;
    rc.timeout = std::chrono::milliseconds(cfg.backend.timeout_ms);
    rc.max_retries = cfg.backend.max_retries;
    rc.concurrency = cfg.concurrency;
    return std::make_unique<llm::RemoteBackend>(rc);
}

std::unique_ptr<rag::EmbeddingProvider> make_embedding_provider(const PipelineConfig& cfg)
{
    if (cfg.embedding.provider == "hashing")
        return std::make_unique<rag::HashingProvider>(cfg.embedding.dimension, cfg.seed);
    rag::RemoteEmbeddingConfig rc;
    rc.base_url = cfg.embedding.base_url;
    rc.model = cfg.embedding.model;
    rc.dimension = cfg.embedding.dimension;
    rc.api_key_env = cfg.embedding.api_key_env;
    rc.timeout = std::chrono::milliseconds(cfg.embedding.timeout_ms);
    rc.max_retries = cfg.embedding.max_retries;
    return std::make_unique<rag::RemoteEmbeddingProvider>(rc);
}

std::string digest_path(const fs::path& path)
{
    if (!fs::is_directory(path))
        return sha256_file(path);
    std::vector<std::string> entries;
    for (const auto& e : fs::recursive_directory_iterator(path))
        if (e.is_regular_file())
            entries.push_back(fs::relative(e.path(), path).generic_string() + " " + sha256_file(e.path()));
    std::sort(entries.begin(), entries.end());
    return sha256_hex(text::join(entries, "\n"));
}

RunManifest::RunManifest(std::string command, json config)
    : command_(std::move(command))
    , config_(std::move(config))
    , started_at_(now_iso())
{
}

void RunManifest::add_input(const fs::path& path) { inputs_[path.string()] = digest_path(path); }
void RunManifest::add_output(const fs::path& path) { outputs_[path.string()] = digest_path(path); }

void RunManifest::write(const fs::path& path)
{
    json doc = {{"tool", "checkguard"},  {"version", CHECKGUARD_VERSION}, {"command", command_},
                {"config", config_},     {"started_at", started_at_},     {"finished_at", now_iso()},
                {"inputs", inputs_},     {"outputs", outputs_}};
    io::write_file_atomic(path, doc.dump(2) + "\n");
}

std::string cmd_mine(const PipelineConfig& cfg, const MineArgs& args)
{
    if (cfg.repos.empty())
        throw ConfigError("mine needs at least one repository");
    RunManifest manifest("mine", cfg.to_json());
    auto commits = miner::mine_repositories(cfg.repos, text::parse_iso8601(cfg.since), text::parse_iso8601(cfg.until));
    std::size_t mined = commits.size();

    std::vector<miner::Commit> kept;
    if (cfg.keywords) {
        auto keywords = miner::load_keyword_file(*cfg.keywords);
        manifest.add_input(*cfg.keywords);
        for (auto& c : commits)
            if (miner::match_keywords(c, keywords))
                kept.push_back(std::move(c));
    } else {
        kept = std::move(commits);
    }
    std::size_t matched = kept.size();
    if (args.eval_filter)
        kept = miner::filter_for_eval(kept, cfg.eval);

    miner::write_commits(args.out, kept);
    manifest.add_output(args.out);
    manifest.write(args.out.string() + ".manifest.json");

    std::ostringstream out;
    out << "mined " << mined << " commits, " << matched << " keyword-matched";
    if (args.eval_filter)
        out << ", " << kept.size() << " within eval thresholds";
    out << " -> " << args.out.string() << '\n';
    if (args.suggest > 0 && cfg.keywords) {
        std::set<std::string> stop;
        if (cfg.stoplist)
            stop = miner::load_word_list(*cfg.stoplist);
        auto suggestions = miner::snowball_suggest(kept, miner::load_keyword_file(*cfg.keywords), stop, args.suggest);
        out << "keyword suggestions (review before adding):\n";
        for (const auto& s : suggestions)
            out << "  " << s.token << " (" << s.document_frequency << ")\n";
    }
    return out.str();
}

std::string cmd_build_rag(const PipelineConfig& cfg, const BuildRagArgs& args)
{
    if (!cfg.store)
        throw ConfigError("build-rag needs a store directory");
    RunManifest manifest("build-rag", cfg.to_json());
    auto commits = load_commit_like(args.changes);
    manifest.add_input(args.changes);

    std::vector<rag::EmbeddedDocument> docs;
    std::set<std::string> ids;
    for (const auto& c : commits)
        for (const auto& ch : c.changes) {
            std::string id = c.sha + ":" + ch.file_path;
            if (!ids.insert(id).second)
                continue;
            docs.push_back({id, diff::render_change(ch), {}, {{"repo", c.repo}, {"sha", c.sha}, {"file_path", ch.file_path}}});
        }

    auto provider = make_embedding_provider(cfg);
    std::vector<std::string> texts;
    texts.reserve(docs.size());
    for (const auto& d : docs)
        texts.push_back(d.text);
    auto vectors = rag::embed_batch(*provider, texts, cfg.embedding.batch_size);
    for (std::size_t i = 0; i < docs.size(); ++i)
        docs[i].vector = std::move(vectors[i]);

    fs::create_directories(*cfg.store);
    auto store = rag::VectorStore::open_or_create(*cfg.store, provider->dimension(), provider->name());
    std::size_t n = store.index(docs);
    manifest.add_output(*cfg.store);
    manifest.write(cfg.store->string() + ".manifest.json");

    std::ostringstream out;
    out << "indexed " << n << " documents into " << cfg.store->string() << " (" << store.size() << " total, "
        << provider->name() << ", dim " << provider->dimension() << ")\n";
    return out.str();
}

std::string cmd_detect(const PipelineConfig& cfg, const PipelineArgs& args)
{
    RunManifest manifest(args.repair ? "repair" : "detect", cfg.to_json());
    auto strategy = make_strategy(cfg);
    auto lexicon = make_lexicon(cfg);
    std::optional<taxonomy::RuleSet> ruleset;
    RetrievalSetup retrieval;
    if (args.repair) {
        ruleset = load_ruleset(cfg);
        retrieval = open_retrieval(cfg, true);
        if (cfg.ruleset)
            manifest.add_input(*cfg.ruleset);
        if (retrieval.store)
            manifest.add_input(*cfg.store);
    }
    auto commits = load_commit_like(args.commits);
    manifest.add_input(args.commits);
    if (cfg.backend.script)
        manifest.add_input(*cfg.backend.script);

    auto backend = make_backend(cfg);
    auto transcripts = open_transcripts(cfg, args.out);
    agents::AgentRuntime rt{*backend, {cfg.backend.model, cfg.backend.temperature, cfg.backend.max_tokens},
                            transcripts.get()};
    agents::PipelineOptions opts;
    opts.granularity = agents::parse_granularity(cfg.unit);
    opts.repair = args.repair;
    opts.patch_shots = cfg.shots;
    opts.concurrency = static_cast<std::size_t>(cfg.concurrency);

    auto units = agents::make_units(commits, opts.granularity);
    auto outcomes = agents::run_pipeline(rt, strategy, retrieval.view(cfg.retrieval_k),
                                         ruleset ? &*ruleset : nullptr, lexicon, units, opts);
    write_records(args.out, outcome_records(outcomes));
    manifest.add_output(args.out);
    manifest.write(args.out.string() + ".manifest.json");

    std::size_t bugs = 0, fallback = 0, errors = 0, patches = 0;
    for (const auto& o : outcomes) {
        bugs += o.is_bug();
        fallback += o.decision && o.decision->flagged();
        errors += o.errored();
        patches += o.patch.has_value();
    }
    std::ostringstream out;
    out << units.size() << " units: " << bugs << " Bug, " << (units.size() - bugs) << " Clean/other, " << fallback
        << " fallback verdicts, " << errors << " errors";
    if (args.repair)
        out << ", " << patches << " patches";
    out << " -> " << args.out.string() << '\n';
    return out.str();
}

std::string cmd_eval(const PipelineConfig& cfg, const EvalArgs& args)
{
    if (args.outcomes.empty())
        throw ConfigError("eval needs at least one outcomes file");
    RunManifest manifest("eval", cfg.to_json());
    auto dataset = eval::EvalDataset::load(args.dataset);
    manifest.add_input(args.dataset);

    std::vector<std::vector<agents::Outcome>> runs;
    for (const auto& path : args.outcomes) {
        manifest.add_input(path);
        std::map<long, std::vector<agents::Outcome>> grouped;
        for (const auto& rec : io::read_jsonl(path)) {
            try {
                long run = rec.value.value("run", -1L);
                grouped[run].push_back(agents::outcome_from_json(rec.value));
            } catch (const std::exception& e) {
                throw io::RecordParseError(e.what(), rec.line);
            }
        }
        if (grouped.empty())
            grouped[-1];
        for (auto& [_, outs] : grouped)
            runs.push_back(std::move(outs));
    }
    if (args.runs && static_cast<std::size_t>(*args.runs) != runs.size())
        throw ConfigError("expected " + std::to_string(*args.runs) + " runs, found " + std::to_string(runs.size()));

    json snapshot = cfg.snapshot();
    snapshot["runs"] = runs.size();
    auto report = eval::evaluate(dataset, runs, snapshot);
    io::write_file_atomic(args.report, eval::to_json(report).dump(2) + "\n");
    manifest.add_output(args.report);

    std::ostringstream out;
    out << "dataset: " << report.buggy << " Buggy, " << report.clean << " Clean; " << runs.size() << " run(s)\n";
    for (const auto& [lib, m] : report.libraries)
        out << "  " << lib << ": P=" << fmt_metric(m.average.precision) << " R=" << fmt_metric(m.average.recall)
            << " F1=" << fmt_metric(m.average.f1) << '\n';
    out << "  overall: P=" << fmt_metric(report.overall.average.precision)
        << " R=" << fmt_metric(report.overall.average.recall) << " F1=" << fmt_metric(report.overall.average.f1)
        << '\n';
    out << "repair: " << report.repair.generated << " generated, " << report.repair.correct
        << " correct, accuracy " << (report.repair.accuracy ? text::format_fixed(*report.repair.accuracy, 1) + "%" : "n/a")
        << '\n';
    if (args.review_queue) {
        auto n = eval::export_review_queue(report.assessments, *args.review_queue);
        manifest.add_output(*args.review_queue);
        out << n << " patch(es) queued for review -> " << args.review_queue->string() << '\n';
    }
    manifest.write(args.report.string() + ".manifest.json");
    return out.str();
}

json cmd_scan(const PipelineConfig& cfg, const ScanArgs& args)
{
    if (!cfg.keywords)
        throw ConfigError("scan needs a keyword file");
    RunManifest manifest("scan", cfg.to_json());
    auto keywords = miner::load_keyword_file(*cfg.keywords);
    manifest.add_input(*cfg.keywords);
    auto strategy = make_strategy(cfg);
    auto lexicon = make_lexicon(cfg);
    auto ruleset = load_ruleset(cfg);
    auto retrieval = open_retrieval(cfg, false);
    if (cfg.backend.script)
        manifest.add_input(*cfg.backend.script);

    auto commits = miner::mine_commits(args.repo, text::parse_iso8601(cfg.since), text::parse_iso8601(cfg.until));
    std::size_t total_commits = commits.size();
    std::vector<miner::Commit> matched;
    for (auto& c : commits)
        if (miner::match_keywords(c, keywords))
            matched.push_back(std::move(c));

    fs::create_directories(args.out_dir);
    auto backend = make_backend(cfg);
    auto transcripts = open_transcripts(cfg, args.out_dir / "outcomes.jsonl");
    agents::AgentRuntime rt{*backend, {cfg.backend.model, cfg.backend.temperature, cfg.backend.max_tokens},
                            transcripts.get()};
    agents::PipelineOptions opts;
    opts.granularity = agents::Granularity::Change;
    opts.patch_shots = cfg.shots;
    opts.concurrency = static_cast<std::size_t>(cfg.concurrency);
    auto units = agents::make_units(matched, opts.granularity);
    auto outcomes = agents::run_pipeline(rt, strategy, retrieval.view(cfg.retrieval_k), &ruleset, lexicon, units, opts);

    std::vector<eval::PatchAssessment> queue;
    std::size_t flagged = 0, fallback = 0, errors = 0;
    for (const auto& o : outcomes) {
        flagged += o.is_bug();
        fallback += o.decision && o.decision->flagged();
        errors += o.errored();
        if (o.patch) {
            eval::PatchAssessment a;
            a.sha = o.sha;
            a.file = o.file;
            a.candidate = *o.patch;
            queue.push_back(std::move(a));
        }
    }

    auto commits_path = args.out_dir / "commits.jsonl";
    auto outcomes_path = args.out_dir / "outcomes.jsonl";
    auto queue_path = args.out_dir / "review_queue.jsonl";
    auto report_path = args.out_dir / "scan_report.json";
    miner::write_commits(commits_path, matched);
    write_records(outcomes_path, outcome_records(outcomes));
    std::size_t queued = eval::export_review_queue(queue, queue_path);

    json report = {{"repo", args.repo.string()},
                   {"total_commits", total_commits},
                   {"matched_commits", matched.size()},
                   {"total_changes", units.size()},
                   {"flagged", flagged},
                   {"fallback_decisions", fallback},
                   {"errors", errors},
                   {"patches_generated", queue.size()},
                   {"review_queue", queued},
                   {"config", cfg.snapshot()}};
    io::write_file_atomic(report_path, report.dump(2) + "\n");
    for (const auto& p : {commits_path, outcomes_path, queue_path, report_path})
        manifest.add_output(p);
    manifest.write(report_path.string() + ".manifest.json");
    return report;
}

std::string cmd_report(const ReportArgs& args)
{
    if (args.reports.empty())
        throw ConfigError("report needs at least one report file");
    std::vector<eval::EvaluationReport> reports;
    for (const auto& p : args.reports)
        reports.push_back(eval::report_from_json(json::parse(io::read_file(p))));
    auto table = eval::compare_reports(reports);
    if (args.json_out)
        io::write_file_atomic(*args.json_out, table.to_json().dump(2) + "\n");
    return table.render_text();
}

std::string cmd_review_import(const ReviewImportArgs& args)
{
    auto report = eval::report_from_json(json::parse(io::read_file(args.report)));
    auto overrides = eval::load_overrides(args.overrides);
    eval::apply_overrides(report, overrides);
    io::write_file_atomic(args.report, eval::to_json(report).dump(2) + "\n");
    std::ostringstream out;
    out << "imported " << overrides.size() << " verdict(s): " << report.repair.correct << "/"
        << report.repair.generated << " correct, accuracy "
        << (report.repair.accuracy ? text::format_fixed(*report.repair.accuracy, 1) + "%" : "n/a") << '\n';
    return out.str();
}

} // namespace checkguard::cli

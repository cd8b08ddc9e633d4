#include "checkguard/commands.hpp"
#include "checkguard/config.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifndef CHECKGUARD_VERSION
#define CHECKGUARD_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace checkguard;

namespace {

// Command-line values that override the config file.
struct Overrides {
    std::optional<std::string> config;
    std::vector<std::string> repos;
    std::optional<std::string> since, until, keywords, stoplist;
    std::optional<std::string> strategy, backend, script, model, unit, store, ruleset, provider, transcripts;
    std::optional<std::string> shots_file, lexicon;
    std::optional<double> temperature;
    std::optional<std::size_t> k, batch_size;
    std::optional<int> concurrency;
    std::optional<std::uint64_t> seed;
    bool no_retrieval = false;
};

void add_config(CLI::App* sub, Overrides& o)
{
    sub->add_option("--config", o.config, "JSON configuration file");
}

void add_backend(CLI::App* sub, Overrides& o)
{
    sub->add_option("--strategy", o.strategy, "Detection prompt: cot, zero or few");
    sub->add_option("--backend", o.backend, "LLM backend: scripted or remote");
    sub->add_option("--script", o.script, "Scripted backend response file");
    sub->add_option("--model", o.model, "Model name sent to the backend");
    sub->add_option("--temperature", o.temperature, "Sampling temperature");
    sub->add_option("--unit", o.unit, "Detection unit: commit or change");
    sub->add_option("--shots-file", o.shots_file, "Labeled dataset supplying few-shot detection examples");
    sub->add_option("--lexicon", o.lexicon, "Root-cause element lexicon (JSON)");
    sub->add_option("--transcripts", o.transcripts, "Transcript file (default: <out>.transcripts.jsonl)");
    sub->add_option("--concurrency", o.concurrency, "Parallel pipelines");
    sub->add_option("--seed", o.seed, "Seed for every randomized component");
}

void add_retrieval(CLI::App* sub, Overrides& o)
{
    sub->add_option("--store", o.store, "Vector store directory");
    sub->add_option("--ruleset", o.ruleset, "Few-shot rule set for patch generation");
    sub->add_option("--k", o.k, "Retrieved documents per query");
    sub->add_option("--provider", o.provider, "Embedding provider: hashing or remote");
    sub->add_flag("--no-retrieval", o.no_retrieval, "Generate patches without retrieved context");
}

cli::PipelineConfig resolve(const Overrides& o)
{
    cli::PipelineConfig c = o.config ? cli::PipelineConfig::load(*o.config) : cli::PipelineConfig{};
    auto path = [](const std::optional<std::string>& s, std::optional<fs::path>& dst) {
        if (s)
            dst = fs::path(*s);
    };
    for (const auto& r : o.repos)
        c.repos.emplace_back(r);
    if (o.since) c.since = *o.since;
    if (o.until) c.until = *o.until;
    path(o.keywords, c.keywords);
    path(o.stoplist, c.stoplist);
    if (o.strategy) c.strategy = *o.strategy;
    if (o.backend) c.backend.kind = *o.backend;
    path(o.script, c.backend.script);
    if (o.model) c.backend.model = *o.model;
    if (o.temperature) c.backend.temperature = *o.temperature;
    if (o.unit) c.unit = *o.unit;
    path(o.store, c.store);
    path(o.ruleset, c.ruleset);
    if (o.provider) c.embedding.provider = *o.provider;
    if (o.batch_size) c.embedding.batch_size = *o.batch_size;
    if (o.k) c.retrieval_k = *o.k;
    if (o.no_retrieval) c.retrieval_enabled = false;
    path(o.transcripts, c.transcripts);
    path(o.shots_file, c.detection_shots);
    path(o.lexicon, c.lexicon);
    if (o.concurrency) c.concurrency = *o.concurrency;
    if (o.seed) c.seed = *o.seed;
    c.validate();
    return c;
}

void require_parent(const std::string& out)
{
    auto parent = fs::absolute(out).parent_path();
    if (!fs::is_directory(parent))
        throw cli::ConfigError("output directory does not exist: " + parent.string());
}

void require_input(const std::string& in)
{
    if (!fs::exists(in))
        throw cli::InputError("input not found: " + in);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Checker-bug mining, detection, repair and evaluation"};
    app.set_version_flag("--version", CHECKGUARD_VERSION);
    app.require_subcommand(1);
    Overrides o;

    std::string out, changes, commits, dataset, report, overrides_file, repo;
    std::vector<std::string> outcome_files, report_files;
    std::optional<std::string> review_queue, json_out;
    std::optional<int> runs;
    bool eval_filter = false;
    std::size_t suggest = 0;

    auto* mine = app.add_subcommand("mine", "Mine keyword-matched commits from local git repositories");
    add_config(mine, o);
    mine->add_option("--repo", o.repos, "Repository path (repeatable)");
    mine->add_option("--since", o.since, "Earliest author date (ISO-8601)");
    mine->add_option("--until", o.until, "Latest author date (ISO-8601)");
    mine->add_option("--keywords", o.keywords, "Keyword file");
    mine->add_option("--stoplist", o.stoplist, "Words never suggested as keywords");
    mine->add_option("--out", out, "Output commit records")->required();
    mine->add_flag("--eval-filter", eval_filter, "Keep only commits within the file/LOC thresholds");
    mine->add_option("--suggest", suggest, "Print the top N snowball keyword candidates");

    auto* build = app.add_subcommand("build-rag", "Embed code changes into the vector store");
    add_config(build, o);
    build->add_option("--changes", changes, "Commit or labeled-dataset records")->required();
    build->add_option("--store", o.store, "Vector store directory");
    build->add_option("--provider", o.provider, "Embedding provider: hashing or remote");
    build->add_option("--batch-size", o.batch_size, "Texts per provider call");
    build->add_option("--seed", o.seed, "Hashing provider seed");

    auto* detect = app.add_subcommand("detect", "Run the detection agent over commits");
    add_config(detect, o);
    add_backend(detect, o);
    detect->add_option("--commits", commits, "Commit records")->required();
    detect->add_option("--out", out, "Outcome records")->required();

    auto* repair = app.add_subcommand("repair", "Detect, analyze root causes and generate patches");
    add_config(repair, o);
    add_backend(repair, o);
    add_retrieval(repair, o);
    repair->add_option("--commits", commits, "Commit records")->required();
    repair->add_option("--out", out, "Outcome records")->required();

    auto* ev = app.add_subcommand("eval", "Score outcomes against a labeled evaluation set");
    add_config(ev, o);
    ev->add_option("--outcomes", outcome_files, "Outcome file, one per run (repeatable)")->required();
    ev->add_option("--dataset", dataset, "Evaluation set with Buggy/Clean labels")->required();
    ev->add_option("--runs", runs, "Expected number of runs");
    ev->add_option("--report", report, "Report file")->required();
    ev->add_option("--review-queue", review_queue, "Export patches needing human review");
    ev->add_option("--strategy", o.strategy, "Strategy recorded in the report");
    ev->add_option("--backend", o.backend, "Backend recorded in the report");
    ev->add_option("--temperature", o.temperature, "Temperature recorded in the report");
    ev->add_option("--seed", o.seed, "Seed recorded in the report");

    auto* scan = app.add_subcommand("scan", "Mine, filter, detect and repair an unlabeled repository");
    add_config(scan, o);
    add_backend(scan, o);
    add_retrieval(scan, o);
    scan->add_option("--repo", repo, "Repository path")->required();
    scan->add_option("--keywords", o.keywords, "Keyword file");
    scan->add_option("--since", o.since, "Earliest author date (ISO-8601)");
    scan->add_option("--until", o.until, "Latest author date (ISO-8601)");
    scan->add_option("--out", out, "Output directory")->required();

    auto* rep = app.add_subcommand("report", "Render a strategy comparison table from reports");
    add_config(rep, o);
    rep->add_option("--reports,reports", report_files, "Report files")->required();
    rep->add_option("--json", json_out, "Also write the table as JSON");

    auto* review = app.add_subcommand("review-import", "Apply human verdicts to a report");
    add_config(review, o);
    review->add_option("--report", report, "Report file to update")->required();
    review->add_option("--overrides", overrides_file, "Filled-in review queue")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : cli::kExitConfig;
    }

    try {
        auto cfg = resolve(o);
        if (mine->parsed()) {
            require_parent(out);
            std::cout << cli::cmd_mine(cfg, {out, eval_filter, suggest});
        } else if (build->parsed()) {
            require_input(changes);
            std::cout << cli::cmd_build_rag(cfg, {changes});
        } else if (detect->parsed() || repair->parsed()) {
            require_input(commits);
            require_parent(out);
            std::cout << cli::cmd_detect(cfg, {commits, out, repair->parsed()});
        } else if (ev->parsed()) {
            for (const auto& f : outcome_files)
                require_input(f);
            require_input(dataset);
            require_parent(report);
            if (review_queue)
                require_parent(*review_queue);
            cli::EvalArgs args{{outcome_files.begin(), outcome_files.end()}, dataset, runs, report, std::nullopt};
            if (review_queue)
                args.review_queue = fs::path(*review_queue);
            std::cout << cli::cmd_eval(cfg, args);
        } else if (scan->parsed()) {
            require_parent(out);
            auto r = cli::cmd_scan(cfg, {repo, out});
            std::cout << "scanned " << r["total_changes"] << " changes in " << r["matched_commits"]
                      << " keyword-matched commits: " << r["flagged"] << " flagged, " << r["patches_generated"]
                      << " patches, " << r["review_queue"] << " queued for review -> " << out << '\n';
        } else if (rep->parsed()) {
            for (const auto& f : report_files)
                require_input(f);
            cli::ReportArgs args{{report_files.begin(), report_files.end()}, std::nullopt};
            if (json_out)
                args.json_out = fs::path(*json_out);
            std::cout << cli::cmd_report(args);
        } else if (review->parsed()) {
            require_input(report);
            require_input(overrides_file);
            std::cout << cli::cmd_review_import({report, overrides_file});
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::exit_code_for(e);
    }
    return cli::kExitOk;
}

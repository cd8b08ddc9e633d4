#include "checkguard/commands.hpp"
#include "checkguard/config.hpp"
#include "checkguard/io.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace checkguard;
using testing::GitRepo;
using testing::run_cli;
using testing::TempDir;

namespace {

std::string fixture(const std::string& name) { return (testing::test_dir() / "fixtures" / name).string(); }

nlohmann::json manifest_digests(const std::filesystem::path& path)
{
    auto m = nlohmann::json::parse(testing::read_text(path));
    return {{"inputs", m.at("inputs")}, {"outputs", m.at("outputs")}};
}

} // namespace

TEST_CASE("config loading")
{
    TempDir tmp;
    testing::write_text(tmp / "script.jsonl", "");
    testing::write_text(tmp / "c.json", R"({"strategy": "zero", "backend": {"kind": "scripted", "script": "script.jsonl"},
                                            "runs": 3, "eval": {"max_files": 10, "max_loc": 15}})");
    auto cfg = cli::PipelineConfig::load(tmp / "c.json");
    CHECK(cfg.strategy == "zero");
    CHECK(cfg.runs == 3);
    CHECK(cfg.backend.script == tmp / "script.jsonl");
    CHECK(cfg.backend.temperature == 0.0);
    CHECK(cfg.retrieval_k == 1);
    CHECK(cfg.eval.max_loc == 15);
    CHECK_NOTHROW(cfg.validate());
    auto snap = cfg.snapshot();
    CHECK(snap.at("strategy") == "zero");
    CHECK(snap.at("temperature") == 0.0);

    testing::write_text(tmp / "unknown.json", R"({"strategy": "cot", "colour": "blue"})");
    CHECK_THROWS_AS(cli::PipelineConfig::load(tmp / "unknown.json"), cli::ConfigError);
    testing::write_text(tmp / "nested.json", R"({"backend": {"kind": "scripted", "flavour": 1}})");
    CHECK_THROWS_AS(cli::PipelineConfig::load(tmp / "nested.json"), cli::ConfigError);
    testing::write_text(tmp / "missing.json", R"({"backend": {"script": "nope.jsonl"}})");
    CHECK_THROWS_AS(cli::PipelineConfig::load(tmp / "missing.json").validate(), cli::ConfigError);
    testing::write_text(tmp / "dates.json", R"({"since": "2023-01-01", "until": "2022-01-01"})");
    CHECK_THROWS_AS(cli::PipelineConfig::load(tmp / "dates.json").validate(), cli::ConfigError);
    testing::write_text(tmp / "temp.json", R"({"backend": {"temperature": 3.0}})");
    CHECK_THROWS_AS(cli::PipelineConfig::load(tmp / "temp.json").validate(), cli::ConfigError);
    CHECK_THROWS(cli::PipelineConfig::load(tmp / "absent.json"));

    auto shipped = cli::PipelineConfig::load(testing::source_dir() / "config/example.json");
    CHECK(shipped.backend.kind == "remote");
    CHECK_NOTHROW(shipped.validate());
}

TEST_CASE("exit codes")
{
    TempDir tmp;
    testing::write_text(tmp / "unknown.json", R"({"strategy": "cot", "colour": "blue"})");
    auto out = (tmp / "o.jsonl").string();
    CHECK(run_cli({"detect", "--config", (tmp / "unknown.json").string(), "--commits", fixture("commits20.jsonl"),
                   "--out", out})
              .exit_code
          == 2);
    CHECK(run_cli({"detect", "--script", (tmp / "nope.jsonl").string(), "--commits", fixture("commits20.jsonl"),
                   "--out", out})
              .exit_code
          == 2);
    CHECK(run_cli({"detect", "--strategy", "many", "--commits", fixture("commits20.jsonl"), "--out", out}).exit_code
          == 2);
    CHECK(run_cli({"detect", "--bogus-flag"}).exit_code == 2);
    CHECK(run_cli({}).exit_code == 2);
    CHECK(run_cli({"detect", "--commits", (tmp / "absent.jsonl").string(), "--out", out}).exit_code == 3);
    testing::write_text(tmp / "broken.jsonl", "{not json\n");
    CHECK(run_cli({"detect", "--commits", (tmp / "broken.jsonl").string(), "--out", out}).exit_code == 3);
    CHECK_FALSE(std::filesystem::exists(out));
    CHECK(run_cli({"detect", "--strategy", "few", "--commits", fixture("commits20.jsonl"), "--out",
                   (tmp / "no-such-dir" / "o.jsonl").string()})
              .exit_code
          == 2);
    CHECK(run_cli({"--help"}).exit_code == 0);
}

TEST_CASE("detect, repair, eval, report and review-import end to end")
{
    TempDir tmp;
    auto script = fixture("script20.jsonl");
    auto commits = fixture("commits20.jsonl");
    auto dataset = fixture("eval20.jsonl");

    auto detect = run_cli({"detect", "--script", script, "--commits", commits, "--out", (tmp / "d.jsonl").string()});
    REQUIRE_MESSAGE(detect.exit_code == 0, detect.err);
    auto detected = io::read_jsonl(tmp / "d.jsonl");
    CHECK(detected.size() == 20);
    for (const auto& r : detected)
        CHECK_FALSE(r.value.contains("patch"));
    CHECK(std::filesystem::exists(tmp / "d.jsonl.transcripts.jsonl"));

    auto repair_args = [&](const std::string& out) {
        return std::vector<std::string>{"repair", "--script", script, "--commits", commits, "--no-retrieval", "--out", out};
    };
    auto r1 = run_cli(repair_args((tmp / "r1.jsonl").string()));
    REQUIRE_MESSAGE(r1.exit_code == 0, r1.err);
    auto r2 = run_cli(repair_args((tmp / "r2.jsonl").string()));
    REQUIRE(r2.exit_code == 0);
    CHECK(testing::read_text(tmp / "r1.jsonl") == testing::read_text(tmp / "r2.jsonl"));
    CHECK(manifest_digests(tmp / "r1.jsonl.manifest.json").at("inputs")
          == manifest_digests(tmp / "r2.jsonl.manifest.json").at("inputs"));
    CHECK(nlohmann::json::parse(testing::read_text(tmp / "r1.jsonl.manifest.json")).at("outputs").begin().value()
          == nlohmann::json::parse(testing::read_text(tmp / "r2.jsonl.manifest.json")).at("outputs").begin().value());

    auto ev = run_cli({"eval", "--outcomes", (tmp / "r1.jsonl").string(), "--outcomes", (tmp / "r2.jsonl").string(),
                       "--runs", "2", "--dataset", dataset, "--report", (tmp / "cot.json").string(), "--review-queue",
                       (tmp / "queue.jsonl").string(), "--strategy", "cot"});
    REQUIRE_MESSAGE(ev.exit_code == 0, ev.err);
    auto report = nlohmann::json::parse(testing::read_text(tmp / "cot.json"));
    CHECK(report.at("schema_version") == 1);
    auto conf = report.at("overall").at("per_run").at(0).at("confusion");
    CHECK(conf.at("tp") == 9);
    CHECK(conf.at("fp") == 2);
    CHECK(conf.at("fn") == 3);
    CHECK(conf.at("tn") == 6);
    CHECK(report.at("overall").at("per_run").size() == 2);
    CHECK(report.at("repair").at("generated") == 10);
    CHECK(report.at("repair").at("correct") == 6);
    auto queue = io::read_jsonl(tmp / "queue.jsonl");
    CHECK(queue.size() == 4);

    CHECK(run_cli({"eval", "--outcomes", (tmp / "r1.jsonl").string(), "--runs", "5", "--dataset", dataset, "--report",
                   (tmp / "x.json").string()})
              .exit_code
          == 2);

    // Accept the first queued patch.
    auto first = queue.at(0).value;
    first["verdict_slot"] = true;
    testing::write_text(tmp / "filled.jsonl", first.dump() + "\n");
    auto imp = run_cli({"review-import", "--report", (tmp / "cot.json").string(), "--overrides",
                        (tmp / "filled.jsonl").string()});
    REQUIRE_MESSAGE(imp.exit_code == 0, imp.err);
    auto updated = nlohmann::json::parse(testing::read_text(tmp / "cot.json"));
    CHECK(updated.at("repair").at("correct") == 7);
    testing::write_text(tmp / "stray.jsonl", R"({"sha": "ffff", "verdict_slot": true})" "\n");
    CHECK(run_cli({"review-import", "--report", (tmp / "cot.json").string(), "--overrides",
                   (tmp / "stray.jsonl").string()})
              .exit_code
          == 3);

    auto zero = run_cli({"repair", "--script", script, "--commits", commits, "--no-retrieval", "--strategy", "zero",
                         "--out", (tmp / "z.jsonl").string()});
    REQUIRE(zero.exit_code == 0);
    REQUIRE(run_cli({"eval", "--outcomes", (tmp / "z.jsonl").string(), "--dataset", dataset, "--report",
                     (tmp / "zero.json").string(), "--strategy", "zero"})
                .exit_code
            == 0);
    auto rep = run_cli({"report", (tmp / "cot.json").string(), (tmp / "zero.json").string(), "--json",
                        (tmp / "table.json").string()});
    REQUIRE_MESSAGE(rep.exit_code == 0, rep.err);
    CHECK(rep.out.find("cot") != std::string::npos);
    CHECK(rep.out.find("zero") != std::string::npos);
    CHECK(rep.out.find("Average") != std::string::npos);
    auto table = nlohmann::json::parse(testing::read_text(tmp / "table.json"));
    CHECK(table.at("strategies") == nlohmann::json{"cot", "zero"});

    auto bumped = updated;
    bumped["schema_version"] = 7;
    testing::write_text(tmp / "future.json", bumped.dump());
    CHECK(run_cli({"report", (tmp / "cot.json").string(), (tmp / "future.json").string()}).exit_code == 3);
}

TEST_CASE("build-rag then repair with retrieval")
{
    TempDir tmp;
    auto store = (tmp / "store").string();
    auto build = run_cli({"build-rag", "--changes", (testing::source_dir() / "data/checker_bugs.jsonl").string(),
                          "--store", store});
    REQUIRE_MESSAGE(build.exit_code == 0, build.err);
    CHECK(std::filesystem::exists(tmp / "store/manifest.json"));
    CHECK(std::filesystem::exists(tmp / "store.manifest.json"));
    auto again = run_cli({"build-rag", "--changes", (testing::source_dir() / "data/checker_bugs.jsonl").string(),
                          "--store", store});
    REQUIRE(again.exit_code == 0);
    CHECK(nlohmann::json::parse(testing::read_text(tmp / "store/manifest.json")).at("count") == 527);

    auto rep = run_cli({"repair", "--script", fixture("script20.jsonl"), "--commits", fixture("commits20.jsonl"),
                        "--store", store, "--ruleset", (testing::source_dir() / "data/ruleset.json").string(),
                        "--out", (tmp / "o.jsonl").string()});
    REQUIRE_MESSAGE(rep.exit_code == 0, rep.err);
    std::size_t with_context = 0;
    for (const auto& r : io::read_jsonl(tmp / "o.jsonl"))
        if (r.value.contains("retrieved_doc_ids") && r.value.at("retrieved_doc_ids").size() == 1)
            ++with_context;
    CHECK(with_context == 10);

    CHECK(run_cli({"repair", "--script", fixture("script20.jsonl"), "--commits", fixture("commits20.jsonl"),
                   "--store", (tmp / "absent").string(), "--out", (tmp / "p.jsonl").string()})
              .exit_code
          != 0);
    CHECK(run_cli({"repair", "--script", fixture("script20.jsonl"), "--commits", fixture("commits20.jsonl"),
                   "--store", store, "--seed", "3", "--out", (tmp / "q.jsonl").string()})
              .exit_code
          == 0);
}

TEST_CASE("mine and scan a small repository")
{
    TempDir tmp;
    GitRepo repo(tmp / "repo");
    const char* messages[12] = {
        "Initial import",           "Add validation for tensor rank", "Update docs",
        "Fix null pointer checker", "Refactor build scripts",         "Bump version",
        "Add bounds check in gather", "Rename variables",             "Improve error text",
        "Guard against empty input", "Format code",                   "Add missing assert on dims",
    };
    for (int i = 0; i < 12; ++i)
        repo.commit({{"src/f" + std::to_string(i) + ".cc", "int v" + std::to_string(i) + " = 0;\n"}}, messages[i],
                    "2023-0" + std::to_string(1 + i % 9) + "-1" + std::to_string(i % 10) + "T00:00:00Z");
    testing::write_text(tmp / "keywords.txt", "validation\nchecker\nbounds\nguard\nassert\n");
    testing::write_text(tmp / "script.jsonl",
                        R"({"contains": ["You are an AI trained to detect bugs", "gather"], "response": "YES"})" "\n"
                        R"({"contains": "Please describe the root cause", "response": "Index is not bounded."})" "\n"
                        R"({"contains": "You are given a bug explanation", "response": "```\nif (i >= n) return;\n```"})" "\n"
                        R"({"default": true, "response": "NO"})" "\n");

    auto mined = run_cli({"mine", "--repo", repo.dir().string(), "--keywords", (tmp / "keywords.txt").string(),
                          "--out", (tmp / "m.jsonl").string(), "--suggest", "3"});
    REQUIRE_MESSAGE(mined.exit_code == 0, mined.err);
    CHECK(io::read_jsonl(tmp / "m.jsonl").size() == 5);

    auto scan = run_cli({"scan", "--repo", repo.dir().string(), "--keywords", (tmp / "keywords.txt").string(),
                         "--script", (tmp / "script.jsonl").string(), "--no-retrieval", "--out",
                         (tmp / "scan").string()});
    REQUIRE_MESSAGE(scan.exit_code == 0, scan.err);
    auto report = nlohmann::json::parse(testing::read_text(tmp / "scan/scan_report.json"));
    CHECK(report.at("total_commits") == 12);
    CHECK(report.at("matched_commits") == 5);
    CHECK(report.at("total_changes") == 5);
    CHECK(report.at("flagged") == 1);
    CHECK(report.at("flagged") <= report.at("total_changes"));
    CHECK(report.at("patches_generated") == 1);
    CHECK(report.at("review_queue") == 1);
    CHECK(io::read_jsonl(tmp / "scan/outcomes.jsonl").size() == 5);
    auto queue = io::read_jsonl(tmp / "scan/review_queue.jsonl");
    REQUIRE(queue.size() == 1);
    CHECK(queue[0].value.at("candidate") == "if (i >= n) return;");
    CHECK(queue[0].value.at("ground_truth") == "");

    CHECK(run_cli({"scan", "--repo", (tmp / "absent").string(), "--keywords", (tmp / "keywords.txt").string(),
                   "--out", (tmp / "scan2").string()})
              .exit_code
          == 3);
}

TEST_CASE("exit code mapping")
{
    CHECK(cli::exit_code_for(cli::ConfigError("x")) == cli::kExitConfig);
    CHECK(cli::exit_code_for(cli::InputError("x")) == cli::kExitInput);
    CHECK(cli::exit_code_for(llm::RateLimited("x", {})) == cli::kExitBackend);
    CHECK(cli::exit_code_for(std::runtime_error("x")) == cli::kExitOther);
}

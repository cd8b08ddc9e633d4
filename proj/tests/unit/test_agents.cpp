#include "checkguard/agents.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace checkguard;
using namespace checkguard::agents;
using testing::TempDir;

namespace {

const char* kMessage = "Add missing axis bound check to ReduceMax";

diff::CodeChange fixture_change()
{
    auto changes = diff::parse_diff("diff --git a/tensorflow/core/kernels/reduce_max_op.cc b/tensorflow/core/kernels/reduce_max_op.cc\n"
                                    "--- a/tensorflow/core/kernels/reduce_max_op.cc\n"
                                    "+++ b/tensorflow/core/kernels/reduce_max_op.cc\n"
                                    "@@ -40,3 +40,4 @@ void Compute(OpKernelContext* ctx) {\n"
                                    "   const int axis = ctx->input(1).scalar<int>()();\n"
                                    "-  auto out = Reduce(input, axis);\n"
                                    "+  OP_REQUIRES(ctx, axis < input.dims(), errors::InvalidArgument(\"axis out of range\"));\n"
                                    "+  auto out = Reduce(input, axis);\n"
                                    "   return out;\n");
    REQUIRE(changes.size() == 1);
    return changes[0];
}

diff::CodeChange lines_change(std::string path, std::vector<std::string> removed, std::vector<std::string> added)
{
    std::vector<diff::HunkLine> body;
    for (auto& r : removed)
        body.push_back({diff::LineTag::Removed, r});
    for (auto& a : added)
        body.push_back({diff::LineTag::Added, a});
    return diff::make_change(std::move(path), {{1, static_cast<long>(removed.size()), 1, static_cast<long>(added.size()),
                                                "@@ -1 +1 @@", body}});
}

std::vector<taxonomy::RuleExample> fixture_shots()
{
    return {
        {"Check device type before launching cuda kernel",
         lines_change("aten/src/ATen/native/cuda/Kernel.cu", {}, {"  TORCH_CHECK(self.is_cuda(), \"expected a CUDA tensor\");"})},
        {"Validate that input tensor is on CPU",
         lines_change("aten/src/ATen/native/cpu/Op.cpp", {"  auto data = input.data_ptr<float>();"},
                      {"  TORCH_CHECK(input.device().is_cpu(), \"input must be a CPU tensor\");",
                       "  auto data = input.data_ptr<float>();"})},
    };
}

WorkUnit unit(std::string sha, std::string message, diff::CodeChange change)
{
    return {std::move(sha), std::nullopt, std::move(message), std::move(change)};
}

/// Backend that fails for prompts containing a needle.
class ThrowingBackend final : public llm::Backend {
public:
    ThrowingBackend(llm::Backend& inner, std::string needle)
        : inner_(inner)
        , needle_(std::move(needle))
    {
    }
    std::string name() const override { return "throwing"; }
    llm::ChatResponse complete(const llm::ChatRequest& r) override
    {
        if (r.messages.front().content.find(needle_) != std::string::npos)
            throw llm::RateLimited("quota exhausted", {{1, 429, "HTTP 429", 0}});
        return inner_.complete(r);
    }

private:
    llm::Backend& inner_;
    std::string needle_;
};

std::size_t count_agent(const llm::TranscriptLog& log, const std::string& agent)
{
    std::size_t n = 0;
    for (const auto& r : log.records())
        n += r.at("agent") == agent;
    return n;
}

} // namespace

TEST_CASE("prompt templates match the transcribed goldens byte for byte")
{
    auto change = fixture_change();
    CHECK(change.removed_lines.size() == 1);
    CHECK(change.added_lines.size() == 2);
    CHECK(render_detection_prompt(PromptStrategy::chain_of_thought(), kMessage, change)
          == testing::golden("detection_cot.txt"));
    CHECK(render_detection_prompt(PromptStrategy::zero_shot(), kMessage, change) == testing::golden("detection_zero.txt"));
    CHECK(render_detection_prompt(PromptStrategy::few_shot(fixture_shots()), kMessage, change)
          == testing::golden("detection_few.txt"));
    CHECK(render_root_cause_prompt(kMessage) == testing::golden("root_cause.txt"));
    CHECK(render_patch_prompt(fixture_shots(), "The kernel does not validate that axis is within the input rank.",
                              "-  x = a[i];\n+  if (i < n) x = a[i];", change)
          == testing::golden("patch_generation.txt"));
    CHECK(code_removed(change) + code_added(change) == diff::render_change(change));
}

TEST_CASE("strategies")
{
    CHECK_THROWS_AS(PromptStrategy::few_shot({}), MissingShots);
    PromptStrategy bad{StrategyKind::FewShot, {}};
    CHECK_THROWS_AS(bad.validate(), MissingShots);
    PromptStrategy extra{StrategyKind::ZeroShot, fixture_shots()};
    CHECK_THROWS_AS(extra.validate(), std::invalid_argument);
    CHECK(parse_strategy("cot") == StrategyKind::ChainOfThought);
    CHECK(parse_strategy("zero-shot") == StrategyKind::ZeroShot);
    CHECK(parse_strategy("few") == StrategyKind::FewShot);
    CHECK_THROWS_AS(parse_strategy("many"), std::invalid_argument);
    CHECK_THROWS_AS(render_root_cause_prompt(""), std::invalid_argument);
}

TEST_CASE("verdict parsing")
{
    auto yes = parse_decision("YES");
    CHECK(yes.verdict == Verdict::Bug);
    CHECK(yes.parse_path == ParsePath::ExactToken);
    CHECK_FALSE(yes.flagged());

    auto reasoned = parse_decision("Based on the analysis... NO");
    CHECK(reasoned.verdict == Verdict::Clean);
    CHECK(reasoned.parse_path == ParsePath::LastToken);

    auto maybe = parse_decision("maybe");
    CHECK(maybe.verdict == Verdict::Clean);
    CHECK(maybe.parse_path == ParsePath::Fallback);
    CHECK(maybe.flagged());

    CHECK(parse_decision("Yes.").parse_path == ParsePath::ExactToken);
    CHECK(parse_decision("Step 1: yes, but no.").verdict == Verdict::Clean);
    CHECK(parse_decision("no... actually YES").verdict == Verdict::Bug);
    CHECK(parse_decision("eyes nose").parse_path == ParsePath::Fallback);
    CHECK(parse_decision("").parse_path == ParsePath::Fallback);
}

TEST_CASE("patch extraction")
{
    auto fenced = extract_patch("The type check is missing.\n```cpp\n"
                                "if (!element_type.isInteger()) { return false;} return element_bitwidth == 32 || "
                                "element_bitwidth == 64;\n```\nDone.");
    REQUIRE(fenced);
    CHECK(fenced->patch
          == "if (!element_type.isInteger()) { return false;} return element_bitwidth == 32 || element_bitwidth == 64;");
    CHECK(fenced->think_steps == "The type check is missing.");

    auto marked = extract_patch("Step 1: find the bug.\n**Patch:**\n  if (x < n) y = a[x];\n");
    REQUIRE(marked);
    CHECK(marked->patch == "  if (x < n) y = a[x];");
    CHECK(marked->think_steps == "Step 1: find the bug.");

    auto inline_marker = extract_patch("### Patch: if (p == nullptr) return;");
    REQUIRE(inline_marker);
    CHECK(inline_marker->patch == "if (p == nullptr) return;");

    auto unterminated = extract_patch("```\nTORCH_CHECK(ok);");
    REQUIRE(unterminated);
    CHECK(unterminated->patch == "TORCH_CHECK(ok);");

    CHECK_FALSE(extract_patch("I cannot fix this."));
    CHECK_FALSE(extract_patch("Patches are hard."));
    CHECK_FALSE(extract_patch("```\n\n```"));
}

TEST_CASE("root cause agent")
{
    llm::ScriptedBackend backend;
    backend.add_rule({"Please describe the root cause", "ReduceMax"}, "The op fails to validate axis bound.");
    llm::TranscriptLog log;
    AgentRuntime rt{backend, {}, &log};
    auto cause = analyze_root_cause(rt, kMessage, "abc");
    CHECK(cause.text == "The op fails to validate axis bound.");
    CHECK(cause.source_sha == "abc");
    CHECK(ElementLexicon::defaults().classify(cause.text) == taxonomy::Element::BoundaryValue);
    REQUIRE(log.size() == 1);
    auto rec = log.records()[0];
    CHECK(rec.at("agent") == "root_cause");
    CHECK(rec.at("rendered_prompt") == testing::golden("root_cause.txt"));
    CHECK(rec.at("fingerprint") == llm::fingerprint(llm::user_request("gpt-3.5-turbo", 0, testing::golden("root_cause.txt"))));
    CHECK_THROWS_AS(analyze_root_cause(rt, "", "x"), std::invalid_argument);
}

TEST_CASE("patch agent with and without retrieval")
{
    TempDir tmp;
    rag::HashingProvider provider;
    auto store = rag::VectorStore::open_or_create(tmp / "store", provider.dimension(), provider.name());
    std::vector<std::string> texts{"-  x = a[i];\n+  if (i < n) x = a[i];", "+  TORCH_CHECK(t.is_cuda());"};
    auto vecs = rag::embed_batch(provider, texts);
    store.index(std::vector<rag::EmbeddedDocument>{{"k1", texts[0], vecs[0], {}}, {"k2", texts[1], vecs[1], {}}});

    llm::ScriptedBackend backend("```\n  if (axis >= input.dims()) return;\n```");
    llm::TranscriptLog log;
    AgentRuntime rt{backend, {}, &log};
    RootCauseExplanation cause{"index i is not checked against n before a[i]", "sha1"};

    auto with = generate_patch(rt, cause, {&store, &provider, 1}, fixture_change(), fixture_shots());
    CHECK(with.patch == "  if (axis >= input.dims()) return;");
    REQUIRE(with.retrieved_doc_ids.size() == 1);
    CHECK(with.retrieved_doc_ids[0] == "k1");
    auto rec = log.records().back();
    CHECK(rec.at("retrieval_query") == cause.text);
    CHECK(rec.at("retrieval_enabled") == true);
    CHECK(rec.at("rendered_prompt").get<std::string>().find("Retrieved context:\n" + texts[0] + "\nCode snippet:")
          != std::string::npos);

    auto without = generate_patch(rt, cause, {}, fixture_change(), fixture_shots());
    CHECK(without.retrieved_doc_ids.empty());
    auto rec2 = log.records().back();
    CHECK(rec2.at("retrieval_enabled") == false);
    CHECK(rec2.at("rendered_prompt").get<std::string>().find(std::string(kNoRetrievedContext)) != std::string::npos);

    llm::ScriptedBackend empty("no patch here");
    AgentRuntime rt2{empty, {}, nullptr};
    CHECK_THROWS_AS(generate_patch(rt2, cause, {}, fixture_change(), {}), EmptyPatch);

    auto blank = rag::VectorStore::open_or_create(tmp / "blank", provider.dimension(), provider.name());
    CHECK_THROWS_AS(generate_patch(rt, cause, {&blank, &provider, 1}, fixture_change(), {}), rag::EmptyStore);
}

TEST_CASE("pipeline calls repair only for Bug verdicts")
{
    llm::ScriptedBackend backend("NO");
    backend.add_rule({"You are given a bug explanation"}, "```\nTORCH_CHECK(ok);\n```");
    backend.add_rule({"Please describe the root cause"}, "The device type is not checked.");
    backend.add_rule({"You are an AI trained to detect bugs", "buggy"}, "YES");
    llm::TranscriptLog log;
    AgentRuntime rt{backend, {}, &log};
    auto change = fixture_change();
    std::vector<WorkUnit> units{unit("a", "buggy one", change), unit("b", "clean", change), unit("c", "buggy two", change)};
    taxonomy::RuleSet rs;
    rs.add(taxonomy::Element::DeviceType, fixture_shots()[0]);
    rs.set_fallback(taxonomy::default_fallback_examples());

    auto out = run_pipeline(rt, PromptStrategy::zero_shot(), {}, &rs, ElementLexicon::defaults(), units);
    REQUIRE(out.size() == 3);
    CHECK(out[0].is_bug());
    CHECK_FALSE(out[1].is_bug());
    CHECK(out[2].is_bug());
    CHECK(count_agent(log, "detection") == 3);
    CHECK(count_agent(log, "root_cause") == 2);
    CHECK(count_agent(log, "patch_generation") == 2);
    CHECK(out[0].patch == "TORCH_CHECK(ok);");
    CHECK(out[0].element == "DeviceType");
    CHECK_FALSE(out[0].fewshot_fallback);
    CHECK_FALSE(out[1].patch);
    CHECK(out[0].retrieved_doc_ids == std::vector<std::string>{});

    llm::TranscriptLog clean_log;
    AgentRuntime clean_rt{backend, {}, &clean_log};
    std::vector<WorkUnit> clean_units{unit("x", "clean", change), unit("y", "clean too", change)};
    run_pipeline(clean_rt, PromptStrategy::chain_of_thought(), {}, &rs, ElementLexicon::defaults(), clean_units);
    CHECK(clean_log.size() == 2);
    CHECK(count_agent(clean_log, "detection") == 2);

    auto detect_only = run_pipeline(rt, PromptStrategy::zero_shot(), {}, &rs, ElementLexicon::defaults(), units,
                                    {Granularity::Commit, false});
    CHECK(detect_only[0].is_bug());
    CHECK_FALSE(detect_only[0].patch);
}

TEST_CASE("pipeline records failures per unit")
{
    llm::ScriptedBackend inner("YES");
    inner.add_rule({"You are given a bug explanation"}, "```\nfix();\n```");
    inner.add_rule({"Please describe the root cause"}, "Something is null.");
    ThrowingBackend backend(inner, "You are given a bug explanation");
    llm::TranscriptLog log;
    AgentRuntime rt{backend, {}, &log};
    auto change = fixture_change();
    std::vector<WorkUnit> units{unit("a", "m1", change), unit("b", "m2", change),
                                unit("c", "m3", diff::make_change("empty.cc", {}))};
    taxonomy::RuleSet rs;
    rs.set_fallback(taxonomy::default_fallback_examples());
    auto out = run_pipeline(rt, PromptStrategy::chain_of_thought(), {}, &rs, ElementLexicon::defaults(), units);
    REQUIRE(out.size() == 3);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(out[i].is_bug());
        REQUIRE(out[i].errored());
        CHECK(out[i].error->starts_with("RateLimited: "));
        CHECK(out[i].root_cause == "Something is null.");
        CHECK(out[i].element == "NullValue");
        CHECK(out[i].fewshot_fallback);
    }
    CHECK(out[2].errored());
    CHECK_FALSE(out[2].decision);
    std::size_t errors = 0;
    for (const auto& r : log.records())
        errors += r.contains("error");
    CHECK(errors == 2);
}

TEST_CASE("pipeline output is deterministic under concurrency")
{
    llm::ScriptedBackend backend("NO");
    backend.add_rule({"You are given a bug explanation"}, "Reasoning.\nPatch:\nguard();");
    backend.add_rule({"Please describe the root cause"}, "Missing dtype check.");
    backend.add_rule({"You are an AI trained to detect bugs", "odd"}, "After review: YES");
    std::vector<WorkUnit> units;
    for (int i = 0; i < 40; ++i)
        units.push_back(unit("s" + std::to_string(i), i % 2 ? "odd" : "even",
                             lines_change("f" + std::to_string(i) + ".cc", {"x"}, {"y" + std::to_string(i)})));
    auto run = [&](std::size_t concurrency) {
        AgentRuntime rt{backend, {}, nullptr};
        auto out = run_pipeline(rt, PromptStrategy::chain_of_thought(), {}, nullptr, ElementLexicon::defaults(), units,
                                {Granularity::Commit, true, 2, concurrency});
        std::string dump;
        for (const auto& o : out)
            dump += to_json(o).dump() + "\n";
        return dump;
    };
    auto serial = run(1);
    CHECK(run(8) == serial);
    CHECK(run(8) == serial);
    CHECK(serial.find("\"patch\":\"guard();\"") != std::string::npos);
    CHECK(serial.find("\"element\":\"TypeChecking\"") != std::string::npos);
}

TEST_CASE("work units")
{
    miner::Commit c;
    c.sha = "abc";
    c.message = "msg";
    c.changes = {lines_change("a.cc", {"r1"}, {"a1"}), lines_change("b.cc", {}, {"a2", "a3"})};
    auto per_commit = make_units({c}, Granularity::Commit);
    REQUIRE(per_commit.size() == 1);
    CHECK(per_commit[0].change.file_path == "a.cc, b.cc");
    CHECK(per_commit[0].change.removed_lines == std::vector<std::string>{"r1"});
    CHECK(per_commit[0].change.added_lines == std::vector<std::string>{"a1", "a2", "a3"});
    CHECK_FALSE(per_commit[0].file);
    auto per_change = make_units({c}, Granularity::Change);
    REQUIRE(per_change.size() == 2);
    CHECK(per_change[1].file == "b.cc");
    CHECK(parse_granularity("change") == Granularity::Change);
    CHECK_THROWS(parse_granularity("hunk"));
}

TEST_CASE("lexicon")
{
    auto lx = ElementLexicon::defaults();
    using E = taxonomy::Element;
    CHECK(lx.classify("The error message is misleading") == E::ErrorMessage);
    CHECK(lx.classify("Tensor on a GPU device is not checked") == E::DeviceType);
    CHECK(lx.classify("missing dtype validation") == E::TypeChecking);
    CHECK(lx.classify("pointer may be nullptr") == E::NullValue);
    CHECK(lx.classify("division by zero") == E::EdgeCases);
    CHECK(lx.classify("the computation graph node is stale") == E::ComputationGraph);
    CHECK(lx.classify("something odd") == E::Others);
    CHECK(lx.classify("") == E::Others);
    auto back = ElementLexicon::from_json(lx.to_json());
    CHECK(back.to_json() == lx.to_json());
    auto custom = ElementLexicon::from_json(nlohmann::json::parse(R"([{"element": "BackendType", "keywords": ["odd"]}])"));
    CHECK(custom.classify("something odd") == E::BackendType);
    CHECK_THROWS(ElementLexicon::from_json(nlohmann::json::parse(R"([{"element": "Sneaky", "keywords": []}])")));
}

TEST_CASE("outcome json round trip")
{
    Outcome o;
    o.sha = "abc";
    o.file = "a.cc";
    o.decision = DetectionDecision{Verdict::Bug, "YES", ParsePath::ExactToken};
    o.root_cause = "why";
    o.element = "NullValue";
    o.think_steps = "t";
    o.patch = "p";
    o.retrieved_doc_ids = std::vector<std::string>{"d1"};
    o.fewshot_fallback = true;
    auto j = to_json(o);
    CHECK(j.at("flagged") == false);
    auto back = outcome_from_json(j);
    CHECK(to_json(back) == j);
    Outcome failed;
    failed.sha = "x";
    failed.error = "Timeout: slow";
    auto fj = to_json(failed);
    CHECK_FALSE(fj.contains("verdict"));
    CHECK_FALSE(fj.contains("fewshot_fallback"));
    CHECK(outcome_from_json(fj).errored());
}

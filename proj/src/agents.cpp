#include "checkguard/agents.hpp"

#include "checkguard/text.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <thread>

namespace checkguard::agents {

using nlohmann::json;

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string> alpha_tokens(std::string_view s)
{
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (!is_alpha(s[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < s.size() && is_alpha(s[j]))
            ++j;
        out.push_back(text::to_lower(s.substr(i, j - i)));
        i = j;
    }
    return out;
}

std::string_view rtrim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

// Drops leading blank lines and trailing whitespace; keeps the first
// line's indentation.
std::string block_text(const std::vector<std::string_view>& lines)
{
    std::size_t first = 0;
    while (first < lines.size() && text::trim(lines[first]).empty())
        ++first;
    std::string out;
    for (std::size_t i = first; i < lines.size(); ++i) {
        if (i > first)
            out += '\n';
        out += lines[i];
    }
    return std::string(rtrim(out));
}

std::string_view strip_decoration(std::string_view s)
{
    while (!s.empty() && (s.front() == '#' || s.front() == '*' || std::isspace(static_cast<unsigned char>(s.front()))))
        s.remove_prefix(1);
    return s;
}

json attempts_json(const std::vector<llm::AttemptRecord>& attempts)
{
    json arr = json::array();
    for (const auto& a : attempts)
        arr.push_back({{"attempt", a.attempt}, {"status", a.status}, {"error", a.error}, {"latency_ms", a.latency_ms}});
    return arr;
}

// Sends one single-message request and records the exchange. Gateway
// errors are recorded and rethrown.
struct Exchange {
    llm::ChatResponse response;
    json record;
};

Exchange exchange(AgentRuntime& rt, AgentKind kind, const std::string& subject, std::string prompt, json extra = {})
{
    auto request = llm::user_request(rt.settings.model, rt.settings.temperature, std::move(prompt),
                                     rt.settings.max_tokens);
    request.validate();
    json rec = {{"agent", to_string(kind)},
                {"subject", subject},
                {"fingerprint", llm::fingerprint(request)},
                {"request", llm::to_json(request)},
                {"rendered_prompt", request.messages.front().content}};
    if (extra.is_object())
        rec.update(extra);
    auto started = std::chrono::steady_clock::now();
    try {
        Exchange ex{rt.backend.complete(request), std::move(rec)};
        ex.record["response"] = ex.response.content;
        ex.record["finish_reason"] = llm::to_string(ex.response.finish_reason);
        ex.record["attempt_count"] = ex.response.attempt_count;
        ex.record["attempts"] = attempts_json(ex.response.attempts);
        ex.record["timing_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::steady_clock::now() - started)
                                     .count();
        return ex;
    } catch (const llm::GatewayError& e) {
        if (rt.transcripts) {
            rec["error"] = e.what();
            rec["attempts"] = attempts_json(e.attempts());
            rec["timing_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                   std::chrono::steady_clock::now() - started)
                                   .count();
            rt.transcripts->append(rec);
        }
        throw;
    }
}

void commit_record(AgentRuntime& rt, Exchange& ex, json parsed)
{
    if (!rt.transcripts)
        return;
    ex.record["parsed"] = std::move(parsed);
    rt.transcripts->append(ex.record);
}

std::string subject_of(const WorkUnit& unit) { return unit.file ? unit.sha + ":" + *unit.file : unit.sha; }

std::string describe(const std::exception& e)
{
    if (dynamic_cast<const EmptyPatch*>(&e))
        return std::string("EmptyPatch: ") + e.what();
    if (dynamic_cast<const llm::RateLimited*>(&e))
        return std::string("RateLimited: ") + e.what();
    if (dynamic_cast<const llm::Timeout*>(&e))
        return std::string("Timeout: ") + e.what();
    if (dynamic_cast<const llm::GatewayError*>(&e))
        return std::string("BackendError: ") + e.what();
    if (dynamic_cast<const rag::EmptyStore*>(&e))
        return std::string("EmptyStore: ") + e.what();
    if (dynamic_cast<const taxonomy::UnknownElementKey*>(&e))
        return std::string("UnknownElementKey: ") + e.what();
    return std::string("Error: ") + e.what();
}

} // namespace

DetectionDecision parse_decision(std::string_view raw)
{
    DetectionDecision d;
    d.raw = std::string(raw);
    auto tokens = alpha_tokens(raw);
    auto is_answer = [](const std::string& t) { return t == "yes" || t == "no"; };
    auto last = std::find_if(tokens.rbegin(), tokens.rend(), is_answer);
    if (last == tokens.rend()) {
        d.verdict = Verdict::Clean;
        d.parse_path = ParsePath::Fallback;
        return d;
    }
    d.verdict = *last == "yes" ? Verdict::Bug : Verdict::Clean;
    d.parse_path = tokens.size() == 1 ? ParsePath::ExactToken : ParsePath::LastToken;
    return d;
}

std::optional<PatchExtraction> extract_patch(std::string_view response)
{
    auto lines = text::split_lines(response);

    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!text::trim(lines[i]).starts_with("```"))
            continue;
        std::size_t end = i + 1;
        while (end < lines.size() && !text::trim(lines[end]).starts_with("```"))
            ++end;
        std::vector<std::string_view> body(lines.begin() + static_cast<long>(i) + 1,
                                           lines.begin() + static_cast<long>(end));
        std::string patch = block_text(body);
        if (patch.empty())
            break;
        std::vector<std::string_view> before(lines.begin(), lines.begin() + static_cast<long>(i));
        return PatchExtraction{std::string(text::trim(block_text(before))), std::move(patch)};
    }

    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view head = strip_decoration(lines[i]);
        if (!head.starts_with("Patch") || (head.size() > 5 && is_alpha(head[5])))
            continue;
        std::string_view rest = head.substr(5);
        if (auto colon = rest.find(':'); colon != std::string_view::npos)
            rest = rest.substr(colon + 1);
        else
            rest = {};
        while (!rest.empty() && (rest.front() == '*' || std::isspace(static_cast<unsigned char>(rest.front()))))
            rest.remove_prefix(1);
        std::vector<std::string_view> body;
        if (!rest.empty())
            body.push_back(rest);
        body.insert(body.end(), lines.begin() + static_cast<long>(i) + 1, lines.end());
        std::string patch = block_text(body);
        if (patch.empty())
            return std::nullopt;
        std::vector<std::string_view> before(lines.begin(), lines.begin() + static_cast<long>(i));
        return PatchExtraction{std::string(text::trim(block_text(before))), std::move(patch)};
    }
    return std::nullopt;
}

ElementLexicon ElementLexicon::defaults()
{
    using E = taxonomy::Element;
    ElementLexicon lx;
    lx.entries_ = {
        {E::ErrorMessage, {"error message", "error messages", "misleading message"}},
        {E::DeviceAvailability, {"available", "availability", "unavailable"}},
        {E::DeviceVersion, {"version", "driver", "compute capability"}},
        {E::DeviceType, {"device", "cuda", "gpu", "cpu", "tpu"}},
        {E::ExecutionMode, {"eager", "execution mode", "graph mode"}},
        {E::ComputationGraph, {"graph", "node", "nodes"}},
        {E::TensorQuantization, {"quantized", "quantization", "quantize"}},
        {E::BackendType, {"backend", "triton", "cudnn", "mkldnn", "onednn", "xla"}},
        {E::NullValue, {"null", "nullptr", "none", "nil"}},
        {E::BoundaryValue, {"bound", "bounds", "range", "index", "overflow", "out of range"}},
        {E::TypeChecking, {"dtype", "type", "types", "integer"}},
        {E::EdgeCases, {"empty", "edge case", "zero", "negative", "corner case"}},
    };
    return lx;
}

ElementLexicon ElementLexicon::from_json(const json& doc)
{
    if (!doc.is_array())
        throw std::invalid_argument("lexicon must be an array of {element, keywords}");
    ElementLexicon lx;
    for (const auto& e : doc) {
        if (!e.is_object() || !e.contains("element") || !e.contains("keywords"))
            throw std::invalid_argument("lexicon entry needs element and keywords");
        auto name = e.at("element").get<std::string>();
        auto el = taxonomy::parse_enum<taxonomy::Element>(name);
        if (!el)
            throw std::invalid_argument("lexicon: unknown element '" + name + "'");
        lx.entries_.push_back({*el, e.at("keywords").get<std::vector<std::string>>()});
    }
    return lx;
}

json ElementLexicon::to_json() const
{
    json arr = json::array();
    for (const auto& e : entries_)
        arr.push_back({{"element", std::string(taxonomy::to_string(e.element))}, {"keywords", e.keywords}});
    return arr;
}

taxonomy::Element ElementLexicon::classify(std::string_view text) const
{
    auto tokens = text::word_tokens(text);
    for (const auto& e : entries_)
        for (const auto& k : e.keywords)
            if (text::contains_token_run(tokens, text::word_tokens(k)))
                return e.element;
    return taxonomy::Element::Others;
}

Granularity parse_granularity(std::string_view name)
{
    if (name == "commit")
        return Granularity::Commit;
    if (name == "change")
        return Granularity::Change;
    throw std::invalid_argument("unknown unit '" + std::string(name) + "' (expected commit or change)");
}

std::string to_string(Granularity g) { return g == Granularity::Commit ? "commit" : "change"; }

diff::CodeChange merge_changes(const std::vector<diff::CodeChange>& changes)
{
    if (changes.size() == 1)
        return changes.front();
    diff::CodeChange out;
    out.binary = !changes.empty();
    std::vector<std::string> paths;
    for (const auto& c : changes) {
        paths.push_back(c.file_path);
        out.binary = out.binary && c.binary;
        out.hunks.insert(out.hunks.end(), c.hunks.begin(), c.hunks.end());
        out.removed_lines.insert(out.removed_lines.end(), c.removed_lines.begin(), c.removed_lines.end());
        out.added_lines.insert(out.added_lines.end(), c.added_lines.begin(), c.added_lines.end());
    }
    out.file_path = text::join(paths, ", ");
    return out;
}

std::vector<WorkUnit> make_units(const std::vector<miner::Commit>& commits, Granularity granularity)
{
    std::vector<WorkUnit> out;
    for (const auto& c : commits) {
        if (granularity == Granularity::Commit || c.changes.empty()) {
            out.push_back({c.sha, std::nullopt, c.message, merge_changes(c.changes)});
            continue;
        }
        for (const auto& ch : c.changes)
            out.push_back({c.sha, ch.file_path, c.message, ch});
    }
    return out;
}

DetectionDecision detect(AgentRuntime& rt, const PromptStrategy& strategy, const WorkUnit& unit)
{
    if (unit.change.changed_loc() == 0)
        throw std::invalid_argument("commit " + unit.sha + " has no changed lines to inspect");
    auto ex = exchange(rt, AgentKind::Detection, subject_of(unit),
                       render_detection_prompt(strategy, unit.message, unit.change),
                       {{"strategy", to_string(strategy.kind)}});
    auto d = parse_decision(ex.response.content);
    commit_record(rt, ex, {{"verdict", to_string(d.verdict)}, {"parse_path", to_string(d.parse_path)}});
    return d;
}

RootCauseExplanation analyze_root_cause(AgentRuntime& rt, std::string_view commit_message, std::string source_sha)
{
    auto ex = exchange(rt, AgentKind::RootCause, source_sha, render_root_cause_prompt(commit_message));
    commit_record(rt, ex, {{"explanation", ex.response.content}});
    return {ex.response.content, std::move(source_sha)};
}

PatchResult generate_patch(AgentRuntime& rt, const RootCauseExplanation& explanation, const Retrieval& retrieval,
                           const diff::CodeChange& snippet, const std::vector<taxonomy::RuleExample>& shots,
                           bool shots_from_fallback)
{
    PatchResult result;
    std::string knowledge(kNoRetrievedContext);
    json extra = {{"retrieval_enabled", retrieval.enabled()}, {"fewshot_fallback", shots_from_fallback}};
    if (retrieval.enabled()) {
        if (retrieval.k < 1)
            throw std::invalid_argument("retrieval k must be >= 1");
        auto hits = rag::retrieve_text(*retrieval.store, *retrieval.provider, explanation.text, retrieval.k);
        std::vector<std::string> texts;
        for (const auto& h : hits) {
            result.retrieved_doc_ids.push_back(h.doc_id);
            if (auto doc = retrieval.store->get(h.doc_id))
                texts.push_back(doc->text);
        }
        knowledge = text::join(texts, "\n\n");
        extra["retrieval_query"] = explanation.text;
        extra["retrieved_doc_ids"] = result.retrieved_doc_ids;
    }
    auto ex = exchange(rt, AgentKind::PatchGen, explanation.source_sha,
                       render_patch_prompt(shots, explanation.text, knowledge, snippet), extra);
    auto parts = extract_patch(ex.response.content);
    commit_record(rt, ex, parts ? json{{"patch", parts->patch}, {"think_steps", parts->think_steps}}
                                : json{{"error", "EmptyPatch"}});
    if (!parts)
        throw EmptyPatch("response for " + explanation.source_sha + " contains no patch block");
    result.think_steps = std::move(parts->think_steps);
    result.patch = std::move(parts->patch);
    return result;
}

std::vector<Outcome> run_pipeline(AgentRuntime& rt, const PromptStrategy& strategy, const Retrieval& retrieval,
                                  const taxonomy::RuleSet* ruleset, const ElementLexicon& lexicon,
                                  const std::vector<WorkUnit>& units, const PipelineOptions& options)
{
    strategy.validate();
    std::vector<Outcome> outcomes(units.size());

    auto process = [&](std::size_t i) {
        const auto& unit = units[i];
        Outcome& o = outcomes[i];
        o.sha = unit.sha;
        o.file = unit.file;
        try {
            o.decision = detect(rt, strategy, unit);
            if (!options.repair || o.decision->verdict == Verdict::Clean)
                return;
            auto cause = analyze_root_cause(rt, unit.message, subject_of(unit));
            o.root_cause = cause.text;
            auto element = lexicon.classify(cause.text);
            o.element = std::string(taxonomy::to_string(element));
            taxonomy::FewShotSelection shots;
            if (ruleset)
                shots = taxonomy::select_fewshot_examples(*ruleset, element, options.patch_shots);
            o.fewshot_fallback = shots.used_fallback;
            o.retrieved_doc_ids.emplace();
            auto patch = generate_patch(rt, cause, retrieval, unit.change, shots.examples, shots.used_fallback);
            o.retrieved_doc_ids = std::move(patch.retrieved_doc_ids);
            o.think_steps = std::move(patch.think_steps);
            o.patch = std::move(patch.patch);
        } catch (const std::exception& e) {
            o.error = describe(e);
        }
    };

    std::size_t workers = std::clamp<std::size_t>(options.concurrency, 1, std::max<std::size_t>(units.size(), 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < units.size(); ++i)
            process(i);
        return outcomes;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < units.size(); i = next++)
                process(i);
        });
    pool.clear();
    return outcomes;
}

std::string to_string(Verdict v) { return v == Verdict::Bug ? "Bug" : "Clean"; }

std::string to_string(ParsePath p)
{
    switch (p) {
    case ParsePath::ExactToken: return "ExactToken";
    case ParsePath::LastToken: return "LastToken";
    case ParsePath::Fallback: return "Fallback";
    }
    return {};
}

std::string to_string(AgentKind k)
{
    switch (k) {
    case AgentKind::Detection: return "detection";
    case AgentKind::RootCause: return "root_cause";
    case AgentKind::PatchGen: return "patch_generation";
    }
    return {};
}

Verdict parse_verdict_name(std::string_view name)
{
    if (name == "Bug")
        return Verdict::Bug;
    if (name == "Clean")
        return Verdict::Clean;
    throw std::invalid_argument("unknown verdict '" + std::string(name) + "'");
}

ParsePath parse_parse_path(std::string_view name)
{
    for (auto p : {ParsePath::ExactToken, ParsePath::LastToken, ParsePath::Fallback})
        if (to_string(p) == name)
            return p;
    throw std::invalid_argument("unknown parse_path '" + std::string(name) + "'");
}

json to_json(const Outcome& o)
{
    json j = {{"sha", o.sha}};
    if (o.file)
        j["file"] = *o.file;
    if (o.decision) {
        j["verdict"] = to_string(o.decision->verdict);
        j["parse_path"] = to_string(o.decision->parse_path);
        j["flagged"] = o.decision->flagged();
    }
    if (o.root_cause)
        j["root_cause"] = *o.root_cause;
    if (o.element)
        j["element"] = *o.element;
    if (o.think_steps)
        j["think_steps"] = *o.think_steps;
    if (o.patch)
        j["patch"] = *o.patch;
    if (o.retrieved_doc_ids)
        j["retrieved_doc_ids"] = *o.retrieved_doc_ids;
    if (o.fewshot_fallback)
        j["fewshot_fallback"] = true;
    if (o.error)
        j["error"] = *o.error;
    return j;
}

Outcome outcome_from_json(const json& j)
{
    Outcome o;
    o.sha = j.at("sha").get<std::string>();
    auto opt = [&](const char* key, std::optional<std::string>& dst) {
        if (j.contains(key))
            dst = j.at(key).get<std::string>();
    };
    opt("file", o.file);
    if (j.contains("verdict")) {
        DetectionDecision d;
        d.verdict = parse_verdict_name(j.at("verdict").get<std::string>());
        d.parse_path = parse_parse_path(j.value("parse_path", std::string("Fallback")));
        o.decision = d;
    }
    opt("root_cause", o.root_cause);
    opt("element", o.element);
    opt("think_steps", o.think_steps);
    opt("patch", o.patch);
    if (j.contains("retrieved_doc_ids"))
        o.retrieved_doc_ids = j.at("retrieved_doc_ids").get<std::vector<std::string>>();
    o.fewshot_fallback = j.value("fewshot_fallback", false);
    opt("error", o.error);
    return o;
}

} // namespace checkguard::agents

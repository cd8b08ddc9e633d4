#include "checkguard/llm.hpp"

#include "checkguard/digest.hpp"
#include "checkguard/io.hpp"

#include <cstdio>

namespace checkguard::llm {

void ChatRequest::validate() const
{
    if (messages.empty())
        throw std::invalid_argument("chat request has no messages");
    if (!(temperature >= 0.0 && temperature <= 2.0))
        throw std::invalid_argument("temperature must be in [0, 2]");
    if (max_tokens && *max_tokens < 1)
        throw std::invalid_argument("max_tokens must be positive");
}

ChatRequest user_request(std::string model, double temperature, std::string prompt, std::optional<int> max_tokens)
{
    ChatRequest r;
    r.model_name = std::move(model);
    r.temperature = temperature;
    r.messages.push_back({Role::User, std::move(prompt)});
    r.max_tokens = max_tokens;
    return r;
}

std::string to_string(Role role)
{
    return role == Role::System ? "system" : "user";
}

std::string to_string(FinishReason reason)
{
    switch (reason) {
    case FinishReason::Stop:
        return "stop";
    case FinishReason::Length:
        return "length";
    case FinishReason::Error:
        break;
    }
    return "error";
}

std::string canonical_encoding(const ChatRequest& request)
{
    auto field = [](std::string& out, std::string_view tag, std::string_view value) {
        out.append(tag);
        out.push_back(':');
        out.append(std::to_string(value.size()));
        out.push_back(':');
        out.append(value);
        out.push_back('\n');
    };
    char temp[64];
    std::snprintf(temp, sizeof temp, "%.17g", request.temperature);

    std::string out = "checkguard-chat-v1\n";
    field(out, "model", request.model_name);
    field(out, "temperature", temp);
    field(out, "max_tokens", request.max_tokens ? std::to_string(*request.max_tokens) : "none");
    for (const auto& m : request.messages)
        field(out, to_string(m.role), m.content);
    return out;
}

std::string fingerprint(const ChatRequest& request)
{
    return sha256_hex(canonical_encoding(request));
}

ScriptedBackend::ScriptedBackend(std::string default_response)
    : default_response_(std::move(default_response))
{
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path, std::string default_response)
{
    ScriptedBackend b(std::move(default_response));
    for (const auto& [line, rec] : io::read_jsonl(path)) {
        if (!rec.is_object() || !rec.contains("response") || !rec.at("response").is_string())
            throw io::RecordParseError("script record needs a string 'response'", line);
        auto response = rec.at("response").get<std::string>();
        if (rec.contains("fingerprint")) {
            b.add(rec.at("fingerprint").get<std::string>(), std::move(response));
        } else if (rec.contains("contains")) {
            const auto& c = rec.at("contains");
            std::vector<std::string> needles;
            if (c.is_string())
                needles.push_back(c.get<std::string>());
            else if (c.is_array())
                needles = c.get<std::vector<std::string>>();
            else
                throw io::RecordParseError("'contains' must be a string or list of strings", line);
            b.add_rule(std::move(needles), std::move(response));
        } else if (rec.contains("default")) {
            b.default_response_ = std::move(response);
        } else {
            throw io::RecordParseError("script record needs 'fingerprint' or 'contains'", line);
        }
    }
    return b;
}

void ScriptedBackend::add(std::string fp, std::string response)
{
    by_fingerprint_[std::move(fp)] = std::move(response);
}

void ScriptedBackend::add_rule(std::vector<std::string> needles, std::string response)
{
    rules_.push_back({std::move(needles), std::move(response)});
}

ChatResponse ScriptedBackend::complete(const ChatRequest& request)
{
    request.validate();
    ChatResponse r;
    r.attempt_count = 1;
    r.attempts.push_back({1, 0, {}, 0});

    if (auto it = by_fingerprint_.find(fingerprint(request)); it != by_fingerprint_.end()) {
        r.content = it->second;
        return r;
    }
    for (const auto& rule : rules_) {
        bool all = true;
        for (const auto& n : rule.needles) {
            bool found = false;
            for (const auto& m : request.messages)
                found = found || m.content.find(n) != std::string::npos;
            all = all && found;
        }
        if (all) {
            r.content = rule.response;
            return r;
        }
    }
    r.content = default_response_;
    return r;
}

TranscriptLog::TranscriptLog(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::app)
{
    if (!out_)
        throw io::IoError("cannot open transcript " + path.string());
}

void TranscriptLog::append(const nlohmann::json& record)
{
    std::lock_guard lock(mu_);
    if (out_.is_open()) {
        out_ << record.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
        out_.flush();
    }
    records_.push_back(record);
}

std::vector<nlohmann::json> TranscriptLog::records() const
{
    std::lock_guard lock(mu_);
    return records_;
}

std::size_t TranscriptLog::size() const
{
    std::lock_guard lock(mu_);
    return records_.size();
}

nlohmann::json to_json(const ChatRequest& request)
{
    auto msgs = nlohmann::json::array();
    for (const auto& m : request.messages)
        msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    nlohmann::json j = {{"model", request.model_name}, {"temperature", request.temperature}, {"messages", msgs}};
    if (request.max_tokens)
        j["max_tokens"] = *request.max_tokens;
    return j;
}

nlohmann::json to_json(const ChatResponse& response)
{
    auto attempts = nlohmann::json::array();
    for (const auto& a : response.attempts) {
        nlohmann::json ja = {{"attempt", a.attempt}, {"status", a.status}, {"latency_ms", a.latency_ms}};
        if (!a.error.empty())
            ja["error"] = a.error;
        attempts.push_back(std::move(ja));
    }
    return {{"content", response.content},
            {"finish_reason", to_string(response.finish_reason)},
            {"latency_ms", response.latency_ms},
            {"attempt_count", response.attempt_count},
            {"attempts", attempts}};
}

} // namespace checkguard::llm

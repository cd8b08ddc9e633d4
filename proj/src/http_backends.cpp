#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "checkguard/embedding.hpp"
#include "checkguard/llm.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace checkguard {

namespace {

struct HttpOutcome {
    bool transport_ok = false;
    int status = 0;
    std::string body;
    std::string error;
    bool timed_out = false;
    std::int64_t latency_ms = 0;
};

bool transient_status(int status) { return status == 429 || status >= 500; }

HttpOutcome post_json(const std::string& base_url, const std::string& path, const std::string& body,
                      const std::string& api_key_env, std::chrono::milliseconds timeout)
{
    HttpOutcome out;
    const auto start = std::chrono::steady_clock::now();
    httplib::Client cli(base_url);
    const auto sec = static_cast<time_t>(timeout.count() / 1000);
    const auto usec = static_cast<time_t>((timeout.count() % 1000) * 1000);
    cli.set_connection_timeout(sec, usec);
    cli.set_read_timeout(sec, usec);
    cli.set_write_timeout(sec, usec);

    httplib::Headers headers;
    if (const char* key = std::getenv(api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    auto res = cli.Post(path, headers, body, "application/json");
    out.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    if (!res) {
        auto err = res.error();
        out.error = httplib::to_string(err);
        out.timed_out = err == httplib::Error::Read || err == httplib::Error::Write
            || err == httplib::Error::ConnectionTimeout;
        return out;
    }
    out.transport_ok = true;
    out.status = res->status;
    out.body = res->body;
    return out;
}

// Runs `attempt` until it succeeds, fails permanently, or retries run out.
// Returns the successful outcome; `attempts` collects every try.
template <class OnExhausted>
HttpOutcome with_retries(int max_retries, std::chrono::milliseconds backoff, std::vector<llm::AttemptRecord>& attempts,
                         const std::function<HttpOutcome()>& attempt, OnExhausted&& on_exhausted)
{
    const int total = std::max(0, max_retries) + 1;
    HttpOutcome last;
    for (int i = 1; i <= total; ++i) {
        last = attempt();
        llm::AttemptRecord rec{i, last.status, last.error, last.latency_ms};
        if (last.transport_ok && last.status >= 200 && last.status < 300) {
            attempts.push_back(rec);
            return last;
        }
        if (last.transport_ok && rec.error.empty())
            rec.error = "HTTP " + std::to_string(last.status);
        attempts.push_back(rec);
        if (last.transport_ok && !transient_status(last.status))
            break;
        if (i < total)
            std::this_thread::sleep_for(backoff * (1 << std::min(i - 1, 16)));
    }
    on_exhausted(last);
    return last;
}

} // namespace

namespace llm {

RemoteBackend::RemoteBackend(RemoteConfig config)
    : config_(std::move(config))
    , slots_(std::clamp(config_.concurrency, 1, 1024))
{
}

RemoteBackend::~RemoteBackend() = default;

ChatResponse RemoteBackend::complete(const ChatRequest& request)
{
    request.validate();
    slots_.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{slots_};

    const std::string body = to_json(request).dump();
    std::vector<AttemptRecord> attempts;
    const auto start = std::chrono::steady_clock::now();
    auto ok = with_retries(
        config_.max_retries, config_.backoff, attempts,
        [&] { return post_json(config_.base_url, config_.path, body, config_.api_key_env, config_.timeout); },
        [&](const HttpOutcome& last) {
            const std::string where = " after " + std::to_string(attempts.size()) + " attempt(s)";
            if (!last.transport_ok) {
                if (last.timed_out)
                    throw Timeout("chat completion timed out" + where, attempts);
                throw BackendError("chat completion transport error: " + last.error + where, 0, attempts);
            }
            if (last.status == 429)
                throw RateLimited("chat completion rate limited" + where, attempts);
            throw BackendError("chat completion failed with HTTP " + std::to_string(last.status) + where, last.status,
                               attempts);
        });

    ChatResponse r;
    r.attempt_count = static_cast<int>(attempts.size());
    r.attempts = attempts;
    r.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    try {
        auto j = nlohmann::json::parse(ok.body);
        const auto& choice = j.at("choices").at(0);
        const auto& content = choice.at("message").at("content");
        r.content = content.is_null() ? std::string{} : content.get<std::string>();
        auto reason = choice.value("finish_reason", std::string("stop"));
        r.finish_reason = reason == "length" ? FinishReason::Length
            : reason == "stop"               ? FinishReason::Stop
                                             : FinishReason::Error;
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("malformed chat completion response: ") + e.what(), ok.status, attempts);
    }
    return r;
}

} // namespace llm

namespace rag {

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteEmbeddingConfig config)
    : config_(std::move(config))
{
    if (config_.dimension == 0)
        throw std::invalid_argument("remote embedding dimension must be positive");
}

std::vector<Vector> RemoteEmbeddingProvider::embed(std::span<const std::string> texts)
{
    nlohmann::json req = {{"model", config_.model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    const std::string body = req.dump();
    std::vector<llm::AttemptRecord> attempts;
    auto ok = with_retries(
        config_.max_retries, config_.backoff, attempts,
        [&] { return post_json(config_.base_url, "/v1/embeddings", body, config_.api_key_env, config_.timeout); },
        [&](const HttpOutcome& last) {
            throw ProviderUnavailable("embedding provider unavailable after " + std::to_string(attempts.size())
                                      + " attempt(s): " + (last.transport_ok ? "HTTP " + std::to_string(last.status)
                                                                               : last.error));
        });

    try {
        auto j = nlohmann::json::parse(ok.body);
        const auto& data = j.at("data");
        std::vector<Vector> out(texts.size());
        std::vector<bool> seen(texts.size(), false);
        std::size_t pos = 0;
        for (const auto& item : data) {
            std::size_t idx = item.value("index", pos);
            ++pos;
            if (idx >= out.size() || seen[idx])
                throw ProviderUnavailable("embedding response has a bad index");
            seen[idx] = true;
            out[idx] = item.at("embedding").get<Vector>();
        }
        if (std::find(seen.begin(), seen.end(), false) != seen.end())
            throw ProviderUnavailable("embedding response is missing vectors");
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ProviderUnavailable(std::string("malformed embedding response: ") + e.what());
    }
}

} // namespace rag

} // namespace checkguard

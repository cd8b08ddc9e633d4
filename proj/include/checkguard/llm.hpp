#pragma once

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <vector>

namespace checkguard::llm {

enum class Role { System, User };

struct ChatMessage {
    Role role = Role::User;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string model_name;
    double temperature = 0.0;
    std::vector<ChatMessage> messages;
    std::optional<int> max_tokens;

    /// Throws std::invalid_argument when messages are empty or temperature
    /// is outside [0, 2].
    void validate() const;

    bool operator==(const ChatRequest&) const = default;
};

/// Single user-message request, the shape every agent uses.
ChatRequest user_request(std::string model, double temperature, std::string prompt,
                         std::optional<int> max_tokens = std::nullopt);

enum class FinishReason { Stop, Length, Error };

struct AttemptRecord {
    int attempt = 0;
    int status = 0; ///< HTTP status, 0 for transport failures and local backends.
    std::string error;
    std::int64_t latency_ms = 0;
};

struct ChatResponse {
    std::string content;
    FinishReason finish_reason = FinishReason::Stop;
    std::int64_t latency_ms = 0;
    int attempt_count = 1;
    std::vector<AttemptRecord> attempts;
};

class GatewayError : public std::runtime_error {
public:
    GatewayError(const std::string& what, std::vector<AttemptRecord> attempts)
        : std::runtime_error(what)
        , attempts_(std::move(attempts))
    {
    }

    const std::vector<AttemptRecord>& attempts() const { return attempts_; }

private:
    std::vector<AttemptRecord> attempts_;
};

class RateLimited : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class Timeout : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class BackendError : public GatewayError {
public:
    BackendError(const std::string& what, int status, std::vector<AttemptRecord> attempts)
        : GatewayError(what, std::move(attempts))
        , status_(status)
    {
    }

    int status() const { return status_; }

private:
    int status_;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string name() const = 0;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

/// SHA-256 over a length-prefixed canonical encoding of model, temperature
/// (printed with %.17g), max_tokens and every (role, content) message.
std::string fingerprint(const ChatRequest& request);

/// The exact byte string fingerprint() hashes.
std::string canonical_encoding(const ChatRequest& request);

/// Canned responses keyed by request fingerprint. Script files hold one
/// JSON record per line: {"fingerprint", "response"},
/// {"contains": "text" | ["text", ...], "response"} or
/// {"default": true, "response"}. A contains-rule applies when every listed
/// substring occurs in some message. Lookup order: exact fingerprint, then
/// contains-rules in file order, then the default.
class ScriptedBackend final : public Backend {
public:
    explicit ScriptedBackend(std::string default_response = "");

    static ScriptedBackend from_file(const std::filesystem::path& path, std::string default_response = "");

    void add(std::string fingerprint, std::string response);
    void add_rule(std::vector<std::string> needles, std::string response);

    std::string name() const override { return "scripted"; }
    ChatResponse complete(const ChatRequest& request) override;

    /// True when `fingerprint` has an exact script entry.
    bool has(const std::string& fingerprint) const { return by_fingerprint_.contains(fingerprint); }

private:
    struct Rule {
        std::vector<std::string> needles;
        std::string response;
    };

    std::map<std::string, std::string> by_fingerprint_;
    std::vector<Rule> rules_;
    std::string default_response_;
};

struct RemoteConfig {
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    std::chrono::milliseconds timeout{60000};
    int max_retries = 3;
    std::chrono::milliseconds backoff{500};
    int concurrency = 4;
};

/// OpenAI-compatible chat-completion client. 429, 5xx and transport
/// failures are retried with exponential backoff up to max_retries extra
/// attempts; other statuses fail at once with BackendError. At most
/// `concurrency` requests are in flight. The credential is read from the
/// environment per request and never recorded.
class RemoteBackend final : public Backend {
public:
    explicit RemoteBackend(RemoteConfig config);
    ~RemoteBackend() override;

    std::string name() const override { return "remote"; }
    ChatResponse complete(const ChatRequest& request) override;

private:
    RemoteConfig config_;
    std::counting_semaphore<1024> slots_;
};

/// Serialized, line-delimited transcript writer. Keeps an in-memory copy
/// of every record so callers can inspect what was sent.
class TranscriptLog {
public:
    TranscriptLog() = default;
    explicit TranscriptLog(const std::filesystem::path& path);

    void append(const nlohmann::json& record);
    std::vector<nlohmann::json> records() const;
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::ofstream out_;
    std::vector<nlohmann::json> records_;
};

nlohmann::json to_json(const ChatRequest& request);
nlohmann::json to_json(const ChatResponse& response);
std::string to_string(Role role);
std::string to_string(FinishReason reason);

} // namespace checkguard::llm

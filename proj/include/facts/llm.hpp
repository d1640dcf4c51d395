#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "facts/errors.hpp"

namespace facts {

struct ChatRequest {
    std::string model_id;
    std::string prompt;
    double temperature = 0.0;  // deterministic by default
    int max_tokens = 2048;
};

struct ChatResponse {
    std::string text;
    std::size_t prompt_chars = 0;
    std::size_t completion_chars = 0;
};

// Uniform chat-completion surface. Every invocation is appended to the call
// log before the provider may fail; the log is the ground truth for the
// zero-LLM-call and privacy checks.
class LlmClient {
public:
    virtual ~LlmClient() = default;

    ChatResponse complete(const ChatRequest& request);

    std::vector<ChatRequest> call_log() const;
    std::size_t call_count() const;
    std::size_t total_prompt_chars() const;

protected:
    virtual ChatResponse do_complete(const ChatRequest& request) = 0;

private:
    mutable std::mutex mutex_;
    std::vector<ChatRequest> log_;
};

// Canned replies keyed by prompt substring. Entries are consulted in order;
// the first entry with remaining uses whose `match` occurs in the prompt is
// taken. `times` < 0 means unlimited. An entry may simulate a transport-class
// failure instead of replying.
struct ScriptEntry {
    std::string match;
    std::string response;
    int times = 1;
    enum class Outcome { Ok, RateLimited, Transport, Provider } outcome = Outcome::Ok;
    int status = 500;  // for Outcome::Provider
};

class ScriptedBackend final : public LlmClient {
public:
    ScriptedBackend() = default;
    explicit ScriptedBackend(std::vector<ScriptEntry> script);

    static std::shared_ptr<ScriptedBackend> from_json(const std::string& json_text);
    static std::shared_ptr<ScriptedBackend> from_json_file(const std::string& path);

    void push(ScriptEntry entry);
    std::size_t remaining() const;

protected:
    ChatResponse do_complete(const ChatRequest& request) override;

private:
    mutable std::mutex mutex_;
    std::vector<ScriptEntry> script_;
};

// OpenAI-style chat completion over HTTP. Credentials come from the named
// environment variable, never from configuration files.
class HttpProvider final : public LlmClient {
public:
    HttpProvider(std::string endpoint, std::string api_key_env);

protected:
    ChatResponse do_complete(const ChatRequest& request) override;

private:
    std::string endpoint_;
    std::string api_key_env_;
};

// Retries only RateLimited / TransportError; anything else surfaces at once.
ChatResponse with_retry(LlmClient& client, const ChatRequest& request, int max_attempts,
                        const std::vector<std::chrono::milliseconds>& backoff = {});

}  // namespace facts

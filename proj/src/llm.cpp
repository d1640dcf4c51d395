#include "facts/llm.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT_DISABLED
#include "httplib.h"

namespace facts {

ChatResponse LlmClient::complete(const ChatRequest& request) {
    if (request.prompt.empty()) throw Error("empty prompt");
    {
        std::lock_guard lock(mutex_);
        log_.push_back(request);
    }
    ChatResponse resp = do_complete(request);
    resp.prompt_chars = request.prompt.size();
    resp.completion_chars = resp.text.size();
    return resp;
}

std::vector<ChatRequest> LlmClient::call_log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

std::size_t LlmClient::call_count() const {
    std::lock_guard lock(mutex_);
    return log_.size();
}

std::size_t LlmClient::total_prompt_chars() const {
    std::lock_guard lock(mutex_);
    std::size_t total = 0;
    for (const auto& r : log_) total += r.prompt.size();
    return total;
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> script) : script_(std::move(script)) {}

void ScriptedBackend::push(ScriptEntry entry) {
    std::lock_guard lock(mutex_);
    script_.push_back(std::move(entry));
}

std::size_t ScriptedBackend::remaining() const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& e : script_)
        if (e.times != 0) ++n;
    return n;
}

ChatResponse ScriptedBackend::do_complete(const ChatRequest& request) {
    std::lock_guard lock(mutex_);
    for (auto& entry : script_) {
        if (entry.times == 0) continue;
        if (request.prompt.find(entry.match) == std::string::npos) continue;
        if (entry.times > 0) --entry.times;
        switch (entry.outcome) {
            case ScriptEntry::Outcome::Ok: return ChatResponse{entry.response, 0, 0};
            case ScriptEntry::Outcome::RateLimited: throw RateLimited("scripted rate limit");
            case ScriptEntry::Outcome::Transport: throw TransportError("scripted transport failure");
            case ScriptEntry::Outcome::Provider: throw ProviderError(entry.status, entry.response);
        }
    }
    throw ScriptExhausted("no script entry matches prompt: " + request.prompt.substr(0, 120));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("bad script file: ") + e.what());
    }
    if (!doc.is_array()) throw ConfigError("script file must be a JSON array");
    std::vector<ScriptEntry> entries;
    for (const auto& je : doc) {
        ScriptEntry e;
        e.match = je.value("match", std::string{});
        e.response = je.value("response", std::string{});
        e.times = je.value("times", 1);
        std::string err = je.value("error", std::string{});
        if (err == "rate_limited")
            e.outcome = ScriptEntry::Outcome::RateLimited;
        else if (err == "transport")
            e.outcome = ScriptEntry::Outcome::Transport;
        else if (err == "provider")
            e.outcome = ScriptEntry::Outcome::Provider;
        else if (!err.empty())
            throw ConfigError("unknown script error kind: " + err);
        e.status = je.value("status", 500);
        entries.push_back(std::move(e));
    }
    return std::make_shared<ScriptedBackend>(std::move(entries));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open script file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

HttpProvider::HttpProvider(std::string endpoint, std::string api_key_env)
    : endpoint_(std::move(endpoint)), api_key_env_(std::move(api_key_env)) {}

ChatResponse HttpProvider::do_complete(const ChatRequest& request) {
    const char* key = api_key_env_.empty() ? nullptr : std::getenv(api_key_env_.c_str());
    if (!api_key_env_.empty() && (!key || !*key))
        throw ConfigError("credential environment variable not set: " + api_key_env_);

    // Split endpoint into host and path.
    std::string url = endpoint_;
    std::string scheme = "http://";
    if (url.rfind("http://", 0) == 0) url = url.substr(7);
    else if (url.rfind("https://", 0) == 0) throw ConfigError("https endpoints require a TLS-enabled build; use an http proxy endpoint");
    auto slash = url.find('/');
    std::string host = slash == std::string::npos ? url : url.substr(0, slash);
    std::string path = slash == std::string::npos ? "/v1/chat/completions" : url.substr(slash);

    nlohmann::json body = {
        {"model", request.model_id},
        {"messages", {{{"role", "user"}, {"content", request.prompt}}}},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };

    httplib::Client client(host);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (key) headers.emplace("Authorization", std::string("Bearer ") + key);
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("http request failed: " + httplib::to_string(res.error()));
    if (res->status == 429) throw RateLimited(res->body);
    if (res->status < 200 || res->status >= 300) throw ProviderError(res->status, res->body);

    try {
        auto doc = nlohmann::json::parse(res->body);
        return ChatResponse{doc.at("choices").at(0).at("message").at("content").get<std::string>(), 0, 0};
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(res->status, std::string("malformed completion body: ") + e.what());
    }
}

ChatResponse with_retry(LlmClient& client, const ChatRequest& request, int max_attempts,
                        const std::vector<std::chrono::milliseconds>& backoff) {
    if (max_attempts < 1) throw Error("max_attempts must be >= 1");
    for (int attempt = 1;; ++attempt) {
        try {
            return client.complete(request);
        } catch (const RateLimited&) {
            if (attempt >= max_attempts) throw;
        } catch (const TransportError&) {
            if (attempt >= max_attempts) throw;
        }
        if (static_cast<std::size_t>(attempt - 1) < backoff.size() && backoff[attempt - 1].count() > 0)
            std::this_thread::sleep_for(backoff[attempt - 1]);
    }
}

}  // namespace facts

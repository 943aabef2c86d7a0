#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "untangler/backend.hpp"
#include "untangler/errors.hpp"

namespace untangler {

namespace {

std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? v : "";
}

struct Retryable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace

LiveConfig LiveConfig::from_env() {
    LiveConfig c;
    c.base_url = env_or_empty("UNTANGLER_BASE_URL");
    c.model = env_or_empty("UNTANGLER_MODEL");
    c.api_key = env_or_empty("UNTANGLER_API_KEY");
    return c;
}

LiveBackend::LiveBackend(LiveConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw ConfigError("live backend needs a base URL (UNTANGLER_BASE_URL)");
    if (config_.model.empty()) throw ConfigError("live backend needs a model name (UNTANGLER_MODEL)");
    if (config_.max_concurrency < 1) config_.max_concurrency = 1;
    if (config_.attempts < 1) config_.attempts = 1;
    auto scheme_end = config_.base_url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("base URL lacks a scheme: " + config_.base_url);
    auto path_start = config_.base_url.find('/', scheme_end + 3);
    origin_ = config_.base_url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

nlohmann::ordered_json LiveBackend::request_body(const ChatRequest& request) const {
    nlohmann::ordered_json body;
    body["model"] = config_.model;
    auto messages = nlohmann::ordered_json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    body["messages"] = messages;
    body["temperature"] = request.decoding.temperature;
    body["top_p"] = request.decoding.top_p;
    body["n"] = request.decoding.n;
    return body;
}

ChatResponse LiveBackend::post_once(const std::string& body) {
    httplib::Client client(origin_);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);
    client.set_write_timeout(config_.timeout_seconds);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");
    if (!res) throw Retryable("request failed: " + httplib::to_string(res.error()));
    if (res->status == 401 || res->status == 403)
        throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
    if (res->status >= 500) throw Retryable("HTTP " + std::to_string(res->status) + ": " + res->body);
    if (res->status != 200) throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body);

    try {
        auto j = nlohmann::json::parse(res->body);
        ChatResponse out;
        out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage") && j["usage"].is_object()) {
            out.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
            out.usage.completion_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed chat-completions response: ") + e.what());
    }
}

ChatResponse LiveBackend::complete(const ChatRequest& request) {
    {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return in_flight_ < config_.max_concurrency; });
        ++in_flight_;
    }
    struct Release {
        LiveBackend* self;
        ~Release() {
            {
                std::lock_guard lock(self->mu_);
                --self->in_flight_;
            }
            self->cv_.notify_one();
        }
    } release{this};

    const std::string body = request_body(request).dump();
    std::string last_error;
    for (int attempt = 0; attempt < config_.attempts; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(config_.initial_backoff_ms << (attempt - 1)));
        try {
            return post_once(body);
        } catch (const Retryable& e) {
            last_error = e.what();
        }
    }
    throw TransportError("gave up after " + std::to_string(config_.attempts) + " attempts: " + last_error);
}

}  // namespace untangler

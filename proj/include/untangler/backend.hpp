#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace untangler {

enum class Purpose { Profile, Judge, Synthesize, Review };

std::string_view to_string(Purpose p);
Purpose purpose_from_string(std::string_view s);

struct ChatMessage {
    std::string role;  // "system" or "user"
    std::string content;
};

struct Decoding {
    double temperature = 0.0;
    double top_p = 1.0;
    int n = 1;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    Decoding decoding;
    Purpose purpose = Purpose::Profile;
    std::string subject_id;  // stable id of what the call is about (mcs or group id)
};

struct Usage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

struct ChatResponse {
    std::string text;
    Usage usage;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// Per-commit request and token totals, by purpose and overall.
class UsageLedger {
public:
    struct Totals {
        std::int64_t requests = 0;
        std::int64_t prompt_tokens = 0;
        std::int64_t completion_tokens = 0;
    };

    void record(Purpose purpose, const Usage& usage, std::chrono::nanoseconds elapsed = {});
    Totals totals(Purpose purpose) const;
    Totals overall() const;
    std::int64_t requests(Purpose purpose) const { return totals(purpose).requests; }
    double wall_seconds() const;
    nlohmann::ordered_json to_json() const;

private:
    mutable std::mutex mu_;
    std::map<Purpose, Totals> by_purpose_;
    std::chrono::nanoseconds wall_{0};
};

// Forwards to another backend and records every response in a ledger.
class MeteredBackend : public ChatBackend {
public:
    MeteredBackend(ChatBackend& inner, UsageLedger& ledger) : inner_(inner), ledger_(ledger) {}
    ChatResponse complete(const ChatRequest& request) override;

private:
    ChatBackend& inner_;
    UsageLedger& ledger_;
};

// One line of a replay file.
struct ReplayRecord {
    std::string purpose_tag;
    std::string subject_id;
    int seq = 0;
    std::string response_text;
    Usage usage;
};

nlohmann::ordered_json to_json(const ReplayRecord& r);
ReplayRecord replay_record_from_json(const nlohmann::json& j);

// Deterministic backend answering from replay records keyed by
// (purpose, subject, n-th call for that pair).
class ScriptedBackend : public ChatBackend {
public:
    explicit ScriptedBackend(std::vector<ReplayRecord> records);
    ScriptedBackend(ScriptedBackend&& other) noexcept
        : script_(std::move(other.script_)), next_seq_(std::move(other.next_seq_)) {}
    static ScriptedBackend from_file(const std::string& path);
    static ScriptedBackend from_jsonl(std::string_view text);

    ChatResponse complete(const ChatRequest& request) override;

private:
    using Key = std::pair<std::string, std::string>;
    std::map<Key, std::map<int, ReplayRecord>> script_;
    std::map<Key, int> next_seq_;
    std::mutex mu_;
};

// Passes calls through and appends each exchange to a replay file, flushed
// per record so a crashed run still leaves a usable prefix.
class RecordingBackend : public ChatBackend {
public:
    RecordingBackend(ChatBackend& inner, const std::string& path);
    ChatResponse complete(const ChatRequest& request) override;

private:
    ChatBackend& inner_;
    std::string path_;
    std::ofstream out_;
    std::map<std::pair<std::string, std::string>, int> next_seq_;
    std::mutex mu_;
};

struct LiveConfig {
    std::string base_url;  // e.g. https://api.openai.com/v1
    std::string model;
    std::string api_key;
    int max_concurrency = 4;
    int attempts = 3;
    int initial_backoff_ms = 500;
    int timeout_seconds = 120;

    // UNTANGLER_BASE_URL, UNTANGLER_MODEL, UNTANGLER_API_KEY.
    static LiveConfig from_env();
};

// OpenAI-compatible chat-completions client.
class LiveBackend : public ChatBackend {
public:
    explicit LiveBackend(LiveConfig config);
    ChatResponse complete(const ChatRequest& request) override;

    nlohmann::ordered_json request_body(const ChatRequest& request) const;

private:
    ChatResponse post_once(const std::string& body);

    LiveConfig config_;
    std::string origin_;       // scheme://host[:port]
    std::string path_prefix_;  // path part of base_url, no trailing slash
    std::mutex mu_;
    std::condition_variable cv_;
    int in_flight_ = 0;
};

}  // namespace untangler

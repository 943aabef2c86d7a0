#include "untangler/backend.hpp"

#include <sstream>
#include <stdexcept>

#include "untangler/errors.hpp"

namespace untangler {

std::string_view to_string(Purpose p) {
    switch (p) {
        case Purpose::Profile: return "profile";
        case Purpose::Judge: return "judge";
        case Purpose::Synthesize: return "synthesize";
        case Purpose::Review: return "review";
    }
    return "profile";
}

Purpose purpose_from_string(std::string_view s) {
    for (auto p : {Purpose::Profile, Purpose::Judge, Purpose::Synthesize, Purpose::Review})
        if (to_string(p) == s) return p;
    throw std::invalid_argument("unknown purpose tag '" + std::string(s) + "'");
}

void UsageLedger::record(Purpose purpose, const Usage& usage, std::chrono::nanoseconds elapsed) {
    std::lock_guard lock(mu_);
    auto& t = by_purpose_[purpose];
    ++t.requests;
    t.prompt_tokens += usage.prompt_tokens;
    t.completion_tokens += usage.completion_tokens;
    wall_ += elapsed;
}

UsageLedger::Totals UsageLedger::totals(Purpose purpose) const {
    std::lock_guard lock(mu_);
    auto it = by_purpose_.find(purpose);
    return it == by_purpose_.end() ? Totals{} : it->second;
}

UsageLedger::Totals UsageLedger::overall() const {
    std::lock_guard lock(mu_);
    Totals sum;
    for (const auto& [p, t] : by_purpose_) {
        sum.requests += t.requests;
        sum.prompt_tokens += t.prompt_tokens;
        sum.completion_tokens += t.completion_tokens;
    }
    return sum;
}

double UsageLedger::wall_seconds() const {
    std::lock_guard lock(mu_);
    return std::chrono::duration<double>(wall_).count();
}

nlohmann::ordered_json UsageLedger::to_json() const {
    auto row = [](const Totals& t) {
        nlohmann::ordered_json j;
        j["requests"] = t.requests;
        j["prompt_tokens"] = t.prompt_tokens;
        j["completion_tokens"] = t.completion_tokens;
        return j;
    };
    nlohmann::ordered_json j;
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (auto p : {Purpose::Profile, Purpose::Judge, Purpose::Synthesize, Purpose::Review})
        per[std::string(to_string(p))] = row(totals(p));
    j["by_purpose"] = per;
    j["overall"] = row(overall());
    j["wall_seconds"] = wall_seconds();
    return j;
}

ChatResponse MeteredBackend::complete(const ChatRequest& request) {
    auto start = std::chrono::steady_clock::now();
    auto response = inner_.complete(request);
    ledger_.record(request.purpose, response.usage, std::chrono::steady_clock::now() - start);
    return response;
}

nlohmann::ordered_json to_json(const ReplayRecord& r) {
    nlohmann::ordered_json j;
    j["purpose_tag"] = r.purpose_tag;
    j["subject_id"] = r.subject_id;
    j["seq"] = r.seq;
    j["response_text"] = r.response_text;
    j["prompt_tokens"] = r.usage.prompt_tokens;
    j["completion_tokens"] = r.usage.completion_tokens;
    return j;
}

ReplayRecord replay_record_from_json(const nlohmann::json& j) {
    ReplayRecord r;
    r.purpose_tag = j.at("purpose_tag").get<std::string>();
    r.subject_id = j.at("subject_id").get<std::string>();
    r.seq = j.at("seq").get<int>();
    r.response_text = j.at("response_text").get<std::string>();
    r.usage.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
    r.usage.completion_tokens = j.value("completion_tokens", std::int64_t{0});
    purpose_from_string(r.purpose_tag);
    return r;
}

ScriptedBackend::ScriptedBackend(std::vector<ReplayRecord> records) {
    for (auto& r : records) {
        Key key{r.purpose_tag, r.subject_id};
        int seq = r.seq;
        if (!script_[key].emplace(seq, std::move(r)).second)
            throw std::invalid_argument("duplicate replay record " + key.first + "/" + key.second + "#" +
                                        std::to_string(seq));
    }
}

ScriptedBackend ScriptedBackend::from_jsonl(std::string_view text) {
    std::vector<ReplayRecord> records;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
            try {
                records.push_back(replay_record_from_json(nlohmann::json::parse(line)));
            } catch (const std::exception& e) {
                throw ConfigError("replay line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return ScriptedBackend(std::move(records));
}

ScriptedBackend ScriptedBackend::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read replay file " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return from_jsonl(s.str());
}

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
    Key key{std::string(to_string(request.purpose)), request.subject_id};
    std::lock_guard lock(mu_);
    auto it = script_.find(key);
    if (it == script_.end()) throw MissingScriptEntry(key.first + "/" + key.second);
    int seq = next_seq_[key];
    auto rec = it->second.find(seq);
    if (rec == it->second.end())
        throw ReplayExhausted(key.first + "/" + key.second + " has no response #" + std::to_string(seq));
    ++next_seq_[key];
    return {rec->second.response_text, rec->second.usage};
}

RecordingBackend::RecordingBackend(ChatBackend& inner, const std::string& path)
    : inner_(inner), path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw WriteError("cannot open replay file " + path + " for writing");
}

ChatResponse RecordingBackend::complete(const ChatRequest& request) {
    auto response = inner_.complete(request);
    std::lock_guard lock(mu_);
    std::pair<std::string, std::string> key{std::string(to_string(request.purpose)), request.subject_id};
    ReplayRecord rec{key.first, key.second, next_seq_[key]++, response.text, response.usage};
    out_ << to_json(rec).dump() << '\n';
    out_.flush();
    if (!out_) throw WriteError("failed writing replay file " + path_);
    return response;
}

}  // namespace untangler

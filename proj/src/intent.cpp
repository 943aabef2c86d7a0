#include "untangler/intent.hpp"

#include <algorithm>
#include <cctype>
#include <deque>

#include "untangler/errors.hpp"
#include "untangler/prompt_assets.hpp"

namespace untangler {

namespace {

constexpr ChangeCategory kCategories[] = {ChangeCategory::BugFix,      ChangeCategory::Feature,
                                          ChangeCategory::Refactoring, ChangeCategory::Performance,
                                          ChangeCategory::Documentation, ChangeCategory::Test,
                                          ChangeCategory::Others};

std::string squash(std::string_view s, bool alnum_only) {
    std::string out;
    for (char c : s) {
        auto u = static_cast<unsigned char>(c);
        if (std::isspace(u) || (alnum_only && !std::isalnum(u))) continue;
        out += static_cast<char>(std::tolower(u));
    }
    return out;
}

// Position one past the object that opens at `start`, or npos if unbalanced.
std::size_t object_end(std::string_view s, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{' || c == '[') ++depth;
        else if (c == '}' || c == ']') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string_view::npos;
}

std::string field_text(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

std::string_view to_string(ChangeCategory c) {
    switch (c) {
        case ChangeCategory::BugFix: return "Bug Fix";
        case ChangeCategory::Feature: return "Feature";
        case ChangeCategory::Refactoring: return "Refactoring";
        case ChangeCategory::Performance: return "Performance";
        case ChangeCategory::Documentation: return "Documentation";
        case ChangeCategory::Test: return "Test";
        case ChangeCategory::Others: return "Others";
    }
    return "Others";
}

ChangeCategory parse_category(std::string_view label) {
    auto key = squash(label, false);
    for (auto c : kCategories)
        if (squash(to_string(c), false) == key) return c;
    throw InvalidCategory("'" + std::string(label) + "'");
}

nlohmann::ordered_json to_json(const IntentProfile& p) {
    nlohmann::ordered_json j;
    j["what"] = p.what;
    j["how"] = p.how;
    j["why"] = p.why;
    j["category"] = std::string(to_string(p.category));
    j["summary"] = p.summary;
    return j;
}

IntentProfile profile_from_json(const nlohmann::json& root) {
    if (!root.is_object()) throw NoStructuredPayload("payload is not an object");
    // Fields may sit at the top level or one or two objects down; keys are
    // matched ignoring case and punctuation, with a few common long forms.
    std::map<std::string, const nlohmann::json*> fields;
    std::deque<std::pair<const nlohmann::json*, int>> queue{{&root, 0}};
    while (!queue.empty()) {
        auto [obj, depth] = queue.front();
        queue.pop_front();
        for (auto it = obj->begin(); it != obj->end(); ++it) {
            fields.emplace(squash(it.key(), true), &it.value());
            if (it.value().is_object() && depth < 2) queue.push_back({&it.value(), depth + 1});
        }
    }
    auto pick = [&](std::initializer_list<const char*> names) -> const nlohmann::json* {
        for (const char* n : names) {
            auto it = fields.find(n);
            if (it != fields.end() && !it->second->is_null()) return it->second;
        }
        return nullptr;
    };
    auto require = [&](const char* name, std::initializer_list<const char*> names) {
        auto* v = pick(names);
        if (!v) throw MissingField(name);
        return v;
    };

    IntentProfile p;
    auto* category = require("category", {"category", "changecategory"});
    if (!category->is_string()) throw InvalidCategory(category->dump());
    p.category = parse_category(category->get<std::string>());
    p.summary = field_text(*require("summary", {"summary", "intentsummary"}));
    if (p.summary.find_first_not_of(" \t\r\n") == std::string::npos) throw MissingField("summary");
    p.what = field_text(*require("what", {"what", "literalcodechangedescription"}));
    p.how = field_text(*require("how", {"how", "functionalimpactanalysis"}));
    p.why = field_text(*require("why", {"why", "changecategoryinference", "justification"}));
    return p;
}

std::optional<nlohmann::json> extract_first_json(std::string_view raw) {
    for (std::size_t start = raw.find('{'); start != std::string_view::npos; start = raw.find('{', start + 1)) {
        auto end = object_end(raw, start);
        if (end == std::string_view::npos) continue;
        auto doc = nlohmann::json::parse(raw.substr(start, end - start), nullptr, false);
        if (!doc.is_discarded() && doc.is_object()) return doc;
    }
    return std::nullopt;
}

std::string render_iocot_prompt(const MinimalChangeSubgraph& mcs) {
    std::string prompt(assets::kIocotPromptV1);
    const std::string placeholder = "{{DIFF}}";
    auto pos = prompt.find(placeholder);
    prompt.replace(pos, placeholder.size(), mcs.rendered_diff);
    return prompt;
}

IntentProfile parse_intent_response(std::string_view raw) {
    auto doc = extract_first_json(raw);
    if (!doc) throw NoStructuredPayload("no JSON object in response");
    return profile_from_json(*doc);
}

const std::string_view kFormatReminder =
    "\n\nYour previous answer could not be parsed. Reply with one JSON object containing the string keys "
    "\"what\", \"how\", \"why\", \"category\" and \"summary\"; \"category\" must be one of: Bug Fix, Feature, "
    "Refactoring, Performance, Documentation, Test, Others.";

std::string scoped_subject(const std::string& scope, const std::string& id) {
    return scope.empty() ? id : scope + "/" + id;
}

IntentProfile profile_mcs(const MinimalChangeSubgraph& mcs, ChatBackend& backend, int retries,
                          const std::string& subject_scope) {
    const std::string prompt = render_iocot_prompt(mcs);
    ChatRequest request;
    request.purpose = Purpose::Profile;
    request.subject_id = scoped_subject(subject_scope, mcs.mcs_id);
    std::string last;
    std::string last_error;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        request.messages = {{"user", attempt == 0 ? prompt : prompt + std::string(kFormatReminder)}};
        last = backend.complete(request).text;
        try {
            return parse_intent_response(last);
        } catch (const NoStructuredPayload& e) {
            last_error = e.what();
        } catch (const MissingField& e) {
            last_error = e.what();
        } catch (const InvalidCategory& e) {
            last_error = e.what();
        }
    }
    throw ProfileFailure(mcs.mcs_id + ": no valid profile after " + std::to_string(retries + 1) +
                             " attempts (" + last_error + ")",
                         last);
}

}  // namespace untangler

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "untangler/backend.hpp"
#include "untangler/purifier.hpp"

namespace untangler {

enum class ChangeCategory { BugFix, Feature, Refactoring, Performance, Documentation, Test, Others };

// Display label as listed in the prompt ("Bug Fix", "Feature", ...).
std::string_view to_string(ChangeCategory c);

// Accepts the seven labels ignoring case and whitespace; throws
// InvalidCategory otherwise.
ChangeCategory parse_category(std::string_view label);

struct IntentProfile {
    ChangeCategory category = ChangeCategory::Others;
    std::string summary;
    std::string what;
    std::string how;
    std::string why;

    friend bool operator==(const IntentProfile&, const IntentProfile&) = default;
};

// Fields in response-schema order: what, how, why, category, summary.
nlohmann::ordered_json to_json(const IntentProfile& p);
IntentProfile profile_from_json(const nlohmann::json& j);

// First JSON object embedded in free text (code fences and surrounding prose
// are skipped).
std::optional<nlohmann::json> extract_first_json(std::string_view raw);

std::string render_iocot_prompt(const MinimalChangeSubgraph& mcs);

IntentProfile parse_intent_response(std::string_view raw);

// Appended to the prompt when a previous answer could not be parsed.
extern const std::string_view kFormatReminder;

// Renders, asks and parses, re-asking up to `retries` times on malformed
// answers. `subject_scope` prefixes the replay subject id ("scope/mcs-...").
IntentProfile profile_mcs(const MinimalChangeSubgraph& mcs, ChatBackend& backend, int retries = 2,
                          const std::string& subject_scope = "");

std::string scoped_subject(const std::string& scope, const std::string& id);

}  // namespace untangler

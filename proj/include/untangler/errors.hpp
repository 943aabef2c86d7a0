#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace untangler {

// Base of every error raised by the library. what() is prefixed with the
// originating module so diagnostics from the CLI read "[module] message".
class Error : public std::runtime_error {
public:
    Error(std::string module, std::string kind, const std::string& message)
        : std::runtime_error("[" + module + "] " + kind + ": " + message),
          module_(std::move(module)),
          kind_(std::move(kind)) {}

    const std::string& module() const noexcept { return module_; }
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string module_;
    std::string kind_;
};

#define UNTANGLER_ERROR(Name, Module)                                  \
    class Name : public Error {                                        \
    public:                                                            \
        explicit Name(const std::string& message)                      \
            : Error(Module, #Name, message) {}                         \
    }

// changegraph
UNTANGLER_ERROR(MalformedHunkHeader, "changegraph");
UNTANGLER_ERROR(InconsistentLineCount, "changegraph");
UNTANGLER_ERROR(UnsupportedGrammar, "changegraph");
UNTANGLER_ERROR(ParseFailure, "changegraph");
UNTANGLER_ERROR(RegionOutOfRange, "changegraph");
UNTANGLER_ERROR(PatchMismatch, "changegraph");

// intent
UNTANGLER_ERROR(NoStructuredPayload, "intent");
UNTANGLER_ERROR(MissingField, "intent");
UNTANGLER_ERROR(InvalidCategory, "intent");

// backend
UNTANGLER_ERROR(TransportError, "backend");
UNTANGLER_ERROR(AuthError, "backend");
UNTANGLER_ERROR(MissingScriptEntry, "backend");
UNTANGLER_ERROR(ReplayExhausted, "backend");
UNTANGLER_ERROR(WriteError, "backend");
UNTANGLER_ERROR(ConfigError, "cli");

// grouping / review
UNTANGLER_ERROR(JudgmentParseFailure, "grouping");
UNTANGLER_ERROR(ReviewParseFailure, "review");

// metrics
UNTANGLER_ERROR(EmptyGroundTruth, "metrics");
UNTANGLER_ERROR(NoEligibleCommits, "metrics");

// dataset
UNTANGLER_ERROR(NotARepository, "dataset");
UNTANGLER_ERROR(MissingObject, "dataset");
UNTANGLER_ERROR(OverlappingChanges, "dataset");
UNTANGLER_ERROR(NonSequentialConstituents, "dataset");
UNTANGLER_ERROR(EmptyConstituent, "dataset");

#undef UNTANGLER_ERROR

// Retries exhausted while asking the model for an intent profile. Carries the
// last raw response so callers can log what the model actually said.
class ProfileFailure : public Error {
public:
    ProfileFailure(const std::string& message, std::string last_response)
        : Error("intent", "ProfileFailure", message),
          last_response_(std::move(last_response)) {}

    const std::string& last_response() const noexcept { return last_response_; }

private:
    std::string last_response_;
};

}  // namespace untangler

#include "doctest.h"

#include "support/grouping_fixture.hpp"
#include "support/scripts.hpp"
#include "untangler/errors.hpp"
#include "untangler/grouping.hpp"

using namespace untangler;
using testing_support::rec;

namespace {

std::vector<std::vector<std::string>> member_lists(const GroupingState& s) {
    std::vector<std::vector<std::string>> out;
    for (const auto& g : s.groups()) out.push_back(g.members);
    return out;
}

IntentProfile prof(ChangeCategory c, const std::string& summary) { return {c, summary, "w", "h", "y"}; }

}  // namespace

TEST_CASE("empty input gives an empty state") {
    ScriptedBackend b({});
    auto s = greedy_grouping({}, b);
    CHECK(s.groups().empty());
}

TEST_CASE("single MCS becomes one group anchored on its profile") {
    ScriptedBackend b({});
    auto p = prof(ChangeCategory::Test, "Add parser tests");
    auto s = greedy_grouping({{"m1", p}}, b);
    REQUIRE(s.groups().size() == 1);
    CHECK(s.groups()[0].group_id == "G1");
    CHECK(s.groups()[0].rep_intent == p);
}

TEST_CASE("four-MCS trace matches the hand execution") {
    auto f = testing_support::greedy_grouping_fixture();
    ScriptedBackend scripted(f.script);
    UsageLedger ledger;
    MeteredBackend b(scripted, ledger);
    auto s = greedy_grouping(f.profiles, b);
    CHECK(member_lists(s) == std::vector<std::vector<std::string>>{{"m1", "m3"}, {"m2"}, {"m4"}});
    CHECK(s.groups()[0].rep_intent.summary == "Fix null checks in the front end");
    CHECK(s.groups()[0].rep_intent.category == ChangeCategory::BugFix);  // model said Feature
    CHECK(ledger.requests(Purpose::Judge) == 2);
    CHECK(ledger.requests(Purpose::Synthesize) == 1);
    CHECK(ledger.requests(Purpose::Profile) == 0);
    CHECK(s.is_partition_of({"m1", "m2", "m3", "m4"}));
}

TEST_CASE("category filter keeps matching groups in order") {
    GroupingState s;
    s.open_group("a", prof(ChangeCategory::BugFix, "a"));
    s.open_group("b", prof(ChangeCategory::Feature, "b"));
    s.open_group("c", prof(ChangeCategory::BugFix, "c"));
    s.open_group("d", prof(ChangeCategory::Refactoring, "d"));
    s.open_group("e", prof(ChangeCategory::BugFix, "e"));
    auto got = category_filter(s, prof(ChangeCategory::BugFix, "x"));
    REQUIRE(got.size() == 3);
    CHECK(got[0]->group_id == "G1");
    CHECK(got[1]->group_id == "G3");
    CHECK(got[2]->group_id == "G5");
    CHECK(category_filter(s, prof(ChangeCategory::Performance, "x")).empty());
}

TEST_CASE("both useradd fixes are candidates for each other") {
    GroupingState s;
    s.open_group("type-fix", prof(ChangeCategory::BugFix, "Correct type compatibility for variable"));
    auto got = category_filter(s, prof(ChangeCategory::BugFix, "Correct typo in function call"));
    CHECK(got.size() == 1);
}

TEST_CASE("judgment with no candidates makes no call") {
    ScriptedBackend b({});
    CHECK_FALSE(comparative_judgment("m", prof(ChangeCategory::Test, "x"), {}, b).has_value());
}

TEST_CASE("judgment picks the named candidate") {
    GroupingState s;
    for (const char* m : {"a", "b", "c"}) s.open_group(m, prof(ChangeCategory::BugFix, m));
    auto cands = category_filter(s, prof(ChangeCategory::BugFix, "x"));
    ScriptedBackend b({rec("judge", "m", 0, "G2")});
    CHECK(comparative_judgment("m", prof(ChangeCategory::BugFix, "x"), cands, b) == std::optional<std::string>("G2"));
}

TEST_CASE("judge answer forms") {
    GroupingState s;
    for (const char* m : {"a", "b", "c"}) s.open_group(m, prof(ChangeCategory::BugFix, m));
    auto cands = category_filter(s, prof(ChangeCategory::BugFix, "x"));
    CHECK(parse_judgment("{\"choice\": \"G3\"}", cands) == std::optional<std::string>("G3"));
    CHECK(parse_judgment("```json\n{\"choice\": \"new\"}\n```", cands) == std::nullopt);
    CHECK(parse_judgment("NEW", cands) == std::nullopt);
    CHECK(parse_judgment(" g1.\n", cands) == std::optional<std::string>("G1"));
    CHECK(parse_judgment("2", cands) == std::optional<std::string>("G2"));
    CHECK(parse_judgment("{\"choice\": 3}", cands) == std::optional<std::string>("G3"));
    CHECK_THROWS_AS(parse_judgment("G7", cands), JudgmentParseFailure);
    CHECK_THROWS_AS(parse_judgment("4", cands), JudgmentParseFailure);
    CHECK_THROWS_AS(parse_judgment("0", cands), JudgmentParseFailure);
    CHECK_THROWS_AS(parse_judgment("{\"pick\": \"G1\"}", cands), JudgmentParseFailure);
    CHECK_THROWS_AS(parse_judgment("maybe the first one", cands), JudgmentParseFailure);
}

TEST_CASE("out-of-range id fails after one retry") {
    GroupingState s;
    for (const char* m : {"a", "b", "c"}) s.open_group(m, prof(ChangeCategory::BugFix, m));
    auto cands = category_filter(s, prof(ChangeCategory::BugFix, "x"));
    ScriptedBackend scripted({rec("judge", "m", 0, "G9"), rec("judge", "m", 1, "G9")});
    UsageLedger ledger;
    MeteredBackend b(scripted, ledger);
    CHECK_THROWS_AS(comparative_judgment("m", prof(ChangeCategory::BugFix, "x"), cands, b), JudgmentParseFailure);
    CHECK(ledger.requests(Purpose::Judge) == 2);
}

TEST_CASE("synthesis keeps the group category") {
    Group g{"G1", {"a", "b"}, prof(ChangeCategory::Refactoring, "Rename helpers")};
    ProfileMap profiles{{"a", prof(ChangeCategory::Refactoring, "Rename x")},
                        {"b", prof(ChangeCategory::Refactoring, "Rename y")}};
    ScriptedBackend b({rec("synthesize", "G1", 0,
                           "{\"summary\": \"Rename helper functions\", \"category\": \"Feature\"}")});
    auto p = synthesize_intent(g, profiles, b);
    CHECK(p.summary == "Rename helper functions");
    CHECK(p.category == ChangeCategory::Refactoring);
}

TEST_CASE("synthesis failure after retries") {
    Group g{"G1", {"a", "b"}, prof(ChangeCategory::Refactoring, "x")};
    ScriptedBackend b({rec("synthesize", "G1", 0, "no"), rec("synthesize", "G1", 1, "{\"summary\": \"\"}")});
    CHECK_THROWS_AS(synthesize_intent(g, {}, b), ProfileFailure);
}

TEST_CASE("a third member triggers exactly one more synthesis") {
    std::vector<ProfiledMcs> ps = {{"a", prof(ChangeCategory::Test, "a")},
                                   {"b", prof(ChangeCategory::Test, "b")},
                                   {"c", prof(ChangeCategory::Test, "c")}};
    ScriptedBackend scripted({rec("judge", "b", 0, "G1"), rec("synthesize", "G1", 0, "{\"summary\":\"ab\"}"),
                              rec("judge", "c", 0, "G1"), rec("synthesize", "G1", 1, "{\"summary\":\"abc\"}")});
    UsageLedger ledger;
    MeteredBackend b(scripted, ledger);
    auto s = greedy_grouping(ps, b);
    CHECK(ledger.requests(Purpose::Synthesize) == 2);
    CHECK(s.groups()[0].members.size() == 3);
    CHECK(s.groups()[0].rep_intent.summary == "abc");
}

TEST_CASE("grouping is deterministic and category homogeneous under a scripted backend") {
    auto f = testing_support::greedy_grouping_fixture();
    std::string first;
    for (int run = 0; run < 5; ++run) {
        ScriptedBackend b(f.script);
        auto s = greedy_grouping(f.profiles, b);
        auto dumped = to_json(s).dump();
        if (run == 0) first = dumped;
        CHECK(dumped == first);
        ProfileMap by_id;
        for (const auto& p : f.profiles) by_id[p.mcs_id] = p.profile;
        for (const auto& g : s.groups())
            for (const auto& m : g.members) CHECK(by_id[m].category == g.rep_intent.category);
    }
}

#include "doctest.h"

#include <random>

#include "support/files.hpp"
#include "untangler/diff.hpp"
#include "untangler/errors.hpp"

using namespace untangler;

TEST_CASE("empty diff has no regions") { CHECK(parse_unified_diff("").empty()); }

TEST_CASE("single replaced line") {
    const char* d =
        "--- a/f.c\n+++ b/f.c\n"
        "@@ -10,1 +10,1 @@\n"
        "-int x = 1;\n"
        "+int x = 2;\n";
    auto rs = parse_unified_diff(d);
    REQUIRE(rs.size() == 1);
    CHECK(rs[0].file_path == "f.c");
    CHECK(rs[0].old_range == LineRange{10, 1});
    CHECK(rs[0].new_range == LineRange{10, 1});
    CHECK(rs[0].removed_lines == std::vector<std::string>{"int x = 1;"});
    CHECK(rs[0].added_lines == std::vector<std::string>{"int x = 2;"});
}

TEST_CASE("useradd diff splits into the declaration and the call edits") {
    auto rs = parse_unified_diff(testing_support::fixture("useradd/commit.diff"));
    REQUIRE(rs.size() == 2);
    CHECK(rs[0].file_path == "src/useradd.c");
    CHECK(rs[0].old_range == LineRange{10, 1});
    CHECK(rs[0].removed_lines[0].find("const struct passwd *pw;") != std::string::npos);
    CHECK(rs[0].added_lines[0] == "\tstruct passwd *pw;");
    CHECK(rs[1].old_range == LineRange{16, 1});
    CHECK(rs[1].removed_lines[0].find("getspnam") != std::string::npos);
    CHECK(rs[1].added_lines[0].find("getpwnam") != std::string::npos);
}

TEST_CASE("header without counts defaults to one line") {
    auto rs = parse_unified_diff("--- a/x\n+++ b/x\n@@ -3 +3 @@\n-a\n+b\n");
    REQUIRE(rs.size() == 1);
    CHECK(rs[0].old_range == LineRange{3, 1});
}

TEST_CASE("pure insertion and deletion ranges") {
    auto rs = parse_unified_diff("--- a/x\n+++ b/x\n@@ -2,0 +3,2 @@\n+p\n+q\n@@ -5,2 +6,0 @@\n-r\n-s\n");
    REQUIRE(rs.size() == 2);
    CHECK(rs[0].old_range == LineRange{3, 0});
    CHECK(rs[0].new_range == LineRange{3, 2});
    CHECK(rs[1].old_range == LineRange{5, 2});
    CHECK(rs[1].new_range == LineRange{7, 0});
}

TEST_CASE("added then removed lines form two regions") {
    auto rs = parse_unified_diff("--- a/x\n+++ b/x\n@@ -1,2 +1,2 @@\n-a\n+b\n-c\n+d\n");
    REQUIRE(rs.size() == 2);
    CHECK(rs[1].old_range == LineRange{2, 1});
    CHECK(rs[1].new_range == LineRange{2, 1});
}

TEST_CASE("new and deleted files use the surviving path") {
    auto rs = parse_unified_diff(
        "diff --git a/n.c b/n.c\nnew file mode 100644\n--- /dev/null\n+++ b/n.c\n@@ -0,0 +1,1 @@\n+x\n"
        "diff --git a/d.c b/d.c\ndeleted file mode 100644\n--- a/d.c\n+++ /dev/null\n@@ -1 +0,0 @@\n-y\n");
    REQUIRE(rs.size() == 2);
    CHECK(rs[0].file_path == "n.c");
    CHECK(rs[0].new_range == LineRange{1, 1});
    CHECK(rs[1].file_path == "d.c");
    CHECK(rs[1].old_range == LineRange{1, 1});
}

TEST_CASE("no-newline markers are ignored") {
    auto rs = parse_unified_diff("--- a/x\n+++ b/x\n@@ -1 +1 @@\n-a\n\\ No newline at end of file\n+b\n");
    REQUIRE(rs.size() == 1);
    CHECK(rs[0].added_lines == std::vector<std::string>{"b"});
}

TEST_CASE("malformed headers and counts raise") {
    CHECK_THROWS_AS(parse_unified_diff("--- a/x\n+++ b/x\n@@ -1,x +1 @@\n-a\n+b\n"), MalformedHunkHeader);
    CHECK_THROWS_AS(parse_unified_diff("--- a/x\n+++ b/x\n@@ -1,2 +1,2 @@\n-a\n+b\n"), InconsistentLineCount);
    CHECK_THROWS_AS(parse_unified_diff("--- a/x\n+++ b/x\n@@ -1 +1 @@\n-a\n+b\n+c\n"), InconsistentLineCount);
    CHECK_THROWS_AS(parse_unified_diff("--- a/x\n+++ b/x\n@@ -1,2 +1,2 @@\n-a\n?b\n"), InconsistentLineCount);
}

TEST_CASE("multi-file ordering follows the diff") {
    auto rs = parse_unified_diff("--- a/b\n+++ b/b\n@@ -1 +1 @@\n-1\n+2\n--- a/a\n+++ b/a\n@@ -4 +4 @@\n-1\n+2\n");
    REQUIRE(rs.size() == 2);
    CHECK(rs[0].file_path == "b");
    CHECK(rs[1].file_path == "a");
}

TEST_CASE("render and reparse round trip against apply") {
    std::mt19937 rng(7);
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<std::string> old_lines;
        int n = 1 + static_cast<int>(rng() % 30);
        for (int i = 0; i < n; ++i) old_lines.push_back("line " + std::to_string(i));
        std::vector<std::string> new_lines;
        for (int i = 0; i <= n; ++i) {
            int op = static_cast<int>(rng() % 6);
            if (op == 0) new_lines.push_back("ins " + std::to_string(iter) + "." + std::to_string(i));
            if (i == n) break;
            if (op == 1) continue;  // delete
            if (op == 2) new_lines.push_back("mod " + std::to_string(i));
            else new_lines.push_back(old_lines[i]);
        }
        // Whole-file hunk; an empty side is written as "0,0" like git does.
        auto side = [](std::size_t count) { return std::string(count ? "1," : "0,") + std::to_string(count); };
        std::string d = "--- a/f\n+++ b/f\n@@ -" + side(old_lines.size()) + " +" + side(new_lines.size()) + " @@\n";
        for (const auto& l : old_lines) d += "-" + l + "\n";
        for (const auto& l : new_lines) d += "+" + l + "\n";
        auto rs = parse_unified_diff(d);
        CHECK(apply_regions(old_lines, rs) == new_lines);
        auto rendered = render_file_diff("f", old_lines, rs);
        CHECK(apply_regions(old_lines, parse_unified_diff(rendered)) == new_lines);
    }
}

TEST_CASE("apply rejects mismatching removals") {
    auto rs = parse_unified_diff("--- a/x\n+++ b/x\n@@ -1 +1 @@\n-a\n+b\n");
    CHECK_THROWS_AS(apply_regions({"zzz"}, rs), PatchMismatch);
}

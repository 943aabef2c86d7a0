#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace untangler {

// 1-based line interval holding `count` lines starting at `first`. An empty
// range (count == 0) still records a position: the line before which the
// opposite side's content sits.
struct LineRange {
    int first = 1;
    int count = 0;

    int last() const { return first + count - 1; }
    bool empty() const { return count == 0; }
    bool contains(int line) const { return line >= first && line <= last(); }
    bool intersects(int lo, int hi) const { return !empty() && lo <= last() && hi >= first; }

    friend bool operator==(const LineRange&, const LineRange&) = default;
};

// One contiguous changed run: zero or more removed lines followed by zero or
// more added lines, with no context line in between.
struct DiffRegion {
    std::string file_path;
    LineRange old_range;
    LineRange new_range;
    std::vector<std::string> removed_lines;
    std::vector<std::string> added_lines;

    friend bool operator==(const DiffRegion&, const DiffRegion&) = default;
};

// Parses a (possibly multi-file) unified diff. Regions come out in file order,
// then line order. A `-` line following a `+` line starts a new region even
// without intervening context.
std::vector<DiffRegion> parse_unified_diff(std::string_view diff_text);

// Groups regions by file path, keeping the per-file line order.
std::map<std::string, std::vector<DiffRegion>> regions_by_file(const std::vector<DiffRegion>& regions);

// Applies the regions of one file to its old content. Removed lines are
// checked against the old text; a mismatch raises PatchMismatch.
std::vector<std::string> apply_regions(const std::vector<std::string>& old_lines,
                                       const std::vector<DiffRegion>& file_regions);

// Renders regions of one file as unified diff hunks with `context` lines of
// surrounding context. Adjacent regions are folded into one hunk.
std::string render_file_diff(const std::string& file_path,
                             const std::vector<std::string>& old_lines,
                             const std::vector<DiffRegion>& file_regions,
                             int context = 3);

std::vector<std::string> split_lines(std::string_view text);
std::string join_lines(const std::vector<std::string>& lines);

}  // namespace untangler

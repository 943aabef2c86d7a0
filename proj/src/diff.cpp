#include "untangler/diff.hpp"

#include <algorithm>
#include <charconv>
#include <optional>
#include <sstream>

#include "untangler/errors.hpp"

namespace untangler {

namespace {

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

// "--- a/foo.c\t2020-..." -> "foo.c"; "/dev/null" stays as is.
std::string header_path(std::string_view rest) {
    if (auto tab = rest.find('\t'); tab != std::string_view::npos) rest = rest.substr(0, tab);
    while (!rest.empty() && (rest.back() == ' ' || rest.back() == '\r')) rest.remove_suffix(1);
    if (rest.size() >= 2 && rest.front() == '"' && rest.back() == '"') rest = rest.substr(1, rest.size() - 2);
    if (rest == "/dev/null") return std::string(rest);
    if (starts_with(rest, "a/") || starts_with(rest, "b/")) rest.remove_prefix(2);
    return std::string(rest);
}

bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

// "-a,b" / "+c" -> (start, count)
bool parse_side(std::string_view s, char sign, int& start, int& count) {
    if (s.empty() || s.front() != sign) return false;
    s.remove_prefix(1);
    count = 1;
    if (auto comma = s.find(','); comma != std::string_view::npos) {
        if (!parse_int(s.substr(comma + 1), count)) return false;
        s = s.substr(0, comma);
    }
    return parse_int(s, start) && start >= 0 && count >= 0;
}

struct HunkHeader {
    int old_start, old_count, new_start, new_count;
};

HunkHeader parse_hunk_header(std::string_view line, int line_no) {
    // @@ -a,b +c,d @@ optional section heading
    auto fail = [&] {
        return MalformedHunkHeader("line " + std::to_string(line_no) + ": '" + std::string(line) + "'");
    };
    if (!starts_with(line, "@@ ")) throw fail();
    auto close = line.find(" @@", 2);
    if (close == std::string_view::npos) throw fail();
    std::string_view body = line.substr(3, close - 3);
    auto space = body.find(' ');
    if (space == std::string_view::npos) throw fail();
    HunkHeader h{};
    if (!parse_side(body.substr(0, space), '-', h.old_start, h.old_count) ||
        !parse_side(body.substr(space + 1), '+', h.new_start, h.new_count))
        throw fail();
    return h;
}

}  // namespace

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(pos));
            break;
        }
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        pos = nl + 1;
    }
    return lines;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

std::vector<DiffRegion> parse_unified_diff(std::string_view diff_text) {
    std::vector<DiffRegion> regions;
    auto lines = split_lines(diff_text);

    std::string old_path, new_path;
    auto current_path = [&] { return new_path == "/dev/null" || new_path.empty() ? old_path : new_path; };

    std::size_t i = 0;
    while (i < lines.size()) {
        std::string_view line = lines[i];
        if (starts_with(line, "diff --git ")) {
            old_path.clear();
            new_path.clear();
            ++i;
            continue;
        }
        if (starts_with(line, "--- ") && i + 1 < lines.size() && starts_with(lines[i + 1], "+++ ")) {
            old_path = header_path(line.substr(4));
            new_path = header_path(std::string_view(lines[i + 1]).substr(4));
            i += 2;
            continue;
        }
        if (!starts_with(line, "@@")) {
            // index/mode/rename/binary metadata and free text between files.
            ++i;
            continue;
        }

        const int header_line_no = static_cast<int>(i) + 1;
        HunkHeader h = parse_hunk_header(line, header_line_no);
        if (old_path.empty() && new_path.empty())
            throw MalformedHunkHeader("line " + std::to_string(header_line_no) + ": hunk without file header");
        ++i;

        // Unified diff uses start 0 for an empty side at the top of a file,
        // and otherwise names the line after which an empty side sits.
        int old_cursor = h.old_count == 0 ? h.old_start + 1 : h.old_start;
        int new_cursor = h.new_count == 0 ? h.new_start + 1 : h.new_start;
        int old_left = h.old_count;
        int new_left = h.new_count;

        std::optional<DiffRegion> run;
        auto flush = [&] {
            if (run) regions.push_back(std::move(*run));
            run.reset();
        };
        auto open_run = [&] {
            run.emplace();
            run->file_path = current_path();
            run->old_range = {old_cursor, 0};
            run->new_range = {new_cursor, 0};
        };

        while (old_left > 0 || new_left > 0) {
            if (i >= lines.size())
                throw InconsistentLineCount("hunk at line " + std::to_string(header_line_no) +
                                            " ends before its header counts are satisfied");
            std::string_view body = lines[i];
            if (starts_with(body, "\\")) {
                ++i;
                continue;
            }
            char tag = body.empty() ? ' ' : body.front();
            std::string content = body.empty() ? std::string() : std::string(body.substr(1));
            auto overrun = [&] {
                return InconsistentLineCount("hunk at line " + std::to_string(header_line_no) +
                                             " has more lines than its header declares (line " +
                                             std::to_string(i + 1) + ")");
            };
            if (tag == ' ') {
                if (old_left == 0 || new_left == 0) throw overrun();
                flush();
                ++old_cursor, ++new_cursor;
                --old_left, --new_left;
            } else if (tag == '-') {
                if (old_left == 0) throw overrun();
                if (run && !run->added_lines.empty()) flush();
                if (!run) open_run();
                run->removed_lines.push_back(std::move(content));
                ++run->old_range.count;
                ++old_cursor;
                --old_left;
            } else if (tag == '+') {
                if (new_left == 0) throw overrun();
                if (!run) open_run();
                run->added_lines.push_back(std::move(content));
                ++run->new_range.count;
                ++new_cursor;
                --new_left;
            } else {
                throw InconsistentLineCount("hunk at line " + std::to_string(header_line_no) +
                                            " interrupted by '" + std::string(body) + "'");
            }
            ++i;
        }
        flush();
        while (i < lines.size() && starts_with(lines[i], "\\")) ++i;
        if (i < lines.size()) {
            std::string_view next = lines[i];
            bool is_body = !next.empty() && (next.front() == '+' || next.front() == ' ' ||
                                              (next.front() == '-' && !starts_with(next, "--- ")));
            if (is_body)
                throw InconsistentLineCount("hunk at line " + std::to_string(header_line_no) +
                                            " has more lines than its header declares (line " +
                                            std::to_string(i + 1) + ")");
        }
    }
    return regions;
}

std::map<std::string, std::vector<DiffRegion>> regions_by_file(const std::vector<DiffRegion>& regions) {
    std::map<std::string, std::vector<DiffRegion>> out;
    for (const auto& r : regions) out[r.file_path].push_back(r);
    for (auto& [path, rs] : out)
        std::stable_sort(rs.begin(), rs.end(),
                         [](const DiffRegion& a, const DiffRegion& b) { return a.old_range.first < b.old_range.first; });
    return out;
}

std::vector<std::string> apply_regions(const std::vector<std::string>& old_lines,
                                       const std::vector<DiffRegion>& file_regions) {
    std::vector<std::string> out;
    int next_old = 1;  // first old line not yet copied
    for (const auto& r : file_regions) {
        if (r.old_range.first < next_old || r.old_range.first - 1 > static_cast<int>(old_lines.size()))
            throw PatchMismatch(r.file_path + ": region at old line " + std::to_string(r.old_range.first) +
                                " is out of order or beyond end of file");
        for (; next_old < r.old_range.first; ++next_old) out.push_back(old_lines[next_old - 1]);
        for (std::size_t k = 0; k < r.removed_lines.size(); ++k) {
            int ln = r.old_range.first + static_cast<int>(k);
            if (ln > static_cast<int>(old_lines.size()) || old_lines[ln - 1] != r.removed_lines[k])
                throw PatchMismatch(r.file_path + ": removed line " + std::to_string(ln) + " does not match");
        }
        next_old += r.old_range.count;
        if (static_cast<int>(out.size()) + 1 != r.new_range.first)
            throw PatchMismatch(r.file_path + ": region lands at new line " + std::to_string(out.size() + 1) +
                                ", header says " + std::to_string(r.new_range.first));
        out.insert(out.end(), r.added_lines.begin(), r.added_lines.end());
    }
    for (; next_old <= static_cast<int>(old_lines.size()); ++next_old) out.push_back(old_lines[next_old - 1]);
    return out;
}

std::string render_file_diff(const std::string& file_path,
                             const std::vector<std::string>& old_lines,
                             const std::vector<DiffRegion>& file_regions,
                             int context) {
    if (file_regions.empty()) return {};
    std::ostringstream out;
    out << "--- a/" << file_path << "\n+++ b/" << file_path << "\n";

    const int old_total = static_cast<int>(old_lines.size());
    std::size_t idx = 0;
    while (idx < file_regions.size()) {
        // Fold regions whose context windows touch into one hunk.
        std::size_t end = idx + 1;
        while (end < file_regions.size()) {
            const auto& prev = file_regions[end - 1];
            int prev_old_end = prev.old_range.first + prev.old_range.count;  // first old line after prev
            if (file_regions[end].old_range.first - prev_old_end > 2 * context) break;
            ++end;
        }
        const auto& first = file_regions[idx];
        const auto& last = file_regions[end - 1];
        int lead = std::min(context, first.old_range.first - 1);
        int hunk_old_start = first.old_range.first - lead;
        int hunk_new_start = first.new_range.first - lead;
        int last_old_end = last.old_range.first + last.old_range.count;
        int trail = std::max(0, std::min(context, old_total - last_old_end + 1));

        std::ostringstream body;
        int old_count = 0, new_count = 0;
        int cursor = hunk_old_start;
        for (std::size_t k = idx; k < end; ++k) {
            const auto& r = file_regions[k];
            for (; cursor < r.old_range.first; ++cursor) {
                body << ' ' << old_lines[cursor - 1] << '\n';
                ++old_count, ++new_count;
            }
            for (const auto& l : r.removed_lines) body << '-' << l << '\n';
            for (const auto& l : r.added_lines) body << '+' << l << '\n';
            old_count += r.old_range.count;
            new_count += r.new_range.count;
            cursor += r.old_range.count;
        }
        for (int t = 0; t < trail; ++t, ++cursor) {
            body << ' ' << old_lines[cursor - 1] << '\n';
            ++old_count, ++new_count;
        }
        auto side = [](int start, int count) {
            // Empty sides name the line before the gap.
            int shown = count == 0 ? start - 1 : start;
            return std::to_string(shown) + "," + std::to_string(count);
        };
        out << "@@ -" << side(hunk_old_start, old_count) << " +" << side(hunk_new_start, new_count) << " @@\n"
            << body.str();
        idx = end;
    }
    return out.str();
}

}  // namespace untangler

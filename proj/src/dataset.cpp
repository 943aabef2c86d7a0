#include "untangler/dataset.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "untangler/diff.hpp"
#include "untangler/errors.hpp"

namespace untangler {

namespace {

struct CommandResult {
    int status = -1;
    std::string out;
    std::string err;
};

std::string shell_quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

CommandResult run_git(const std::string& repo, const std::vector<std::string>& args) {
    char err_path[] = "/tmp/untangler-git-XXXXXX";
    int fd = mkstemp(err_path);
    if (fd < 0) throw std::runtime_error("cannot create temporary file for git diagnostics");
    close(fd);

    std::string cmd = "git -C " + shell_quote(repo) + " -c core.quotepath=on";
    for (const auto& a : args) cmd += " " + shell_quote(a);
    cmd += " 2>" + shell_quote(err_path);

    CommandResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) {
        std::remove(err_path);
        throw std::runtime_error("cannot run git");
    }
    char buf[65536];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream err(err_path);
    r.err.assign(std::istreambuf_iterator<char>(err), {});
    std::remove(err_path);
    while (!r.err.empty() && (r.err.back() == '\n' || r.err.back() == '\r')) r.err.pop_back();
    return r;
}

std::string trim(std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    return s;
}

std::vector<std::string> split_nul(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        auto end = s.find('\0', pos);
        if (end == std::string::npos) end = s.size();
        if (end > pos) out.push_back(s.substr(pos, end - pos));
        pos = end + 1;
    }
    return out;
}

std::string blob_or_empty(const std::string& repo, const std::string& rev, const std::string& path) {
    if (run_git(repo, {"cat-file", "-e", rev + ":" + path}).status != 0) return {};
    auto r = run_git(repo, {"cat-file", "blob", rev + ":" + path});
    if (r.status != 0) throw MissingObject(rev + ":" + path + ": " + r.err);
    return r.out;
}

// One line of a file as the constituents are applied in order.
struct Entry {
    std::string text;
    int origin = -1;      // constituent that added it; -1 = present before the first
    int removed_by = -1;  // constituent that deleted it
};

struct FileTape {
    std::vector<Entry> entries;

    std::vector<std::size_t> live_index() const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < entries.size(); ++i)
            if (entries[i].removed_by < 0) idx.push_back(i);
        return idx;
    }
    std::vector<std::string> live_lines() const {
        std::vector<std::string> out;
        for (const auto& e : entries)
            if (e.removed_by < 0) out.push_back(e.text);
        return out;
    }
    std::vector<std::string> base_lines() const {
        std::vector<std::string> out;
        for (const auto& e : entries)
            if (e.origin < 0) out.push_back(e.text);
        return out;
    }
};

std::string short_id(const std::string& id) { return id.substr(0, std::min<std::size_t>(id.size(), 10)); }

void apply_constituent(FileTape& tape, const std::string& path, int index, const AtomicCommit& c,
                       const std::vector<DiffRegion>& regions) {
    auto live = tape.live_index();
    for (auto it = regions.rbegin(); it != regions.rend(); ++it) {
        const auto& r = *it;
        for (int k = 0; k < r.old_range.count; ++k) {
            int line = r.old_range.first + k;
            if (line < 1 || line > static_cast<int>(live.size()))
                throw PatchMismatch(path + ": " + short_id(c.commit_id) + " removes line " + std::to_string(line) +
                                    " beyond the end of the file");
            Entry& e = tape.entries[live[line - 1]];
            if (e.text != r.removed_lines[k])
                throw PatchMismatch(path + ": " + short_id(c.commit_id) + " removed line " + std::to_string(line) +
                                    " does not match");
            if (e.origin >= 0)
                throw OverlappingChanges(path + ": constituents " + std::to_string(e.origin) + " and " +
                                         std::to_string(index) + " edit the same line");
            e.removed_by = index;
        }
        int after = r.old_range.first + r.old_range.count;  // first live line after the region
        std::size_t at = after <= static_cast<int>(live.size()) ? live[after - 1] : tape.entries.size();
        std::vector<Entry> added;
        for (const auto& text : r.added_lines) added.push_back({text, index, -1});
        tape.entries.insert(tape.entries.begin() + static_cast<long>(at), added.begin(), added.end());
    }
}

struct FoldedFile {
    std::vector<std::string> base, final;
    std::vector<DiffRegion> regions;
    std::map<int, int> old_label, new_label;  // changed line -> constituent
};

FoldedFile fold(const std::string& path, const FileTape& tape) {
    FoldedFile f;
    f.base = tape.base_lines();
    f.final = tape.live_lines();
    int old_no = 0, new_no = 0;
    std::size_t i = 0;
    while (i < tape.entries.size()) {
        const Entry& e = tape.entries[i];
        bool context = e.origin < 0 && e.removed_by < 0;
        if (context) {
            ++old_no, ++new_no, ++i;
            continue;
        }
        DiffRegion r;
        r.file_path = path;
        r.old_range = {old_no + 1, 0};
        r.new_range = {new_no + 1, 0};
        std::set<int> owners;
        for (; i < tape.entries.size(); ++i) {
            const Entry& x = tape.entries[i];
            if (x.origin < 0 && x.removed_by < 0) break;
            if (x.origin < 0) {
                r.removed_lines.push_back(x.text);
                ++r.old_range.count;
                f.old_label[++old_no] = x.removed_by;
                owners.insert(x.removed_by);
            } else {
                r.added_lines.push_back(x.text);
                ++r.new_range.count;
                f.new_label[++new_no] = x.origin;
                owners.insert(x.origin);
            }
        }
        if (owners.size() > 1)
            throw OverlappingChanges(path + ": edits of constituents " + std::to_string(*owners.begin()) + " and " +
                                     std::to_string(*owners.rbegin()) + " touch around old line " +
                                     std::to_string(r.old_range.first));
        f.regions.push_back(std::move(r));
    }
    return f;
}

}  // namespace

std::vector<AtomicCommit> ingest_repo(const std::string& repo_path, const std::string& commit_range) {
    auto probe = run_git(repo_path, {"rev-parse", "--git-dir"});
    if (probe.status != 0) throw NotARepository(repo_path + ": " + probe.err);

    const std::string range = commit_range.empty() ? "HEAD" : commit_range;
    auto listing = run_git(repo_path, {"log", "--no-merges", "--format=%H %P%x09%ct", range, "--"});
    if (listing.status != 0) throw MissingObject(range + ": " + listing.err);

    auto empty_tree = run_git(repo_path, {"hash-object", "-t", "tree", "/dev/null"});
    if (empty_tree.status != 0) throw MissingObject("empty tree: " + empty_tree.err);
    const std::string root_base = trim(empty_tree.out);

    std::vector<AtomicCommit> commits;
    std::istringstream lines(listing.out);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        auto tab = line.find('\t');
        std::istringstream ids(line.substr(0, tab));
        AtomicCommit c;
        std::string parent;
        ids >> c.commit_id >> parent;
        c.timestamp = std::stoll(line.substr(tab + 1));
        const std::string base = parent.empty() ? root_base : parent;

        auto diff = run_git(repo_path, {"diff", "--no-color", "--no-ext-diff", "--no-renames", "--src-prefix=a/",
                                        "--dst-prefix=b/", "-U3", base, c.commit_id, "--"});
        if (diff.status != 0) throw MissingObject(c.commit_id + ": " + diff.err);
        c.diff_text = std::move(diff.out);

        auto names = run_git(repo_path, {"diff", "--name-only", "-z", "--no-renames", base, c.commit_id, "--"});
        if (names.status != 0) throw MissingObject(c.commit_id + ": " + names.err);
        for (const auto& path : split_nul(names.out))
            c.files[path] = {parent.empty() ? std::string() : blob_or_empty(repo_path, parent, path),
                             blob_or_empty(repo_path, c.commit_id, path)};
        commits.push_back(std::move(c));
    }
    // git log lists newest first; reverse keeps parents ahead of children on timestamp ties.
    std::reverse(commits.begin(), commits.end());
    std::stable_sort(commits.begin(), commits.end(),
                     [](const AtomicCommit& a, const AtomicCommit& b) { return a.timestamp < b.timestamp; });
    return commits;
}

CompositeCommit synthesize_composite(const std::vector<AtomicCommit>& constituents, const std::string& grammar_id) {
    if (constituents.size() < 2) throw std::invalid_argument("a composite needs at least two constituents");

    std::map<std::string, FileTape> tapes;
    for (std::size_t i = 0; i < constituents.size(); ++i) {
        const auto& c = constituents[i];
        auto by_file = regions_by_file(parse_unified_diff(c.diff_text));
        for (const auto& [path, regions] : by_file) {
            auto snap = c.files.find(path);
            if (snap == c.files.end())
                throw MissingObject(short_id(c.commit_id) + " has no snapshot of " + path);
            auto old_lines = split_lines(snap->second.first);
            auto [tape_it, fresh] = tapes.try_emplace(path);
            FileTape& tape = tape_it->second;
            if (fresh) {
                for (auto& l : old_lines) tape.entries.push_back({std::move(l), -1, -1});
            } else if (tape.live_lines() != old_lines) {
                throw NonSequentialConstituents(short_id(c.commit_id) + " does not start from the state of " + path +
                                                " left by the earlier constituents");
            }
            apply_constituent(tape, path, static_cast<int>(i), c, regions);
            if (tape.live_lines() != split_lines(snap->second.second))
                throw PatchMismatch(path + ": applying " + short_id(c.commit_id) +
                                    " does not reproduce its new snapshot");
        }
    }

    CompositeCommit out;
    out.grammar = grammar_id;
    for (const auto& c : constituents) {
        out.constituents.push_back(c.commit_id);
        out.composite_id += (out.composite_id.empty() ? "" : "+") + c.commit_id.substr(0, 7);
    }

    std::map<std::string, FoldedFile> folded;
    for (const auto& [path, tape] : tapes) {
        auto f = fold(path, tape);
        if (f.regions.empty()) continue;
        out.merged_diff += render_file_diff(path, f.base, f.regions);
        out.files[path] = {join_lines(f.base), join_lines(f.final)};
        folded.emplace(path, std::move(f));
    }

    ChangeGraph graph = build_change_graph(out.sources(), grammar_id);
    out.ground_truth.total_statements = graph.statement_count();
    std::set<std::string> concerns;
    for (const auto& node : graph.nodes()) {
        if (!node.changed) continue;
        const auto& f = folded.at(node.file_path);
        const auto& labels = node.version == Version::Old ? f.old_label : f.new_label;
        std::set<int> owners;
        for (int line : node.owned_lines())
            if (auto it = labels.find(line); it != labels.end()) owners.insert(it->second);
        if (owners.empty()) continue;
        if (owners.size() > 1)
            throw OverlappingChanges(node.id + " holds edits of constituents " + std::to_string(*owners.begin()) +
                                     " and " + std::to_string(*owners.rbegin()));
        auto label = std::to_string(*owners.begin());
        out.ground_truth.labels[node.key().str()] = label;
        concerns.insert(label);
    }
    for (std::size_t i = 0; i < constituents.size(); ++i)
        if (!concerns.count(std::to_string(i)))
            throw EmptyConstituent(short_id(constituents[i].commit_id) + " changes no statement");
    out.ground_truth.concern_count = concerns.size();
    return out;
}

SplitResult chronological_split(std::vector<AtomicCommit> commits, double train, double validation, double test) {
    if (train < 0 || validation < 0 || test < 0 || std::abs(train + validation + test - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must be non-negative and sum to 1");
    std::stable_sort(commits.begin(), commits.end(), [](const AtomicCommit& a, const AtomicCommit& b) {
        return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.commit_id < b.commit_id;
    });
    const double n = static_cast<double>(commits.size());
    // The epsilon keeps 0.8 * 10 from flooring to 7 through representation error.
    auto cut = [&](double fraction) {
        return std::min(commits.size(), static_cast<std::size_t>(std::floor(n * fraction + 1e-9)));
    };
    std::size_t b1 = cut(train), b2 = std::max(b1, cut(train + validation));
    SplitResult s;
    s.train.assign(commits.begin(), commits.begin() + static_cast<long>(b1));
    s.validation.assign(commits.begin() + static_cast<long>(b1), commits.begin() + static_cast<long>(b2));
    s.test.assign(commits.begin() + static_cast<long>(b2), commits.end());
    return s;
}

SamplingReport sample_composites(const std::vector<AtomicCommit>& commits, int count, int k_min, int k_max,
                                 std::uint64_t seed, const std::string& grammar_id) {
    if (k_min < 2 || k_max < k_min) throw std::invalid_argument("k range must satisfy 2 <= k_min <= k_max");
    SamplingReport report;
    std::mt19937_64 rng(seed);
    // Plain modulo keeps draws identical across standard library implementations.
    auto draw = [&](std::uint64_t n) { return static_cast<std::size_t>(rng() % n); };

    std::set<std::pair<std::size_t, int>> tried;
    std::size_t windows = 0;
    for (int k = k_min; k <= k_max; ++k)
        if (commits.size() >= static_cast<std::size_t>(k)) windows += commits.size() - k + 1;
    const int max_attempts = 20 * count + 100;
    while (static_cast<int>(report.composites.size()) < count && tried.size() < windows &&
           report.attempts < max_attempts) {
        ++report.attempts;
        int k = k_min + static_cast<int>(draw(static_cast<std::uint64_t>(k_max - k_min + 1)));
        if (commits.size() < static_cast<std::size_t>(k)) continue;
        std::size_t start = draw(commits.size() - k + 1);
        if (!tried.insert({start, k}).second) continue;
        std::vector<AtomicCommit> window(commits.begin() + static_cast<long>(start),
                                         commits.begin() + static_cast<long>(start) + k);
        try {
            report.composites.push_back(synthesize_composite(window, grammar_id));
        } catch (const OverlappingChanges&) {
            ++report.skipped;
        } catch (const NonSequentialConstituents&) {
            ++report.skipped;
        } catch (const EmptyConstituent&) {
            ++report.skipped;
        }
    }
    return report;
}

nlohmann::ordered_json to_json(const GroundTruth& truth) {
    nlohmann::ordered_json labels = nlohmann::ordered_json::array();
    for (const auto& [key, label] : truth.labels) {
        auto k = StatementKey::parse(key);
        labels.push_back({{"file", k.file},
                          {"version", to_string(k.version)},
                          {"start", k.start},
                          {"end", k.end},
                          {"label", label}});
    }
    return {{"total_statements", truth.total_statements},
            {"concern_count", truth.concern_count},
            {"labels", labels}};
}

GroundTruth ground_truth_from_json(const nlohmann::json& j) {
    GroundTruth t;
    t.total_statements = j.at("total_statements").get<std::size_t>();
    t.concern_count = j.at("concern_count").get<std::size_t>();
    for (const auto& rec : j.at("labels")) {
        StatementKey k{rec.at("file").get<std::string>(), version_from_string(rec.at("version").get<std::string>()),
                       rec.at("start").get<int>(), rec.at("end").get<int>()};
        t.labels[k.str()] = rec.at("label").get<std::string>();
    }
    return t;
}

}  // namespace untangler

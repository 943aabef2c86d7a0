#include "untangler/purifier.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <map>
#include <sstream>

namespace untangler {

nlohmann::ordered_json to_json(const MinimalChangeSubgraph& mcs) {
    nlohmann::ordered_json j;
    j["mcs_id"] = mcs.mcs_id;
    j["core_nodes"] = mcs.core_nodes;
    j["context_nodes"] = mcs.context_nodes;
    j["rendered_diff"] = mcs.rendered_diff;
    return j;
}

std::string mcs_id_for(const std::set<NodeId>& core) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& id : core) {
        for (unsigned char c : id) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        h ^= 0x0a;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return "mcs-" + std::string(buf, 12);
}

namespace {

bool dependency(EdgeKind k) { return k == EdgeKind::DataDep || k == EdgeKind::ControlDep; }

std::pair<std::string, MergedPosition> anchor(const ChangeGraph& g, const NodeId& id) {
    const auto& n = g.node(id);
    return {n.file_path, g.merged_position(n.file_path, n.version, n.span.first)};
}

}  // namespace

std::vector<std::set<NodeId>> core_change_sets(const ChangeGraph& graph) {
    const auto& seeds = graph.seeds();
    std::map<NodeId, std::vector<NodeId>> adj;
    for (const auto& e : graph.edges()) {
        if (!dependency(e.kind) || !seeds.count(e.src) || !seeds.count(e.dst)) continue;
        adj[e.src].push_back(e.dst);
        adj[e.dst].push_back(e.src);
    }
    for (const auto& [o, n] : graph.counterparts()) {
        if (!seeds.count(o) || !seeds.count(n)) continue;
        adj[o].push_back(n);
        adj[n].push_back(o);
    }

    std::vector<std::set<NodeId>> out;
    std::set<NodeId> seen;
    for (const auto& s : seeds) {
        if (seen.count(s)) continue;
        std::set<NodeId> comp;
        std::deque<NodeId> queue{s};
        seen.insert(s);
        while (!queue.empty()) {
            auto cur = queue.front();
            queue.pop_front();
            comp.insert(cur);
            for (const auto& nb : adj[cur])
                if (seen.insert(nb).second) queue.push_back(nb);
        }
        out.push_back(std::move(comp));
    }

    auto first_of = [&](const std::set<NodeId>& comp) {
        auto best = anchor(graph, *comp.begin());
        for (const auto& id : comp) best = std::min(best, anchor(graph, id));
        return best;
    };
    std::vector<std::pair<std::pair<std::string, MergedPosition>, std::size_t>> keys;
    for (std::size_t i = 0; i < out.size(); ++i) keys.push_back({first_of(out[i]), i});
    std::sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return *out[a.second].begin() < *out[b.second].begin();
    });
    std::vector<std::set<NodeId>> sorted;
    for (const auto& [k, i] : keys) sorted.push_back(std::move(out[i]));
    return sorted;
}

std::set<NodeId> backward_slice(const ChangeGraph& graph, const std::set<NodeId>& core, int bound_k) {
    std::map<NodeId, std::vector<NodeId>> preds;
    for (const auto& e : graph.edges())
        if (dependency(e.kind)) preds[e.dst].push_back(e.src);

    std::set<NodeId> context;
    std::set<NodeId> visited(core.begin(), core.end());
    std::vector<NodeId> frontier(core.begin(), core.end());
    for (int hop = 0; hop < bound_k && !frontier.empty(); ++hop) {
        std::vector<NodeId> next;
        for (const auto& id : frontier) {
            auto it = preds.find(id);
            if (it == preds.end()) continue;
            for (const auto& p : it->second) {
                if (graph.node(p).changed || !visited.insert(p).second) continue;
                context.insert(p);
                next.push_back(p);
            }
        }
        frontier = std::move(next);
    }
    for (const auto& id : core) {
        for (auto p = graph.parent_of(id); p; p = graph.parent_of(*p)) {
            const auto& n = graph.node(*p);
            if (n.kind == StatementKind::Signature && !n.changed) context.insert(*p);
        }
    }
    return context;
}

MinimalChangeSubgraph finalize_mcs(const ChangeGraph& graph, const std::set<NodeId>& core,
                                   const std::set<NodeId>& context) {
    MinimalChangeSubgraph mcs;
    mcs.mcs_id = mcs_id_for(core);
    mcs.core_nodes.assign(core.begin(), core.end());
    mcs.context_nodes.assign(context.begin(), context.end());

    struct Line {
        MergedPosition pos;
        char prefix;
        std::string text;
    };
    std::map<std::string, std::vector<Line>> per_file;
    std::map<std::string, std::set<int>> shown;  // merged lines of unchanged text already emitted

    auto in_region = [&](const FileVersions& fv, Version v, int line) {
        for (const auto& r : fv.regions)
            if ((v == Version::Old ? r.old_range : r.new_range).contains(line)) return true;
        return false;
    };
    auto emit = [&](const NodeId& id, bool is_core) {
        const auto& n = graph.node(id);
        const auto& fv = graph.files().at(n.file_path);
        const auto& text = n.version == Version::Old ? fv.old_lines : fv.new_lines;
        for (int l : n.owned_lines()) {
            if (l < 1 || l > static_cast<int>(text.size())) continue;
            auto pos = graph.merged_position(n.file_path, n.version, l);
            bool changed = is_core && in_region(fv, n.version, l);
            if (changed) {
                per_file[n.file_path].push_back({pos, n.version == Version::Old ? '-' : '+', text[l - 1]});
            } else if (shown[n.file_path].insert(pos.line).second) {
                pos.phase = 1;
                pos.own_line = pos.line;
                per_file[n.file_path].push_back({pos, ' ', text[l - 1]});
            }
        }
    };
    for (const auto& id : core) emit(id, true);
    for (const auto& id : context) emit(id, false);

    std::ostringstream out;
    for (auto& [file, lines] : per_file) {
        std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
            if (a.pos != b.pos) return a.pos < b.pos;
            return a.prefix < b.prefix;
        });
        out << "--- a/" << file << "\n+++ b/" << file << "\n";
        int next_expected = -1;
        for (const auto& l : lines) {
            if (next_expected >= 0 && l.pos.line > next_expected) out << "...\n";
            out << l.prefix << l.text << "\n";
            next_expected = l.pos.phase == 0 ? l.pos.line : l.pos.line + 1;
        }
    }
    mcs.rendered_diff = out.str();
    return mcs;
}

std::vector<MinimalChangeSubgraph> build_mcss(const ChangeGraph& graph, int bound_k) {
    std::vector<MinimalChangeSubgraph> out;
    for (const auto& core : core_change_sets(graph))
        out.push_back(finalize_mcs(graph, core, backward_slice(graph, core, bound_k)));
    return out;
}

}  // namespace untangler

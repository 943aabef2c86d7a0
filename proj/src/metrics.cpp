#include "untangler/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <set>

#include "untangler/errors.hpp"

namespace untangler {

namespace {

using Matrix = std::vector<std::vector<long long>>;

// Hungarian algorithm (potentials, O(n^3)) for the maximum-weight matching
// of a rectangular non-negative matrix. Returns only the optimum value.
long long max_weight_value(const Matrix& w) {
    const std::size_t rows = w.size();
    const std::size_t cols = rows == 0 ? 0 : w[0].size();
    const std::size_t n = std::max(rows, cols);
    if (n == 0) return 0;
    long long top = 0;
    for (const auto& r : w)
        for (long long x : r) top = std::max(top, x);
    auto cost = [&](std::size_t i, std::size_t j) -> long long {
        return (i < rows && j < cols) ? top - w[i][j] : top;
    };

    const long long inf = std::numeric_limits<long long>::max() / 4;
    std::vector<long long> u(n + 1, 0), v(n + 1, 0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<long long> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            std::size_t i0 = p[j0], j1 = 0;
            long long delta = inf;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                long long cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) minv[j] = cur, way[j] = j0;
                if (minv[j] < delta) delta = minv[j], j1 = j;
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) u[p[j]] += delta, v[j] -= delta;
                else minv[j] -= delta;
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    long long total = 0;
    for (std::size_t j = 1; j <= n; ++j)
        if (p[j] - 1 < rows && j - 1 < cols) total += w[p[j] - 1][j - 1];
    return total;
}

Matrix submatrix(const Matrix& w, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
    Matrix out(rows.size(), std::vector<long long>(cols.size()));
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < cols.size(); ++b) out[a][b] = w[rows[a]][cols[b]];
    return out;
}

// Row -> column (or -1) of the lexicographically smallest optimal matching:
// fix rows one at a time to the first choice that keeps the optimum reachable.
std::vector<int> lexicographic_optimum(const Matrix& w, std::size_t cols) {
    const std::size_t rows = w.size();
    std::vector<std::size_t> free_cols(cols);
    for (std::size_t j = 0; j < cols; ++j) free_cols[j] = j;
    std::vector<int> choice(rows, -1);
    std::vector<std::size_t> rest_rows(rows);
    for (std::size_t i = 0; i < rows; ++i) rest_rows[i] = i;

    long long remaining = max_weight_value(w);
    for (std::size_t i = 0; i < rows; ++i) {
        rest_rows.erase(rest_rows.begin());
        bool fixed = false;
        for (std::size_t k = 0; k < free_cols.size() && !fixed; ++k) {
            auto cols_left = free_cols;
            cols_left.erase(cols_left.begin() + static_cast<long>(k));
            long long with = w[i][free_cols[k]] + max_weight_value(submatrix(w, rest_rows, cols_left));
            if (with == remaining) {
                choice[i] = static_cast<int>(free_cols[k]);
                remaining -= w[i][free_cols[k]];
                free_cols = std::move(cols_left);
                fixed = true;
            }
        }
        // Otherwise the row stays unmatched; the optimum is unchanged.
    }
    return choice;
}

}  // namespace

bool natural_less(const std::string& a, const std::string& b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
        bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
        if (da && db) {
            std::size_t ie = i, je = j;
            while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
            while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
            std::string na = a.substr(i, ie - i), nb = b.substr(j, je - j);
            na.erase(0, std::min(na.find_first_not_of('0'), na.size()));
            nb.erase(0, std::min(nb.find_first_not_of('0'), nb.size()));
            if (na.size() != nb.size()) return na.size() < nb.size();
            if (na != nb) return na < nb;
            i = ie, j = je;
            continue;
        }
        if (a[i] != b[j]) return a[i] < b[j];
        ++i, ++j;
    }
    if ((a.size() - i) != (b.size() - j)) return a.size() - i < b.size() - j;
    return a < b;
}

LabelMatching optimal_label_matching(const Prediction& pred, const GroundTruth& truth) {
    std::vector<std::string> groups, labels;
    {
        std::set<std::string> gs, ls;
        for (const auto& [key, label] : truth.labels) {
            ls.insert(label);
            if (auto it = pred.assignment.find(key); it != pred.assignment.end()) gs.insert(it->second);
        }
        groups.assign(gs.begin(), gs.end());
        labels.assign(ls.begin(), ls.end());
        std::sort(groups.begin(), groups.end(), natural_less);
        std::sort(labels.begin(), labels.end(), natural_less);
    }
    auto index_of = [](const std::vector<std::string>& v, const std::string& x) {
        return static_cast<std::size_t>(std::find(v.begin(), v.end(), x) - v.begin());
    };

    Matrix table(groups.size(), std::vector<long long>(labels.size(), 0));
    for (const auto& [key, label] : truth.labels) {
        auto it = pred.assignment.find(key);
        if (it == pred.assignment.end()) continue;
        ++table[index_of(groups, it->second)][index_of(labels, label)];
    }

    LabelMatching out;
    auto choice = lexicographic_optimum(table, labels.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (choice[g] < 0) continue;
        long long overlap = table[g][static_cast<std::size_t>(choice[g])];
        if (overlap == 0) continue;
        out.mapping[groups[g]] = labels[static_cast<std::size_t>(choice[g])];
        out.correct += static_cast<std::size_t>(overlap);
    }
    return out;
}

double acc_changed(const Prediction& pred, const GroundTruth& truth) {
    if (truth.labels.empty()) throw EmptyGroundTruth("no changed statements to score");
    return static_cast<double>(optimal_label_matching(pred, truth).correct) /
           static_cast<double>(truth.labels.size());
}

double acc_absolute(const Prediction& pred, const GroundTruth& truth) {
    if (truth.total_statements == 0) return 1.0;
    std::size_t changed = truth.labels.size();
    std::size_t correct = changed == 0 ? 0 : optimal_label_matching(pred, truth).correct;
    return static_cast<double>(truth.total_statements - changed + correct) /
           static_cast<double>(truth.total_statements);
}

MetricsReport score(const Prediction& pred, const GroundTruth& truth) {
    if (truth.labels.empty()) throw EmptyGroundTruth("no changed statements to score");
    MetricsReport r;
    r.changed = truth.labels.size();
    r.correct = optimal_label_matching(pred, truth).correct;
    r.total_statements = std::max(truth.total_statements, r.changed);
    r.concern_count = truth.concern_count;
    r.acc_c = static_cast<double>(r.correct) / static_cast<double>(r.changed);
    r.acc_a = static_cast<double>(r.total_statements - r.changed + r.correct) /
              static_cast<double>(r.total_statements);
    return r;
}

double overall_accuracy(const std::vector<MetricsReport>& reports) {
    std::size_t changed = 0, correct = 0;
    for (const auto& r : reports) changed += r.changed, correct += r.correct;
    if (changed == 0) throw EmptyGroundTruth("no changed statements across commits");
    return static_cast<double>(correct) / static_cast<double>(changed);
}

double average_accuracy(const std::vector<MetricsReport>& reports) {
    double sums[2] = {0.0, 0.0};
    int counts[2] = {0, 0};
    for (const auto& r : reports) {
        if (r.concern_count != 2 && r.concern_count != 3) continue;
        sums[r.concern_count - 2] += r.acc_c;
        ++counts[r.concern_count - 2];
    }
    double total = 0.0;
    int buckets = 0;
    for (int b = 0; b < 2; ++b)
        if (counts[b] > 0) total += sums[b] / counts[b], ++buckets;
    if (buckets == 0) throw NoEligibleCommits("no commit has exactly 2 or 3 concerns");
    return total / buckets;
}

Aggregate aggregate(const std::vector<MetricsReport>& reports) {
    Aggregate a;
    a.oa = overall_accuracy(reports);
    try {
        a.avg = average_accuracy(reports);
    } catch (const NoEligibleCommits&) {
    }
    return a;
}

nlohmann::ordered_json to_json(const MetricsReport& r) {
    return {{"acc_c", r.acc_c},
            {"acc_a", r.acc_a},
            {"changed", r.changed},
            {"correct", r.correct},
            {"total_statements", r.total_statements},
            {"concern_count", r.concern_count}};
}

nlohmann::ordered_json to_json(const Aggregate& a) {
    nlohmann::ordered_json j{{"oa", a.oa}};
    j["avg"] = a.avg ? nlohmann::ordered_json(*a.avg) : nlohmann::ordered_json(nullptr);
    return j;
}

}  // namespace untangler

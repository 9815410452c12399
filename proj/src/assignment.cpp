#include "taskvid/assignment.hpp"

#include <algorithm>
#include <limits>

#include "taskvid/errors.hpp"

namespace taskvid {

namespace {

// Hungarian algorithm with potentials, O(n^2 m), for n <= m.
// a is 1-indexed internally; returns match[row] = col (0-indexed).
std::vector<int> hungarian(const std::vector<std::vector<double>>& a) {
    int n = static_cast<int>(a.size());
    int m = static_cast<int>(a[0].size());
    const double INF = std::numeric_limits<double>::infinity();

    std::vector<double> u(static_cast<size_t>(n) + 1), v(static_cast<size_t>(m) + 1);
    std::vector<int> p(static_cast<size_t>(m) + 1), way(static_cast<size_t>(m) + 1);

    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(m) + 1, INF);
        std::vector<char> used(static_cast<size_t>(m) + 1, false);
        do {
            used[static_cast<size_t>(j0)] = true;
            int i0 = p[static_cast<size_t>(j0)], j1 = 0;
            double delta = INF;
            for (int j = 1; j <= m; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                double cur = a[static_cast<size_t>(i0 - 1)][static_cast<size_t>(j - 1)] -
                             u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            int j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> match(static_cast<size_t>(n), -1);
    for (int j = 1; j <= m; ++j)
        if (p[static_cast<size_t>(j)] != 0) match[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
    return match;
}

}  // namespace

std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
    if (cost.empty()) return {};
    size_t rows = cost.size(), cols = cost[0].size();
    for (const auto& r : cost)
        if (r.size() != cols) throw ValidationError("solve_assignment: ragged cost matrix");
    if (cols == 0) return std::vector<int>(rows, -1);

    if (rows <= cols) return hungarian(cost);

    // transpose so the row count is the smaller side, then invert the mapping
    std::vector<std::vector<double>> t(cols, std::vector<double>(rows));
    for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < cols; ++j) t[j][i] = cost[i][j];
    std::vector<int> col_match = hungarian(t);
    std::vector<int> match(rows, -1);
    for (size_t j = 0; j < cols; ++j)
        if (col_match[j] >= 0) match[static_cast<size_t>(col_match[j])] = static_cast<int>(j);
    return match;
}

}  // namespace taskvid

#pragma once

#include <vector>

namespace taskvid {

// Exact minimum-total-cost one-to-one assignment between rows and columns of
// a (possibly rectangular) cost matrix; min(rows, cols) pairs are formed.
// Returns, per row, the assigned column or -1.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost);

}  // namespace taskvid

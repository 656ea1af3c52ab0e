#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace occtool {

struct Assignment {
  std::vector<std::pair<int, int>> matches;  // (row, col), sorted by row
  std::vector<int> unmatched_rows;           // ascending
  std::vector<int> unmatched_cols;           // ascending
};

// Minimum-cost bipartite matching. Pairs with cost > gate are never matched.
// Maximizes the number of admissible matches first (an admissible match never
// costs more than leaving both sides unmatched), then minimizes total cost.
// Among equal-cost optima the result is canonical: each row, in order, takes
// the lowest admissible column consistent with optimality.
Assignment assign(const Eigen::MatrixXd& cost, double gate);

}  // namespace occtool

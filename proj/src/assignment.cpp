#include "occtool/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace occtool {

namespace {

// Price of leaving a row unmatched inside the solver. Kept small enough that
// mixed sums of kBig terms and real costs (<= ~2 each) stay well within the
// certification tolerance below.
constexpr double kBig = 1e6;
constexpr double kValueEps = 1e-7;   // tolerance when certifying equal-cost optima

// Classic O(n^2 m) Hungarian with potentials; requires rows <= cols.
// Returns the optimal value; row_to_col receives the matching.
double hungarian(const Eigen::MatrixXd& cost, std::vector<int>& row_to_col) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, std::numeric_limits<double>::infinity());
    std::vector<char> used(m + 1, false);
    do {
      used[j0] = true;
      int i0 = p[j0], j1 = -1;
      double delta = std::numeric_limits<double>::infinity();
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  row_to_col.assign(n, -1);
  double total = 0.0;
  for (int j = 1; j <= m; ++j) {
    if (p[j] > 0) {
      row_to_col[p[j] - 1] = j - 1;
      total += cost(p[j] - 1, j - 1);
    }
  }
  return total;
}

// Value of the sub-problem over the given row/column subsets of `adm`, where
// each row may also stay unmatched at price kBig. Optionally returns the
// matching (into positions of `cols`; -1 = unmatched).
double subproblem_value(const Eigen::MatrixXd& adm, const std::vector<int>& rows,
                        const std::vector<int>& cols, std::vector<int>* match_out = nullptr) {
  const int nr = static_cast<int>(rows.size());
  const int nc = static_cast<int>(cols.size());
  if (nr == 0) {
    if (match_out) match_out->clear();
    return 0.0;
  }
  Eigen::MatrixXd sub(nr, nc + nr);  // real columns, then one dummy per row
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < nc; ++j) sub(i, j) = adm(rows[i], cols[j]);
    for (int j = 0; j < nr; ++j) sub(i, nc + j) = kBig;
  }
  std::vector<int> m;
  double value = hungarian(sub, m);
  if (match_out) {
    match_out->assign(nr, -1);
    for (int i = 0; i < nr; ++i)
      if (m[i] >= 0 && m[i] < nc && sub(i, m[i]) < kBig) (*match_out)[i] = m[i];
  }
  return value;
}

}  // namespace

Assignment assign(const Eigen::MatrixXd& cost, double gate) {
  Assignment out;
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n == 0 || m == 0) {
    for (int i = 0; i < n; ++i) out.unmatched_rows.push_back(i);
    for (int j = 0; j < m; ++j) out.unmatched_cols.push_back(j);
    return out;
  }

  // Gated pairs are priced at kBig, the same as staying unmatched, so the
  // optimum maximizes admissible matches first and total cost second.
  Eigen::MatrixXd adm(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      adm(i, j) = (std::isfinite(cost(i, j)) && cost(i, j) <= gate) ? cost(i, j) : kBig;

  std::vector<int> all_rows(n), all_cols(m);
  for (int i = 0; i < n; ++i) all_rows[i] = i;
  for (int j = 0; j < m; ++j) all_cols[j] = j;

  std::vector<int> row_to_col;
  const double best = subproblem_value(adm, all_rows, all_cols, &row_to_col);

  // Canonicalize ties: each row, in order, takes the lowest admissible column
  // that still permits an optimal completion (unmatched otherwise). Skipped
  // for large matrices, where the plain solve is already deterministic.
  if (static_cast<long>(n) * m <= 2500) {
    std::vector<int> remaining_rows(all_rows.begin() + 1, all_rows.end());
    std::vector<int> remaining_cols = all_cols;
    double fixed_cost = 0.0;
    row_to_col.assign(n, -1);
    for (int i = 0; i < n; ++i) {
      int chosen = -1;
      for (size_t cj = 0; cj < remaining_cols.size(); ++cj) {
        const int j = remaining_cols[cj];
        if (adm(i, j) >= kBig) continue;
        std::vector<int> cols_left = remaining_cols;
        cols_left.erase(cols_left.begin() + static_cast<long>(cj));
        const double rest = subproblem_value(adm, remaining_rows, cols_left);
        if (fixed_cost + adm(i, j) + rest <= best + kValueEps) {
          chosen = j;
          break;
        }
      }
      if (chosen >= 0) {
        row_to_col[i] = chosen;
        fixed_cost += adm(i, chosen);
        remaining_cols.erase(std::find(remaining_cols.begin(), remaining_cols.end(), chosen));
      } else {
        fixed_cost += kBig;  // row stays unmatched
      }
      if (!remaining_rows.empty()) remaining_rows.erase(remaining_rows.begin());
    }
  } else {
    // Map subproblem column positions back to column ids (identity here).
    for (int i = 0; i < n; ++i)
      if (row_to_col[i] >= 0 && adm(i, row_to_col[i]) >= kBig) row_to_col[i] = -1;
  }

  std::vector<char> col_matched(m, false);
  for (int i = 0; i < n; ++i) {
    const int j = row_to_col[i];
    if (j >= 0) {
      out.matches.emplace_back(i, j);
      col_matched[j] = true;
    } else {
      out.unmatched_rows.push_back(i);
    }
  }
  for (int j = 0; j < m; ++j)
    if (!col_matched[j]) out.unmatched_cols.push_back(j);
  return out;
}

}  // namespace occtool

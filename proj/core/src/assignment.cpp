#include "stoa/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stoa {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Classic O(n^3) Hungarian algorithm with potentials on a square cost
// matrix (minimization). Returns row -> column.
std::vector<int> hungarian_min(const Mat& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] -
                           v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
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
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<size_t>(n), -1);
  for (int j = 1; j <= n; ++j) row_to_col[static_cast<size_t>(p[static_cast<size_t>(j)]) - 1] = j - 1;
  return row_to_col;
}

// Maximum total over a rectangular score matrix with cardinality
// min(rows, cols). Dummy rows/columns carry constant zero cost, so they
// soak up the excess without biasing which real cells are matched.
double max_total(const Mat& scores) {
  const int n = static_cast<int>(scores.rows());
  const int m = static_cast<int>(scores.cols());
  if (n == 0 || m == 0) return 0.0;
  const int s = std::max(n, m);
  const double top = scores.maxCoeff();
  Mat cost = Mat::Zero(s, s);
  cost.topLeftCorner(n, m) = (top - scores.array()).matrix();
  const std::vector<int> match = hungarian_min(cost);
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    if (match[static_cast<size_t>(i)] < m) total += scores(i, match[static_cast<size_t>(i)]);
  return total;
}

void check_scores(const Mat& scores) {
  if (!scores.allFinite()) throw NumericError("assignment: scores must be finite");
}

}  // namespace

Assignment solve_assignment(const Mat& scores) {
  check_scores(scores);
  const int n = static_cast<int>(scores.rows());
  const int m = static_cast<int>(scores.cols());
  const int k = std::min(n, m);
  Assignment out;
  if (k == 0) return out;

  const double opt = max_total(scores);
  const double tol = 1e-9 * std::max(1.0, std::abs(opt));

  // Fix pairs greedily in lexicographic order, accepting a candidate only
  // when an optimal completion of the remaining problem still exists.
  std::vector<char> col_used(static_cast<size_t>(m), 0);
  double fixed = 0.0;
  int next_row = 0;
  for (int step = 0; step < k; ++step) {
    const int remaining = k - step - 1;
    bool found = false;
    for (int r = next_row; r <= n - (k - step) && !found; ++r) {
      for (int c = 0; c < m && !found; ++c) {
        if (col_used[static_cast<size_t>(c)]) continue;
        // Remaining problem: rows after r, unused columns other than c.
        std::vector<int> cols_left;
        for (int j = 0; j < m; ++j)
          if (!col_used[static_cast<size_t>(j)] && j != c) cols_left.push_back(j);
        Mat sub(n - r - 1, static_cast<Eigen::Index>(cols_left.size()));
        for (int i = r + 1; i < n; ++i)
          for (size_t j = 0; j < cols_left.size(); ++j)
            sub(i - r - 1, static_cast<Eigen::Index>(j)) = scores(i, cols_left[j]);
        // The r loop bound keeps n-r-1 >= remaining, and when rows cannot be
        // skipped (n <= m) it forces r == step, so min(sub dims) == remaining.
        const double completion = remaining == 0 ? 0.0 : max_total(sub);
        if (fixed + scores(r, c) + completion >= opt - tol) {
          out.pairs.emplace_back(r, c);
          fixed += scores(r, c);
          col_used[static_cast<size_t>(c)] = 1;
          next_row = r + 1;
          found = true;
        }
      }
    }
    if (!found) throw NumericError("assignment: failed to reconstruct optimal matching");
  }
  double total = 0.0;
  for (const auto& pr : out.pairs) total += scores(pr.first, pr.second);
  out.total_score = total;
  return out;
}

namespace {

struct BruteState {
  const Mat* scores;
  int n, m, k;
  std::vector<std::pair<int, int>> current, best;
  std::vector<char> col_used;
  bool have_best{false};
  double best_total{-kInf};

  void recurse(int row) {
    if (static_cast<int>(current.size()) == k) {
      double total = 0.0;
      for (const auto& pr : current) total += (*scores)(pr.first, pr.second);
      if (!have_best || total > best_total) {
        have_best = true;
        best_total = total;
        best = current;
      }
      return;
    }
    if (row >= n || n - row < k - static_cast<int>(current.size())) return;
    // Pairs using this row come before any assignment that skips it, so
    // enumeration order is lexicographic and first-max wins ties.
    for (int c = 0; c < m; ++c) {
      if (col_used[static_cast<size_t>(c)]) continue;
      col_used[static_cast<size_t>(c)] = 1;
      current.emplace_back(row, c);
      recurse(row + 1);
      current.pop_back();
      col_used[static_cast<size_t>(c)] = 0;
    }
    if (n - row - 1 >= k - static_cast<int>(current.size())) recurse(row + 1);
  }
};

}  // namespace

Assignment brute_force_assignment(const Mat& scores) {
  check_scores(scores);
  const int n = static_cast<int>(scores.rows());
  const int m = static_cast<int>(scores.cols());
  const int k = std::min(n, m);
  if (k > 7) throw ConfigError("brute_force_assignment: refusing min(rows, cols) > 7");
  Assignment out;
  if (k == 0) return out;
  BruteState st;
  st.scores = &scores;
  st.n = n;
  st.m = m;
  st.k = k;
  st.col_used.assign(static_cast<size_t>(m), 0);
  st.recurse(0);
  out.pairs = st.best;
  double total = 0.0;
  for (const auto& pr : out.pairs) total += scores(pr.first, pr.second);
  out.total_score = total;
  return out;
}

}  // namespace stoa

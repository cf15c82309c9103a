#pragma once

#include <utility>
#include <vector>

#include "stoa/tensor.hpp"

namespace stoa {

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, col), sorted by row
  double total_score{0.0};                 // summed in row order
};

// Maximum-score rectangular assignment with cardinality min(rows, cols).
// Among maximizing assignments, the returned pair list is the
// lexicographically smallest (compared as the row-sorted (row, col)
// sequence). Throws NumericError on non-finite scores.
Assignment solve_assignment(const Mat& scores);

// Exhaustive oracle with the same tie-break; refuses min(rows, cols) > 7.
Assignment brute_force_assignment(const Mat& scores);

}  // namespace stoa

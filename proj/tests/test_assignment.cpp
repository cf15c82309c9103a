#include <doctest.h>

#include <limits>

#include "helpers.hpp"
#include "stoa/assignment.hpp"

using namespace stoa;
using stoa::testing::random_mat;

TEST_CASE("solver equals brute force on random rectangular matrices") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + rng.uniform_int(6);
    const int m = 1 + rng.uniform_int(6);
    Mat scores(n, m);
    const bool tie_heavy = trial % 3 == 0;
    for (Eigen::Index i = 0; i < scores.size(); ++i)
      scores.data()[i] = tie_heavy ? static_cast<double>(rng.uniform_int(3)) : rng.uniform(-2, 2);
    const Assignment fast = solve_assignment(scores);
    const Assignment slow = brute_force_assignment(scores);
    CHECK(fast.pairs == slow.pairs);
    CHECK(fast.total_score == slow.total_score);  // identical pair order => identical sum
  }
}

TEST_CASE("ties resolve to the lexicographically smallest pairing") {
  Mat scores = Mat::Ones(3, 3);  // every assignment ties
  const Assignment a = solve_assignment(scores);
  CHECK(a.pairs == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}, {2, 2}});
  Mat skewed(2, 3);
  skewed << 1, 1, 0,
            1, 1, 0;
  const Assignment b = solve_assignment(skewed);
  CHECK(b.pairs == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}});
}

TEST_CASE("rectangular cases use cardinality min(n, m)") {
  Mat wide(2, 4);
  wide << 0, 0, 5, 0,
          0, 0, 0, 7;
  const Assignment a = solve_assignment(wide);
  CHECK(a.pairs == std::vector<std::pair<int, int>>{{0, 2}, {1, 3}});
  CHECK(a.total_score == 12.0);

  Mat tall(4, 2);
  tall << 0, 0,
          9, 0,
          0, 0,
          0, 8;
  const Assignment b = solve_assignment(tall);
  CHECK(b.pairs == std::vector<std::pair<int, int>>{{1, 0}, {3, 1}});
  CHECK(b.total_score == 17.0);
}

TEST_CASE("row skipping picks the lexicographically smallest optimal subset") {
  // rows 0 and 2 tie as optimal choices; row 0 must win
  Mat tall(3, 1);
  tall << 4, 1, 4;
  const Assignment a = solve_assignment(tall);
  CHECK(a.pairs == std::vector<std::pair<int, int>>{{0, 0}});
}

TEST_CASE("negative scores are handled") {
  Mat scores(2, 2);
  scores << -5, -1,
            -2, -3;
  const Assignment a = solve_assignment(scores);
  CHECK(a.pairs == std::vector<std::pair<int, int>>{{0, 1}, {1, 0}});
  CHECK(a.total_score == -3.0);
}

TEST_CASE("degenerate and invalid inputs") {
  CHECK(solve_assignment(Mat(0, 3)).pairs.empty());
  CHECK(solve_assignment(Mat(3, 0)).total_score == 0.0);
  Mat bad = Mat::Ones(2, 2);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(solve_assignment(bad), NumericError);
  bad(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(solve_assignment(bad), NumericError);
  CHECK_THROWS_AS(brute_force_assignment(Mat::Ones(8, 8)), ConfigError);
}

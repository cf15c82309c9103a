#include <doctest.h>

#include <algorithm>
#include <map>

#include "helpers.hpp"

using namespace stoa;
using stoa::testing::random_mat;
using stoa::testing::tiny_model_config;

namespace {

// Independent bilinear oracle: pools a feature grid over a box by directly
// interpolating at the two-by-two cell centers.
Mat roi_oracle(const Mat& grid_features, const std::array<double, 4>& box, int H, int W) {
  auto clampd = [](double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); };
  const double x1 = clampd(box[0], 0.0, 1.0), y1 = clampd(box[1], 0.0, 1.0);
  const double x2 = clampd(box[2], 0.0, 1.0), y2 = clampd(box[3], 0.0, 1.0);
  Mat out = Mat::Zero(4, grid_features.cols());
  int cell = 0;
  for (int ci = 0; ci < 2; ++ci) {
    for (int cj = 0; cj < 2; ++cj, ++cell) {
      const double sy = y1 + (ci + 0.5) * (y2 - y1) / 2.0;
      const double sx = x1 + (cj + 0.5) * (x2 - x1) / 2.0;
      const double u = clampd(sx * W - 0.5, 0.0, W - 1.0);
      const double v = clampd(sy * H - 0.5, 0.0, H - 1.0);
      const int u0 = static_cast<int>(u), v0 = static_cast<int>(v);
      const int u1 = std::min(u0 + 1, W - 1), v1 = std::min(v0 + 1, H - 1);
      const double du = u - u0, dv = v - v0;
      out.row(cell) = (1 - du) * (1 - dv) * grid_features.row(v0 * W + u0) +
                      du * (1 - dv) * grid_features.row(v0 * W + u1) +
                      (1 - du) * dv * grid_features.row(v1 * W + u0) +
                      du * dv * grid_features.row(v1 * W + u1);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("roi sampling matches the bilinear oracle") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int H = 2 + rng.uniform_int(4);
    const int W = 2 + rng.uniform_int(4);
    const Mat grid = random_mat(H * W, 5, rng);
    double x1 = rng.uniform(), x2 = rng.uniform();
    double y1 = rng.uniform(), y2 = rng.uniform();
    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);
    const std::array<double, 4> box = {x1, y1, x2, y2};
    const Mat pooled = roi_sample_weights(box, H, W) * grid;
    const Mat expected = roi_oracle(grid, box, H, W);
    CHECK((pooled - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("roi sampling weights are a partition of unity") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::array<double, 4> box = {rng.uniform() * 0.5, rng.uniform() * 0.5,
                                 0.5 + rng.uniform() * 0.5, 0.5 + rng.uniform() * 0.5};
    const Mat w = roi_sample_weights(box, 3, 3);
    for (int r = 0; r < 4; ++r) CHECK(w.row(r).sum() == doctest::Approx(1.0));
    CHECK(w.minCoeff() >= 0.0);
  }
}

TEST_CASE("degenerate boxes sample a single point") {
  const std::array<double, 4> box = {0.5, 0.5, 0.5, 0.5};
  const Mat w = roi_sample_weights(box, 2, 2);
  for (int r = 1; r < 4; ++r) CHECK((w.row(r) - w.row(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS((void)roi_sample_weights({0.7, 0.1, 0.2, 0.5}, 2, 2), ShapeError);
}

TEST_CASE("trajectory selection ranks classes by summed confidence") {
  // slots: T=2, K=3
  const std::vector<int> classes = {5, 7, 5, 7, 9, -1};
  const std::vector<double> conf = {0.6, 0.9, 0.7, 0.2, 0.95, 0.99};
  const std::vector<bool> valid = {true, true, true, true, true, false};
  const TrajectorySelection sel = select_trajectories(classes, conf, valid, 2, 3, 2);
  // sums: class 5 -> 1.3, class 7 -> 1.1, class 9 -> 0.95 (invalid slot ignored)
  REQUIRE(sel.present == 2);
  CHECK(sel.classes == std::vector<int>{5, 7});
  CHECK(sel.masks(0, 0));
  CHECK(sel.masks(0, 2));
  CHECK(!sel.masks(0, 1));
  CHECK(sel.masks(1, 1));
  CHECK(sel.masks(1, 3));
  CHECK(!sel.masks(1, 5));
}

TEST_CASE("trajectory selection breaks ties toward the smaller class id") {
  const std::vector<int> classes = {4, 2};
  const std::vector<double> conf = {0.5, 0.5};
  const std::vector<bool> valid = {true, true};
  const TrajectorySelection sel = select_trajectories(classes, conf, valid, 1, 2, 1);
  REQUIRE(sel.present == 1);
  CHECK(sel.classes[0] == 2);
}

TEST_CASE("selection matches a brute-force oracle on random inputs") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int T = 1 + rng.uniform_int(3), K = 1 + rng.uniform_int(3);
    const int N = 1 + rng.uniform_int(3);
    std::vector<int> classes(static_cast<size_t>(T) * K);
    std::vector<double> conf(classes.size());
    std::vector<bool> valid(classes.size());
    for (size_t i = 0; i < classes.size(); ++i) {
      classes[i] = rng.uniform_int(5);
      conf[i] = rng.uniform();
      valid[i] = rng.uniform() < 0.8;
    }
    // oracle: summed confidence per class, sort by (-sum, id)
    std::map<int, double> sums;
    for (size_t i = 0; i < classes.size(); ++i)
      if (valid[i]) sums[classes[i]] += conf[i];
    std::vector<std::pair<double, int>> order;
    for (auto& [c, s] : sums) order.emplace_back(-s, c);
    std::sort(order.begin(), order.end());
    const TrajectorySelection sel = select_trajectories(classes, conf, valid, T, K, N);
    REQUIRE(sel.present == std::min<int>(N, static_cast<int>(order.size())));
    for (int n = 0; n < sel.present; ++n)
      CHECK(sel.classes[static_cast<size_t>(n)] == order[static_cast<size_t>(n)].second);
  }
}

TEST_CASE("trajectory embeddings ignore slots outside the class mask") {
  ModelConfig mc = tiny_model_config();
  mc.vocab_size = Vocab::builtin().size();
  Rng rng(4);
  ParamStore ps;
  TrajectoryModule mod(ps, mc, rng);

  const int slots = mc.T * mc.K;
  ObjectFeatures of;
  of.T = mc.T;
  of.K = mc.K;
  of.class_ids = {3, 8, 3, 8};
  of.confidences = {0.9, 0.8, 0.7, 0.6};
  of.validity = {true, true, true, true};
  of.boxes = Mat::Zero(slots, 4);
  const Mat base = random_mat(slots, mc.h, rng);
  of.flatten = constant(base);
  const TrajectorySet t1 = mod.encode_trajectories(of, 2);
  REQUIRE(t1.present == 2);
  // class 3 occupies slots 0 and 2; perturb the other rows wildly
  Mat perturbed = base;
  perturbed.row(1).setConstant(100.0);
  perturbed.row(3).setConstant(-50.0);
  ObjectFeatures of2 = of;
  of2.flatten = constant(perturbed);
  const TrajectorySet t2 = mod.encode_trajectories(of2, 2);
  CHECK((t1.o.value().row(0) - t2.o.value().row(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((t1.o.value().row(1) - t2.o.value().row(1)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("roi_align_pool flags invalid slots and keeps metadata") {
  ModelConfig mc = tiny_model_config();
  mc.vocab_size = Vocab::builtin().size();
  Rng rng(5);
  ParamStore ps;
  TrajectoryModule mod(ps, mc, rng);
  const int hw = (mc.S / mc.patch) * (mc.S / mc.patch);
  std::vector<Tensor> z;
  for (int t = 0; t < mc.T; ++t) z.push_back(constant(random_mat(hw, mc.h, rng)));
  std::vector<std::vector<Detection>> dets(static_cast<size_t>(mc.T));
  Detection d;
  d.box = {0.1, 0.2, 0.6, 0.7};
  d.class_id = 11;
  d.confidence = 0.8;
  dets[0].push_back(d);  // frame 0: one detection, frame 1: none
  const ObjectFeatures of = mod.roi_align_pool(z, dets);
  CHECK(of.validity == std::vector<bool>{true, false, false, false});
  CHECK(of.class_ids[0] == 11);
  CHECK(of.class_ids[1] == -1);
  CHECK(of.flatten.rows() == mc.T * mc.K);
  // invalid slots carry exactly zero features
  CHECK(of.flatten.value().row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(of.flatten.value().row(0).cwiseAbs().maxCoeff() > 0.0);
}

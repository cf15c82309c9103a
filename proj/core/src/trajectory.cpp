#include "stoa/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace stoa {

Mat roi_sample_weights(const std::array<double, 4>& box, int H, int W) {
  double x1 = std::clamp(box[0], 0.0, 1.0);
  double y1 = std::clamp(box[1], 0.0, 1.0);
  double x2 = std::clamp(box[2], 0.0, 1.0);
  double y2 = std::clamp(box[3], 0.0, 1.0);
  if (x2 < x1 || y2 < y1) throw ShapeError("roi_sample_weights: inverted box");
  Mat weights = Mat::Zero(4, static_cast<Eigen::Index>(H) * W);
  for (int cell = 0; cell < 4; ++cell) {
    const int ci = cell / 2, cj = cell % 2;
    const double sx = x1 + (cj + 0.5) * (x2 - x1) / 2.0;
    const double sy = y1 + (ci + 0.5) * (y2 - y1) / 2.0;
    // align-corners false: continuous grid coordinate of a cell center.
    double u = sx * W - 0.5;
    double v = sy * H - 0.5;
    int u0, u1, v0, v1;
    double du, dv;
    if (u <= 0.0) { u0 = u1 = 0; du = 0.0; }
    else if (u >= W - 1) { u0 = u1 = W - 1; du = 0.0; }
    else { u0 = static_cast<int>(std::floor(u)); u1 = u0 + 1; du = u - u0; }
    if (v <= 0.0) { v0 = v1 = 0; dv = 0.0; }
    else if (v >= H - 1) { v0 = v1 = H - 1; dv = 0.0; }
    else { v0 = static_cast<int>(std::floor(v)); v1 = v0 + 1; dv = v - v0; }
    weights(cell, v0 * W + u0) += (1.0 - du) * (1.0 - dv);
    weights(cell, v0 * W + u1) += du * (1.0 - dv);
    weights(cell, v1 * W + u0) += (1.0 - du) * dv;
    weights(cell, v1 * W + u1) += du * dv;
  }
  return weights;
}

TrajectorySelection select_trajectories(const std::vector<int>& class_ids,
                                        const std::vector<double>& confidences,
                                        const std::vector<bool>& validity, int T, int K, int N) {
  if (N < 1) throw ConfigError("select_trajectories: N must be >= 1");
  const size_t slots = static_cast<size_t>(T) * K;
  if (class_ids.size() != slots || confidences.size() != slots || validity.size() != slots)
    throw ShapeError("select_trajectories: slot arrays must have T*K entries");
  std::map<int, double> summed;  // class id -> summed confidence (ordered by id)
  for (size_t i = 0; i < slots; ++i)
    if (validity[i]) summed[class_ids[i]] += confidences[i];
  std::vector<std::pair<int, double>> ranked(summed.begin(), summed.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  TrajectorySelection sel;
  sel.requested = N;
  sel.present = std::min<int>(N, static_cast<int>(ranked.size()));
  sel.masks = BMask::Constant(N, static_cast<Eigen::Index>(slots), false);
  for (int n = 0; n < sel.present; ++n) {
    const int c = ranked[static_cast<size_t>(n)].first;
    sel.classes.push_back(c);
    for (size_t i = 0; i < slots; ++i)
      if (validity[i] && class_ids[i] == c) sel.masks(n, static_cast<Eigen::Index>(i)) = true;
  }
  return sel;
}

TrajectoryModule::TrajectoryModule(ParamStore& ps, const ModelConfig& cfg, Rng& rng)
    : cfg_(cfg),
      mlp_in_(ps, "traj.mlp_in", cfg.h, cfg.h, rng),
      mlp_out_(ps, "traj.mlp_out", cfg.h, cfg.h, rng),
      box_proj_(ps, "traj.box_proj", 4, cfg.h, rng),
      enc_(ps, "traj.enc",
           TransformerConfig{cfg.traj_layers, cfg.heads, cfg.h, cfg.mlp_ratio, cfg.dropout}, rng),
      proj_(ps, "traj.proj", cfg.h, cfg.d, rng) {
  pos_frame_ = ps.create("traj.pos_frame", cfg.T, cfg.h, 0.02, rng);
  cls_token_ = ps.create("traj.cls", 1, cfg.h, 0.02, rng);
}

ObjectFeatures TrajectoryModule::roi_align_pool(
    const std::vector<Tensor>& z_tap, const std::vector<std::vector<Detection>>& detections) const {
  const int T = static_cast<int>(z_tap.size());
  if (static_cast<int>(detections.size()) != T)
    throw ShapeError("roi_align_pool: detections/frames length mismatch");
  const int K = cfg_.K;
  const int hw = static_cast<int>(z_tap.empty() ? 0 : z_tap[0].rows());
  const int W = static_cast<int>(std::lround(std::sqrt(static_cast<double>(hw))));
  if (W * W != hw) throw ShapeError("roi_align_pool: patch grid is not square");

  ObjectFeatures of;
  of.T = T;
  of.K = K;
  of.boxes = Mat::Zero(static_cast<Eigen::Index>(T) * K, 4);
  of.class_ids.assign(static_cast<size_t>(T) * K, -1);
  of.confidences.assign(static_cast<size_t>(T) * K, 0.0);
  of.validity.assign(static_cast<size_t>(T) * K, false);

  std::vector<Tensor> rows;
  rows.reserve(static_cast<size_t>(T) * K);
  Tensor zero_row = constant(Mat::Zero(1, cfg_.h));
  for (int t = 0; t < T; ++t) {
    const auto& dets = detections[static_cast<size_t>(t)];
    if (static_cast<int>(dets.size()) > K)
      throw ShapeError("roi_align_pool: more detections than K slots");
    for (int k = 0; k < K; ++k) {
      const size_t slot = static_cast<size_t>(t) * K + k;
      if (k >= static_cast<int>(dets.size())) {
        rows.push_back(zero_row);
        continue;
      }
      const Detection& det = dets[static_cast<size_t>(k)];
      if (det.box[0] > det.box[2] || det.box[1] > det.box[3])
        throw ShapeError("roi_align_pool: box must satisfy x1<=x2, y1<=y2");
      const Mat weights = roi_sample_weights(det.box, W, W);
      Tensor samples = premul_const(weights, z_tap[static_cast<size_t>(t)]);  // 4 x h
      Tensor pooled = colwise_max_rows(samples);                              // 1 x h
      Tensor feat = mlp_out_(gelu(mlp_in_(pooled)));
      // spatial-temporal positional embedding: frame index + box coordinates
      Mat box_row(1, 4);
      box_row << det.box[0], det.box[1], det.box[2], det.box[3];
      feat = add(feat, add(slice_rows(pos_frame_, t, 1), box_proj_(constant(box_row))));
      rows.push_back(feat);
      of.boxes.row(static_cast<Eigen::Index>(slot)) << det.box[0], det.box[1], det.box[2],
          det.box[3];
      of.class_ids[slot] = det.class_id;
      of.confidences[slot] = det.confidence;
      of.validity[slot] = true;
    }
  }
  of.flatten = concat_rows(rows);
  return of;
}

TrajectorySet TrajectoryModule::encode_trajectories(const ObjectFeatures& of, int N) const {
  TrajectorySelection sel =
      select_trajectories(of.class_ids, of.confidences, of.validity, of.T, of.K, N);
  TrajectorySet set;
  set.masks = sel.masks;
  set.present = sel.present;
  set.requested = sel.requested;
  set.class_of_trajectory = sel.classes;
  if (sel.present == 0) return set;

  std::vector<Tensor> out_rows;
  for (int n = 0; n < sel.present; ++n) {
    std::vector<int> visible;
    for (Eigen::Index i = 0; i < sel.masks.cols(); ++i)
      if (sel.masks(n, i)) visible.push_back(static_cast<int>(i));
    // [CLS] plus the class-visible slots; everything else is masked out,
    // which is equivalent to gathering just the visible rows.
    Tensor seq = concat_rows({cls_token_, gather_rows(of.flatten, visible)});
    Tensor encoded = enc_(seq, nullptr);
    out_rows.push_back(proj_(slice_rows(encoded, 0, 1)));
  }
  set.o = concat_rows(out_rows);
  return set;
}

}  // namespace stoa

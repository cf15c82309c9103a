#include "stoa/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stoa {

Tensor vtc_loss(const Tensor& v, const Tensor& t, const Tensor& logit_scale) {
  if (v.rows() != t.rows() || v.cols() != t.cols())
    throw ShapeError("vtc_loss: v and t must have matching shapes");
  if (v.rows() < 2) throw ShapeError("vtc_loss: need at least two pairs");
  Tensor vn = l2_normalize_rows(v);
  Tensor tn = l2_normalize_rows(t);
  Tensor sim = mul_scalar_tensor(matmul(vn, transpose(tn)), logit_scale);
  std::vector<int> diag(static_cast<size_t>(v.rows()));
  for (size_t i = 0; i < diag.size(); ++i) diag[i] = static_cast<int>(i);
  Tensor loss_v2t = cross_entropy_rows(sim, diag);
  Tensor loss_t2v = cross_entropy_rows(transpose(sim), diag);
  return scale(add(loss_v2t, loss_t2v), 0.5);
}

Mat cosine_similarity_values(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) throw ShapeError("cosine_similarity: width mismatch");
  Mat an = a, bn = b;
  for (Eigen::Index i = 0; i < an.rows(); ++i) {
    const double n = an.row(i).norm();
    if (n == 0.0) throw NumericError("cosine_similarity: zero-norm row");
    an.row(i) /= n;
  }
  for (Eigen::Index i = 0; i < bn.rows(); ++i) {
    const double n = bn.row(i).norm();
    if (n == 0.0) throw NumericError("cosine_similarity: zero-norm row");
    bn.row(i) /= n;
  }
  return an * bn.transpose();
}

HardNegatives mine_hard_negatives(const Mat& sim, Rng& rng) {
  const int B = static_cast<int>(sim.rows());
  if (sim.cols() != B || B < 2) throw ShapeError("mine_hard_negatives: need square sim, B >= 2");
  if (!sim.allFinite()) throw NumericError("mine_hard_negatives: non-finite similarities");
  HardNegatives out;
  auto sample = [&](auto value_at, int self) {
    // inverse-CDF sample over softmaxed off-diagonal entries
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < B; ++j)
      if (j != self) mx = std::max(mx, value_at(j));
    std::vector<double> w(static_cast<size_t>(B), 0.0);
    double z = 0.0;
    for (int j = 0; j < B; ++j) {
      if (j == self) continue;
      w[static_cast<size_t>(j)] = std::exp(value_at(j) - mx);
      z += w[static_cast<size_t>(j)];
    }
    const double u = rng.uniform() * z;
    double acc = 0.0;
    for (int j = 0; j < B; ++j) {
      if (j == self) continue;
      acc += w[static_cast<size_t>(j)];
      if (u < acc) return j;
    }
    return self == B - 1 ? B - 2 : B - 1;  // guard against rounding at u ~ z
  };
  for (int i = 0; i < B; ++i)
    out.neg_text_for_video.push_back(sample([&](int j) { return sim(i, j); }, i));
  for (int j = 0; j < B; ++j)
    out.neg_video_for_text.push_back(sample([&](int i) { return sim(i, j); }, j));
  return out;
}

MaskedText apply_mlm_mask(const std::vector<int>& tokens, const std::vector<PosTag>& tags,
                          const Vocab& vocab, Rng& rng) {
  if (tokens.size() != tags.size()) throw ShapeError("apply_mlm_mask: tokens/tags mismatch");
  std::vector<int> candidates;
  for (size_t i = 0; i < tokens.size(); ++i)
    if (tags[i] != PosTag::Special) candidates.push_back(static_cast<int>(i));
  MaskedText out;
  out.tokens = tokens;
  out.targets = tokens;
  if (candidates.empty()) return out;

  std::vector<int> picked;
  for (int pos : candidates)
    if (rng.uniform() < 0.15) picked.push_back(pos);
  if (picked.empty())
    picked.push_back(candidates[static_cast<size_t>(
        rng.uniform_int(static_cast<int>(candidates.size())))]);

  std::vector<int> word_ids;
  for (int id = 0; id < vocab.size(); ++id)
    if (!vocab.is_special(id)) word_ids.push_back(id);
  for (int pos : picked) {
    const double roll = rng.uniform();
    if (roll < 0.8) {
      out.tokens[static_cast<size_t>(pos)] = vocab.mask;
    } else if (roll < 0.9) {
      out.tokens[static_cast<size_t>(pos)] =
          word_ids[static_cast<size_t>(rng.uniform_int(static_cast<int>(word_ids.size())))];
    }  // else keep the original token
    out.positions.push_back(pos);
  }
  out.valid = true;
  return out;
}

MaskedText apply_plm_mask(const std::vector<int>& tokens, const std::vector<PosTag>& tags,
                          const Vocab& vocab, Rng& rng) {
  if (tokens.size() != tags.size()) throw ShapeError("apply_plm_mask: tokens/tags mismatch");
  MaskedText out;
  out.tokens = tokens;
  out.targets = tokens;
  // content spans positions 1 .. sep-1
  int sep = -1;
  for (size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i] == vocab.sep) sep = static_cast<int>(i);
  if (sep < 0) throw ShapeError("apply_plm_mask: missing [SEP]");
  const int content = sep - 1;
  if (content < 2) return out;  // need a visible prefix and a masked suffix
  const int suffix = 1 + rng.uniform_int(content - 1);
  for (int pos = sep - suffix; pos < sep; ++pos) {
    out.tokens[static_cast<size_t>(pos)] = vocab.mask;
    out.positions.push_back(pos);
  }
  out.valid = true;
  return out;
}

namespace {

AlignmentLoss match_and_mse(const Tensor& features, int rows, const TextFeatures& txt,
                            const std::vector<int>& text_indices) {
  AlignmentLoss out;
  if (rows == 0 || text_indices.empty()) return out;
  Mat text_side(static_cast<Eigen::Index>(text_indices.size()), txt.t.cols());
  for (size_t i = 0; i < text_indices.size(); ++i)
    text_side.row(static_cast<Eigen::Index>(i)) = txt.t.value().row(text_indices[i]);
  const Mat sim = cosine_similarity_values(features.value(), text_side);
  // row-wise softmax turns similarities into a bounded score matrix
  Mat scores(sim.rows(), sim.cols());
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    const Eigen::ArrayXd e = (sim.row(i).array() - sim.row(i).maxCoeff()).exp();
    scores.row(i) = (e / e.sum()).matrix();
  }
  out.match = solve_assignment(scores);
  std::vector<int> f_rows, t_rows;
  for (const auto& pr : out.match.pairs) {
    f_rows.push_back(pr.first);
    t_rows.push_back(text_indices[static_cast<size_t>(pr.second)]);
  }
  Tensor matched_f = l2_normalize_rows(gather_rows(features, f_rows));
  // text side is a constant: gradients flow into the trajectories/actions only
  Tensor matched_t = l2_normalize_rows(constant(
      [&] {
        Mat m(static_cast<Eigen::Index>(t_rows.size()), txt.t.cols());
        for (size_t i = 0; i < t_rows.size(); ++i)
          m.row(static_cast<Eigen::Index>(i)) = txt.t.value().row(t_rows[i]);
        return m;
      }()));
  out.loss = mse(matched_f, matched_t);
  out.active = true;
  return out;
}

}  // namespace

AlignmentLoss ota_loss(const TrajectorySet& trajs, const TextFeatures& txt) {
  std::vector<int> anchors;
  for (size_t i = 0; i < txt.tags.size(); ++i)
    if (txt.tags[i] == PosTag::Noun) anchors.push_back(static_cast<int>(i));
  anchors.push_back(txt.index_cls);  // "no object" anchor
  return match_and_mse(trajs.o, trajs.present, txt, anchors);
}

AlignmentLoss asp_loss(const ActionFeatureSet& acts, const TextFeatures& txt) {
  std::vector<int> anchors;
  std::vector<int> seen;
  for (size_t i = 0; i < txt.tags.size(); ++i) {
    if (txt.tags[i] != PosTag::Verb) continue;
    if (std::find(seen.begin(), seen.end(), txt.tokens[i]) != seen.end()) continue;
    seen.push_back(txt.tokens[i]);
    anchors.push_back(static_cast<int>(i));
  }
  anchors.push_back(txt.index_cls);  // empty-action anchor
  return match_and_mse(acts.x, static_cast<int>(acts.x.rows()), txt, anchors);
}

}  // namespace stoa

#pragma once

#include "stoa/action.hpp"
#include "stoa/assignment.hpp"
#include "stoa/vocab.hpp"

namespace stoa {

// Symmetric InfoNCE over a batch of paired video/text embeddings (rows of v
// and t pair up). logit_scale is a 1x1 tensor multiplying the cosine
// similarities (typically exp of a learned log-scale).
Tensor vtc_loss(const Tensor& v, const Tensor& t, const Tensor& logit_scale);

// Row-normalized cosine similarity of two row-feature matrices (values only).
Mat cosine_similarity_values(const Mat& a, const Mat& b);

struct HardNegatives {
  std::vector<int> neg_text_for_video;  // per row i: a j != i
  std::vector<int> neg_video_for_text;  // per col j: an i != j
};

// Samples one hard negative per element, with probability proportional to
// the softmax of the off-diagonal similarities. sim must be square, B >= 2.
HardNegatives mine_hard_negatives(const Mat& sim, Rng& rng);

struct MaskedText {
  std::vector<int> tokens;      // input with masking applied
  std::vector<int> targets;     // original tokens
  std::vector<int> positions;   // positions to predict
  bool valid{false};
};

// BERT-style masking: each non-special token selected with p = 0.15 (at
// least one is always selected); 80% -> [MASK], 10% -> random word, 10% kept.
MaskedText apply_mlm_mask(const std::vector<int>& tokens, const std::vector<PosTag>& tags,
                          const Vocab& vocab, Rng& rng);

// Prefix-LM masking: a random non-empty suffix of the content tokens (at
// least one content token stays visible) is replaced by [MASK]. Invalid when
// there are fewer than two content tokens.
MaskedText apply_plm_mask(const std::vector<int>& tokens, const std::vector<PosTag>& tags,
                          const Vocab& vocab, Rng& rng);

struct AlignmentLoss {
  Tensor loss;      // 1x1, defined only when active
  Assignment match;
  bool active{false};
};

// Object-trajectory alignment: optimal matching between trajectory features
// and noun tokens plus the text [CLS] (the "no object" anchor); MSE between
// normalized matched rows with the text side treated as constant.
AlignmentLoss ota_loss(const TrajectorySet& trajs, const TextFeatures& txt);

// Action-set prediction: same matching between action features and the
// deduplicated verb tokens plus the text [CLS] (the empty-action anchor).
AlignmentLoss asp_loss(const ActionFeatureSet& acts, const TextFeatures& txt);

}  // namespace stoa

#pragma once

#include <iosfwd>

#include "stoa/model.hpp"

namespace stoa {

// Adam with bias correction; state order follows parameter creation order.
class Adam {
 public:
  Adam(ParamStore& params, double beta1, double beta2, double eps = 1e-8);
  void step(double lr);  // applies grads, then the caller zeroes them

 private:
  ParamStore& params_;
  double beta1_, beta2_, eps_;
  long t_{0};
  std::vector<Mat> m_, v_;
};

// Learning rate at a given step (cosine decays to zero over cfg.steps).
double lr_at(const RunConfig& cfg, int step);

struct LossBundle {
  double vtc{0}, vtm{0}, mlm{0}, plm{0}, ota{0}, asp{0}, total{0};
};

struct StepResult {
  Tensor total;  // 1x1 graph root (undefined when no loss is enabled)
  LossBundle values;
};

// Builds the full multi-task loss for one batch. rng drives masking and
// hard-negative sampling.
StepResult compute_losses(const StoaModel& model, const std::vector<const SampleRecord*>& batch,
                          const RunConfig& cfg, Rng& rng);

struct PretrainResult {
  std::filesystem::path final_checkpoint;
  LossBundle last;
  int steps_run{0};
};

// Full training loop: loads corpora, trains, writes metrics and checkpoints.
PretrainResult pretrain(const RunConfig& cfg, std::ostream* log = nullptr);
PretrainResult pretrain(const RunConfig& cfg, StoaModel& model,
                        const std::vector<SampleRecord>& train, std::ostream* log = nullptr);

struct RetrievalMetrics {
  double v2t_r1{0}, v2t_r5{0}, v2t_r10{0};
  double t2v_r1{0}, t2v_r5{0}, t2v_r10{0};
};

// Two-stage retrieval: cosine ranking, then the top `rerank_depth` candidates
// reranked by the matching head's positive probability.
RetrievalMetrics retrieval_probe(const StoaModel& model, const std::vector<SampleRecord>& samples,
                                 int rerank_depth);

struct CaptionMetrics {
  double token_accuracy{0};
  double exact_match{0};
};

// Greedy left-to-right decoding through the causal fusion path. Optional
// adaptation steps fine-tune on the decode layout (one masked next token)
// before measuring.
CaptionMetrics caption_probe(StoaModel& model, const std::vector<SampleRecord>& samples,
                             int adapt_steps, double adapt_lr, std::uint64_t seed);

struct QaItem {
  int sample{0};
  std::vector<int> tokens;  // [CLS] question ... [ANS] [SEP]
  std::vector<PosTag> tags;
  int answer{0};  // vocabulary id
};

// Template questions derived from captions; only unambiguous ones are kept
// (e.g. "what color is the circle" needs exactly one circle in the scene).
std::vector<QaItem> build_qa_items(const std::vector<SampleRecord>& samples, const Vocab& vocab);

struct QaMetrics {
  double accuracy{0};
  int count{0};
};

// Answer prediction at the [ANS] position. Optional adaptation steps
// fine-tune on the question format before measuring.
QaMetrics qa_probe(StoaModel& model, const std::vector<SampleRecord>& samples, int adapt_steps,
                   double adapt_lr, std::uint64_t seed);

struct AblationResult {
  std::string name;
  std::uint64_t seed;
  RetrievalMetrics retrieval;
  double mean_r1{0};  // mean of both retrieval directions' R@1
};

// Grid file: `base=PATH` (run config), `seeds=a,b,c`, then one `cell
// name=<id> [key=value ...]` line per variant. Trains every cell x seed and
// evaluates retrieval on the eval corpus.
std::vector<AblationResult> run_ablation(const std::filesystem::path& grid_path,
                                         std::ostream& log);

}  // namespace stoa

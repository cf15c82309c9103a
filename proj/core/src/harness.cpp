#include "stoa/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace stoa {

Adam::Adam(ParamStore& params, double beta1, double beta2, double eps)
    : params_(params), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& entry : params.entries()) {
    m_.push_back(Mat::Zero(entry.second.rows(), entry.second.cols()));
    v_.push_back(Mat::Zero(entry.second.rows(), entry.second.cols()));
  }
}

void Adam::step(double lr) {
  if (m_.size() != params_.entries().size())
    throw ShapeError("Adam: parameter set changed after construction");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < m_.size(); ++i) {
    Tensor p = params_.entries()[i].second;
    const Mat& g = p.grad();
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    p.raw_value().array() -=
        lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
  }
}

double lr_at(const RunConfig& cfg, int step) {
  if (cfg.schedule == "constant") return cfg.lr;
  const double frac = cfg.steps <= 1 ? 0.0 : static_cast<double>(step) / (cfg.steps - 1);
  return cfg.lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac));
}

namespace {

double take_component(const char* name, const Tensor& t) {
  const double v = t.scalar();
  if (!std::isfinite(v)) throw NumericError(std::string(name) + " loss is not finite");
  return v;
}

std::vector<int> targets_at_positions(const MaskedText& m) {
  std::vector<int> out;
  for (int pos : m.positions) out.push_back(m.targets[static_cast<size_t>(pos)]);
  return out;
}

Tensor mean_of(const std::vector<Tensor>& terms) {
  Tensor sum = terms[0];
  for (size_t i = 1; i < terms.size(); ++i) sum = add(sum, terms[i]);
  return scale(sum, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

StepResult compute_losses(const StoaModel& model, const std::vector<const SampleRecord*>& batch,
                          const RunConfig& cfg, Rng& rng) {
  const int B = static_cast<int>(batch.size());
  if (B < 2) throw ShapeError("compute_losses: need a batch of at least two samples");
  std::vector<VideoSideEncoding> vs;
  std::vector<TextFeatures> txt;
  vs.reserve(static_cast<size_t>(B));
  txt.reserve(static_cast<size_t>(B));
  for (const SampleRecord* rec : batch) {
    vs.push_back(model.encode_video_side(*rec));
    txt.push_back(model.encode_text(rec->caption, rec->tags));
  }

  StepResult out;
  std::vector<Tensor> parts;

  Tensor v_rows, t_rows;
  if (cfg.loss_vtc || cfg.loss_vtm) {
    std::vector<Tensor> vr, tr;
    for (int i = 0; i < B; ++i) {
      vr.push_back(vs[static_cast<size_t>(i)].v_pool);
      tr.push_back(slice_rows(txt[static_cast<size_t>(i)].t,
                              txt[static_cast<size_t>(i)].index_cls, 1));
    }
    v_rows = concat_rows(vr);
    t_rows = concat_rows(tr);
  }

  if (cfg.loss_vtc) {
    Tensor l = vtc_loss(v_rows, t_rows, model.logit_scale());
    out.values.vtc = take_component("vtc", l);
    parts.push_back(l);
  }

  if (cfg.loss_vtm) {
    const Mat sim = cosine_similarity_values(v_rows.value(), t_rows.value());
    const HardNegatives hn = mine_hard_negatives(sim, rng);
    std::vector<Tensor> logit_rows;
    std::vector<int> targets;
    for (int i = 0; i < B; ++i) {
      const size_t si = static_cast<size_t>(i);
      logit_rows.push_back(model.vtm_logits(
          model.fuse(vs[si], txt[si], TextAttention::kBidirectional)));
      targets.push_back(1);
      logit_rows.push_back(model.vtm_logits(model.fuse(
          vs[si], txt[static_cast<size_t>(hn.neg_text_for_video[si])],
          TextAttention::kBidirectional)));
      targets.push_back(0);
      logit_rows.push_back(model.vtm_logits(model.fuse(
          vs[static_cast<size_t>(hn.neg_video_for_text[si])], txt[si],
          TextAttention::kBidirectional)));
      targets.push_back(0);
    }
    Tensor l = cross_entropy_rows(concat_rows(logit_rows), targets);
    out.values.vtm = take_component("vtm", l);
    parts.push_back(l);
  }

  if (cfg.loss_mlm) {
    std::vector<Tensor> terms;
    for (int i = 0; i < B; ++i) {
      const SampleRecord& rec = *batch[static_cast<size_t>(i)];
      const MaskedText m = apply_mlm_mask(rec.caption, rec.tags, model.vocab(), rng);
      if (!m.valid) continue;
      TextFeatures mtxt = model.encode_text(m.tokens, rec.tags);
      FusionOutput f = model.fuse(vs[static_cast<size_t>(i)], mtxt,
                                  TextAttention::kBidirectional);
      Tensor text_rows = slice_rows(f.seq, f.text_offset,
                                    static_cast<Eigen::Index>(m.tokens.size()));
      terms.push_back(cross_entropy_rows(model.vocab_logits(text_rows), targets_at_positions(m), &m.positions));
    }
    if (!terms.empty()) {
      Tensor l = mean_of(terms);
      out.values.mlm = take_component("mlm", l);
      parts.push_back(l);
    }
  }

  if (cfg.loss_plm) {
    std::vector<Tensor> terms;
    for (int i = 0; i < B; ++i) {
      const SampleRecord& rec = *batch[static_cast<size_t>(i)];
      const MaskedText m = apply_plm_mask(rec.caption, rec.tags, model.vocab(), rng);
      if (!m.valid) continue;
      TextFeatures mtxt = model.encode_text(m.tokens, rec.tags, TextAttention::kCausal);
      FusionOutput f = model.fuse(vs[static_cast<size_t>(i)], mtxt, TextAttention::kCausal);
      Tensor text_rows = slice_rows(f.seq, f.text_offset,
                                    static_cast<Eigen::Index>(m.tokens.size()));
      terms.push_back(cross_entropy_rows(model.vocab_logits(text_rows), targets_at_positions(m), &m.positions));
    }
    if (!terms.empty()) {
      Tensor l = mean_of(terms);
      out.values.plm = take_component("plm", l);
      parts.push_back(l);
    }
  }

  if (cfg.loss_ota) {
    std::vector<Tensor> terms;
    for (int i = 0; i < B; ++i) {
      const size_t si = static_cast<size_t>(i);
      if (!vs[si].trajs || vs[si].trajs->present == 0) continue;
      AlignmentLoss al = ota_loss(*vs[si].trajs, txt[si]);
      if (al.active) terms.push_back(al.loss);
    }
    if (!terms.empty()) {
      Tensor l = mean_of(terms);
      out.values.ota = take_component("ota", l);
      parts.push_back(l);
    }
  }

  if (cfg.loss_asp) {
    std::vector<Tensor> terms;
    for (int i = 0; i < B; ++i) {
      const size_t si = static_cast<size_t>(i);
      if (!vs[si].acts) continue;
      AlignmentLoss al = asp_loss(*vs[si].acts, txt[si]);
      if (al.active) terms.push_back(al.loss);
    }
    if (!terms.empty()) {
      Tensor l = mean_of(terms);
      out.values.asp = take_component("asp", l);
      parts.push_back(l);
    }
  }

  if (!parts.empty()) {
    out.total = parts[0];
    for (size_t i = 1; i < parts.size(); ++i) out.total = add(out.total, parts[i]);
    out.values.total = take_component("total", out.total);
  }
  return out;
}

namespace {

void log_metrics(std::ostream& os, int step, const LossBundle& v) {
  os.precision(17);
  os << "step=" << step << " vtc=" << v.vtc << " vtm=" << v.vtm << " mlm=" << v.mlm
     << " plm=" << v.plm << " ota=" << v.ota << " asp=" << v.asp << " total=" << v.total
     << "\n";
}

class BatchCycler {
 public:
  BatchCycler(int count, Rng& rng) : count_(count), rng_(rng) { refill(); }
  int next() {
    if (cursor_ >= count_) refill();
    return order_[static_cast<size_t>(cursor_++)];
  }

 private:
  void refill() {
    order_.resize(static_cast<size_t>(count_));
    std::iota(order_.begin(), order_.end(), 0);
    for (int i = count_ - 1; i > 0; --i)
      std::swap(order_[static_cast<size_t>(i)],
                order_[static_cast<size_t>(rng_.uniform_int(i + 1))]);
    cursor_ = 0;
  }
  int count_;
  Rng& rng_;
  std::vector<int> order_;
  int cursor_{0};
};

}  // namespace

PretrainResult pretrain(const RunConfig& cfg, StoaModel& model,
                        const std::vector<SampleRecord>& train, std::ostream* log) {
  if (train.size() < 2) throw ConfigError("pretrain: need at least two training samples");
  std::ofstream metrics;
  std::ostream* mos = nullptr;
  if (!cfg.metrics_path.empty()) {
    std::filesystem::path mp(cfg.metrics_path);
    if (mp.has_parent_path()) std::filesystem::create_directories(mp.parent_path());
    metrics.open(mp);
    if (!metrics) throw IoError("cannot open metrics log: " + cfg.metrics_path);
    metrics << "# seed=" << cfg.seed;
    if (!cfg.train_corpus.empty())
      metrics << " manifest=" << manifest_hash(cfg.train_corpus);
    metrics << "\n";
    mos = &metrics;
  }

  Adam opt(model.params(), cfg.beta1, cfg.beta2);
  Rng order_rng(hash_combine(cfg.seed, 0xda7a));
  Rng loss_rng(hash_combine(cfg.seed, 0x105e));
  BatchCycler cycler(static_cast<int>(train.size()), order_rng);

  PretrainResult out;
  for (int step = 1; step <= cfg.steps; ++step) {
    std::vector<const SampleRecord*> batch;
    for (int b = 0; b < cfg.batch_size; ++b)
      batch.push_back(&train[static_cast<size_t>(cycler.next())]);
    model.params().zero_grads();
    StepResult res;
    try {
      res = compute_losses(model, batch, cfg, loss_rng);
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(step) + ": " + e.what());
    }
    if (res.total.defined()) {
      backward(res.total);
      opt.step(lr_at(cfg, step - 1));
    }
    out.last = res.values;
    out.steps_run = step;
    if (mos) log_metrics(*mos, step, res.values);
    if (log) log_metrics(*log, step, res.values);
    if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
      std::filesystem::create_directories(cfg.checkpoint_dir);
      char name[32];
      std::snprintf(name, sizeof name, "step_%06d.stoaw", step);
      model.save(std::filesystem::path(cfg.checkpoint_dir) / name, cfg.serialize());
    }
  }
  std::filesystem::create_directories(cfg.checkpoint_dir);
  out.final_checkpoint = std::filesystem::path(cfg.checkpoint_dir) / "final.stoaw";
  model.save(out.final_checkpoint, cfg.serialize());
  return out;
}

PretrainResult pretrain(const RunConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (cfg.train_corpus.empty()) throw ConfigError("pretrain: train_corpus is required");
  const Vocab vocab = cfg.corpus.vocab_path.empty() ? Vocab::builtin()
                                                    : Vocab::from_file(cfg.corpus.vocab_path);
  ModelConfig mc = cfg.model;
  mc.vocab_size = vocab.size();
  StoaModel model(mc, vocab, cfg.seed);
  const std::vector<SampleRecord> train = read_corpus(cfg.train_corpus);
  return pretrain(cfg, model, train, log);
}

namespace {

struct EncodedCorpus {
  std::vector<VideoSideEncoding> vs;
  std::vector<TextFeatures> txt;
  Mat v;  // B x d pooled video values
  Mat t;  // B x d text [CLS] values
};

EncodedCorpus encode_corpus(const StoaModel& model, const std::vector<SampleRecord>& samples) {
  EncodedCorpus out;
  const int B = static_cast<int>(samples.size());
  out.v.resize(B, model.config().d);
  out.t.resize(B, model.config().d);
  for (int i = 0; i < B; ++i) {
    out.vs.push_back(model.encode_video_side(samples[static_cast<size_t>(i)]));
    out.txt.push_back(model.encode_text(samples[static_cast<size_t>(i)].caption,
                                        samples[static_cast<size_t>(i)].tags));
    out.v.row(i) = out.vs.back().v_pool.value().row(0);
    out.t.row(i) = out.txt.back().t.value().row(out.txt.back().index_cls);
  }
  return out;
}

double match_probability(const StoaModel& model, const VideoSideEncoding& vs,
                         const TextFeatures& txt) {
  const Mat logits =
      model.vtm_logits(model.fuse(vs, txt, TextAttention::kBidirectional)).value();
  const double mx = std::max(logits(0, 0), logits(0, 1));
  const double e0 = std::exp(logits(0, 0) - mx), e1 = std::exp(logits(0, 1) - mx);
  return e1 / (e0 + e1);
}

// Ranks candidates for one query: stage-1 cosine order, then the top
// `depth` reranked by match probability. Returns the final rank (0-based)
// of `target`.
int final_rank(const StoaModel& model, const EncodedCorpus& enc, bool video_query, int query,
               int target, int depth) {
  const int B = static_cast<int>(enc.vs.size());
  std::vector<std::pair<double, int>> stage1;
  for (int j = 0; j < B; ++j) {
    const Mat& a = video_query ? enc.v : enc.t;
    const Mat& b = video_query ? enc.t : enc.v;
    const double s = a.row(query).normalized().dot(b.row(j).normalized());
    stage1.emplace_back(-s, j);
  }
  std::stable_sort(stage1.begin(), stage1.end());
  const int top = std::min(depth, B);
  std::vector<std::pair<double, int>> reranked;
  for (int r = 0; r < top; ++r) {
    const int j = stage1[static_cast<size_t>(r)].second;
    const double p = video_query
                         ? match_probability(model, enc.vs[static_cast<size_t>(query)],
                                             enc.txt[static_cast<size_t>(j)])
                         : match_probability(model, enc.vs[static_cast<size_t>(j)],
                                             enc.txt[static_cast<size_t>(query)]);
    reranked.emplace_back(-p, j);
  }
  std::stable_sort(reranked.begin(), reranked.end());
  for (int r = 0; r < top; ++r)
    if (reranked[static_cast<size_t>(r)].second == target) return r;
  for (int r = top; r < B; ++r)
    if (stage1[static_cast<size_t>(r)].second == target) return r;
  throw NumericError("retrieval: target not found in ranking");
}

}  // namespace

RetrievalMetrics retrieval_probe(const StoaModel& model, const std::vector<SampleRecord>& samples,
                                 int rerank_depth) {
  if (samples.empty()) throw ConfigError("retrieval_probe: empty sample set");
  const EncodedCorpus enc = encode_corpus(model, samples);
  const int B = static_cast<int>(samples.size());
  RetrievalMetrics m;
  for (int i = 0; i < B; ++i) {
    const int rv = final_rank(model, enc, true, i, i, rerank_depth);
    const int rt = final_rank(model, enc, false, i, i, rerank_depth);
    m.v2t_r1 += rv < 1;
    m.v2t_r5 += rv < 5;
    m.v2t_r10 += rv < 10;
    m.t2v_r1 += rt < 1;
    m.t2v_r5 += rt < 5;
    m.t2v_r10 += rt < 10;
  }
  m.v2t_r1 /= B; m.v2t_r5 /= B; m.v2t_r10 /= B;
  m.t2v_r1 /= B; m.t2v_r5 /= B; m.t2v_r10 /= B;
  return m;
}

namespace {

std::vector<PosTag> tags_for(const std::vector<int>& tokens, const Vocab& vocab) {
  std::vector<PosTag> tags;
  for (int id : tokens) tags.push_back(vocab.tag_of(id));
  return tags;
}

struct Clause {
  int color, shape, verb;  // word-list indices
};

// Parses "[CLS] the <color> <shape> <verb> [toward|with the <color> <shape>]
// [and ...] [SEP]" captions; empty scenes yield no clauses.
std::vector<Clause> parse_caption(const std::vector<int>& tokens, const Vocab& vocab) {
  std::vector<Clause> clauses;
  auto index_in = [](const std::vector<int>& ids, int id) {
    for (size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return static_cast<int>(i);
    return -1;
  };
  size_t i = 1;  // skip [CLS]
  if (i < tokens.size() && tokens[i] == vocab.id("empty")) return clauses;
  const int the = vocab.id("the"), and_id = vocab.id("and");
  const int toward = vocab.id("toward"), with = vocab.id("with");
  while (i < tokens.size() && tokens[i] == the) {
    Clause c;
    c.color = index_in(vocab.color_ids, tokens[i + 1]);
    c.shape = index_in(vocab.shape_ids, tokens[i + 2]);
    c.verb = index_in(vocab.verb_ids, tokens[i + 3]);
    if (c.color < 0 || c.shape < 0 || c.verb < 0)
      throw FormatError("parse_caption: malformed clause");
    clauses.push_back(c);
    i += 4;
    if (i < tokens.size() && (tokens[i] == toward || tokens[i] == with)) i += 4;
    if (i < tokens.size() && tokens[i] == and_id) ++i;
  }
  return clauses;
}

std::vector<int> scene_classes(const SampleRecord& rec) {
  std::vector<int> classes;
  for (const auto& frame : rec.detections)
    for (const Detection& d : frame)
      if (std::find(classes.begin(), classes.end(), d.class_id) == classes.end())
        classes.push_back(d.class_id);
  return classes;
}

void adapt(StoaModel& model, const std::vector<SampleRecord>& samples,
           const std::function<Tensor(Rng&, const std::vector<int>&)>& batch_loss, int steps,
           double lr, std::uint64_t seed, int pool) {
  Adam opt(model.params(), 0.9, 0.98);
  Rng rng(hash_combine(seed, 0xada7));
  (void)samples;
  for (int s = 0; s < steps; ++s) {
    std::vector<int> batch;
    for (int b = 0; b < 8; ++b) batch.push_back(rng.uniform_int(pool));
    model.params().zero_grads();
    Tensor loss = batch_loss(rng, batch);
    if (!std::isfinite(loss.scalar())) throw NumericError("adaptation loss is not finite");
    backward(loss);
    // cosine decay to zero: constant-rate adaptation keeps oscillating near
    // the memorization optimum these probes aim for
    const double decayed =
        steps > 1 ? lr * 0.5 * (1.0 + std::cos(M_PI * s / (steps - 1))) : lr;
    opt.step(decayed);
  }
}

}  // namespace

std::vector<QaItem> build_qa_items(const std::vector<SampleRecord>& samples, const Vocab& vocab) {
  std::vector<QaItem> items;
  const int what = vocab.id("what"), color_w = vocab.id("color"), is = vocab.id("is");
  const int does = vocab.id("does"), do_w = vocab.id("do"), the = vocab.id("the");
  for (size_t si = 0; si < samples.size(); ++si) {
    const SampleRecord& rec = samples[si];
    const std::vector<Clause> clauses = parse_caption(rec.caption, vocab);
    const std::vector<int> classes = scene_classes(rec);
    std::vector<QaItem> local;
    auto push_unique = [&](QaItem item) {
      for (const QaItem& other : local)
        if (other.tokens == item.tokens) {
          if (other.answer != item.answer) {
            // ambiguous question for this scene: drop both
            local.erase(std::remove_if(local.begin(), local.end(),
                                       [&](const QaItem& q) { return q.tokens == item.tokens; }),
                        local.end());
          }
          return;
        }
      local.push_back(std::move(item));
    };
    for (const Clause& c : clauses) {
      int shape_count = 0;
      for (int cls : classes) shape_count += cls / 8 == c.shape;
      if (shape_count == 1) {
        QaItem item;
        item.sample = static_cast<int>(si);
        item.tokens = {vocab.cls, what, color_w, is,        the,
                       vocab.shape_ids[static_cast<size_t>(c.shape)], vocab.ans, vocab.sep};
        item.tags = tags_for(item.tokens, vocab);
        item.answer = vocab.color_ids[static_cast<size_t>(c.color)];
        push_unique(std::move(item));
      }
      QaItem item;
      item.sample = static_cast<int>(si);
      item.tokens = {vocab.cls,
                     what,
                     does,
                     the,
                     vocab.color_ids[static_cast<size_t>(c.color)],
                     vocab.shape_ids[static_cast<size_t>(c.shape)],
                     do_w,
                     vocab.ans,
                     vocab.sep};
      item.tags = tags_for(item.tokens, vocab);
      item.answer = vocab.verb_ids[static_cast<size_t>(c.verb)];
      push_unique(std::move(item));
    }
    for (QaItem& item : local) items.push_back(std::move(item));
  }
  return items;
}

QaMetrics qa_probe(StoaModel& model, const std::vector<SampleRecord>& samples, int adapt_steps,
                   double adapt_lr, std::uint64_t seed) {
  const Vocab& vocab = model.vocab();
  const std::vector<QaItem> items = build_qa_items(samples, vocab);
  QaMetrics out;
  out.count = static_cast<int>(items.size());
  if (items.empty()) return out;

  auto ans_pos = [&](const QaItem& item) {
    for (size_t i = 0; i < item.tokens.size(); ++i)
      if (item.tokens[i] == vocab.ans) return static_cast<int>(i);
    throw ShapeError("qa item without [ANS]");
  };

  if (adapt_steps > 0) {
    adapt(
        model, samples,
        [&](Rng&, const std::vector<int>& batch) {
          std::vector<Tensor> terms;
          for (int idx : batch) {
            const QaItem& item = items[static_cast<size_t>(idx)];
            VideoSideEncoding vs =
                model.encode_video_side(samples[static_cast<size_t>(item.sample)]);
            TextFeatures txt = model.encode_text(item.tokens, item.tags);
            FusionOutput f = model.fuse(vs, txt, TextAttention::kBidirectional);
            Tensor row = slice_rows(f.seq, f.text_offset + ans_pos(item), 1);
            terms.push_back(cross_entropy_rows(model.vocab_logits(row), {item.answer}));
          }
          return mean_of(terms);
        },
        adapt_steps, adapt_lr, seed, static_cast<int>(items.size()));
  }

  int correct = 0;
  for (const QaItem& item : items) {
    VideoSideEncoding vs = model.encode_video_side(samples[static_cast<size_t>(item.sample)]);
    TextFeatures txt = model.encode_text(item.tokens, item.tags);
    FusionOutput f = model.fuse(vs, txt, TextAttention::kBidirectional);
    const Mat logits =
        model.vocab_logits(slice_rows(f.seq, f.text_offset + ans_pos(item), 1)).value();
    int best = 0;
    for (Eigen::Index j = 1; j < logits.cols(); ++j)
      if (logits(0, j) > logits(0, best)) best = static_cast<int>(j);
    correct += best == item.answer;
  }
  out.accuracy = static_cast<double>(correct) / out.count;
  return out;
}

CaptionMetrics caption_probe(StoaModel& model, const std::vector<SampleRecord>& samples,
                             int adapt_steps, double adapt_lr, std::uint64_t seed) {
  if (samples.empty()) throw ConfigError("caption_probe: empty sample set");
  const Vocab& vocab = model.vocab();

  // Single-step decode layout: [CLS] w1..w_{p-1} [MASK] [SEP], predict w_p.
  auto layout_loss = [&](Rng& rng, const std::vector<int>& batch) {
    std::vector<Tensor> terms;
    for (int idx : batch) {
      const SampleRecord& rec = samples[static_cast<size_t>(idx)];
      const int L = static_cast<int>(rec.caption.size());
      const int p = 1 + rng.uniform_int(L - 1);  // target position in 1..L-1
      std::vector<int> tokens(rec.caption.begin(), rec.caption.begin() + p);
      tokens.push_back(vocab.mask);
      tokens.push_back(vocab.sep);
      std::vector<PosTag> tags = tags_for(tokens, vocab);
      VideoSideEncoding vs = model.encode_video_side(rec);
      TextFeatures txt = model.encode_text(tokens, tags, TextAttention::kCausal);
      FusionOutput f = model.fuse(vs, txt, TextAttention::kCausal);
      Tensor row = slice_rows(f.seq, f.text_offset + p, 1);
      terms.push_back(cross_entropy_rows(model.vocab_logits(row), {rec.caption[static_cast<size_t>(p)]}));
    }
    return mean_of(terms);
  };
  if (adapt_steps > 0)
    adapt(model, samples, layout_loss, adapt_steps, adapt_lr, seed,
          static_cast<int>(samples.size()));

  CaptionMetrics out;
  for (const SampleRecord& rec : samples) {
    VideoSideEncoding vs = model.encode_video_side(rec);
    std::vector<int> decoded = {vocab.cls};
    for (int step = 0; step < model.config().L_max - 2; ++step) {
      std::vector<int> tokens = decoded;
      tokens.push_back(vocab.mask);
      tokens.push_back(vocab.sep);
      std::vector<PosTag> tags = tags_for(tokens, vocab);
      TextFeatures txt = model.encode_text(tokens, tags, TextAttention::kCausal);
      FusionOutput f = model.fuse(vs, txt, TextAttention::kCausal);
      const Mat logits = model
                             .vocab_logits(slice_rows(
                                 f.seq, f.text_offset + static_cast<int>(decoded.size()), 1))
                             .value();
      int best = 0;
      for (Eigen::Index j = 1; j < logits.cols(); ++j)
        if (logits(0, j) > logits(0, best)) best = static_cast<int>(j);
      if (best == vocab.sep) break;
      decoded.push_back(best);
    }
    const std::vector<int> ref(rec.caption.begin() + 1, rec.caption.end() - 1);
    const std::vector<int> hyp(decoded.begin() + 1, decoded.end());
    const size_t longest = std::max(ref.size(), hyp.size());
    size_t matches = 0;
    for (size_t i = 0; i < std::min(ref.size(), hyp.size()); ++i) matches += ref[i] == hyp[i];
    out.token_accuracy += longest == 0 ? 1.0 : static_cast<double>(matches) / longest;
    out.exact_match += ref == hyp;
  }
  out.token_accuracy /= static_cast<double>(samples.size());
  out.exact_match /= static_cast<double>(samples.size());
  return out;
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

}  // namespace

std::vector<AblationResult> run_ablation(const std::filesystem::path& grid_path,
                                         std::ostream& log) {
  std::ifstream is(grid_path);
  if (!is) throw IoError("cannot open ablation grid: " + grid_path.string());
  std::string base_path;
  std::vector<std::uint64_t> seeds;
  struct Cell {
    std::string name;
    std::vector<std::pair<std::string, std::string>> overrides;
  };
  std::vector<Cell> cells;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::vector<std::string> toks = split_ws(line);
    if (toks.empty()) continue;
    auto kv = [&](const std::string& tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos)
        throw ConfigError("grid line " + std::to_string(lineno) + ": expected key=value");
      return std::pair<std::string, std::string>(tok.substr(0, eq), tok.substr(eq + 1));
    };
    if (toks[0] == "cell") {
      Cell cell;
      for (size_t i = 1; i < toks.size(); ++i) {
        auto [k, v] = kv(toks[i]);
        if (k == "name") cell.name = v;
        else cell.overrides.emplace_back(k, v);
      }
      if (cell.name.empty())
        throw ConfigError("grid line " + std::to_string(lineno) + ": cell needs a name");
      cells.push_back(std::move(cell));
    } else {
      auto [k, v] = kv(toks[0]);
      if (k == "base") base_path = v;
      else if (k == "seeds") {
        std::istringstream ss(v);
        std::string part;
        while (std::getline(ss, part, ',')) seeds.push_back(std::stoull(part));
      } else {
        throw ConfigError("grid line " + std::to_string(lineno) + ": unknown key " + k);
      }
    }
  }
  if (base_path.empty()) throw ConfigError("ablation grid: base config path is required");
  if (seeds.empty()) throw ConfigError("ablation grid: at least one seed is required");
  if (cells.empty()) throw ConfigError("ablation grid: at least one cell is required");

  std::vector<AblationResult> results;
  for (const Cell& cell : cells) {
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = RunConfig::parse_file(base_path);
      for (const auto& [k, v] : cell.overrides) cfg.apply_override(k, v);
      cfg.seed = seed;
      const std::string tag = cell.name + "_s" + std::to_string(seed);
      cfg.checkpoint_dir = (std::filesystem::path(cfg.checkpoint_dir) / tag).string();
      if (!cfg.metrics_path.empty()) cfg.metrics_path += "." + tag;
      cfg.validate();
      if (cfg.eval_corpus.empty()) throw ConfigError("ablation: eval_corpus is required");

      const Vocab vocab = cfg.corpus.vocab_path.empty()
                              ? Vocab::builtin()
                              : Vocab::from_file(cfg.corpus.vocab_path);
      ModelConfig mc = cfg.model;
      mc.vocab_size = vocab.size();
      StoaModel model(mc, vocab, cfg.seed);
      const std::vector<SampleRecord> train = read_corpus(cfg.train_corpus);
      pretrain(cfg, model, train, nullptr);
      const std::vector<SampleRecord> eval = read_corpus(cfg.eval_corpus);
      AblationResult r;
      r.name = cell.name;
      r.seed = seed;
      r.retrieval = retrieval_probe(model, eval, cfg.rerank_depth);
      r.mean_r1 = 0.5 * (r.retrieval.v2t_r1 + r.retrieval.t2v_r1);
      log << "cell=" << r.name << " seed=" << r.seed << " v2t_r1=" << r.retrieval.v2t_r1
          << " t2v_r1=" << r.retrieval.t2v_r1 << " mean_r1=" << r.mean_r1 << std::endl;
      results.push_back(std::move(r));
    }
  }
  return results;
}

}  // namespace stoa

#include <CLI11.hpp>
#include <iostream>
#include <map>

#include "stoa/harness.hpp"

namespace {

stoa::Vocab load_vocab(const stoa::RunConfig& cfg) {
  return cfg.corpus.vocab_path.empty() ? stoa::Vocab::builtin()
                                       : stoa::Vocab::from_file(cfg.corpus.vocab_path);
}

int run(int argc, char** argv) {
  CLI::App app{"synthetic video-language pre-training"};
  app.require_subcommand(1);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus");
  std::uint64_t gen_seed = 1;
  int gen_count = 64;
  std::string gen_out, gen_config;
  gen->add_option("--seed", gen_seed, "base seed");
  gen->add_option("--count", gen_count, "number of samples")->required();
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--config", gen_config, "run config supplying corpus settings");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "run the pre-training loop");
  std::string pre_config;
  std::vector<std::string> pre_sets;
  bool pre_quiet = false;
  pre->add_option("--config", pre_config, "run config path")->required();
  pre->add_option("--set", pre_sets, "extra key=value overrides");
  pre->add_flag("--quiet", pre_quiet, "do not echo per-step metrics");

  // probe
  auto* probe = app.add_subcommand("probe", "evaluate a checkpoint");
  std::string probe_ckpt, probe_task, probe_corpus;
  std::vector<std::string> probe_sets;
  probe->add_option("--checkpoint", probe_ckpt, "checkpoint path")->required();
  probe->add_option("--task", probe_task, "retrieval, caption, or qa")
      ->required()
      ->check(CLI::IsMember({"retrieval", "caption", "qa"}));
  probe->add_option("--corpus", probe_corpus, "corpus directory (default: eval_corpus)");
  probe->add_option("--set", probe_sets, "extra key=value overrides");

  // ablate
  auto* abl = app.add_subcommand("ablate", "run an ablation grid");
  std::string abl_grid;
  abl->add_option("--grid", abl_grid, "grid file path")->required();

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    stoa::RunConfig cfg;
    if (!gen_config.empty()) cfg = stoa::RunConfig::parse_file(gen_config);
    cfg.corpus.validate();
    const stoa::Vocab vocab = load_vocab(cfg);
    const auto samples = stoa::generate_corpus(gen_seed, gen_count, cfg.corpus, vocab);
    const auto manifest = stoa::write_corpus(samples, gen_out);
    std::cout << "wrote " << samples.size() << " samples to " << gen_out
              << " (manifest " << manifest.string() << ", hash "
              << stoa::manifest_hash(gen_out) << ")\n";
    return 0;
  }

  if (pre->parsed()) {
    stoa::RunConfig cfg = stoa::RunConfig::parse_file(pre_config);
    for (const std::string& kv : pre_sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw stoa::ConfigError("--set expects key=value");
      cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
    }
    const auto result = stoa::pretrain(cfg, pre_quiet ? nullptr : &std::cout);
    std::cout << "final checkpoint: " << result.final_checkpoint.string() << "\n";
    return 0;
  }

  if (probe->parsed()) {
    auto [model, cfg] = stoa::StoaModel::load(probe_ckpt);
    for (const std::string& kv : probe_sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw stoa::ConfigError("--set expects key=value");
      cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
    }
    const std::string corpus_dir = probe_corpus.empty() ? cfg.eval_corpus : probe_corpus;
    if (corpus_dir.empty())
      throw stoa::ConfigError("no corpus: pass --corpus or set eval_corpus in the config");
    const auto samples = stoa::read_corpus(corpus_dir);
    std::cout.precision(6);
    if (probe_task == "retrieval") {
      const auto m = stoa::retrieval_probe(model, samples, cfg.rerank_depth);
      std::cout << "v2t r1=" << m.v2t_r1 << " r5=" << m.v2t_r5 << " r10=" << m.v2t_r10 << "\n"
                << "t2v r1=" << m.t2v_r1 << " r5=" << m.t2v_r5 << " r10=" << m.t2v_r10 << "\n";
    } else if (probe_task == "caption") {
      const auto m = stoa::caption_probe(model, samples, cfg.caption_adapt_steps,
                                         cfg.caption_adapt_lr, cfg.seed);
      std::cout << "token_accuracy=" << m.token_accuracy << " exact_match=" << m.exact_match
                << "\n";
    } else {
      const auto m =
          stoa::qa_probe(model, samples, cfg.qa_adapt_steps, cfg.qa_adapt_lr, cfg.seed);
      std::cout << "accuracy=" << m.accuracy << " questions=" << m.count << "\n";
    }
    return 0;
  }

  if (abl->parsed()) {
    const auto results = stoa::run_ablation(abl_grid, std::cout);
    // aggregate per cell
    std::map<std::string, std::pair<double, int>> agg;
    for (const auto& r : results) {
      agg[r.name].first += r.mean_r1;
      agg[r.name].second += 1;
    }
    for (const auto& [name, acc] : agg)
      std::cout << "cell=" << name << " seeds=" << acc.second
                << " mean_r1=" << acc.first / acc.second << "\n";
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// Command-line front end: reproducible attack, evaluation, transfer, defense,
// and ablation runs against the built-in toy victim.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mma/artifact.hpp"
#include "mma/config.hpp"
#include "mma/corpus.hpp"
#include "mma/diagnostics.hpp"
#include "mma/errors.hpp"
#include "mma/evaluation.hpp"
#include "mma/optimizer.hpp"
#include "mma/oracle.hpp"
#include "mma/tensor.hpp"

namespace fs = std::filesystem;
using namespace mma;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::string artifact_dir;
  std::optional<uint64_t> seed_override;
  std::optional<uint64_t> budget_override;
  std::optional<int> workers_override;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool wants_artifact) {
  cmd->add_option("--config", opts.config_path, "key=value config file");
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--seed", opts.seed_override, "override config seed");
  cmd->add_option("--budget", opts.budget_override, "override query budget");
  cmd->add_option("--workers", opts.workers_override, "override worker count");
  if (wants_artifact)
    cmd->add_option("--artifact", opts.artifact_dir,
                    "directory holding artifact.txt (default: --out)");
}

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty()) {
    if (!fs::exists(opts.config_path))
      throw std::runtime_error("config file not found: " + opts.config_path);
    cfg = RunConfig::from_file(opts.config_path);
  }
  if (opts.seed_override) cfg.attack.seed = *opts.seed_override;
  if (opts.budget_override) cfg.attack.query_budget = *opts.budget_override;
  if (opts.workers_override) cfg.workers = *opts.workers_override;
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const CommonOpts& opts, const RunConfig& cfg) {
  const fs::path out(opts.out_dir);
  fs::create_directories(out);
  std::ofstream snap(out / "config.txt");
  snap << cfg.snapshot();
  return out;
}

ToyVictim make_victim(const RunConfig& cfg, uint64_t seed) {
  return ToyVictim(seed, cfg.tau, CaptionBank::default_bank(cfg.bank_seed), cfg.victim_width,
                   cfg.channels);
}

AttackCorpus make_corpus(const RunConfig& cfg, uint64_t seed) {
  return gen_corpus(seed, cfg.n_images, cfg.m_prompts, cfg.image_size, cfg.image_size,
                    cfg.channels, cfg.train_image_frac, cfg.train_prompt_frac);
}

std::unique_ptr<VictimOracle> make_oracle(const RunConfig& cfg, const ToyVictim& victim,
                                          QueryLedger& ledger, const EvalEmbedder& embedder) {
  if (cfg.oracle_mode == "text")
    return std::make_unique<TextSurrogateOracle>(victim, ledger, embedder, cfg.attack.sigma,
                                                 cfg.attack.seed);
  return std::make_unique<LossOracle>(victim, ledger);
}

void write_report(const fs::path& out, const std::string& stem, const AttackReport& report) {
  std::ofstream txt(out / (stem + ".txt"));
  report.write_text(txt);
  report.write_csv(out / (stem + ".csv"));
  report.write_text(std::cout);
}

int cmd_gen_corpus(const CommonOpts& opts) {
  const RunConfig cfg = resolve_config(opts);
  const fs::path out = prepare_out(opts, cfg);
  const AttackCorpus corpus = make_corpus(cfg, cfg.corpus_seed);
  const fs::path img_dir = out / "images";
  fs::create_directories(img_dir);
  for (size_t i = 0; i < corpus.images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%04zu.mmt1", i);
    save_mmt1(img_dir / name, corpus.images[i]);
  }
  std::ofstream prompts(out / "prompts.txt");
  for (const Prompt& p : corpus.prompts)
    prompts << to_string(p.task) << "\t" << p.text << "\n";
  std::ofstream split(out / "split.txt");
  auto dump = [&](const char* key, const std::vector<int>& v) {
    split << key << "=";
    for (size_t i = 0; i < v.size(); ++i) split << (i ? "," : "") << v[i];
    split << "\n";
  };
  dump("train_images", corpus.split.train_images);
  dump("heldout_images", corpus.split.heldout_images);
  dump("train_prompts", corpus.split.train_prompts);
  dump("heldout_prompts", corpus.split.heldout_prompts);
  std::cout << "wrote " << corpus.images.size() << " images and " << corpus.prompts.size()
            << " prompts under " << out << "\n";
  return 0;
}

int cmd_attack(const CommonOpts& opts) {
  const RunConfig cfg = resolve_config(opts);
  const fs::path out = prepare_out(opts, cfg);
  const ToyVictim victim = make_victim(cfg, cfg.victim_seed);
  const AttackCorpus corpus = make_corpus(cfg, cfg.corpus_seed);
  const EvalEmbedder embedder;
  QueryLedger ledger(cfg.attack.query_budget);
  auto oracle = make_oracle(cfg, victim, ledger, embedder);
  const Executor exec{cfg.workers};

  const AttackOutput result = run_attack(*oracle, corpus, cfg.attack, exec);
  result.trace.write_csv(out / "trace.csv");

  ArtifactMetadata meta;
  meta.seed = cfg.attack.seed;
  meta.victim_seed = cfg.victim_seed;
  meta.queries_used = result.queries_used;
  meta.target = cfg.attack.target_text;
  meta.config_hash = cfg.hash();
  save_artifact(out, result.uap, result.delta, meta);
  save_victim_manifest(out / "victim.txt", victim);

  if (corpus.split.heldout_images.empty() || corpus.split.heldout_prompts.empty()) {
    std::cout << "note: held-out split is empty; skipping evaluation\n";
  } else {
    AttackReport report = evaluate(victim, result.uap, result.delta, corpus,
                                   cfg.attack.target_text, cfg.attack.theta, embedder,
                                   DefenseSpec{}, exec);
    report.attack_queries = result.queries_used;
    report.attack_budget = cfg.attack.query_budget;
    write_report(out, "report", report);
  }
  if (result.exhausted_midway)
    std::cout << "note: budget exhausted mid-iteration; artifact is best effort\n";
  std::cout << "queries used: " << result.queries_used << " / " << cfg.attack.query_budget
            << ", iterations: " << result.trace.rows.size() << "\n";
  return 0;
}

LoadedArtifact load_artifact_checked(const CommonOpts& opts, const RunConfig& cfg) {
  const fs::path dir = opts.artifact_dir.empty() ? fs::path(opts.out_dir)
                                                 : fs::path(opts.artifact_dir);
  LoadedArtifact art = load_artifact(dir);
  if (art.meta.config_hash != cfg.hash())
    std::cout << "warning: artifact config hash " << art.meta.config_hash
              << " differs from current config hash " << cfg.hash() << "\n";
  return art;
}

int cmd_eval(const CommonOpts& opts) {
  const RunConfig cfg = resolve_config(opts);
  const fs::path out = prepare_out(opts, cfg);
  const LoadedArtifact art = load_artifact_checked(opts, cfg);
  const ToyVictim victim = make_victim(cfg, cfg.victim_seed);
  const AttackCorpus corpus = make_corpus(cfg, cfg.corpus_seed);
  const EvalEmbedder embedder;
  AttackReport report = evaluate(victim, art.uap, art.delta, corpus, art.meta.target,
                                 cfg.attack.theta, embedder, DefenseSpec{},
                                 Executor{cfg.workers});
  report.attack_queries = art.meta.queries_used;
  report.attack_budget = cfg.attack.query_budget;
  write_report(out, "report", report);
  return 0;
}

int cmd_transfer(const CommonOpts& opts) {
  const RunConfig cfg = resolve_config(opts);
  const fs::path out = prepare_out(opts, cfg);
  const LoadedArtifact art = load_artifact_checked(opts, cfg);
  const EvalEmbedder embedder;
  const Executor exec{cfg.workers};

  std::vector<ToyVictim> victims;
  for (uint64_t seed : cfg.transfer_victim_seeds) victims.push_back(make_victim(cfg, seed));
  std::vector<uint64_t> corpus_seeds = cfg.transfer_corpus_seeds;
  if (corpus_seeds.empty()) corpus_seeds.push_back(cfg.corpus_seed);
  std::vector<AttackCorpus> corpora;
  for (uint64_t seed : corpus_seeds) corpora.push_back(make_corpus(cfg, seed));

  const auto matrix = transfer_eval(art.uap, art.delta, victims, corpora, art.meta.target,
                                    cfg.attack.theta, embedder, exec);
  write_transfer_csv(out / "transfer.csv", matrix, cfg.transfer_victim_seeds);
  for (size_t r = 0; r < matrix.size(); ++r)
    for (size_t c = 0; c < matrix[r].size(); ++c) {
      std::cout << "victim_seed=" << cfg.transfer_victim_seeds[r] << " corpus_seed="
                << corpus_seeds[c] << " clean=" << matrix[r][c].overall_clean_sim
                << " attacked=" << matrix[r][c].overall_attacked_sim << "\n";
    }
  std::cout << "transfer matrix: " << matrix.size() << " victims x " << corpora.size()
            << " corpora -> " << (out / "transfer.csv") << "\n";
  return 0;
}

int cmd_defend(const CommonOpts& opts) {
  const RunConfig cfg = resolve_config(opts);
  const fs::path out = prepare_out(opts, cfg);
  const LoadedArtifact art = load_artifact_checked(opts, cfg);
  const ToyVictim victim = make_victim(cfg, cfg.victim_seed);
  const AttackCorpus corpus = make_corpus(cfg, cfg.corpus_seed);
  const EvalEmbedder embedder;
  AttackReport report = evaluate(victim, art.uap, art.delta, corpus, art.meta.target,
                                 cfg.attack.theta, embedder, cfg.defense,
                                 Executor{cfg.workers});
  report.attack_queries = art.meta.queries_used;
  report.attack_budget = cfg.attack.query_budget;
  std::cout << "defense: " << DefenseSpec::kind_to_string(cfg.defense.kind) << "\n";
  write_report(out, "report_defended", report);
  return 0;
}

int cmd_ablate(const CommonOpts& opts) {
  const RunConfig cfg = resolve_config(opts);
  const fs::path out = prepare_out(opts, cfg);
  const ToyVictim victim = make_victim(cfg, cfg.victim_seed);
  const AttackCorpus corpus = make_corpus(cfg, cfg.corpus_seed);
  const EvalEmbedder embedder;
  const auto reports = ablate(victim, corpus, cfg.attack, embedder, Executor{cfg.workers});

  std::ofstream csv(out / "ablation.csv");
  csv.precision(17);
  csv << "mode,overall_clean,overall_attacked,attack_queries,attack_budget\n";
  for (const auto& [mode, report] : reports) {
    csv << to_string(mode) << ',' << report.overall_clean_sim << ','
        << report.overall_attacked_sim << ',' << report.attack_queries << ','
        << report.attack_budget << '\n';
    std::cout << "== mode: " << to_string(mode) << " ==\n";
    write_report(out, std::string("report_") + to_string(mode), report);
  }
  return 0;
}

int cmd_sweep_sk(const CommonOpts& opts) {
  const RunConfig cfg = resolve_config(opts);
  const fs::path out = prepare_out(opts, cfg);
  const ToyVictim victim = make_victim(cfg, cfg.victim_seed);
  const AttackCorpus corpus = make_corpus(cfg, cfg.corpus_seed);
  const EvalEmbedder embedder;
  const Executor exec{cfg.workers};

  std::ofstream csv(out / "sweep_sk.csv");
  csv.precision(17);
  csv << "s_k,overall_clean,overall_attacked,attack_queries\n";
  int best_sk = 0;
  double best_sim = -2.0;
  for (int sk : {1, 2, 4, 8}) {
    RunConfig run_cfg = cfg;
    run_cfg.attack.tile_scale = sk;
    run_cfg.validate();
    QueryLedger ledger(run_cfg.attack.query_budget);
    auto oracle = make_oracle(run_cfg, victim, ledger, embedder);
    const AttackOutput result = run_attack(*oracle, corpus, run_cfg.attack, exec);
    AttackReport report = evaluate(victim, result.uap, result.delta, corpus,
                                   run_cfg.attack.target_text, run_cfg.attack.theta, embedder,
                                   DefenseSpec{}, exec);
    report.attack_queries = result.queries_used;
    report.attack_budget = run_cfg.attack.query_budget;
    csv << sk << ',' << report.overall_clean_sim << ',' << report.overall_attacked_sim << ','
        << report.attack_queries << '\n';
    std::cout << "== s_k=" << sk << " ==\n";
    write_report(out, "report_sk" + std::to_string(sk), report);
    if (report.overall_attacked_sim > best_sim) {
      best_sim = report.overall_attacked_sim;
      best_sk = sk;
    }
  }
  std::cout << "best s_k by attacked overall similarity: " << best_sk << " (" << best_sim
            << "); expectation of an interior optimum is reported, not asserted\n";
  return 0;
}

int cmd_oracle_check(const CommonOpts& opts) {
  const RunConfig cfg = resolve_config(opts);
  const fs::path out = prepare_out(opts, cfg);

  const QuadraticFidelity quad =
      quadratic_fidelity(64, 200, 10, 100, cfg.attack.eps_v, cfg.attack.seed);
  std::cout << "quadratic test loss (dim 64, " << quad.trials << " trials):\n"
            << "  mean cosine vs analytic gradient  K=" << quad.k_lo << ": "
            << quad.mean_cosine_lo << "\n"
            << "  mean cosine vs analytic gradient  K=" << quad.k_hi << ": "
            << quad.mean_cosine_hi << "\n";

  const ToyVictim victim = make_victim(cfg, cfg.victim_seed);
  const AttackCorpus corpus = make_corpus(cfg, cfg.corpus_seed);
  const VictimFidelity vf =
      victim_fidelity(victim, corpus, cfg.attack.target_text, 50, 10, 100, cfg.attack.eps_v,
                      cfg.attack.eps_t, cfg.attack.seed);
  std::cout << "toy victim (white-box hook, " << vf.trials << " trials):\n"
            << "  image cosine  K=" << vf.k_lo << ": " << vf.image_cosine_lo
            << "  K=" << vf.k_hi << ": " << vf.image_cosine_hi << "\n"
            << "  text cosine   K=" << vf.k_lo << ": " << vf.text_cosine_lo
            << "  K=" << vf.k_hi << ": " << vf.text_cosine_hi << "\n";

  std::ofstream csv(out / "oracle_check.csv");
  csv.precision(17);
  csv << "probe,k,mean_cosine\n";
  csv << "quadratic," << quad.k_lo << ',' << quad.mean_cosine_lo << '\n';
  csv << "quadratic," << quad.k_hi << ',' << quad.mean_cosine_hi << '\n';
  csv << "victim_image," << vf.k_lo << ',' << vf.image_cosine_lo << '\n';
  csv << "victim_image," << vf.k_hi << ',' << vf.image_cosine_hi << '\n';
  csv << "victim_text," << vf.k_lo << ',' << vf.text_cosine_lo << '\n';
  csv << "victim_text," << vf.k_hi << ',' << vf.text_cosine_hi << '\n';

  const bool ok = quad.mean_cosine_lo > 0.0 && quad.mean_cosine_hi > quad.mean_cosine_lo &&
                  vf.image_cosine_lo > 0.0 && vf.text_cosine_lo > 0.0;
  std::cout << (ok ? "oracle-check: PASS\n" : "oracle-check: FAIL\n");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"black-box multi-modal universal adversarial attack toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;
  auto* attack = app.add_subcommand("attack", "train the joint perturbation pair");
  add_common(attack, opts, false);
  auto* eval = app.add_subcommand("eval", "score a saved artifact on the held-out split");
  add_common(eval, opts, true);
  auto* transfer = app.add_subcommand("transfer", "evaluate across victims and corpora");
  add_common(transfer, opts, true);
  auto* defend_cmd = app.add_subcommand("defend", "evaluate under an input transform defense");
  add_common(defend_cmd, opts, true);
  auto* ablate_cmd = app.add_subcommand("ablate", "component ablation at equal budget");
  add_common(ablate_cmd, opts, false);
  auto* sweep = app.add_subcommand("sweep-sk", "attack at each tile scale in {1,2,4,8}");
  add_common(sweep, opts, false);
  auto* oracle_check = app.add_subcommand("oracle-check",
                                          "estimator vs analytic gradient diagnostics");
  add_common(oracle_check, opts, false);
  auto* gen = app.add_subcommand("gen-corpus", "materialize the procedural corpus");
  add_common(gen, opts, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (attack->parsed()) return cmd_attack(opts);
    if (eval->parsed()) return cmd_eval(opts);
    if (transfer->parsed()) return cmd_transfer(opts);
    if (defend_cmd->parsed()) return cmd_defend(opts);
    if (ablate_cmd->parsed()) return cmd_ablate(opts);
    if (sweep->parsed()) return cmd_sweep_sk(opts);
    if (oracle_check->parsed()) return cmd_oracle_check(opts);
    if (gen->parsed()) return cmd_gen_corpus(opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand given\n";
  return 2;
}

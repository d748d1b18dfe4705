#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mma/corpus.hpp"
#include "mma/diagnostics.hpp"
#include "mma/errors.hpp"
#include "mma/optimizer.hpp"
#include "mma/oracle.hpp"
#include "mma/project.hpp"

using namespace mma;

namespace {

AttackConfig small_config(uint64_t budget = 2000) {
  AttackConfig cfg;
  cfg.batch = 4;
  cfg.query_budget = budget;
  return cfg;
}

GradientEstimate make_estimate(std::vector<double> dir) {
  GradientEstimate g;
  g.direction = std::move(dir);
  g.samples = 10;
  g.queries_spent = 11;
  return g;
}

}  // namespace

TEST_CASE("coupler: aligned projections give r_hat 0, opposed give 2") {
  RngStream rng(2, "g");
  std::vector<double> g_img(64), g_txt(64);
  for (double& v : g_img) v = rng.normal(0.0, 1.0);
  for (double& v : g_txt) v = rng.normal(0.0, 1.0);

  // In a 1-dim common space the projected cosine is exactly +1 or -1, so the
  // two alignment extremes are both reachable and flipping one gradient
  // flips the outcome.
  const auto c = cross_modal_alignment(g_img, g_txt, 7, 1);
  CHECK((c.r_hat == doctest::Approx(0.0).epsilon(1e-12) ||
         c.r_hat == doctest::Approx(2.0).epsilon(1e-12)));
  std::vector<double> neg = g_txt;
  for (double& v : neg) v = -v;
  const auto c2 = cross_modal_alignment(g_img, neg, 7, 1);
  CHECK(c.r_hat + c2.r_hat == doctest::Approx(2.0).epsilon(1e-9));

  // Wide common space: r_hat bounded in [0, 2], couplings carry each
  // modality's shape.
  GradientCoupler coupler(11, 128, 64, 64);
  const auto cc = coupler.couple(g_img, g_txt);
  CHECK(cc.r_hat >= 0.0);
  CHECK(cc.r_hat <= 2.0);
  CHECK(cc.coupled_image.size() == g_img.size());
  CHECK(cc.coupled_text.size() == g_txt.size());
}

TEST_CASE("coupler: zero gradients degrade gracefully") {
  GradientCoupler coupler(1, 128, 64, 64);
  const std::vector<double> zero(64, 0.0);
  std::vector<double> g(64, 0.5);
  const auto c = coupler.couple(zero, g);
  CHECK(c.r_hat == 0.0);
  for (double v : c.coupled_image) CHECK(v == 0.0);
  for (double v : c.coupled_text) CHECK(v == 0.0);
}

TEST_CASE("coupler: independent gradients are near-orthogonal on average") {
  // Monte-Carlo oracle: E[cos] over independent pairs ~ 0 within 3/sqrt(d_c).
  const int d_c = 128;
  GradientCoupler coupler(3, d_c, 32, 32);
  RngStream rng(4, "mc");
  double mean_cos = 0.0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> a(32), b(32);
    for (double& v : a) v = rng.normal(0.0, 1.0);
    for (double& v : b) v = rng.normal(0.0, 1.0);
    mean_cos += (1.0 - coupler.couple(a, b).r_hat) / trials;
  }
  CHECK(std::abs(mean_cos) <= 3.0 / std::sqrt(static_cast<double>(d_c)));
}

TEST_CASE("joint_step with lambda 0 bit-matches independent PGD") {
  AttackConfig cfg = small_config();
  cfg.lambda = 0.0;
  RngStream rng(5, "uap-init");
  AttackState state;
  state.uap = init_uap(rng, cfg.eps_v, cfg.tile_scale, cfg.mask);
  RngStream drng(5, "delta-init");
  state.delta = init_prompt_delta(drng, cfg.eps_t, 64);
  AttackState reference = state;

  RngStream grng(6, "grads");
  std::vector<double> gi(state.uap.base_patch.size()), gt(64);
  for (double& v : gi) v = grng.normal(0.0, 1.0);
  for (double& v : gt) v = grng.normal(0.0, 1.0);

  // Coupling present but weightless: must be ignored entirely.
  GradientCoupler coupler(1, 128, static_cast<int>(gi.size()), 64);
  const auto coupling = coupler.couple(gi, gt);
  joint_step(state, cfg, make_estimate(gi), make_estimate(gt), &coupling);

  // Hand-rolled single-modality PGD on the reference state.
  {
    ImageTensor& patch = reference.uap.base_patch;
    for (size_t i = 0; i < patch.data.size(); ++i) {
      const float s = gi[i] > 0.0 ? 1.0f : (gi[i] < 0.0 ? -1.0f : 0.0f);
      patch.data[i] -= static_cast<float>(cfg.alpha_v) * s;
    }
    patch = project_linf(std::move(patch), cfg.eps_v);
    reference.uap = apply_texture_constraint(std::move(reference.uap));
    const double n = l2_norm(gt);
    for (size_t i = 0; i < reference.delta.vector.size(); ++i)
      reference.delta.vector[i] -= cfg.alpha_t * (gt[i] / n);
    reference.delta.vector = project_l2(std::move(reference.delta.vector), cfg.eps_t);
  }
  CHECK(state.uap.base_patch.data == reference.uap.base_patch.data);
  CHECK(state.delta.vector == reference.delta.vector);
}

TEST_CASE("joint_step skips the text update on a zero text gradient") {
  AttackConfig cfg = small_config();
  RngStream rng(7, "uap-init");
  AttackState state;
  state.uap = init_uap(rng, cfg.eps_v, cfg.tile_scale, cfg.mask);
  RngStream drng(7, "delta-init");
  state.delta = init_prompt_delta(drng, cfg.eps_t, 64);
  const std::vector<double> before = state.delta.vector;

  std::vector<double> gi(state.uap.base_patch.size(), 1.0);
  const StepOutcome out = joint_step(state, cfg, make_estimate(gi),
                                     make_estimate(std::vector<double>(64, 0.0)), nullptr);
  CHECK(out.text_step_skipped);
  CHECK(state.delta.vector == before);
}

TEST_CASE("joint_step on an all-positive image gradient is a uniform decrease") {
  AttackConfig cfg = small_config();
  cfg.lambda = 0.0;
  AttackState state;
  state.uap.base_patch = ImageTensor(64, 64, 3, 0.0f);
  state.uap.tile_scale = cfg.tile_scale;
  state.uap.eps_v = cfg.eps_v;
  state.uap.mask = ScaleMask::keep_all(3);  // isolate the sign step
  state.delta.eps_t = cfg.eps_t;
  state.delta.vector.assign(64, 0.0);

  std::vector<double> gi(state.uap.base_patch.size(), 2.5);
  joint_step(state, cfg, make_estimate(gi), make_estimate(std::vector<double>(64, 0.0)),
             nullptr);
  for (float v : state.uap.base_patch.data)
    REQUIRE(v == doctest::Approx(-cfg.alpha_v).epsilon(1e-6));
}

TEST_CASE("delta stays feasible when stepped at the boundary") {
  AttackConfig cfg = small_config();
  AttackState state;
  state.uap.base_patch = ImageTensor(64, 64, 3, 0.0f);
  state.uap.tile_scale = 4;
  state.uap.eps_v = cfg.eps_v;
  state.uap.mask = ScaleMask::detail_only(3);
  state.delta.eps_t = cfg.eps_t;
  state.delta.vector.assign(64, 0.0);
  state.delta.vector[0] = cfg.eps_t;  // on the sphere

  std::vector<double> gt(64, 0.0);
  gt[1] = -3.0;  // tangential pull
  joint_step(state, cfg, make_estimate(std::vector<double>(state.uap.base_patch.size(), 0.0)),
             make_estimate(gt), nullptr);
  CHECK(l2_norm(state.delta.vector) <= cfg.eps_t * (1.0 + 1e-9));
}

TEST_CASE("run_attack rejects a budget below one iteration") {
  const ToyVictim victim(1, 0.1, CaptionBank::default_bank());
  const AttackCorpus corpus = gen_corpus(7, 4, 4, 64, 64, 3, 0.5, 0.5);
  AttackConfig cfg = small_config(10);  // one iteration costs 4*2*11 = 88
  QueryLedger ledger(cfg.query_budget);
  LossOracle oracle(victim, ledger);
  CHECK_THROWS_AS(run_attack(oracle, corpus, cfg), std::invalid_argument);
}

TEST_CASE("run_attack: trace, feasibility, accounting, determinism") {
  const ToyVictim victim(1, 0.1, CaptionBank::default_bank());
  const AttackCorpus corpus = gen_corpus(7, 4, 4, 64, 64, 3, 0.5, 0.5);
  const AttackConfig cfg = small_config(2000);

  QueryLedger ledger(cfg.query_budget);
  LossOracle oracle(victim, ledger);
  const AttackOutput out = run_attack(oracle, corpus, cfg);

  const uint64_t iter_cost = iteration_query_cost(cfg);
  CHECK(iter_cost == 4 * 2 * 11);
  CHECK(out.trace.rows.size() == cfg.query_budget / iter_cost);
  CHECK(out.queries_used == out.trace.rows.size() * iter_cost);
  CHECK(out.queries_used <= cfg.query_budget);
  CHECK_FALSE(out.exhausted_midway);

  uint64_t prev = 0;
  for (const TraceRow& row : out.trace.rows) {
    REQUIRE(row.queries_used > prev);
    prev = row.queries_used;
    REQUIRE(row.uap_linf <= cfg.eps_v * (1.0 + 1e-6));
    REQUIRE(row.delta_l2 <= cfg.eps_t * (1.0 + 1e-9));
    REQUIRE(row.dropped_max <= 1e-5);
    REQUIRE(std::isfinite(row.mean_loss));
  }
  CHECK(linf_norm(out.uap.base_patch) <= cfg.eps_v * (1.0 + 1e-6));
  CHECK(l2_norm(out.delta.vector) <= cfg.eps_t * (1.0 + 1e-9));

  // Bit-identical re-run.
  QueryLedger ledger2(cfg.query_budget);
  LossOracle oracle2(victim, ledger2);
  const AttackOutput again = run_attack(oracle2, corpus, cfg);
  CHECK(again.uap.base_patch.data == out.uap.base_patch.data);
  CHECK(again.delta.vector == out.delta.vector);
  CHECK(again.trace.rows.size() == out.trace.rows.size());
  for (size_t i = 0; i < again.trace.rows.size(); ++i)
    REQUIRE(again.trace.rows[i].mean_loss == out.trace.rows[i].mean_loss);
}

TEST_CASE("lambda 0 run reduces to uncoupled PGD end to end") {
  const ToyVictim victim(1, 0.1, CaptionBank::default_bank());
  const AttackCorpus corpus = gen_corpus(7, 4, 4, 64, 64, 3, 0.5, 0.5);
  AttackConfig cfg = small_config(1500);
  cfg.lambda = 0.0;
  QueryLedger l1(cfg.query_budget), l2(cfg.query_budget);
  LossOracle o1(victim, l1), o2(victim, l2);
  const AttackOutput a = run_attack(o1, corpus, cfg);
  // no_joint mode is exactly lambda = 0; must be bit-identical.
  AttackConfig cfg2 = cfg;
  const AttackOutput b = run_attack(o2, corpus, cfg2);
  CHECK(a.uap.base_patch.data == b.uap.base_patch.data);
  CHECK(a.delta.vector == b.delta.vector);
}

TEST_CASE("frozen modalities stay at zero but spend the same budget") {
  const ToyVictim victim(1, 0.1, CaptionBank::default_bank());
  const AttackCorpus corpus = gen_corpus(7, 4, 4, 64, 64, 3, 0.5, 0.5);
  AttackConfig cfg = small_config(1000);
  cfg.enable_image = false;
  QueryLedger ledger(cfg.query_budget);
  LossOracle oracle(victim, ledger);
  const AttackOutput out = run_attack(oracle, corpus, cfg);
  for (float v : out.uap.base_patch.data) REQUIRE(v == 0.0f);
  CHECK(l2_norm(out.delta.vector) > 0.0);
  CHECK(out.queries_used == (1000 / iteration_query_cost(cfg)) * iteration_query_cost(cfg));

  AttackConfig both = small_config(1000);
  both.enable_image = false;
  both.enable_text = false;
  QueryLedger ledger2(both.query_budget);
  LossOracle oracle2(victim, ledger2);
  const AttackOutput none = run_attack(oracle2, corpus, both);
  for (float v : none.uap.base_patch.data) REQUIRE(v == 0.0f);
  for (double v : none.delta.vector) REQUIRE(v == 0.0);
  CHECK(none.queries_used == out.queries_used);
}

TEST_CASE("trace csv round-trips through the filesystem") {
  AttackTrace trace;
  trace.rows.push_back({0, 1.5, 0.9, 88, 0.03, 0.4, 1e-9, false});
  trace.rows.push_back({1, 1.2, 1.1, 176, 0.031, 0.5, 2e-9, true});
  const auto path = std::filesystem::temp_directory_path() / "mma_trace_test.csv";
  trace.write_csv(path);
  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  CHECK(header.find("iteration") == 0);
  int lines = 0;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 2);
}

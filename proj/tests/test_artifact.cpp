#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mma/artifact.hpp"
#include "mma/config.hpp"
#include "mma/errors.hpp"
#include "mma/rng.hpp"

using namespace mma;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

LoadedArtifact sample_artifact() {
  LoadedArtifact art;
  RngStream rng(21, "uap-init");
  art.uap = init_uap(rng, 8.0 / 255.0, 4, ScaleMask::detail_only(3));
  art.uap.mask.level_weights = {1.0, 0.75, 1.0};
  RngStream drng(21, "delta-init");
  art.delta = init_prompt_delta(drng, 0.5, 64);
  art.meta = {42, 1, 19712, "I am sorry", 0xdeadbeefull};
  return art;
}

}  // namespace

TEST_CASE("artifact round-trip is bitwise") {
  const fs::path dir = fresh_dir("mma_artifact_rt");
  const LoadedArtifact art = sample_artifact();
  save_artifact(dir, art.uap, art.delta, art.meta);
  const LoadedArtifact back = load_artifact(dir);

  CHECK(back.uap.base_patch.data == art.uap.base_patch.data);
  CHECK(back.uap.tile_scale == art.uap.tile_scale);
  CHECK(back.uap.eps_v == art.uap.eps_v);
  CHECK(back.uap.mask.keep_approx == art.uap.mask.keep_approx);
  CHECK(back.uap.mask.keep_detail == art.uap.mask.keep_detail);
  CHECK(back.uap.mask.level_weights == art.uap.mask.level_weights);
  CHECK(back.delta.vector == art.delta.vector);
  CHECK(back.delta.eps_t == art.delta.eps_t);
  CHECK(back.meta.seed == art.meta.seed);
  CHECK(back.meta.victim_seed == art.meta.victim_seed);
  CHECK(back.meta.queries_used == art.meta.queries_used);
  CHECK(back.meta.target == art.meta.target);
  CHECK(back.meta.config_hash == art.meta.config_hash);
}

TEST_CASE("corrupted artifact magic is rejected cleanly") {
  const fs::path dir = fresh_dir("mma_artifact_bad");
  const LoadedArtifact art = sample_artifact();
  save_artifact(dir, art.uap, art.delta, art.meta);
  {
    std::fstream f(dir / "artifact.txt", std::ios::in | std::ios::out);
    f.seekp(0);
    f.put('X');
  }
  CHECK_THROWS_AS(load_artifact(dir), ParseError);

  // Truncated sidecar: drop everything after the first three lines.
  const fs::path dir2 = fresh_dir("mma_artifact_trunc");
  save_artifact(dir2, art.uap, art.delta, art.meta);
  {
    std::ifstream in(dir2 / "artifact.txt");
    std::string l1, l2, l3;
    std::getline(in, l1);
    std::getline(in, l2);
    std::getline(in, l3);
    in.close();
    std::ofstream out(dir2 / "artifact.txt", std::ios::trunc);
    out << l1 << "\n" << l2 << "\n" << l3 << "\n";
  }
  CHECK_THROWS_AS(load_artifact(dir2), ParseError);

  CHECK_THROWS(load_artifact(fresh_dir("mma_artifact_missing")));
}

TEST_CASE("victim manifest rebuilds an identical victim") {
  const fs::path dir = fresh_dir("mma_victim_manifest");
  const ToyVictim victim(5, 0.1, CaptionBank::default_bank(), 128, 3);
  save_victim_manifest(dir / "victim.txt", victim);
  const ToyVictim back = load_victim_manifest(dir / "victim.txt");
  CHECK(back.seed() == victim.seed());
  CHECK(back.tau() == victim.tau());
  CHECK(back.hidden_width() == victim.hidden_width());
  CHECK(back.bank().entries.size() == victim.bank().entries.size());
  for (size_t i = 0; i < back.bank().entries.size(); ++i) {
    REQUIRE(back.bank().entries[i].caption == victim.bank().entries[i].caption);
    REQUIRE(back.bank().entries[i].embedding == victim.bank().entries[i].embedding);
  }
  // Functional identity on a probe input.
  QueryLedger l1(5), l2(5);
  ImageTensor img(64, 64, 3, 0.4f);
  const PromptEmbedding e = victim.encode_prompt("Is the scene bright?");
  CHECK(victim.query_text(img, e, l1) == back.query_text(img, e, l2));
}

TEST_CASE("config parsing: defaults, overrides, snapshot round-trip") {
  RunConfig cfg;
  CHECK(cfg.attack.eps_v == doctest::Approx(8.0 / 255.0));
  CHECK(cfg.attack.eps_t == 0.5);
  CHECK(cfg.attack.alpha_v == 0.01);
  CHECK(cfg.attack.alpha_t == 0.005);
  CHECK(cfg.attack.lambda == 0.1);
  CHECK(cfg.attack.k_samples == 10);
  CHECK(cfg.attack.batch == 16);
  CHECK(cfg.attack.tile_scale == 4);
  CHECK(cfg.attack.query_budget == 70000);
  CHECK(cfg.attack.theta == 0.55);
  CHECK(cfg.attack.sigma == 0.01);
  CHECK(cfg.attack.target_text == "I am sorry");

  const fs::path dir = fresh_dir("mma_config");
  {
    std::ofstream f(dir / "run.cfg");
    f << "# test config\n";
    f << "seed = 9\n";
    f << "s_k=2\n";
    f << "target=Not sure\n";
    f << "query_budget=2000   # inline comment\n";
    f << "transfer_victim_seeds=3,4,5\n";
  }
  const RunConfig parsed = RunConfig::from_file(dir / "run.cfg");
  CHECK(parsed.attack.seed == 9);
  CHECK(parsed.attack.tile_scale == 2);
  CHECK(parsed.attack.target_text == "Not sure");
  CHECK(parsed.attack.query_budget == 2000);
  REQUIRE(parsed.transfer_victim_seeds.size() == 3);
  CHECK(parsed.transfer_victim_seeds[2] == 5);

  // Snapshot reparses to an identical snapshot (canonical form).
  const std::string snap = parsed.snapshot();
  {
    std::ofstream f(dir / "snap.cfg");
    f << snap;
  }
  const RunConfig reparsed = RunConfig::from_file(dir / "snap.cfg");
  CHECK(reparsed.snapshot() == snap);
  CHECK(reparsed.hash() == parsed.hash());
}

TEST_CASE("config rejects unknown keys and bad values") {
  const fs::path dir = fresh_dir("mma_config_bad");
  {
    std::ofstream f(dir / "bad.cfg");
    f << "epsilon_v=0.1\n";
  }
  CHECK_THROWS(RunConfig::from_file(dir / "bad.cfg"));
  {
    std::ofstream f(dir / "bad2.cfg");
    f << "eps_v=not-a-number\n";
  }
  CHECK_THROWS(RunConfig::from_file(dir / "bad2.cfg"));
  {
    std::ofstream f(dir / "bad3.cfg");
    f << "theta=1.5\n";
  }
  CHECK_THROWS(RunConfig::from_file(dir / "bad3.cfg"));
  CHECK_THROWS(RunConfig::from_file(dir / "does_not_exist.cfg"));
}

TEST_CASE("hexfloat formatting round-trips doubles exactly") {
  RngStream rng(55, "hex");
  for (int i = 0; i < 200; ++i) {
    const double v = rng.normal(0.0, 1.0) * std::pow(10.0, rng.uniform(-6, 6));
    CHECK(parse_double(format_hexfloat(v)) == v);
  }
}

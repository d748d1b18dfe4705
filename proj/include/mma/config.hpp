#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mma/evaluation.hpp"
#include "mma/optimizer.hpp"

namespace mma {

// Full experiment configuration. Parsed from flat key=value text ('#' starts
// a comment); every field has an explicit default and nothing reads the clock
// or ambient randomness.
struct RunConfig {
  AttackConfig attack;

  uint64_t victim_seed = 1;
  std::vector<uint64_t> transfer_victim_seeds = {1, 2};
  std::vector<uint64_t> transfer_corpus_seeds;  // empty: just corpus_seed
  double tau = 0.1;
  uint64_t bank_seed = 0xbadc0ffeeull;
  int victim_width = 128;

  uint64_t corpus_seed = 7;
  int n_images = 16;
  int m_prompts = 8;
  int image_size = 64;
  int channels = 3;
  double train_image_frac = 0.75;
  double train_prompt_frac = 0.5;

  std::string oracle_mode = "loss";  // "loss" or "text"
  int workers = 1;
  DefenseSpec defense;

  static RunConfig from_file(const std::filesystem::path& path);
  void apply_kv(const std::string& key, const std::string& value);
  void validate() const;

  // Canonical snapshot; re-running from this text reproduces the run.
  std::string snapshot() const;
  uint64_t hash() const;
};

std::string format_double(double v);   // shortest round-trip decimal
std::string format_hexfloat(double v);
double parse_double(const std::string& s);

}  // namespace mma

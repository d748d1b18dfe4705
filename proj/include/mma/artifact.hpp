#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mma/perturbation.hpp"
#include "mma/victim.hpp"

namespace mma {

struct ArtifactMetadata {
  uint64_t seed = 0;
  uint64_t victim_seed = 0;
  uint64_t queries_used = 0;
  std::string target;
  uint64_t config_hash = 0;
};

struct LoadedArtifact {
  TextureUAP uap;
  PromptDelta delta;
  ArtifactMetadata meta;
};

// Writes <dir>/uap.mmt1 (base patch) and <dir>/artifact.txt (metadata plus the
// prompt delta as hexfloats). load(save(x)) reproduces x bit-for-bit.
void save_artifact(const std::filesystem::path& dir, const TextureUAP& uap,
                   const PromptDelta& delta, const ArtifactMetadata& meta);
LoadedArtifact load_artifact(const std::filesystem::path& dir);

// Victim persistence: seed, tau, and the caption bank; parameters are always
// regenerated from the seed.
void save_victim_manifest(const std::filesystem::path& path, const ToyVictim& victim);
ToyVictim load_victim_manifest(const std::filesystem::path& path);

}  // namespace mma

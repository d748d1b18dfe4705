#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mma/tensor.hpp"
#include "mma/victim.hpp"

namespace mma {

struct Prompt {
  std::string text;
  TaskLabel task = TaskLabel::kClassification;
};

struct CorpusSplit {
  std::vector<int> train_images, heldout_images;
  std::vector<int> train_prompts, heldout_prompts;
};

// The attack domain: an image set, a prompt set, and a train/held-out
// partition of each. The attack trains on the cross product of the train
// splits and is scored on the held-out cross product.
struct AttackCorpus {
  std::vector<ImageTensor> images;
  std::vector<Prompt> prompts;
  CorpusSplit split;

  void validate() const;
};

// Procedural stand-in corpus: gradient backgrounds, geometric shapes, and a
// light noise texture, plus short template prompts that cover the four task
// labels round-robin. Deterministic in the seed.
AttackCorpus gen_corpus(uint64_t seed, int n_images, int m_prompts, int height, int width,
                        int channels = 3, double train_image_frac = 0.75,
                        double train_prompt_frac = 0.5);

}  // namespace mma

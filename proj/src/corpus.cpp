#include "mma/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "mma/rng.hpp"

namespace mma {

void AttackCorpus::validate() const {
  if (split.train_images.empty() || split.train_prompts.empty())
    throw std::invalid_argument("AttackCorpus: empty train split");
  auto check = [&](const std::vector<int>& idx, size_t limit, const char* what) {
    for (int i : idx)
      if (i < 0 || static_cast<size_t>(i) >= limit)
        throw std::invalid_argument(std::string("AttackCorpus: ") + what +
                                    " split index out of range");
  };
  check(split.train_images, images.size(), "image");
  check(split.heldout_images, images.size(), "image");
  check(split.train_prompts, prompts.size(), "prompt");
  check(split.heldout_prompts, prompts.size(), "prompt");
  for (int i : split.train_images)
    if (std::find(split.heldout_images.begin(), split.heldout_images.end(), i) !=
        split.heldout_images.end())
      throw std::invalid_argument("AttackCorpus: image splits overlap");
  for (int i : split.train_prompts)
    if (std::find(split.heldout_prompts.begin(), split.heldout_prompts.end(), i) !=
        split.heldout_prompts.end())
      throw std::invalid_argument("AttackCorpus: prompt splits overlap");
}

namespace {

struct Color {
  double r, g, b;
};

// Soft palette around mid-gray; keeps cell-mean contrast moderate the way
// downsampled natural photos are, rather than saturated synthetic art.
Color random_color(RngStream& rng) {
  return {rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)};
}

void put_pixel(ImageTensor& img, int y, int x, const Color& c) {
  if (img.channels == 1) {
    img.at(y, x, 0) = static_cast<float>((c.r + c.g + c.b) / 3.0);
  } else {
    img.at(y, x, 0) = static_cast<float>(c.r);
    img.at(y, x, 1) = static_cast<float>(c.g);
    img.at(y, x, 2) = static_cast<float>(c.b);
  }
}

ImageTensor make_image(RngStream rng, int height, int width, int channels) {
  ImageTensor img(height, width, channels);

  // Linear gradient background between two colors at a random angle.
  const Color c0 = random_color(rng);
  const Color c1 = random_color(rng);
  const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const double dx = std::cos(angle), dy = std::sin(angle);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double u = (x * dx + y * dy) / (width * std::abs(dx) + height * std::abs(dy) + 1e-9);
      const double t = 0.5 + 0.5 * u;
      put_pixel(img, y, x,
                {c0.r + (c1.r - c0.r) * t, c0.g + (c1.g - c0.g) * t, c0.b + (c1.b - c0.b) * t});
    }

  // One to three filled shapes: circle, rectangle, or triangle.
  const int n_shapes = 1 + static_cast<int>(rng.next_below(3));
  for (int s = 0; s < n_shapes; ++s) {
    const Color col = random_color(rng);
    const int kind = static_cast<int>(rng.next_below(3));
    const double cx = rng.uniform(0.2, 0.8) * width;
    const double cy = rng.uniform(0.2, 0.8) * height;
    const double radius = rng.uniform(0.1, 0.3) * std::min(width, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double px = x - cx, py = y - cy;
        bool inside = false;
        if (kind == 0) {
          inside = px * px + py * py <= radius * radius;
        } else if (kind == 1) {
          inside = std::abs(px) <= radius && std::abs(py) <= radius * 0.75;
        } else {
          inside = py >= -radius && py <= radius && std::abs(px) <= (py + radius) * 0.5;
        }
        if (inside) put_pixel(img, y, x, col);
      }
  }

  // Light uniform noise texture.
  for (float& v : img.data)
    v = std::clamp(v + static_cast<float>(rng.uniform(-0.03, 0.03)), 0.0f, 1.0f);
  return img;
}

const std::array<std::vector<std::string>, kTaskCount> kPromptTemplates = {{
    // classification
    {"What is this?", "Classify the main object.", "Name the object shown.",
     "What category fits best?"},
    // captioning
    {"Describe the image.", "Write a short caption.", "Summarize the scene.",
     "What is happening here?"},
    // vqa_general
    {"Is there a {}?", "Does the image contain a {}?", "Is the scene bright?",
     "Are there multiple shapes?"},
    // vqa_specific
    {"What color is the {}?", "How many {} shapes are there?", "Where is the {}?",
     "How large is the {}?"},
}};

const std::array<const char*, 3> kShapeWords = {"circle", "square", "triangle"};

std::string fill_template(const std::string& tpl, RngStream& rng) {
  const size_t pos = tpl.find("{}");
  if (pos == std::string::npos) return tpl;
  std::string out = tpl;
  out.replace(pos, 2, kShapeWords[rng.next_below(kShapeWords.size())]);
  return out;
}

// Per-task split that keeps at least one prompt on each side when possible.
void split_prompts(const std::vector<Prompt>& prompts, double train_frac,
                   std::vector<int>& train, std::vector<int>& heldout) {
  for (int t = 0; t < kTaskCount; ++t) {
    std::vector<int> of_task;
    for (size_t i = 0; i < prompts.size(); ++i)
      if (static_cast<int>(prompts[i].task) == t) of_task.push_back(static_cast<int>(i));
    if (of_task.empty()) continue;
    size_t n_train = static_cast<size_t>(std::lround(train_frac * of_task.size()));
    n_train = std::clamp<size_t>(n_train, of_task.size() > 1 ? 1 : 0,
                                 of_task.size() > 1 ? of_task.size() - 1 : of_task.size());
    for (size_t i = 0; i < of_task.size(); ++i)
      (i < n_train ? train : heldout).push_back(of_task[i]);
  }
}

}  // namespace

AttackCorpus gen_corpus(uint64_t seed, int n_images, int m_prompts, int height, int width,
                        int channels, double train_image_frac, double train_prompt_frac) {
  if (!is_power_of_two(height) || height < 8 || !is_power_of_two(width) || width < 8)
    throw std::invalid_argument("gen_corpus: dims must be powers of two >= 8");
  if (channels != 1 && channels != 3)
    throw std::invalid_argument("gen_corpus: channels must be 1 or 3");
  if (n_images < 2 || m_prompts < 2)
    throw std::invalid_argument("gen_corpus: need at least 2 images and 2 prompts");

  RngStream root(seed, "corpus");
  AttackCorpus corpus;
  corpus.images.reserve(n_images);
  for (int i = 0; i < n_images; ++i)
    corpus.images.push_back(make_image(root.fork(static_cast<uint64_t>(i)), height, width,
                                       channels));

  // Round-robin across task labels so the split is as even as possible.
  RngStream prng = root.fork("prompts");
  std::array<size_t, kTaskCount> next_tpl = {0, 0, 0, 0};
  for (int i = 0; i < m_prompts; ++i) {
    const int task = i % kTaskCount;
    const auto& templates = kPromptTemplates[task];
    const std::string tpl = templates[next_tpl[task]++ % templates.size()];
    corpus.prompts.push_back({fill_template(tpl, prng), static_cast<TaskLabel>(task)});
  }

  const int train_imgs =
      std::clamp<int>(static_cast<int>(std::lround(train_image_frac * n_images)), 1,
                      n_images - 1);
  for (int i = 0; i < n_images; ++i)
    (i < train_imgs ? corpus.split.train_images : corpus.split.heldout_images).push_back(i);
  split_prompts(corpus.prompts, train_prompt_frac, corpus.split.train_prompts,
                corpus.split.heldout_prompts);
  corpus.validate();
  return corpus;
}

}  // namespace mma

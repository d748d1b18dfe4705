#include "mma/victim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mma/errors.hpp"
#include "mma/rng.hpp"

namespace mma {

const char* to_string(TaskLabel t) {
  switch (t) {
    case TaskLabel::kClassification: return "classification";
    case TaskLabel::kCaptioning: return "captioning";
    case TaskLabel::kVqaGeneral: return "vqa_general";
    case TaskLabel::kVqaSpecific: return "vqa_specific";
  }
  return "unknown";
}

TaskLabel task_from_string(std::string_view s) {
  if (s == "classification") return TaskLabel::kClassification;
  if (s == "captioning") return TaskLabel::kCaptioning;
  if (s == "vqa_general") return TaskLabel::kVqaGeneral;
  if (s == "vqa_specific") return TaskLabel::kVqaSpecific;
  throw std::invalid_argument("unknown task label: " + std::string(s));
}

int CaptionBank::index_of(std::string_view caption) const {
  for (size_t i = 0; i < entries.size(); ++i)
    if (entries[i].caption == caption) return static_cast<int>(i);
  return -1;
}

void CaptionBank::validate() const {
  if (entries.empty()) throw std::invalid_argument("CaptionBank: empty bank");
  int per_task[kTaskCount] = {0, 0, 0, 0};
  for (const CaptionEntry& e : entries) {
    if (static_cast<int>(e.embedding.size()) != embedding_dim)
      throw std::invalid_argument("CaptionBank: embedding dim mismatch for '" + e.caption + "'");
    double n = 0.0;
    for (double v : e.embedding) n += v * v;
    if (std::abs(std::sqrt(n) - 1.0) > 1e-6)
      throw std::invalid_argument("CaptionBank: embedding not unit-norm for '" + e.caption + "'");
    per_task[static_cast<int>(e.task)] += 1;
  }
  for (int t = 0; t < kTaskCount; ++t)
    if (per_task[t] < 8)
      throw std::invalid_argument(std::string("CaptionBank: fewer than 8 entries for task ") +
                                  to_string(static_cast<TaskLabel>(t)));
}

CaptionBank CaptionBank::from_captions(
    uint64_t bank_seed, int dim,
    const std::vector<std::pair<std::string, TaskLabel>>& items) {
  CaptionBank bank;
  bank.bank_seed = bank_seed;
  bank.embedding_dim = dim;
  bank.entries.reserve(items.size());
  for (const auto& [caption, task] : items) {
    CaptionEntry e;
    e.caption = caption;
    e.task = task;
    RngStream rng(bank_seed, "bank:" + caption);
    e.embedding.resize(dim);
    double norm = 0.0;
    for (double& v : e.embedding) {
      v = rng.normal(0.0, 1.0);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : e.embedding) v /= norm;
    bank.entries.push_back(std::move(e));
  }
  return bank;
}

CaptionBank CaptionBank::default_bank(uint64_t bank_seed, int dim) {
  using TL = TaskLabel;
  const std::vector<std::pair<std::string, TL>> items = {
      {"a photo of a dog", TL::kClassification},
      {"a photo of a cat", TL::kClassification},
      {"a photo of an airplane", TL::kClassification},
      {"a photo of a car", TL::kClassification},
      {"a photo of a ship", TL::kClassification},
      {"a photo of a bird", TL::kClassification},
      {"a photo of a horse", TL::kClassification},
      {"a photo of a tree", TL::kClassification},
      {"a photo of a house", TL::kClassification},
      {"a photo of a flower", TL::kClassification},
      {"a dog sitting on green grass", TL::kCaptioning},
      {"a plane flying between mountains", TL::kCaptioning},
      {"a red car parked on the street", TL::kCaptioning},
      {"an owl standing on a hill", TL::kCaptioning},
      {"two people walking on the beach", TL::kCaptioning},
      {"a bowl of fruit on the table", TL::kCaptioning},
      {"a tiger eating meat", TL::kCaptioning},
      {"a boat sailing on the lake", TL::kCaptioning},
      {"children playing in the park", TL::kCaptioning},
      {"a train crossing an old bridge", TL::kCaptioning},
      {"yes", TL::kVqaGeneral},
      {"no", TL::kVqaGeneral},
      {"maybe", TL::kVqaGeneral},
      {"i cannot tell", TL::kVqaGeneral},
      {"it looks cloudy", TL::kVqaGeneral},
      {"there is one", TL::kVqaGeneral},
      {"there are two", TL::kVqaGeneral},
      {"nothing is there", TL::kVqaGeneral},
      {"it is outdoors", TL::kVqaGeneral},
      {"it is indoors", TL::kVqaGeneral},
      {"I am sorry", TL::kVqaGeneral},
      {"the circle is red", TL::kVqaSpecific},
      {"the square is blue", TL::kVqaSpecific},
      {"the triangle is green", TL::kVqaSpecific},
      {"the background is dark", TL::kVqaSpecific},
      {"the shape is yellow", TL::kVqaSpecific},
      {"there are three shapes", TL::kVqaSpecific},
      {"the largest shape is a circle", TL::kVqaSpecific},
      {"the smallest shape is a square", TL::kVqaSpecific},
      {"the color is orange", TL::kVqaSpecific},
      {"the pattern is striped", TL::kVqaSpecific},
  };
  return from_captions(bank_seed, dim, items);
}

QueryLedger::QueryLedger(uint64_t budget) : budget_(budget) {}

uint64_t QueryLedger::charge() {
  uint64_t cur = used_.load(std::memory_order_relaxed);
  for (;;) {
    if (cur >= budget_)
      throw BudgetExhausted("query budget exhausted at " + std::to_string(budget_));
    if (used_.compare_exchange_weak(cur, cur + 1, std::memory_order_relaxed))
      return cur + 1;
  }
}

uint64_t QueryLedger::remaining() const {
  const uint64_t u = used();
  return u >= budget_ ? 0 : budget_ - u;
}

namespace {

constexpr uint64_t kFamilySeed = 0x11aa22bb33cc44ddull;
// Blend between family-shared and seed-specific parameters. Keeps victims
// with different seeds related (same family) but functionally distinct.
constexpr double kFamilyBlend = 0.35;

// Encoder gains and fusion branch scales. Calibrated so that budget-bounded
// perturbations inside the attack constraints can actually steer the output:
// cell-mean shifts of a few percent move logits by O(1), and an embedding
// offset of norm ~0.5 rotates the fused output substantially. The image code
// is unit-normalized before fusion so the two branches carry equal weight.
constexpr double kW1Gain = 5.0;
constexpr double kW2Gain = 1.5;
constexpr double kImageFusionScale = 1.25;
constexpr double kPromptFusionScale = 1.0;

std::vector<double> blended_matrix(uint64_t seed, const std::string& name, size_t n,
                                   double stddev) {
  RngStream shared(kFamilySeed, name);
  RngStream own(seed, name);
  const double a = std::sqrt(1.0 - kFamilyBlend * kFamilyBlend);
  std::vector<double> m(n);
  for (double& v : m)
    v = stddev * (a * shared.normal(0.0, 1.0) + kFamilyBlend * own.normal(0.0, 1.0));
  return m;
}

// y = M x, M row-major (rows x cols).
void matvec(const std::vector<double>& m, int rows, int cols, const std::vector<double>& x,
            std::vector<double>& y) {
  y.assign(rows, 0.0);
  for (int r = 0; r < rows; ++r) {
    const double* row = m.data() + static_cast<size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

// y = M^T x, M row-major (rows x cols), x has rows entries.
void matvec_t(const std::vector<double>& m, int rows, int cols, const std::vector<double>& x,
              std::vector<double>& y) {
  y.assign(cols, 0.0);
  for (int r = 0; r < rows; ++r) {
    const double* row = m.data() + static_cast<size_t>(r) * cols;
    const double xv = x[r];
    for (int c = 0; c < cols; ++c) y[c] += row[c] * xv;
  }
}

}  // namespace

ToyVictim::ToyVictim(uint64_t seed, double tau, CaptionBank bank, int hidden_width,
                     int channels)
    : seed_(seed), tau_(tau), bank_(std::move(bank)), hidden_width_(hidden_width),
      channels_(channels) {
  if (!(tau_ > 0.0)) throw std::invalid_argument("ToyVictim: tau must be positive");
  if (bank_.entries.empty()) throw std::invalid_argument("ToyVictim: empty caption bank");
  bank_.validate();
  if (channels_ != 1 && channels_ != 3)
    throw std::invalid_argument("ToyVictim: channels must be 1 or 3");
  if (hidden_width_ < 8) throw std::invalid_argument("ToyVictim: hidden width too small");

  const int in_features = 64 * channels_;
  const std::string wtag = "w" + std::to_string(hidden_width_);
  w1_ = blended_matrix(seed_, "victim-w1-" + wtag, static_cast<size_t>(hidden_width_) * in_features,
                       kW1Gain / std::sqrt(static_cast<double>(in_features)));
  b1_ = blended_matrix(seed_, "victim-b1-" + wtag, hidden_width_, 0.1);
  w2_ = blended_matrix(seed_, "victim-w2-" + wtag,
                       static_cast<size_t>(img_code_dim_) * hidden_width_,
                       kW2Gain / std::sqrt(static_cast<double>(hidden_width_)));
  b2_ = blended_matrix(seed_, "victim-b2-" + wtag, img_code_dim_, 0.1);
  wp_ = blended_matrix(seed_, "victim-wp", static_cast<size_t>(prompt_dim_) * vocab_buckets_, 1.0);
  fuse_ = blended_matrix(seed_, "victim-fuse-" + wtag,
                         static_cast<size_t>(bank_.embedding_dim) * (img_code_dim_ + prompt_dim_),
                         1.0 / std::sqrt(static_cast<double>(img_code_dim_ + prompt_dim_)));
  // Branch emphasis folds into the fusion columns so forward and backward
  // stay plain matrix ops.
  for (int r = 0; r < bank_.embedding_dim; ++r)
    for (int c = 0; c < img_code_dim_ + prompt_dim_; ++c)
      fuse_[static_cast<size_t>(r) * (img_code_dim_ + prompt_dim_) + c] *=
          c < img_code_dim_ ? kImageFusionScale : kPromptFusionScale;
}

std::vector<double> ToyVictim::image_features(const ImageTensor& image) const {
  if (image.channels != channels_)
    throw std::invalid_argument("ToyVictim: image has " + std::to_string(image.channels) +
                                " channels, victim expects " + std::to_string(channels_));
  if (image.height % 8 != 0 || image.width % 8 != 0)
    throw std::invalid_argument("ToyVictim: image dims must be divisible by 8");
  const int cell_h = image.height / 8, cell_w = image.width / 8;
  const double inv = 1.0 / (static_cast<double>(cell_h) * cell_w);
  std::vector<double> z(static_cast<size_t>(64) * channels_, 0.0);
  for (int gy = 0; gy < 8; ++gy)
    for (int gx = 0; gx < 8; ++gx)
      for (int ch = 0; ch < channels_; ++ch) {
        double acc = 0.0;
        for (int y = gy * cell_h; y < (gy + 1) * cell_h; ++y)
          for (int x = gx * cell_w; x < (gx + 1) * cell_w; ++x)
            acc += image.at(y, x, ch);
        z[(static_cast<size_t>(gy) * 8 + gx) * channels_ + ch] = acc * inv - 0.5;
      }
  return z;
}

PromptEmbedding ToyVictim::encode_prompt(const std::string& prompt) const {
  std::vector<double> counts(vocab_buckets_, 0.0);
  std::string token;
  bool any = false;
  auto flush = [&] {
    if (!token.empty()) {
      counts[fnv1a64(token) % vocab_buckets_] += 1.0;
      token.clear();
      any = true;
    }
  };
  for (char c : prompt) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') flush();
    else token.push_back(c);
  }
  flush();
  if (!any) throw std::invalid_argument("encode_prompt: empty prompt");

  PromptEmbedding e;
  e.source_text = prompt;
  matvec(wp_, prompt_dim_, vocab_buckets_, counts, e.vector);
  double norm = 0.0;
  for (double v : e.vector) norm += v * v;
  norm = std::sqrt(norm);
  if (norm < 1e-12) {
    e.vector.assign(prompt_dim_, 0.0);
    e.vector[0] = 1.0;
  } else {
    for (double& v : e.vector) v /= norm;
  }
  return e;
}

struct ToyVictim::Forward {
  std::vector<double> z0, h1, img, img_hat, x, u, o, logits, probs;
  double img_norm = 0.0;
  double u_norm = 0.0;
  double loss = 0.0;
  int target_index = -1;
};

ToyVictim::Forward ToyVictim::run_forward(const ImageTensor& image,
                                          const PromptEmbedding& prompt,
                                          const std::string& target) const {
  if (static_cast<int>(prompt.vector.size()) != prompt_dim_)
    throw std::invalid_argument("ToyVictim: prompt embedding dim mismatch");
  Forward f;
  f.z0 = image_features(image);

  std::vector<double> a;
  matvec(w1_, hidden_width_, 64 * channels_, f.z0, a);
  f.h1.resize(hidden_width_);
  for (int i = 0; i < hidden_width_; ++i) f.h1[i] = std::tanh(a[i] + b1_[i]);

  matvec(w2_, img_code_dim_, hidden_width_, f.h1, a);
  f.img.resize(img_code_dim_);
  double in = 0.0;
  for (int i = 0; i < img_code_dim_; ++i) {
    f.img[i] = std::tanh(a[i] + b2_[i]);
    in += f.img[i] * f.img[i];
  }
  f.img_norm = std::max(std::sqrt(in), 1e-12);
  f.img_hat.resize(img_code_dim_);
  for (int i = 0; i < img_code_dim_; ++i) f.img_hat[i] = f.img[i] / f.img_norm;

  f.x.resize(static_cast<size_t>(img_code_dim_) + prompt_dim_);
  std::copy(f.img_hat.begin(), f.img_hat.end(), f.x.begin());
  std::copy(prompt.vector.begin(), prompt.vector.end(), f.x.begin() + img_code_dim_);

  matvec(fuse_, bank_.embedding_dim, img_code_dim_ + prompt_dim_, f.x, f.u);
  double un = 0.0;
  for (double v : f.u) un += v * v;
  f.u_norm = std::max(std::sqrt(un), 1e-12);
  f.o.resize(f.u.size());
  for (size_t i = 0; i < f.u.size(); ++i) f.o[i] = f.u[i] / f.u_norm;

  const size_t n = bank_.entries.size();
  f.logits.resize(n);
  for (size_t j = 0; j < n; ++j) {
    double dot = 0.0;
    const std::vector<double>& c = bank_.entries[j].embedding;
    for (size_t i = 0; i < f.o.size(); ++i) dot += f.o[i] * c[i];
    f.logits[j] = dot / tau_;
  }
  const double mx = *std::max_element(f.logits.begin(), f.logits.end());
  double z = 0.0;
  f.probs.resize(n);
  for (size_t j = 0; j < n; ++j) {
    f.probs[j] = std::exp(f.logits[j] - mx);
    z += f.probs[j];
  }
  for (size_t j = 0; j < n; ++j) f.probs[j] /= z;

  if (!target.empty()) {
    f.target_index = bank_.index_of(target);
    if (f.target_index < 0)
      throw std::invalid_argument("target caption not in bank: " + target);
    f.loss = -(f.logits[f.target_index] - mx - std::log(z));
  }
  return f;
}

double ToyVictim::query_loss(const ImageTensor& image, const PromptEmbedding& prompt,
                             const std::string& target, QueryLedger& ledger) const {
  if (bank_.index_of(target) < 0)
    throw std::invalid_argument("target caption not in bank: " + target);
  ledger.charge();
  return run_forward(image, prompt, target).loss;
}

std::string ToyVictim::query_text(const ImageTensor& image, const PromptEmbedding& prompt,
                                  QueryLedger& ledger) const {
  ledger.charge();
  const Forward f = run_forward(image, prompt, std::string());
  // Strict > keeps the lowest index on ties.
  size_t best = 0;
  for (size_t j = 1; j < f.logits.size(); ++j)
    if (f.logits[j] > f.logits[best]) best = j;
  return bank_.entries[best].caption;
}

VictimGradients ToyVictim::forward_with_grad(const ImageTensor& image,
                                             const PromptEmbedding& prompt,
                                             const std::string& target) const {
  const Forward f = run_forward(image, prompt, target);
  const size_t n = bank_.entries.size();
  const int dim_o = bank_.embedding_dim;

  // d loss / d output embedding.
  std::vector<double> d_o(dim_o, 0.0);
  for (size_t j = 0; j < n; ++j) {
    const double g = (f.probs[j] - (static_cast<int>(j) == f.target_index ? 1.0 : 0.0)) / tau_;
    const std::vector<double>& c = bank_.entries[j].embedding;
    for (int i = 0; i < dim_o; ++i) d_o[i] += g * c[i];
  }

  // Through o = u / ||u||.
  double od = 0.0;
  for (int i = 0; i < dim_o; ++i) od += d_o[i] * f.o[i];
  std::vector<double> d_u(dim_o);
  for (int i = 0; i < dim_o; ++i) d_u[i] = (d_o[i] - f.o[i] * od) / f.u_norm;

  std::vector<double> d_x;
  matvec_t(fuse_, dim_o, img_code_dim_ + prompt_dim_, d_u, d_x);

  VictimGradients out;
  out.loss = f.loss;
  out.grad_prompt.assign(d_x.begin() + img_code_dim_, d_x.end());

  // Through img_hat = img / ||img||.
  double ihd = 0.0;
  for (int i = 0; i < img_code_dim_; ++i) ihd += d_x[i] * f.img_hat[i];
  std::vector<double> d_img(img_code_dim_);
  for (int i = 0; i < img_code_dim_; ++i)
    d_img[i] = (d_x[i] - f.img_hat[i] * ihd) / f.img_norm;

  std::vector<double> d_a2(img_code_dim_);
  for (int i = 0; i < img_code_dim_; ++i) d_a2[i] = d_img[i] * (1.0 - f.img[i] * f.img[i]);
  std::vector<double> d_h1;
  matvec_t(w2_, img_code_dim_, hidden_width_, d_a2, d_h1);
  std::vector<double> d_a1(hidden_width_);
  for (int i = 0; i < hidden_width_; ++i) d_a1[i] = d_h1[i] * (1.0 - f.h1[i] * f.h1[i]);
  std::vector<double> d_z0;
  matvec_t(w1_, hidden_width_, 64 * channels_, d_a1, d_z0);

  const int cell_h = image.height / 8, cell_w = image.width / 8;
  const double inv = 1.0 / (static_cast<double>(cell_h) * cell_w);
  out.grad_image = ImageTensor(image.height, image.width, image.channels);
  for (int y = 0; y < image.height; ++y) {
    const int gy = y / cell_h;
    for (int x = 0; x < image.width; ++x) {
      const int gx = x / cell_w;
      for (int ch = 0; ch < channels_; ++ch) {
        out.grad_image.at(y, x, ch) = static_cast<float>(
            d_z0[(static_cast<size_t>(gy) * 8 + gx) * channels_ + ch] * inv);
      }
    }
  }
  return out;
}

ToyVictim build_toy_victim(uint64_t seed, double tau, CaptionBank bank) {
  return ToyVictim(seed, tau, std::move(bank));
}

}  // namespace mma

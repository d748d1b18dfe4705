#include "mma/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "mma/oracle.hpp"
#include "mma/rng.hpp"

namespace mma {

void DefenseSpec::validate() const {
  if (kind == Kind::kRandomization) {
    if (!(resize_lo > 0.0) || !(resize_hi <= 1.0) || !(resize_lo <= resize_hi))
      throw std::invalid_argument("DefenseSpec: resize range must satisfy 0 < lo <= hi <= 1");
  } else if (kind == Kind::kQuantize) {
    if (bit_depth < 1 || bit_depth > 16)
      throw std::invalid_argument("DefenseSpec: bit depth must be in [1,16]");
  } else if (kind == Kind::kDctQuantize) {
    if (quality < 1 || quality > 100)
      throw std::invalid_argument("DefenseSpec: quality must be in [1,100]");
  }
}

DefenseSpec::Kind DefenseSpec::kind_from_string(std::string_view s) {
  if (s == "none") return Kind::kNone;
  if (s == "randomization") return Kind::kRandomization;
  if (s == "quantize") return Kind::kQuantize;
  if (s == "dct_quantize") return Kind::kDctQuantize;
  throw std::invalid_argument("unknown defense kind: " + std::string(s));
}

const char* DefenseSpec::kind_to_string(Kind k) {
  switch (k) {
    case Kind::kNone: return "none";
    case Kind::kRandomization: return "randomization";
    case Kind::kQuantize: return "quantize";
    case Kind::kDctQuantize: return "dct_quantize";
  }
  return "none";
}

namespace {

ImageTensor defend_randomization(const ImageTensor& image, const DefenseSpec& spec) {
  RngStream rng(spec.seed, "defense-rand");
  const double f = rng.uniform(spec.resize_lo, spec.resize_hi);
  const int th = std::max(1, static_cast<int>(std::lround(image.height * f)));
  const int tw = std::max(1, static_cast<int>(std::lround(image.width * f)));
  ImageTensor small(th, tw, image.channels);
  for (int y = 0; y < th; ++y) {
    const int sy = std::min(static_cast<int>(static_cast<int64_t>(y) * image.height / th),
                            image.height - 1);
    for (int x = 0; x < tw; ++x) {
      const int sx = std::min(static_cast<int>(static_cast<int64_t>(x) * image.width / tw),
                              image.width - 1);
      for (int ch = 0; ch < image.channels; ++ch)
        small.at(y, x, ch) = image.at(sy, sx, ch);
    }
  }
  const int oy = static_cast<int>(rng.next_below(static_cast<uint64_t>(image.height - th + 1)));
  const int ox = static_cast<int>(rng.next_below(static_cast<uint64_t>(image.width - tw + 1)));
  ImageTensor out(image.height, image.width, image.channels, 0.0f);
  for (int y = 0; y < th; ++y)
    for (int x = 0; x < tw; ++x)
      for (int ch = 0; ch < image.channels; ++ch)
        out.at(y + oy, x + ox, ch) = small.at(y, x, ch);
  return out;
}

ImageTensor defend_quantize(const ImageTensor& image, int bits) {
  const float levels = static_cast<float>((1 << bits) - 1);
  ImageTensor out = image;
  for (float& v : out.data)
    v = std::clamp(std::round(v * levels) / levels, 0.0f, 1.0f);
  return out;
}

// Standard JPEG luminance quantization table.
constexpr int kQuantTable[8][8] = {
    {16, 11, 10, 16, 24, 40, 51, 61},   {12, 12, 14, 19, 26, 58, 60, 55},
    {14, 13, 16, 24, 40, 57, 69, 56},   {14, 17, 22, 29, 51, 87, 80, 62},
    {18, 22, 37, 56, 68, 109, 103, 77}, {24, 35, 55, 64, 81, 104, 113, 92},
    {49, 64, 78, 87, 103, 121, 120, 101}, {72, 92, 95, 98, 112, 100, 103, 99}};

ImageTensor defend_dct_quantize(const ImageTensor& image, int quality) {
  if (image.height % 8 != 0 || image.width % 8 != 0)
    throw std::invalid_argument("dct_quantize: image dims must be divisible by 8");

  // Orthonormal 8-point DCT-II basis.
  static const auto basis = [] {
    std::array<std::array<double, 8>, 8> m{};
    for (int k = 0; k < 8; ++k) {
      const double a = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n)
        m[k][n] = a * std::cos((2.0 * n + 1.0) * k * 3.14159265358979323846 / 16.0);
    }
    return m;
  }();

  const double sf = quality < 50 ? 5000.0 / quality : 200.0 - 2.0 * quality;
  double q[8][8];
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      q[i][j] = std::max(1.0, std::floor((kQuantTable[i][j] * sf + 50.0) / 100.0));

  ImageTensor out = image;
  double block[8][8], tmp[8][8], coef[8][8];
  for (int ch = 0; ch < image.channels; ++ch) {
    for (int by = 0; by < image.height; by += 8) {
      for (int bx = 0; bx < image.width; bx += 8) {
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x)
            block[y][x] = image.at(by + y, bx + x, ch) * 255.0 - 128.0;
        // coef = B * block * B^T
        for (int k = 0; k < 8; ++k)
          for (int x = 0; x < 8; ++x) {
            double acc = 0.0;
            for (int n = 0; n < 8; ++n) acc += basis[k][n] * block[n][x];
            tmp[k][x] = acc;
          }
        for (int k = 0; k < 8; ++k)
          for (int l = 0; l < 8; ++l) {
            double acc = 0.0;
            for (int n = 0; n < 8; ++n) acc += tmp[k][n] * basis[l][n];
            coef[k][l] = std::round(acc / q[k][l]) * q[k][l];
          }
        // block = B^T * coef * B
        for (int y = 0; y < 8; ++y)
          for (int l = 0; l < 8; ++l) {
            double acc = 0.0;
            for (int k = 0; k < 8; ++k) acc += basis[k][y] * coef[k][l];
            tmp[y][l] = acc;
          }
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) {
            double acc = 0.0;
            for (int l = 0; l < 8; ++l) acc += tmp[y][l] * basis[l][x];
            out.at(by + y, bx + x, ch) =
                std::clamp(static_cast<float>((acc + 128.0) / 255.0), 0.0f, 1.0f);
          }
      }
    }
  }
  return out;
}

}  // namespace

ImageTensor defend(const ImageTensor& image, const DefenseSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case DefenseSpec::Kind::kNone: return image;
    case DefenseSpec::Kind::kRandomization: return defend_randomization(image, spec);
    case DefenseSpec::Kind::kQuantize: return defend_quantize(image, spec.bit_depth);
    case DefenseSpec::Kind::kDctQuantize: return defend_dct_quantize(image, spec.quality);
  }
  return image;
}

void AttackReport::write_text(std::ostream& os) const {
  os << "target: \"" << target << "\"  theta: " << theta << "  victim_seed: " << victim_seed
     << "\n";
  os << std::left << std::setw(16) << "task" << std::right << std::setw(11) << "clean_sim"
     << std::setw(11) << "att_sim" << std::setw(11) << "clean_asr" << std::setw(11)
     << "att_asr" << std::setw(8) << "pairs" << "\n";
  os << std::fixed << std::setprecision(4);
  for (int t = 0; t < kTaskCount; ++t) {
    const TaskScore& s = tasks[t];
    os << std::left << std::setw(16) << to_string(static_cast<TaskLabel>(t)) << std::right
       << std::setw(11) << s.clean_sim << std::setw(11) << s.attacked_sim << std::setw(11)
       << s.clean_asr << std::setw(11) << s.attacked_asr << std::setw(8) << s.pairs << "\n";
  }
  os << std::left << std::setw(16) << "overall" << std::right << std::setw(11)
     << overall_clean_sim << std::setw(11) << overall_attacked_sim << std::setw(11)
     << overall_clean_asr << std::setw(11) << overall_attacked_asr << "\n";
  os.unsetf(std::ios::fixed);
  os << "eval_queries: " << eval_queries << "  attack_queries: " << attack_queries
     << "  attack_budget: " << attack_budget << "\n";
}

void AttackReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write report: " + path.string());
  os.precision(17);
  os << "task,clean_sim,attacked_sim,clean_asr,attacked_asr,pairs\n";
  for (int t = 0; t < kTaskCount; ++t) {
    const TaskScore& s = tasks[t];
    os << to_string(static_cast<TaskLabel>(t)) << ',' << s.clean_sim << ',' << s.attacked_sim
       << ',' << s.clean_asr << ',' << s.attacked_asr << ',' << s.pairs << '\n';
  }
  os << "overall," << overall_clean_sim << ',' << overall_attacked_sim << ','
     << overall_clean_asr << ',' << overall_attacked_asr << ",\n";
}

AttackReport evaluate(const ToyVictim& victim, const TextureUAP& uap, const PromptDelta& delta,
                      const AttackCorpus& corpus, const std::string& target, double theta,
                      const EvalEmbedder& embedder, const DefenseSpec& defense,
                      const Executor& exec) {
  corpus.validate();
  if (corpus.split.heldout_images.empty() || corpus.split.heldout_prompts.empty())
    throw std::invalid_argument("evaluate: empty held-out split");

  struct PairOutcome {
    int task = 0;
    double clean_sim = 0.0, attacked_sim = 0.0;
  };
  const size_t n_pairs =
      corpus.split.heldout_images.size() * corpus.split.heldout_prompts.size();
  std::vector<PairOutcome> outcomes(n_pairs);

  // Separate ledger: evaluation queries never touch an attack budget.
  QueryLedger ledger(2 * n_pairs);

  exec.parallel_for(n_pairs, [&](size_t k) {
    const int img_idx =
        corpus.split.heldout_images[k / corpus.split.heldout_prompts.size()];
    const int pr_idx =
        corpus.split.heldout_prompts[k % corpus.split.heldout_prompts.size()];
    const ImageTensor& v = corpus.images[img_idx];
    const Prompt& prompt = corpus.prompts[pr_idx];

    const PromptEmbedding e = victim.encode_prompt(prompt.text);
    const std::string out_clean = victim.query_text(defend(v, defense), e, ledger);

    const ImageTensor v_adv = apply_to_image(v, uap);
    const PromptEmbedding e_adv = apply_to_prompt(e, delta);
    const std::string out_att = victim.query_text(defend(v_adv, defense), e_adv, ledger);

    PairOutcome& o = outcomes[k];
    o.task = static_cast<int>(prompt.task);
    o.clean_sim = embedder.similarity(out_clean, target);
    o.attacked_sim = embedder.similarity(out_att, target);
  });

  AttackReport report;
  report.theta = theta;
  report.target = target;
  report.victim_seed = victim.seed();
  report.eval_queries = ledger.used();

  // Fixed-order aggregation.
  for (const PairOutcome& o : outcomes) {
    TaskScore& s = report.tasks[o.task];
    s.clean_sim += o.clean_sim;
    s.attacked_sim += o.attacked_sim;
    s.clean_asr += o.clean_sim >= theta ? 1.0 : 0.0;
    s.attacked_asr += o.attacked_sim >= theta ? 1.0 : 0.0;
    s.pairs += 1;
  }
  for (int t = 0; t < kTaskCount; ++t) {
    TaskScore& s = report.tasks[t];
    if (s.pairs == 0)
      throw std::invalid_argument(std::string("evaluate: no held-out prompts for task ") +
                                  to_string(static_cast<TaskLabel>(t)));
    s.clean_sim /= s.pairs;
    s.attacked_sim /= s.pairs;
    s.clean_asr /= s.pairs;
    s.attacked_asr /= s.pairs;
    report.overall_clean_sim += s.clean_sim / kTaskCount;
    report.overall_attacked_sim += s.attacked_sim / kTaskCount;
    report.overall_clean_asr += s.clean_asr / kTaskCount;
    report.overall_attacked_asr += s.attacked_asr / kTaskCount;
  }
  return report;
}

std::vector<std::vector<AttackReport>> transfer_eval(
    const TextureUAP& uap, const PromptDelta& delta, const std::vector<ToyVictim>& victims,
    const std::vector<AttackCorpus>& corpora, const std::string& target, double theta,
    const EvalEmbedder& embedder, const Executor& exec) {
  if (victims.empty() || corpora.empty())
    throw std::invalid_argument("transfer_eval: need at least one victim and one corpus");
  std::vector<std::vector<AttackReport>> matrix;
  matrix.reserve(victims.size());
  for (const ToyVictim& victim : victims) {
    std::vector<AttackReport> row;
    row.reserve(corpora.size());
    for (const AttackCorpus& corpus : corpora)
      row.push_back(evaluate(victim, uap, delta, corpus, target, theta, embedder,
                             DefenseSpec{}, exec));
    matrix.push_back(std::move(row));
  }
  return matrix;
}

void write_transfer_csv(const std::filesystem::path& path,
                        const std::vector<std::vector<AttackReport>>& matrix,
                        const std::vector<uint64_t>& victim_seeds) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write transfer matrix: " + path.string());
  os.precision(17);
  os << "victim_seed";
  if (!matrix.empty())
    for (size_t c = 0; c < matrix.front().size(); ++c)
      os << ",corpus_" << c << "_clean,corpus_" << c << "_attacked";
  os << '\n';
  for (size_t r = 0; r < matrix.size(); ++r) {
    os << (r < victim_seeds.size() ? std::to_string(victim_seeds[r]) : std::to_string(r));
    for (const AttackReport& rep : matrix[r])
      os << ',' << rep.overall_clean_sim << ',' << rep.overall_attacked_sim;
    os << '\n';
  }
}

const char* to_string(AblationMode m) {
  switch (m) {
    case AblationMode::kFull: return "full";
    case AblationMode::kNoText: return "no_text";
    case AblationMode::kNoImage: return "no_image";
    case AblationMode::kNoJoint: return "no_joint";
  }
  return "full";
}

std::map<AblationMode, AttackReport> ablate(const ToyVictim& victim, const AttackCorpus& corpus,
                                            const AttackConfig& config,
                                            const EvalEmbedder& embedder,
                                            const Executor& exec) {
  std::map<AblationMode, AttackReport> reports;
  for (AblationMode mode : {AblationMode::kFull, AblationMode::kNoText, AblationMode::kNoImage,
                            AblationMode::kNoJoint}) {
    AttackConfig mode_config = config;
    switch (mode) {
      case AblationMode::kFull: break;
      case AblationMode::kNoText: mode_config.enable_text = false; break;
      case AblationMode::kNoImage: mode_config.enable_image = false; break;
      case AblationMode::kNoJoint: mode_config.lambda = 0.0; break;
    }
    QueryLedger ledger(config.query_budget);
    LossOracle oracle(victim, ledger);
    const AttackOutput result = run_attack(oracle, corpus, mode_config, exec);
    AttackReport report = evaluate(victim, result.uap, result.delta, corpus,
                                   config.target_text, config.theta, embedder, DefenseSpec{},
                                   exec);
    report.attack_queries = result.queries_used;
    report.attack_budget = config.query_budget;
    reports.emplace(mode, std::move(report));
  }
  return reports;
}

}  // namespace mma

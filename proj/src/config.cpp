#include "mma/config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mma/rng.hpp"

namespace mma {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_double(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || errno == ERANGE)
    throw std::invalid_argument("bad numeric value: '" + s + "'");
  while (*end == ' ') ++end;
  if (*end != '\0') throw std::invalid_argument("trailing junk in numeric value: '" + s + "'");
  return v;
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  size_t b = s.find_last_not_of(" \t\r\n");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

uint64_t parse_u64(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 0);
  if (end == s.c_str() || errno == ERANGE)
    throw std::invalid_argument("bad integer value: '" + s + "'");
  while (*end == ' ') ++end;
  if (*end != '\0') throw std::invalid_argument("trailing junk in integer value: '" + s + "'");
  return static_cast<uint64_t>(v);
}

int parse_int(const std::string& s) { return static_cast<int>(parse_u64(s)); }

bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "no") return false;
  throw std::invalid_argument("bad boolean value: '" + s + "'");
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  if (out.empty()) out.push_back("");
  return out;
}

std::string join_u64(const std::vector<uint64_t>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace

void RunConfig::apply_kv(const std::string& key, const std::string& value) {
  if (key == "eps_v") attack.eps_v = parse_double(value);
  else if (key == "eps_t") attack.eps_t = parse_double(value);
  else if (key == "alpha_v") attack.alpha_v = parse_double(value);
  else if (key == "alpha_t") attack.alpha_t = parse_double(value);
  else if (key == "lambda") attack.lambda = parse_double(value);
  else if (key == "k_samples") attack.k_samples = parse_int(value);
  else if (key == "batch") attack.batch = parse_int(value);
  else if (key == "s_k") attack.tile_scale = parse_int(value);
  else if (key == "query_budget") attack.query_budget = parse_u64(value);
  else if (key == "theta") attack.theta = parse_double(value);
  else if (key == "sigma") attack.sigma = parse_double(value);
  else if (key == "seed") attack.seed = parse_u64(value);
  else if (key == "target") attack.target_text = value;
  else if (key == "levels") {
    attack.levels = parse_int(value);
    // Default mask tracks the level count unless overridden afterwards.
    attack.mask = ScaleMask::detail_only(attack.levels);
  } else if (key == "keep_approx") attack.mask.keep_approx = parse_bool(value);
  else if (key == "keep_detail") {
    attack.mask.keep_detail.clear();
    for (const std::string& s : split_csv(value))
      attack.mask.keep_detail.push_back(parse_bool(s));
  } else if (key == "level_weights") {
    attack.mask.level_weights.clear();
    for (const std::string& s : split_csv(value))
      attack.mask.level_weights.push_back(parse_double(s));
  } else if (key == "d_c") attack.common_dim = parse_int(value);
  else if (key == "targeted") attack.targeted = parse_bool(value);
  else if (key == "victim_seed") victim_seed = parse_u64(value);
  else if (key == "transfer_victim_seeds") {
    transfer_victim_seeds.clear();
    for (const std::string& s : split_csv(value))
      transfer_victim_seeds.push_back(parse_u64(s));
  } else if (key == "transfer_corpus_seeds") {
    transfer_corpus_seeds.clear();
    if (!value.empty())
      for (const std::string& s : split_csv(value))
        transfer_corpus_seeds.push_back(parse_u64(s));
  } else if (key == "tau") tau = parse_double(value);
  else if (key == "bank_seed") bank_seed = parse_u64(value);
  else if (key == "victim_width") victim_width = parse_int(value);
  else if (key == "corpus_seed") corpus_seed = parse_u64(value);
  else if (key == "n_images") n_images = parse_int(value);
  else if (key == "m_prompts") m_prompts = parse_int(value);
  else if (key == "image_size") image_size = parse_int(value);
  else if (key == "channels") channels = parse_int(value);
  else if (key == "train_image_frac") train_image_frac = parse_double(value);
  else if (key == "train_prompt_frac") train_prompt_frac = parse_double(value);
  else if (key == "oracle_mode") {
    if (value != "loss" && value != "text")
      throw std::invalid_argument("oracle_mode must be 'loss' or 'text'");
    oracle_mode = value;
  } else if (key == "workers") workers = parse_int(value);
  else if (key == "defense_kind") defense.kind = DefenseSpec::kind_from_string(value);
  else if (key == "defense_resize_lo") defense.resize_lo = parse_double(value);
  else if (key == "defense_resize_hi") defense.resize_hi = parse_double(value);
  else if (key == "defense_bits") defense.bit_depth = parse_int(value);
  else if (key == "defense_quality") defense.quality = parse_int(value);
  else if (key == "defense_seed") defense.seed = parse_u64(value);
  else throw std::invalid_argument("unknown config key: '" + key + "'");
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path.string());
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected key=value");
    try {
      cfg.apply_kv(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  attack.validate();
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (victim_width < 8) throw std::invalid_argument("victim_width too small");
  if (n_images < 2 || m_prompts < 2)
    throw std::invalid_argument("corpus needs at least 2 images and 2 prompts");
  if (!is_power_of_two(image_size) || image_size < 8)
    throw std::invalid_argument("image_size must be a power of two >= 8");
  if (channels != 1 && channels != 3) throw std::invalid_argument("channels must be 1 or 3");
  if (!(train_image_frac > 0.0 && train_image_frac < 1.0))
    throw std::invalid_argument("train_image_frac must be in (0,1)");
  if (!(train_prompt_frac > 0.0 && train_prompt_frac < 1.0))
    throw std::invalid_argument("train_prompt_frac must be in (0,1)");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (image_size % attack.tile_scale != 0)
    throw std::invalid_argument("image_size not divisible by s_k");
  defense.validate();
}

std::string RunConfig::snapshot() const {
  std::ostringstream os;
  os << "# run config snapshot\n";
  os << "eps_v=" << format_double(attack.eps_v) << "\n";
  os << "eps_t=" << format_double(attack.eps_t) << "\n";
  os << "alpha_v=" << format_double(attack.alpha_v) << "\n";
  os << "alpha_t=" << format_double(attack.alpha_t) << "\n";
  os << "lambda=" << format_double(attack.lambda) << "\n";
  os << "k_samples=" << attack.k_samples << "\n";
  os << "batch=" << attack.batch << "\n";
  os << "s_k=" << attack.tile_scale << "\n";
  os << "query_budget=" << attack.query_budget << "\n";
  os << "theta=" << format_double(attack.theta) << "\n";
  os << "sigma=" << format_double(attack.sigma) << "\n";
  os << "seed=" << attack.seed << "\n";
  os << "target=" << attack.target_text << "\n";
  os << "levels=" << attack.levels << "\n";
  os << "keep_approx=" << (attack.mask.keep_approx ? 1 : 0) << "\n";
  os << "keep_detail=";
  for (size_t i = 0; i < attack.mask.keep_detail.size(); ++i)
    os << (i ? "," : "") << (attack.mask.keep_detail[i] ? 1 : 0);
  os << "\n";
  os << "level_weights=";
  for (size_t i = 0; i < attack.mask.level_weights.size(); ++i)
    os << (i ? "," : "") << format_double(attack.mask.level_weights[i]);
  os << "\n";
  os << "d_c=" << attack.common_dim << "\n";
  os << "targeted=" << (attack.targeted ? 1 : 0) << "\n";
  os << "victim_seed=" << victim_seed << "\n";
  os << "transfer_victim_seeds=" << join_u64(transfer_victim_seeds) << "\n";
  os << "transfer_corpus_seeds=" << join_u64(transfer_corpus_seeds) << "\n";
  os << "tau=" << format_double(tau) << "\n";
  os << "bank_seed=" << bank_seed << "\n";
  os << "victim_width=" << victim_width << "\n";
  os << "corpus_seed=" << corpus_seed << "\n";
  os << "n_images=" << n_images << "\n";
  os << "m_prompts=" << m_prompts << "\n";
  os << "image_size=" << image_size << "\n";
  os << "channels=" << channels << "\n";
  os << "train_image_frac=" << format_double(train_image_frac) << "\n";
  os << "train_prompt_frac=" << format_double(train_prompt_frac) << "\n";
  os << "oracle_mode=" << oracle_mode << "\n";
  os << "workers=" << workers << "\n";
  os << "defense_kind=" << DefenseSpec::kind_to_string(defense.kind) << "\n";
  os << "defense_resize_lo=" << format_double(defense.resize_lo) << "\n";
  os << "defense_resize_hi=" << format_double(defense.resize_hi) << "\n";
  os << "defense_bits=" << defense.bit_depth << "\n";
  os << "defense_quality=" << defense.quality << "\n";
  os << "defense_seed=" << defense.seed << "\n";
  return os.str();
}

uint64_t RunConfig::hash() const { return fnv1a64(snapshot()); }

}  // namespace mma

#include "mma/artifact.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "mma/config.hpp"
#include "mma/errors.hpp"
#include "mma/tensor.hpp"

namespace mma {

namespace {

constexpr const char* kArtifactMagic = "MMA-ARTIFACT-1";
constexpr const char* kVictimMagic = "MMA-VICTIM-1";

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  size_t b = s.find_last_not_of(" \t\r\n");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

// Ordered key=value reader for the sidecar formats. Values keep embedded
// spaces; duplicate keys keep every occurrence (victim bank entries repeat).
std::vector<std::pair<std::string, std::string>> read_kv_file(
    const std::filesystem::path& path, const char* expected_magic) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty file: " + path.string());
  if (trim(line) != std::string("format=") + expected_magic)
    throw ParseError("bad magic in " + path.string() + " (expected " + expected_magic + ")");
  std::vector<std::pair<std::string, std::string>> kv;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("expected key=value in " + path.string() + ": " + line);
    kv.emplace_back(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return kv;
}

std::string require(const std::vector<std::pair<std::string, std::string>>& kv,
                    const std::string& key, const std::filesystem::path& path) {
  for (const auto& [k, v] : kv)
    if (k == key) return v;
  throw ParseError("missing key '" + key + "' in " + path.string());
}

std::vector<double> parse_hex_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item)));
  return out;
}

}  // namespace

void save_artifact(const std::filesystem::path& dir, const TextureUAP& uap,
                   const PromptDelta& delta, const ArtifactMetadata& meta) {
  std::filesystem::create_directories(dir);
  save_mmt1(dir / "uap.mmt1", uap.base_patch);

  std::ofstream os(dir / "artifact.txt");
  if (!os) throw std::runtime_error("cannot write artifact sidecar in " + dir.string());
  os << "format=" << kArtifactMagic << "\n";
  os << "patch_file=uap.mmt1\n";
  os << "eps_v=" << format_hexfloat(uap.eps_v) << "\n";
  os << "s_k=" << uap.tile_scale << "\n";
  os << "levels=" << uap.mask.levels() << "\n";
  os << "keep_approx=" << (uap.mask.keep_approx ? 1 : 0) << "\n";
  os << "keep_detail=";
  for (size_t i = 0; i < uap.mask.keep_detail.size(); ++i)
    os << (i ? "," : "") << (uap.mask.keep_detail[i] ? 1 : 0);
  os << "\n";
  os << "level_weights=";
  for (size_t i = 0; i < uap.mask.level_weights.size(); ++i)
    os << (i ? "," : "") << format_hexfloat(uap.mask.level_weights[i]);
  os << "\n";
  os << "eps_t=" << format_hexfloat(delta.eps_t) << "\n";
  os << "d_t=" << delta.vector.size() << "\n";
  os << "delta=";
  for (size_t i = 0; i < delta.vector.size(); ++i)
    os << (i ? "," : "") << format_hexfloat(delta.vector[i]);
  os << "\n";
  os << "seed=" << meta.seed << "\n";
  os << "victim_seed=" << meta.victim_seed << "\n";
  os << "queries_used=" << meta.queries_used << "\n";
  os << "target=" << meta.target << "\n";
  os << "config_hash=" << meta.config_hash << "\n";
  if (!os) throw std::runtime_error("artifact sidecar write failed in " + dir.string());
}

LoadedArtifact load_artifact(const std::filesystem::path& dir) {
  const std::filesystem::path sidecar = dir / "artifact.txt";
  const auto kv = read_kv_file(sidecar, kArtifactMagic);

  LoadedArtifact art;
  art.uap.base_patch = load_mmt1(dir / trim(require(kv, "patch_file", sidecar)));
  art.uap.eps_v = parse_double(trim(require(kv, "eps_v", sidecar)));
  art.uap.tile_scale = static_cast<int>(parse_double(trim(require(kv, "s_k", sidecar))));

  const int levels = static_cast<int>(parse_double(trim(require(kv, "levels", sidecar))));
  art.uap.mask.keep_approx = trim(require(kv, "keep_approx", sidecar)) == "1";
  art.uap.mask.keep_detail.clear();
  for (double v : parse_hex_list(require(kv, "keep_detail", sidecar)))
    art.uap.mask.keep_detail.push_back(v != 0.0);
  art.uap.mask.level_weights = parse_hex_list(require(kv, "level_weights", sidecar));
  if (art.uap.mask.levels() != levels ||
      static_cast<int>(art.uap.mask.level_weights.size()) != levels)
    throw ParseError("artifact mask level mismatch in " + sidecar.string());
  art.uap.mask.validate();

  art.delta.eps_t = parse_double(trim(require(kv, "eps_t", sidecar)));
  art.delta.vector = parse_hex_list(require(kv, "delta", sidecar));
  const size_t d_t = static_cast<size_t>(parse_double(trim(require(kv, "d_t", sidecar))));
  if (art.delta.vector.size() != d_t)
    throw ParseError("artifact delta length mismatch in " + sidecar.string());

  art.meta.seed = std::stoull(trim(require(kv, "seed", sidecar)));
  art.meta.victim_seed = std::stoull(trim(require(kv, "victim_seed", sidecar)));
  art.meta.queries_used = std::stoull(trim(require(kv, "queries_used", sidecar)));
  art.meta.target = require(kv, "target", sidecar);
  art.meta.config_hash = std::stoull(trim(require(kv, "config_hash", sidecar)));
  return art;
}

void save_victim_manifest(const std::filesystem::path& path, const ToyVictim& victim) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write victim manifest: " + path.string());
  os << "format=" << kVictimMagic << "\n";
  os << "victim_seed=" << victim.seed() << "\n";
  os << "tau=" << format_hexfloat(victim.tau()) << "\n";
  os << "hidden_width=" << victim.hidden_width() << "\n";
  os << "channels=" << victim.channels() << "\n";
  os << "bank_seed=" << victim.bank().bank_seed << "\n";
  os << "embedding_dim=" << victim.bank().embedding_dim << "\n";
  for (const CaptionEntry& e : victim.bank().entries)
    os << "entry=" << to_string(e.task) << "|" << e.caption << "\n";
}

ToyVictim load_victim_manifest(const std::filesystem::path& path) {
  const auto kv = read_kv_file(path, kVictimMagic);
  const uint64_t seed = std::stoull(trim(require(kv, "victim_seed", path)));
  const double tau = parse_double(trim(require(kv, "tau", path)));
  const int width = static_cast<int>(parse_double(trim(require(kv, "hidden_width", path))));
  const int channels = static_cast<int>(parse_double(trim(require(kv, "channels", path))));
  const uint64_t bank_seed = std::stoull(trim(require(kv, "bank_seed", path)));
  const int dim = static_cast<int>(parse_double(trim(require(kv, "embedding_dim", path))));

  std::vector<std::pair<std::string, TaskLabel>> items;
  for (const auto& [k, v] : kv) {
    if (k != "entry") continue;
    const size_t bar = v.find('|');
    if (bar == std::string::npos) throw ParseError("bad bank entry in " + path.string());
    items.emplace_back(v.substr(bar + 1), task_from_string(trim(v.substr(0, bar))));
  }
  return ToyVictim(seed, tau, CaptionBank::from_captions(bank_seed, dim, items), width,
                   channels);
}

}  // namespace mma

#include "mma/embedder.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

#include "mma/rng.hpp"

namespace mma {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) * std::sqrt(nb);
  return denom == 0.0 ? 0.0 : dot / denom;
}

EvalEmbedder::EvalEmbedder(uint64_t seed, int dim) : seed_(seed), dim_(dim) {
  if (dim < 8) throw std::invalid_argument("EvalEmbedder: dim too small");
}

namespace {

std::vector<std::string> tokenize_lower(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      if (!cur.empty()) tokens.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

}  // namespace

std::vector<double> EvalEmbedder::embed_uncached(const std::string& text) const {
  const std::vector<std::string> tokens = tokenize_lower(text);
  if (tokens.empty())
    throw std::invalid_argument("EvalEmbedder: empty text");

  // Feature multiset: word unigrams plus char trigrams over the
  // space-normalized sentence (leading/trailing space marks word boundaries).
  std::unordered_map<std::string, int> counts;
  std::string joined = " ";
  for (const std::string& t : tokens) {
    counts["w:" + t] += 1;
    joined += t;
    joined += ' ';
  }
  for (size_t i = 0; i + 3 <= joined.size(); ++i)
    counts["t:" + joined.substr(i, 3)] += 1;

  std::vector<double> e(dim_, 0.0);
  for (const auto& [feature, count] : counts) {
    RngStream col(seed_, feature);
    for (int d = 0; d < dim_; ++d) e[d] += count * col.normal(0.0, 1.0);
  }
  double norm = 0.0;
  for (double v : e) norm += v * v;
  norm = std::sqrt(norm);
  if (norm < 1e-12) {
    e.assign(dim_, 0.0);
    e[0] = 1.0;
    return e;
  }
  for (double& v : e) v /= norm;
  return e;
}

std::vector<double> EvalEmbedder::embed(const std::string& text) const {
  {
    std::lock_guard<std::mutex> lock(cache_mu_);
    auto it = cache_.find(text);
    if (it != cache_.end()) return it->second;
  }
  std::vector<double> e = embed_uncached(text);
  std::lock_guard<std::mutex> lock(cache_mu_);
  cache_.emplace(text, e);
  return e;
}

double EvalEmbedder::similarity(const std::string& a, const std::string& b) const {
  const std::vector<double> ea = embed(a);
  // Same string, same vector: report the cosine exactly.
  if (a == b) return 1.0;
  return cosine(ea, embed(b));
}

}  // namespace mma

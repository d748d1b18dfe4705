#include "mma/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mma/errors.hpp"
#include "mma/project.hpp"

namespace mma {

void AttackConfig::validate() const {
  if (!(eps_v > 0.0) || !(eps_t > 0.0))
    throw std::invalid_argument("AttackConfig: perturbation budgets must be positive");
  if (!(alpha_v > 0.0) || !(alpha_t > 0.0))
    throw std::invalid_argument("AttackConfig: step sizes must be positive");
  if (lambda < 0.0) throw std::invalid_argument("AttackConfig: lambda must be nonnegative");
  if (k_samples < 1) throw std::invalid_argument("AttackConfig: k_samples must be >= 1");
  if (batch < 1) throw std::invalid_argument("AttackConfig: batch must be >= 1");
  if (tile_scale != 1 && tile_scale != 2 && tile_scale != 4 && tile_scale != 8)
    throw std::invalid_argument("AttackConfig: tile_scale must be in {1,2,4,8}");
  if (query_budget == 0) throw std::invalid_argument("AttackConfig: query budget is zero");
  if (!(theta > 0.0 && theta < 1.0))
    throw std::invalid_argument("AttackConfig: theta must be in (0,1)");
  if (sigma < 0.0) throw std::invalid_argument("AttackConfig: sigma must be nonnegative");
  if (target_text.empty()) throw std::invalid_argument("AttackConfig: empty target text");
  if (levels < 1) throw std::invalid_argument("AttackConfig: levels must be >= 1");
  if (mask.levels() != levels)
    throw std::invalid_argument("AttackConfig: mask level count does not match levels");
  mask.validate();
  if (common_dim < 1) throw std::invalid_argument("AttackConfig: common_dim must be >= 1");
}

void AttackTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write trace: " + path.string());
  os << "iteration,mean_loss,r_hat,queries_used,uap_linf,delta_l2,dropped_max,"
        "text_step_skipped\n";
  os.precision(17);
  for (const TraceRow& r : rows)
    os << r.iteration << ',' << r.mean_loss << ',' << r.r_hat << ',' << r.queries_used << ','
       << r.uap_linf << ',' << r.delta_l2 << ',' << r.dropped_max << ','
       << (r.text_step_skipped ? 1 : 0) << '\n';
}

namespace {

std::vector<double> gaussian_matrix(uint64_t seed, const std::string& label, int rows,
                                    int cols) {
  RngStream rng(seed, label);
  const double std = 1.0 / std::sqrt(static_cast<double>(rows));
  std::vector<double> m(static_cast<size_t>(rows) * cols);
  for (double& v : m) v = rng.normal(0.0, std);
  return m;
}

void project_forward(const std::vector<double>& m, int rows, int cols,
                     const std::vector<double>& x, std::vector<double>& y) {
  y.assign(rows, 0.0);
  for (int r = 0; r < rows; ++r) {
    const double* row = m.data() + static_cast<size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

void project_back(const std::vector<double>& m, int rows, int cols,
                  const std::vector<double>& x, std::vector<double>& y) {
  y.assign(cols, 0.0);
  for (int r = 0; r < rows; ++r) {
    const double* row = m.data() + static_cast<size_t>(r) * cols;
    const double xv = x[r];
    for (int c = 0; c < cols; ++c) y[c] += row[c] * xv;
  }
}

bool normalize(std::vector<double>& v) {
  const double n = l2_norm(v);
  if (n < 1e-300) return false;
  for (double& x : v) x /= n;
  return true;
}

}  // namespace

GradientCoupler::GradientCoupler(uint64_t proj_seed, int common_dim, int image_dim,
                                 int text_dim)
    : common_dim_(common_dim), image_dim_(image_dim), text_dim_(text_dim),
      u_(gaussian_matrix(proj_seed, "coupler-image", common_dim, image_dim)),
      v_(gaussian_matrix(proj_seed, "coupler-text", common_dim, text_dim)) {
  if (common_dim < 1 || image_dim < 1 || text_dim < 1)
    throw std::invalid_argument("GradientCoupler: dimensions must be positive");
}

GradientCoupler::Coupling GradientCoupler::couple(const std::vector<double>& g_image,
                                                  const std::vector<double>& g_text) const {
  if (static_cast<int>(g_image.size()) != image_dim_ ||
      static_cast<int>(g_text.size()) != text_dim_)
    throw std::invalid_argument("GradientCoupler: gradient dimension mismatch");

  Coupling c;
  c.coupled_image.assign(image_dim_, 0.0);
  c.coupled_text.assign(text_dim_, 0.0);

  std::vector<double> pu, pv;
  project_forward(u_, common_dim_, image_dim_, g_image, pu);
  project_forward(v_, common_dim_, text_dim_, g_text, pv);
  const double nu = l2_norm(pu), nv = l2_norm(pv);
  if (nu < 1e-300 || nv < 1e-300) return c;  // degenerate: r_hat 0, zero couplings

  double dot = 0.0;
  for (int i = 0; i < common_dim_; ++i) dot += pu[i] * pv[i];
  c.r_hat = 1.0 - dot / (nu * nv);

  std::vector<double> pu_unit = pu, pv_unit = pv;
  for (double& x : pu_unit) x /= nu;
  for (double& x : pv_unit) x /= nv;
  project_back(u_, common_dim_, image_dim_, pv_unit, c.coupled_image);
  project_back(v_, common_dim_, text_dim_, pu_unit, c.coupled_text);
  return c;
}

GradientCoupler::Coupling cross_modal_alignment(const std::vector<double>& g_image,
                                                const std::vector<double>& g_text,
                                                uint64_t proj_seed, int common_dim) {
  GradientCoupler coupler(proj_seed, common_dim, static_cast<int>(g_image.size()),
                          static_cast<int>(g_text.size()));
  return coupler.couple(g_image, g_text);
}

StepOutcome joint_step(AttackState& state, const AttackConfig& config,
                       const GradientEstimate& g_image, const GradientEstimate& g_text,
                       const GradientCoupler::Coupling* coupling) {
  StepOutcome outcome;

  if (config.enable_image) {
    std::vector<double> d = g_image.direction;
    if (config.lambda != 0.0 && coupling != nullptr) {
      std::vector<double> c = coupling->coupled_image;
      const double gnorm = l2_norm(g_image.direction);
      if (gnorm > 0.0 && normalize(c))
        for (size_t i = 0; i < d.size(); ++i) d[i] += config.lambda * gnorm * c[i];
    }
    const float step = static_cast<float>(config.targeted ? config.alpha_v : -config.alpha_v);
    ImageTensor& patch = state.uap.base_patch;
    for (size_t i = 0; i < patch.data.size(); ++i) {
      const double s = d[i] > 0.0 ? 1.0 : (d[i] < 0.0 ? -1.0 : 0.0);
      patch.data[i] -= step * static_cast<float>(s);
    }
    patch = project_linf(std::move(patch), config.eps_v);
    state.uap = apply_texture_constraint(std::move(state.uap));
  }

  if (config.enable_text) {
    std::vector<double> d = g_text.direction;
    const double gnorm = l2_norm(d);
    if (gnorm <= 0.0) {
      outcome.text_step_skipped = true;
      return outcome;
    }
    if (config.lambda != 0.0 && coupling != nullptr) {
      std::vector<double> c = coupling->coupled_text;
      if (normalize(c))
        for (size_t i = 0; i < d.size(); ++i) d[i] += config.lambda * gnorm * c[i];
    }
    const double dnorm = l2_norm(d);
    if (dnorm <= 0.0) {
      outcome.text_step_skipped = true;
      return outcome;
    }
    const double step = config.targeted ? config.alpha_t : -config.alpha_t;
    for (size_t i = 0; i < state.delta.vector.size(); ++i)
      state.delta.vector[i] -= step * (d[i] / dnorm);
    state.delta.vector = project_l2(std::move(state.delta.vector), config.eps_t);
  }
  return outcome;
}

uint64_t iteration_query_cost(const AttackConfig& config) {
  // Both modalities are always estimated (frozen ones discard the estimate),
  // so the cost is the same in every ablation mode.
  return static_cast<uint64_t>(config.batch) * 2 *
         (static_cast<uint64_t>(config.k_samples) + 1);
}

AttackOutput run_attack(VictimOracle& oracle, const AttackCorpus& corpus,
                        const AttackConfig& config, const Executor& exec) {
  config.validate();
  corpus.validate();

  AttackOutput out;
  RngStream root(config.seed, "attack");

  AttackState state;
  RngStream uap_rng = root.fork("uap-init");
  state.uap = init_uap(uap_rng, config.eps_v, config.tile_scale, config.mask, kPatchSize,
                       corpus.images.empty() ? 3 : corpus.images.front().channels);
  RngStream delta_rng = root.fork("delta-init");
  state.delta = init_prompt_delta(delta_rng, config.eps_t, oracle.prompt_dim());
  if (!config.enable_image)
    for (float& v : state.uap.base_patch.data) v = 0.0f;
  if (!config.enable_text)
    for (double& v : state.delta.vector) v = 0.0;

  const uint64_t iter_cost = iteration_query_cost(config);
  if (oracle.ledger().remaining() < iter_cost)
    throw std::invalid_argument("run_attack: budget " +
                                std::to_string(oracle.ledger().remaining()) +
                                " cannot cover one iteration costing " +
                                std::to_string(iter_cost));

  GradientCoupler coupler(config.seed, config.common_dim,
                          static_cast<int>(state.uap.base_patch.size()),
                          oracle.prompt_dim());
  RngStream batch_rng = root.fork("batch");
  RngStream probe_rng = root.fork("probe");

  int iteration = 0;
  while (oracle.ledger().remaining() >= iter_cost) {
    std::vector<BatchPair> batch(static_cast<size_t>(config.batch));
    for (BatchPair& pair : batch) {
      pair.image_index = static_cast<int>(
          corpus.split.train_images[batch_rng.next_below(corpus.split.train_images.size())]);
      pair.prompt_index = static_cast<int>(
          corpus.split.train_prompts[batch_rng.next_below(corpus.split.train_prompts.size())]);
      pair.image = &corpus.images[pair.image_index];
      pair.prompt = &corpus.prompts[pair.prompt_index].text;
    }

    BatchEstimates est;
    try {
      est = batch_estimate(oracle, batch, state.uap, state.delta, config.target_text,
                           config.k_samples, probe_rng, exec);
    } catch (const BudgetExhausted&) {
      out.exhausted_midway = true;
      break;
    }

    const GradientCoupler::Coupling coupling =
        coupler.couple(est.image.direction, est.text.direction);
    const StepOutcome step = joint_step(state, config, est.image, est.text, &coupling);

    TraceRow row;
    row.iteration = iteration;
    row.mean_loss = est.mean_loss;
    row.r_hat = coupling.r_hat;
    row.queries_used = oracle.ledger().used();
    row.uap_linf = linf_norm(state.uap.base_patch);
    row.delta_l2 = l2_norm(state.delta.vector);
    row.dropped_max =
        max_abs_dropped(haar_dwt2(state.uap.base_patch, config.levels), config.mask);
    row.text_step_skipped = step.text_step_skipped;
    out.trace.rows.push_back(row);
    ++iteration;
  }

  out.uap = state.uap;
  out.delta = state.delta;
  out.queries_used = oracle.ledger().used();
  return out;
}

}  // namespace mma

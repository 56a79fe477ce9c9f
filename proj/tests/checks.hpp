#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "sirius/core_data.hpp"
#include "sirius/memory.hpp"
#include "sirius/policy_gmm.hpp"

namespace sirius::checks {

/// Per-index definition: a robot sample is preintv iff an intervention
/// segment starts within the next `ell` positions.
inline std::vector<ClassLabel> brute_force_relabel(const std::vector<ClassLabel>& in, int ell) {
  std::vector<ClassLabel> out = in;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] != ClassLabel::robot) continue;
    for (std::size_t j = i + 1; j <= i + static_cast<std::size_t>(ell) && j < in.size(); ++j) {
      if (in[j] == ClassLabel::intv && in[j - 1] != ClassLabel::intv) out[i] = ClassLabel::preintv;
    }
  }
  return out;
}

/// Robot labels with up to four random intv runs, length 1..100.
inline std::vector<ClassLabel> random_labels(std::mt19937_64& rng) {
  const std::size_t n = 1 + rng() % 100;
  std::vector<ClassLabel> labels(n, ClassLabel::robot);
  const int segments = static_cast<int>(rng() % 5);
  for (int s = 0; s < segments; ++s) {
    const std::size_t start = rng() % n;
    const std::size_t len = 1 + rng() % 15;
    for (std::size_t i = start; i < std::min(n, start + len); ++i) labels[i] = ClassLabel::intv;
  }
  return labels;
}

/// Weighted NLL evaluated sample by sample through log_prob only.
inline double reference_loss(const PolicyParams& params, std::span<const WeightedSample> batch) {
  double sum = 0.0;
  for (const auto& s : batch) sum += s.weight * log_prob(params, s.state, s.action);
  return -sum / static_cast<double>(batch.size());
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Central differences (step 1e-5) against the analytic gradient for one
/// random (theta, batch) draw. `stride` > 1 checks every stride-th
/// parameter plus every parameter of the output layer.
inline GradCheck gradient_check(const PolicyArch& arch, std::uint64_t seed, std::size_t stride = 1) {
  std::mt19937_64 rng(seed);
  PolicyParams params = init_params(arch, seed);
  std::normal_distribution<double> jitter(0.0, 0.3);
  for (double& v : params.theta) v += jitter(rng);
  // Keep log-stds away from the clamp, where the loss has a kink.
  const auto shapes = layer_shapes(arch);
  const LayerShape& head = shapes.back();
  const int first_log_std = arch.n_modes * (1 + arch.action_dim);
  for (int row = first_log_std; row < head.out; ++row) {
    params.theta[head.bias_offset + static_cast<std::size_t>(row)] = -1.0 + 0.5 * jitter(rng);
    for (int col = 0; col < head.in; ++col) {
      params.theta[head.weight_offset + static_cast<std::size_t>(row * head.in + col)] *= 0.1;
    }
  }

  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> w(0.0, 3.0);
  const std::size_t b = 2 + rng() % 7;
  std::vector<std::vector<double>> states(b), actions(b);
  std::vector<WeightedSample> batch;
  for (std::size_t i = 0; i < b; ++i) {
    states[i].resize(static_cast<std::size_t>(arch.input_dim));
    actions[i].resize(static_cast<std::size_t>(arch.action_dim));
    for (double& x : states[i]) x = u(rng);
    for (double& x : actions[i]) x = u(rng);
  }
  for (std::size_t i = 0; i < b; ++i) batch.push_back({states[i], actions[i], w(rng)});

  const LossAndGrad lg = weighted_nll_and_grad(params, batch);
  GradCheck out;
  const double h = 1e-5;
  for (std::size_t k = 0; k < params.theta.size(); ++k) {
    if (k % stride != 0 && k < head.weight_offset) continue;
    PolicyParams p = params;
    p.theta[k] = params.theta[k] + h;
    const double up = reference_loss(p, batch);
    p.theta[k] = params.theta[k] - h;
    const double down = reference_loss(p, batch);
    const double fd = (up - down) / (2.0 * h);
    const double rel = std::abs(fd - lg.grad[k]) / std::max(1e-6, std::abs(fd) + std::abs(lg.grad[k]));
    out.max_rel_error = std::max(out.max_rel_error, rel);
    ++out.checked;
  }
  return out;
}

/// A 1-D mixture with 1..5 modes inside the policy's clamp range.
inline GmmHead random_head_1d(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> logit(-2.0, 2.0), mean(-2.0, 2.0), log_std(kLogStdMin, 0.5);
  GmmHead head;
  head.n_modes = 1 + static_cast<int>(rng() % 5);
  head.action_dim = 1;
  for (int k = 0; k < head.n_modes; ++k) {
    head.logits.push_back(logit(rng));
    head.means.push_back(mean(rng));
    head.log_stds.push_back(log_std(rng));
  }
  return head;
}

/// Composite Simpson integral of exp(log density) over [-10, 10].
inline double quadrature_mass(const GmmHead& head, int intervals = 200'000) {
  const double lo = -10.0;
  const double hi = 10.0;
  const double h = (hi - lo) / intervals;
  double sum = 0.0;
  for (int i = 0; i <= intervals; ++i) {
    const double a = lo + i * h;
    const double f = std::exp(gmm_log_prob(head, std::span<const double>(&a, 1)));
    sum += f * (i == 0 || i == intervals ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0));
  }
  return sum * h / 3.0;
}

/// A robot episode of length `len` holding `intv` intervention samples.
inline Trajectory episode_with_intv(std::int64_t intv, std::int64_t len, std::int64_t seed) {
  const std::string codes = std::string(static_cast<std::size_t>(len - intv), 'r') +
                            std::string(static_cast<std::size_t>(intv), 'i');
  return testing::make_trajectory(codes, 1, seed);
}

/// Intervention counts left after inserting episodes with `counts` in order.
inline std::vector<std::int64_t> survivors(EvictionStrategy strategy, const std::vector<std::int64_t>& counts,
                                           std::size_t capacity, std::uint64_t seed = 0) {
  MemoryBuffer buffer(MemoryConfig{capacity, strategy, seed, true});
  for (std::size_t i = 0; i < counts.size(); ++i) {
    buffer.insert(episode_with_intv(counts[i], 40, static_cast<std::int64_t>(i)));
  }
  std::vector<std::int64_t> out;
  for (const auto& e : buffer.entries()) out.push_back(e.intv_count);
  return out;
}

}  // namespace sirius::checks

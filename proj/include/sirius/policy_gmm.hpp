#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace sirius {

inline constexpr double kLogStdMin = -3.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kInitialLogStd = -1.0;

struct PolicyArch {
  int input_dim = 7;
  std::vector<int> hidden{64, 64};
  int n_modes = 5;
  int action_dim = 3;

  void validate() const;
  /// Width of the output layer: K logits, K*D means, K*D log-stds.
  int head_dim() const { return n_modes * (1 + 2 * action_dim); }
  std::size_t param_count() const;
  bool operator==(const PolicyArch&) const = default;
};

void to_json(nlohmann::json& j, const PolicyArch& a);
void from_json(const nlohmann::json& j, PolicyArch& a);

/// Shape and offsets of one dense layer inside the flat parameter vector.
/// Weights are stored row-major (out x in), followed by the bias.
struct LayerShape {
  int in = 0;
  int out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

/// Hidden layers followed by the output head.
std::vector<LayerShape> layer_shapes(const PolicyArch& arch);

/// Tanh MLP with a Gaussian-mixture head, as a flat parameter vector.
struct PolicyParams {
  PolicyArch arch;
  std::vector<double> theta;

  bool operator==(const PolicyParams&) const = default;
};

/// Fan-in scaled uniform init; log-std rows start at exactly kInitialLogStd.
PolicyParams init_params(const PolicyArch& arch, std::uint64_t seed);

/// Mixture parameters for one state. log_stds are already clamped.
struct GmmHead {
  int n_modes = 0;
  int action_dim = 0;
  std::vector<double> logits;    // K
  std::vector<double> means;     // K*D, mode-major
  std::vector<double> log_stds;  // K*D, mode-major

  double mean(int k, int d) const { return means[static_cast<std::size_t>(k * action_dim + d)]; }
  double log_std(int k, int d) const { return log_stds[static_cast<std::size_t>(k * action_dim + d)]; }
};

GmmHead policy_head(const PolicyParams& params, std::span<const double> state);

/// log sum_k softmax(logits)_k prod_d N(a_d; mu_kd, sigma_kd), log-sum-exp stabilised.
double gmm_log_prob(const GmmHead& head, std::span<const double> action);
double log_prob(const PolicyParams& params, std::span<const double> state, std::span<const double> action);

/// Categorical mode draw then a diagonal normal draw, clamped to [-1, 1].
/// With `deterministic` the mean of the highest-weight mode is returned.
std::vector<double> sample_from_head(const GmmHead& head, std::mt19937_64& rng, bool deterministic);
std::vector<double> sample_action(const PolicyParams& params, std::span<const double> state,
                                  std::mt19937_64& rng, bool deterministic = false);

struct WeightedSample {
  std::span<const double> state;
  std::span<const double> action;
  double weight = 1.0;
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// L = -(1/b) sum_i w_i log pi(a_i | s_i) and its exact gradient.
LossAndGrad weighted_nll_and_grad(const PolicyParams& params, std::span<const WeightedSample> batch);

// Checkpoint: u64 little-endian byte length, arch JSON, then theta as
// little-endian IEEE-754 doubles in declaration order.
std::string encode_checkpoint(const PolicyParams& params);
PolicyParams decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params);
PolicyParams load_checkpoint(const std::filesystem::path& path);

}  // namespace sirius

#include "sirius/policy_gmm.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include "sirius/errors.hpp"

namespace sirius {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMatrix>;
using Weights = Eigen::Map<RowMatrix>;
using ConstVector = Eigen::Map<const Eigen::VectorXd>;
using Vector = Eigen::Map<Eigen::VectorXd>;

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

ConstWeights weights(const PolicyParams& p, const LayerShape& l) {
  return ConstWeights(p.theta.data() + l.weight_offset, l.out, l.in);
}

ConstVector bias(const PolicyParams& p, const LayerShape& l) {
  return ConstVector(p.theta.data() + l.bias_offset, l.out);
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

GmmHead split_head(const PolicyArch& arch, const double* out) {
  const int k = arch.n_modes;
  const int kd = arch.n_modes * arch.action_dim;
  GmmHead head;
  head.n_modes = k;
  head.action_dim = arch.action_dim;
  head.logits.assign(out, out + k);
  head.means.assign(out + k, out + k + kd);
  head.log_stds.resize(static_cast<std::size_t>(kd));
  for (int i = 0; i < kd; ++i) head.log_stds[i] = std::clamp(out[k + kd + i], kLogStdMin, kLogStdMax);
  return head;
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

void PolicyArch::validate() const {
  if (input_dim < 1 || n_modes < 1 || action_dim < 1) throw ConfigError("arch: dimensions must be >= 1");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("arch: hidden widths must be >= 1");
  }
}

std::size_t PolicyArch::param_count() const {
  const auto shapes = layer_shapes(*this);
  const auto& last = shapes.back();
  return last.bias_offset + static_cast<std::size_t>(last.out);
}

void to_json(nlohmann::json& j, const PolicyArch& a) {
  j = nlohmann::json{{"input_dim", a.input_dim}, {"hidden", a.hidden}, {"n_modes", a.n_modes},
                     {"action_dim", a.action_dim}};
}

void from_json(const nlohmann::json& j, PolicyArch& a) {
  PolicyArch d;
  a.input_dim = j.value("input_dim", d.input_dim);
  a.hidden = j.value("hidden", d.hidden);
  a.n_modes = j.value("n_modes", d.n_modes);
  a.action_dim = j.value("action_dim", d.action_dim);
}

std::vector<LayerShape> layer_shapes(const PolicyArch& arch) {
  std::vector<LayerShape> shapes;
  std::size_t offset = 0;
  int in = arch.input_dim;
  auto add = [&](int out) {
    LayerShape l{in, out, offset, offset + static_cast<std::size_t>(in) * static_cast<std::size_t>(out)};
    offset = l.bias_offset + static_cast<std::size_t>(out);
    shapes.push_back(l);
    in = out;
  };
  for (int h : arch.hidden) add(h);
  add(arch.head_dim());
  return shapes;
}

PolicyParams init_params(const PolicyArch& arch, std::uint64_t seed) {
  arch.validate();
  PolicyParams p{arch, std::vector<double>(arch.param_count())};
  std::mt19937_64 rng(seed);
  const auto shapes = layer_shapes(arch);
  for (const LayerShape& l : shapes) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    std::uniform_real_distribution<double> u(-bound, bound);
    const std::size_t end = l.bias_offset + static_cast<std::size_t>(l.out);
    for (std::size_t i = l.weight_offset; i < end; ++i) p.theta[i] = u(rng);
  }
  const LayerShape& head = shapes.back();
  const int first_log_std = arch.n_modes + arch.n_modes * arch.action_dim;
  for (int row = first_log_std; row < head.out; ++row) {
    std::fill_n(p.theta.begin() + static_cast<std::ptrdiff_t>(head.weight_offset + static_cast<std::size_t>(row * head.in)),
                head.in, 0.0);
    p.theta[head.bias_offset + static_cast<std::size_t>(row)] = kInitialLogStd;
  }
  return p;
}

GmmHead policy_head(const PolicyParams& params, std::span<const double> state) {
  if (state.size() != static_cast<std::size_t>(params.arch.input_dim)) {
    throw Error("state dimension " + std::to_string(state.size()) + " does not match policy input " +
                std::to_string(params.arch.input_dim));
  }
  Eigen::VectorXd x = ConstVector(state.data(), static_cast<Eigen::Index>(state.size()));
  const auto shapes = layer_shapes(params.arch);
  for (std::size_t i = 0; i + 1 < shapes.size(); ++i) {
    x = (weights(params, shapes[i]) * x + bias(params, shapes[i])).array().tanh().matrix();
  }
  const Eigen::VectorXd out = weights(params, shapes.back()) * x + bias(params, shapes.back());
  return split_head(params.arch, out.data());
}

double gmm_log_prob(const GmmHead& head, std::span<const double> action) {
  const double log_norm = log_sum_exp(head.logits);
  std::vector<double> joint(static_cast<std::size_t>(head.n_modes));
  for (int k = 0; k < head.n_modes; ++k) {
    double lp = head.logits[k] - log_norm;
    for (int d = 0; d < head.action_dim; ++d) {
      const double ls = head.log_std(k, d);
      const double z = (action[d] - head.mean(k, d)) * std::exp(-ls);
      lp += -0.5 * z * z - ls - kHalfLog2Pi;
    }
    joint[k] = lp;
  }
  return log_sum_exp(joint);
}

double log_prob(const PolicyParams& params, std::span<const double> state, std::span<const double> action) {
  return gmm_log_prob(policy_head(params, state), action);
}

std::vector<double> sample_from_head(const GmmHead& head, std::mt19937_64& rng, bool deterministic) {
  int mode = 0;
  if (deterministic) {
    mode = static_cast<int>(std::max_element(head.logits.begin(), head.logits.end()) - head.logits.begin());
  } else {
    const double log_norm = log_sum_exp(head.logits);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double cum = 0.0;
    mode = head.n_modes - 1;
    for (int k = 0; k < head.n_modes; ++k) {
      cum += std::exp(head.logits[k] - log_norm);
      if (u < cum) {
        mode = k;
        break;
      }
    }
  }
  std::vector<double> a(static_cast<std::size_t>(head.action_dim));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int d = 0; d < head.action_dim; ++d) {
    double v = head.mean(mode, d);
    if (!deterministic) v += std::exp(head.log_std(mode, d)) * normal(rng);
    a[d] = std::clamp(v, -1.0, 1.0);
  }
  return a;
}

std::vector<double> sample_action(const PolicyParams& params, std::span<const double> state,
                                  std::mt19937_64& rng, bool deterministic) {
  return sample_from_head(policy_head(params, state), rng, deterministic);
}

LossAndGrad weighted_nll_and_grad(const PolicyParams& params, std::span<const WeightedSample> batch) {
  if (batch.empty()) throw Error("weighted_nll_and_grad: empty batch");
  const PolicyArch& arch = params.arch;
  const auto shapes = layer_shapes(arch);
  const auto b = static_cast<Eigen::Index>(batch.size());
  const int K = arch.n_modes;
  const int D = arch.action_dim;
  const int KD = K * D;

  // Forward pass, keeping every activation.
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(shapes.size());
  Eigen::MatrixXd x(arch.input_dim, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    if (batch[i].state.size() != static_cast<std::size_t>(arch.input_dim) ||
        batch[i].action.size() != static_cast<std::size_t>(D)) {
      throw Error("weighted_nll_and_grad: sample dimension mismatch");
    }
    x.col(i) = ConstVector(batch[i].state.data(), arch.input_dim);
  }
  acts.push_back(std::move(x));
  for (std::size_t l = 0; l + 1 < shapes.size(); ++l) {
    Eigen::MatrixXd z = weights(params, shapes[l]) * acts.back();
    z.colwise() += bias(params, shapes[l]);
    acts.push_back(z.array().tanh().matrix());
  }
  Eigen::MatrixXd out = weights(params, shapes.back()) * acts.back();
  out.colwise() += bias(params, shapes.back());

  // Head: loss and dL/d(out).
  Eigen::MatrixXd g_out(out.rows(), b);
  double loss = 0.0;
  std::vector<double> log_pi(K), joint(K), z2(KD);
  for (Eigen::Index i = 0; i < b; ++i) {
    const double* o = out.col(i).data();
    const double* a = batch[i].action.data();
    const double coeff = -batch[i].weight / static_cast<double>(b);
    const double log_norm = log_sum_exp({o, static_cast<std::size_t>(K)});
    for (int k = 0; k < K; ++k) {
      double lp = o[k] - log_norm;
      log_pi[k] = lp;
      for (int d = 0; d < D; ++d) {
        const int j = k * D + d;
        const double ls = std::clamp(o[K + KD + j], kLogStdMin, kLogStdMax);
        const double z = (a[d] - o[K + j]) * std::exp(-ls);
        z2[j] = z * z;
        lp += -0.5 * z2[j] - ls - kHalfLog2Pi;
      }
      joint[k] = lp;
    }
    const double lp_total = log_sum_exp(joint);
    loss += coeff * lp_total;

    double* g = g_out.col(i).data();
    for (int k = 0; k < K; ++k) {
      const double resp = std::exp(joint[k] - lp_total);
      g[k] = coeff * (resp - std::exp(log_pi[k]));
      for (int d = 0; d < D; ++d) {
        const int j = k * D + d;
        const double raw_ls = o[K + KD + j];
        const double ls = std::clamp(raw_ls, kLogStdMin, kLogStdMax);
        g[K + j] = coeff * resp * (a[d] - o[K + j]) * std::exp(-2.0 * ls);
        const bool active = raw_ls > kLogStdMin && raw_ls < kLogStdMax;
        g[K + KD + j] = active ? coeff * resp * (z2[j] - 1.0) : 0.0;
      }
    }
  }

  // Backward pass.
  LossAndGrad result{loss, std::vector<double>(params.theta.size(), 0.0)};
  Eigen::MatrixXd g = std::move(g_out);
  for (std::size_t l = shapes.size(); l-- > 0;) {
    const LayerShape& s = shapes[l];
    if (l + 1 < shapes.size()) {
      g.array() *= 1.0 - acts[l + 1].array().square();
    }
    Weights(result.grad.data() + s.weight_offset, s.out, s.in).noalias() = g * acts[l].transpose();
    Vector(result.grad.data() + s.bias_offset, s.out) = g.rowwise().sum();
    if (l > 0) g = weights(params, s).transpose() * g;
  }
  return result;
}

std::string encode_checkpoint(const PolicyParams& params) {
  const std::string header = nlohmann::json(params.arch).dump();
  std::string out;
  out.reserve(8 + header.size() + 8 * params.theta.size());
  put_u64(out, header.size());
  out += header;
  for (double v : params.theta) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

PolicyParams decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 8) throw FormatError("checkpoint truncated");
  const std::uint64_t len = get_u64(bytes, 0);
  if (bytes.size() < 8 + len) throw FormatError("checkpoint header truncated");
  PolicyParams p;
  try {
    p.arch = nlohmann::json::parse(bytes.substr(8, len)).get<PolicyArch>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  p.arch.validate();
  const std::size_t n = p.arch.param_count();
  if (bytes.size() != 8 + len + 8 * n) throw FormatError("checkpoint parameter block has the wrong size");
  p.theta.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.theta[i] = std::bit_cast<double>(get_u64(bytes, 8 + len + 8 * i));
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  const std::string bytes = encode_checkpoint(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace sirius

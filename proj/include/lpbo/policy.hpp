#pragma once

// Learned population-based optimizer: a coordinate-wise two-layer LSTM with a
// stochastic (Bayesian) linear output layer and tanh-bounded outputs.
//
// Every (individual i, dimension j) pair owns its own recurrent state and is
// fed the pair (previous coordinate x_ij, normalized fitness rank of
// individual i). Parameters are shared across pairs, so their number depends
// only on hidden_size and num_layers.
//
// Flat parameter layout (stable, used by mutation and checkpoints):
//   for each layer l = 0..L-1:
//     W_l  row-major, 4H x (in_l + H), gate blocks ordered input, forget,
//          candidate, output; columns are [layer input, recurrent h]
//     b_l  4H, same gate order
//   output weight means      H + 1 (last entry multiplies the constant 1)
//   output weight log-sigmas H + 1

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lpbo/pomdp_env.hpp"
#include "lpbo/rng.hpp"

namespace lpbo {

struct PolicyConfig {
  int hidden_size = 32;
  int num_layers = 2;
  int lambda = 10;
  static constexpr int input_size = 2;
  static constexpr int output_size = 1;

  void validate() const {
    if (hidden_size < 1) throw std::invalid_argument("policy: hidden_size must be >= 1");
    if (num_layers < 1) throw std::invalid_argument("policy: num_layers must be >= 1");
    if (lambda < 2) throw std::invalid_argument("policy: lambda must be >= 2 (ranks need two individuals)");
  }
};

struct LstmLayer {
  Eigen::MatrixXd weights;  // 4H x (in + H)
  Eigen::VectorXd bias;     // 4H
};

struct PolicyParams {
  std::vector<LstmLayer> layers;
  Eigen::VectorXd weight_mean;       // H + 1
  Eigen::VectorXd weight_log_sigma;  // H + 1

  int hidden_size() const { return static_cast<int>(weight_mean.size()) - 1; }
};

inline std::size_t parameter_count(const PolicyConfig& c) {
  const std::size_t h = static_cast<std::size_t>(c.hidden_size);
  std::size_t n = 0;
  for (int l = 0; l < c.num_layers; ++l) {
    const std::size_t in = l == 0 ? PolicyConfig::input_size : h;
    n += 4 * h * (in + h) + 4 * h;
  }
  return n + 2 * (h + 1);
}

inline std::vector<double> flatten(const PolicyParams& p) {
  std::vector<double> out;
  for (const auto& layer : p.layers) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) out.push_back(layer.weights(r, c));
    out.insert(out.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
  out.insert(out.end(), p.weight_mean.data(), p.weight_mean.data() + p.weight_mean.size());
  out.insert(out.end(), p.weight_log_sigma.data(), p.weight_log_sigma.data() + p.weight_log_sigma.size());
  return out;
}

inline PolicyParams unflatten(const PolicyConfig& c, std::span<const double> flat) {
  c.validate();
  if (flat.size() != parameter_count(c))
    throw std::invalid_argument("unflatten: expected " + std::to_string(parameter_count(c)) + " parameters, got " +
                                std::to_string(flat.size()));
  const int h = c.hidden_size;
  PolicyParams p;
  std::size_t k = 0;
  for (int l = 0; l < c.num_layers; ++l) {
    const int in = l == 0 ? PolicyConfig::input_size : h;
    LstmLayer layer{Eigen::MatrixXd(4 * h, in + h), Eigen::VectorXd(4 * h)};
    for (int r = 0; r < 4 * h; ++r)
      for (int col = 0; col < in + h; ++col) layer.weights(r, col) = flat[k++];
    for (int r = 0; r < 4 * h; ++r) layer.bias(r) = flat[k++];
    p.layers.push_back(std::move(layer));
  }
  p.weight_mean.resize(h + 1);
  p.weight_log_sigma.resize(h + 1);
  for (int i = 0; i <= h; ++i) p.weight_mean(i) = flat[k++];
  for (int i = 0; i <= h; ++i) p.weight_log_sigma(i) = flat[k++];
  return p;
}

/// Flat indices of the forget-gate biases, which receive +1 after init.
inline std::vector<std::size_t> forget_bias_indices(const PolicyConfig& c) {
  const std::size_t h = static_cast<std::size_t>(c.hidden_size);
  std::vector<std::size_t> idx;
  std::size_t offset = 0;
  for (int l = 0; l < c.num_layers; ++l) {
    const std::size_t in = l == 0 ? PolicyConfig::input_size : h;
    const std::size_t bias_start = offset + 4 * h * (in + h);
    for (std::size_t i = 0; i < h; ++i) idx.push_back(bias_start + h + i);
    offset = bias_start + 4 * h;
  }
  return idx;
}

inline constexpr double kInitStddev = 0.5;
inline constexpr double kForgetBiasShift = 1.0;

/// Every scalar ~ N(0, 0.5) from the seeded stream, in flat-layout order; the
/// forget-gate biases are then shifted by +1.
inline PolicyParams init_params(const PolicyConfig& c, Seed seed) {
  c.validate();
  Rng rng(seed);
  std::vector<double> flat(parameter_count(c));
  for (auto& v : flat) v = rng.normal(0.0, kInitStddev);
  for (auto i : forget_bias_indices(c)) flat[i] += kForgetBiasShift;
  return unflatten(c, flat);
}

/// Ascending ranks (best = 0) scaled to [0, 1]; ties keep index order.
inline Eigen::VectorXd rank_transform(const Eigen::VectorXd& fitness) {
  const auto n = fitness.size();
  if (n < 2) throw std::invalid_argument("rank_transform: need at least two fitness values");
  if (!fitness.allFinite()) throw std::invalid_argument("rank_transform: non-finite fitness value");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fitness(a) < fitness(b); });
  Eigen::VectorXd rank(n);
  for (Eigen::Index k = 0; k < n; ++k) rank(order[static_cast<std::size_t>(k)]) = static_cast<double>(k) / (n - 1);
  return rank;
}

struct PolicyState {
  int lambda = 0;
  int dimension = 0;
  // Per layer: H x (lambda * d), column i * d + j belongs to pair (i, j).
  std::vector<Eigen::MatrixXd> hidden;
  std::vector<Eigen::MatrixXd> cell;
  Eigen::MatrixXd prev_point;  // lambda x d

  static PolicyState zeros(int hidden_size, int num_layers, int lambda, int dimension) {
    PolicyState s;
    s.lambda = lambda;
    s.dimension = dimension;
    const Eigen::Index slots = static_cast<Eigen::Index>(lambda) * dimension;
    s.hidden.assign(static_cast<std::size_t>(num_layers), Eigen::MatrixXd::Zero(hidden_size, slots));
    s.cell.assign(static_cast<std::size_t>(num_layers), Eigen::MatrixXd::Zero(hidden_size, slots));
    s.prev_point = Eigen::MatrixXd::Zero(lambda, dimension);
    return s;
  }
};

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

/// One policy step. Generation 0 (empty observation) restarts from zeroed
/// state with input (0, 0), which makes the initial population learned too.
/// Output weights are sampled afresh for every (i, j) from a stream indexed
/// by (step_seed, i, j).
inline ActionBatch act(const PolicyParams& params, PolicyState& state, const Observation& obs, Seed step_seed) {
  const int h = params.hidden_size();
  const int num_layers = static_cast<int>(params.layers.size());
  const int lambda = state.lambda;
  const int d = state.dimension;
  if (static_cast<int>(state.hidden.size()) != num_layers || (num_layers > 0 && state.hidden[0].rows() != h))
    throw std::invalid_argument("act: policy state does not match parameters");

  Eigen::VectorXd ranks;
  if (obs.empty()) {
    state = PolicyState::zeros(h, num_layers, lambda, d);
  } else {
    if (obs.prev_fitness.size() != lambda || obs.prev_points.rows() != lambda || obs.prev_points.cols() != d)
      throw std::invalid_argument("act: observation shape does not match policy state (" + std::to_string(lambda) +
                                  "x" + std::to_string(d) + ")");
    ranks = rank_transform(obs.prev_fitness);
  }

  ActionBatch out{Eigen::MatrixXd(lambda, d)};
  Eigen::VectorXd x(PolicyConfig::input_size + h);
  Eigen::VectorXd xs(2 * h);
  Eigen::VectorXd gates(4 * h);
  Eigen::VectorXd top(h + 1);
  const Eigen::VectorXd sigma = params.weight_log_sigma.array().exp();

  for (int i = 0; i < lambda; ++i) {
    for (int j = 0; j < d; ++j) {
      const Eigen::Index slot = static_cast<Eigen::Index>(i) * d + j;
      Eigen::VectorXd* input = nullptr;
      for (int l = 0; l < num_layers; ++l) {
        const auto& layer = params.layers[static_cast<std::size_t>(l)];
        auto hcol = state.hidden[static_cast<std::size_t>(l)].col(slot);
        auto ccol = state.cell[static_cast<std::size_t>(l)].col(slot);
        Eigen::VectorXd& in = l == 0 ? x : xs;
        if (l == 0) {
          in(0) = obs.empty() ? 0.0 : obs.prev_points(i, j);
          in(1) = obs.empty() ? 0.0 : ranks(i);
          in.tail(h) = hcol;
        } else {
          in.head(h) = input->head(h);
          in.tail(h) = hcol;
        }
        gates.noalias() = layer.weights * in;
        gates += layer.bias;
        for (int k = 0; k < h; ++k) {
          const double ig = detail::sigmoid(gates(k));
          const double fg = detail::sigmoid(gates(h + k));
          const double cand = std::tanh(gates(2 * h + k));
          const double og = detail::sigmoid(gates(3 * h + k));
          ccol(k) = fg * ccol(k) + ig * cand;
          hcol(k) = og * std::tanh(ccol(k));
        }
        top.head(h) = hcol;
        input = &top;
      }
      top(h) = 1.0;
      Rng noise(derive_seed(step_seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)));
      double z = 0.0;
      for (int k = 0; k <= h; ++k) {
        const double w = params.weight_mean(k) + sigma(k) * noise.normal();
        z += w * top(k);
      }
      out.points(i, j) = std::tanh(z);
    }
  }
  state.prev_point = out.points;
  return out;
}

/// Optimizer-interface adapter around shared, immutable parameters.
class PolicyOptimizer : public Optimizer {
 public:
  explicit PolicyOptimizer(std::shared_ptr<const PolicyParams> params) : params_(std::move(params)) {}

  void reset(int lambda, int dimension, Seed seed) override {
    if (lambda < 2) throw std::invalid_argument("policy optimizer: lambda must be >= 2");
    seed_ = seed;
    state_ = PolicyState::zeros(params_->hidden_size(), static_cast<int>(params_->layers.size()), lambda, dimension);
  }

  ActionBatch act(const Observation& obs) override {
    return lpbo::act(*params_, state_, obs, derive_seed(seed_, static_cast<std::uint64_t>(obs.generation)));
  }

 private:
  std::shared_ptr<const PolicyParams> params_;
  PolicyState state_;
  Seed seed_ = 0;
};

inline OptimizerFactory policy_factory(std::shared_ptr<const PolicyParams> params) {
  return [params = std::move(params)] { return std::make_unique<PolicyOptimizer>(params); };
}

}  // namespace lpbo

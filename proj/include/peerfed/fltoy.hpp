#pragma once

#include "peerfed/drbg.hpp"
#include "peerfed/errors.hpp"
#include "peerfed/rational.hpp"
#include "peerfed/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace peerfed::fltoy {

// Hidden ground truth over the shared public task set. Scoring never sees it;
// it exists only to generate client signals.
struct World {
  int k = 2;
  std::uint32_t m = 0;
  IVec prior_weights;
  SignalReport ground_truth;

  static World generate(int k, std::uint32_t m, const IVec& prior_weights, HashDrbg& rng);
};

enum class StrategyKind { truthful, constant, uniform_random, permuted, low_effort_truthful };

struct Strategy {
  StrategyKind kind = StrategyKind::truthful;
  Signal constant_label = 0;
  std::vector<Signal> permutation;  // image of each class, size k

  // "truthful", "low_effort_truthful", "uniform_random", "constant:2",
  // "permuted:120" (digit i is the image of class i).
  std::string label() const;
  static Strategy parse(const std::string& text, int k);
};

// Effort buys accuracy along an affine map; a_min defaults to chance level.
struct AccuracyModel {
  Rational a_min;
  Rational a_max;

  Rational accuracy(const Rational& effort) const {
    return a_min + effort * (a_max - a_min);
  }
};

struct ClientModel {
  ClientId id;
  Rational effort{1, 1};
  Strategy strategy;
};

// Per task: the true label with probability `accuracy` (exact Bernoulli on
// the rational), otherwise uniform over the other k-1 labels.
SignalReport draw_signals(const World& world, const Rational& accuracy, HashDrbg& rng);

SignalReport apply_strategy(const Strategy& strategy, const SignalReport& signals, int k,
                            HashDrbg& rng);

// ---------------------------------------------------------------------------
// Minimal FL trainer: multinomial logistic regression on synthetic Gaussian
// class clusters, aggregated by sample-count-weighted averaging.

template <class Scalar>
struct ModelParams {
  MatrixX<Scalar> weights;  // feature_dim x k
  std::uint64_t sample_count = 0;
};

// Sample-count-weighted mean of the updates: sum_i (|S_i|/|S|) W_i. Exact
// when Scalar carries exact division (Rational); the scalar type decides.
template <class Scalar>
ModelParams<Scalar> fedavg(const std::vector<ModelParams<Scalar>>& updates) {
  if (updates.empty()) {
    throw Error(errc::empty_update_list, "fedavg needs at least one update");
  }
  const auto rows = updates.front().weights.rows();
  const auto cols = updates.front().weights.cols();
  std::uint64_t total = 0;
  for (const auto& u : updates) {
    if (u.weights.rows() != rows || u.weights.cols() != cols) {
      throw Error(errc::dimension_mismatch, "fedavg updates must share one shape");
    }
    if (u.sample_count == 0) {
      throw Error(errc::invalid_config, "fedavg update with zero sample count");
    }
    total += u.sample_count;
  }
  MatrixX<Scalar> acc = MatrixX<Scalar>::Constant(rows, cols, Scalar(0));
  for (const auto& u : updates) {
    Scalar weight;
    if constexpr (std::is_same_v<Scalar, Rational>) {
      weight = Rational(static_cast<std::int64_t>(u.sample_count),
                        static_cast<std::int64_t>(total));
    } else {
      weight = static_cast<Scalar>(static_cast<double>(u.sample_count) /
                                   static_cast<double>(total));
    }
    acc += u.weights * weight;
  }
  return ModelParams<Scalar>{std::move(acc), total};
}

struct Dataset {
  DMat features;        // n x d
  SignalReport labels;  // n entries < k
};

struct TrainConfig {
  double step_size = 0.5;
};

double multinomial_loss(const ModelParams<double>& params, const Dataset& data);

// Full-batch gradient descent on the softmax cross-entropy. The step is
// halved within an epoch until the loss does not increase, so the loss is
// non-increasing across epochs; epochs = 0 returns init unchanged.
ModelParams<double> local_train(const Dataset& data, ModelParams<double> init, unsigned epochs,
                                const TrainConfig& cfg);

// Argmax of the class scores per row; ties break toward the lowest class.
SignalReport infer_labels(const ModelParams<double>& params, const DMat& features);

// Gaussian class clusters shared by all clients, plus the feature rows of the
// public task set aligned with the world's ground truth.
struct FeatureWorld {
  DMat class_means;       // k x d
  double noise = 1.0;
  DMat public_features;   // m x d
};

FeatureWorld generate_features(const World& world, int feature_dim, double noise, HashDrbg& rng);

Dataset sample_local_data(const FeatureWorld& features, const World& world, std::size_t n,
                          HashDrbg& rng);

}  // namespace peerfed::fltoy

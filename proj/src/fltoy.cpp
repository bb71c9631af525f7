#include "peerfed/fltoy.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace peerfed::fltoy {

World World::generate(int k, std::uint32_t m, const IVec& prior_weights, HashDrbg& rng) {
  if (k < 2 || k > 256) throw Error(errc::invalid_config, "k must be in [2, 256]");
  if (prior_weights.size() != k || (prior_weights.array() < 0).any() || prior_weights.sum() <= 0) {
    throw Error(errc::invalid_config, "prior weights must be non-negative with positive sum");
  }
  World world;
  world.k = k;
  world.m = m;
  world.prior_weights = prior_weights;
  world.ground_truth.resize(m);
  const auto total = static_cast<std::uint64_t>(prior_weights.sum());
  for (std::uint32_t t = 0; t < m; ++t) {
    std::uint64_t r = rng.uniform_below(total);
    int label = 0;
    std::uint64_t cumulative = 0;
    for (int c = 0; c < k; ++c) {
      cumulative += static_cast<std::uint64_t>(prior_weights[c]);
      if (r < cumulative) {
        label = c;
        break;
      }
    }
    world.ground_truth[t] = static_cast<Signal>(label);
  }
  return world;
}

std::string Strategy::label() const {
  switch (kind) {
    case StrategyKind::truthful: return "truthful";
    case StrategyKind::low_effort_truthful: return "low_effort_truthful";
    case StrategyKind::uniform_random: return "uniform_random";
    case StrategyKind::constant: return "constant:" + std::to_string(constant_label);
    case StrategyKind::permuted: {
      std::string digits;
      for (Signal s : permutation) digits += static_cast<char>('0' + s);
      return "permuted:" + digits;
    }
  }
  return "unknown";
}

Strategy Strategy::parse(const std::string& text, int k) {
  Strategy s;
  if (text == "truthful") {
    s.kind = StrategyKind::truthful;
    return s;
  }
  if (text == "low_effort_truthful") {
    s.kind = StrategyKind::low_effort_truthful;
    return s;
  }
  if (text == "uniform_random") {
    s.kind = StrategyKind::uniform_random;
    return s;
  }
  if (text.rfind("constant:", 0) == 0) {
    int label = std::stoi(text.substr(9));
    if (label < 0 || label >= k) {
      throw Error(errc::invalid_config, "constant label out of range in " + text);
    }
    s.kind = StrategyKind::constant;
    s.constant_label = static_cast<Signal>(label);
    return s;
  }
  if (text.rfind("permuted:", 0) == 0) {
    std::string digits = text.substr(9);
    if (k > 10 || static_cast<int>(digits.size()) != k) {
      throw Error(errc::invalid_config, "permutation digits must cover all k <= 10 classes");
    }
    std::set<char> seen;
    for (char c : digits) {
      if (c < '0' || c >= '0' + k || !seen.insert(c).second) {
        throw Error(errc::invalid_config, "invalid permutation " + text);
      }
      s.permutation.push_back(static_cast<Signal>(c - '0'));
    }
    s.kind = StrategyKind::permuted;
    return s;
  }
  throw Error(errc::invalid_config, "unknown strategy " + text);
}

SignalReport draw_signals(const World& world, const Rational& accuracy, HashDrbg& rng) {
  if (accuracy * Rational(world.k) < Rational(1) || accuracy > Rational(1)) {
    throw Error(errc::invalid_accuracy, "accuracy " + accuracy.str() + " outside [1/k, 1]");
  }
  SignalReport signals(world.m);
  const auto num = static_cast<std::uint64_t>(accuracy.num());
  const auto den = static_cast<std::uint64_t>(accuracy.den());
  for (std::uint32_t t = 0; t < world.m; ++t) {
    Signal truth = world.ground_truth[t];
    if (rng.bernoulli(num, den)) {
      signals[t] = truth;
    } else {
      auto other = static_cast<Signal>(rng.uniform_below(static_cast<std::uint64_t>(world.k - 1)));
      signals[t] = other < truth ? other : static_cast<Signal>(other + 1);
    }
  }
  return signals;
}

SignalReport apply_strategy(const Strategy& strategy, const SignalReport& signals, int k,
                            HashDrbg& rng) {
  switch (strategy.kind) {
    case StrategyKind::truthful:
    case StrategyKind::low_effort_truthful:
      return signals;
    case StrategyKind::constant:
      return SignalReport(signals.size(), strategy.constant_label);
    case StrategyKind::uniform_random: {
      SignalReport report(signals.size());
      for (auto& s : report) {
        s = static_cast<Signal>(rng.uniform_below(static_cast<std::uint64_t>(k)));
      }
      return report;
    }
    case StrategyKind::permuted: {
      SignalReport report(signals.size());
      for (std::size_t i = 0; i < signals.size(); ++i) {
        report[i] = strategy.permutation.at(signals[i]);
      }
      return report;
    }
  }
  throw Error(errc::invalid_config, "unhandled strategy kind");
}

namespace {

DMat softmax_rows(const DMat& scores) {
  DMat shifted = scores.colwise() - scores.rowwise().maxCoeff();
  DMat expd = shifted.array().exp().matrix();
  return expd.array().colwise() / expd.rowwise().sum().array();
}

}  // namespace

double multinomial_loss(const ModelParams<double>& params, const Dataset& data) {
  const auto n = data.features.rows();
  DMat probs = softmax_rows(data.features * params.weights);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    loss -= std::log(std::max(probs(i, data.labels[static_cast<std::size_t>(i)]), 1e-300));
  }
  return loss / static_cast<double>(n);
}

ModelParams<double> local_train(const Dataset& data, ModelParams<double> init, unsigned epochs,
                                const TrainConfig& cfg) {
  const auto n = data.features.rows();
  if (n == 0) throw Error(errc::empty_local_data, "local training set is empty");
  if (data.labels.size() != static_cast<std::size_t>(n)) {
    throw Error(errc::dimension_mismatch, "feature rows and labels disagree");
  }
  if (init.weights.rows() != data.features.cols()) {
    throw Error(errc::dimension_mismatch, "init weights do not match feature dim");
  }
  const auto k = init.weights.cols();

  DMat onehot = DMat::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    onehot(i, data.labels[static_cast<std::size_t>(i)]) = 1.0;
  }

  ModelParams<double> model = std::move(init);
  model.sample_count = static_cast<std::uint64_t>(n);
  double loss = multinomial_loss(model, data);
  for (unsigned epoch = 0; epoch < epochs; ++epoch) {
    DMat probs = softmax_rows(data.features * model.weights);
    DMat grad = data.features.transpose() * (probs - onehot) / static_cast<double>(n);
    double step = cfg.step_size;
    for (int attempt = 0; attempt < 40; ++attempt) {
      ModelParams<double> candidate{model.weights - step * grad, model.sample_count};
      double candidate_loss = multinomial_loss(candidate, data);
      if (candidate_loss <= loss) {
        model = std::move(candidate);
        loss = candidate_loss;
        break;
      }
      step *= 0.5;
    }
  }
  return model;
}

SignalReport infer_labels(const ModelParams<double>& params, const DMat& features) {
  if (features.cols() != params.weights.rows()) {
    throw Error(errc::dimension_mismatch, "features do not match model dimension");
  }
  DMat scores = features * params.weights;
  SignalReport labels(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, best)) best = static_cast<int>(c);
    }
    labels[static_cast<std::size_t>(i)] = static_cast<Signal>(best);
  }
  return labels;
}

FeatureWorld generate_features(const World& world, int feature_dim, double noise, HashDrbg& rng) {
  if (feature_dim < 1) throw Error(errc::invalid_config, "feature_dim must be positive");
  FeatureWorld fw;
  fw.noise = noise;
  fw.class_means = DMat(world.k, feature_dim);
  for (int c = 0; c < world.k; ++c) {
    for (int d = 0; d < feature_dim; ++d) fw.class_means(c, d) = 2.0 * rng.gaussian();
  }
  fw.public_features = DMat(world.m, feature_dim);
  for (std::uint32_t t = 0; t < world.m; ++t) {
    for (int d = 0; d < feature_dim; ++d) {
      fw.public_features(t, d) = fw.class_means(world.ground_truth[t], d) + noise * rng.gaussian();
    }
  }
  return fw;
}

Dataset sample_local_data(const FeatureWorld& features, const World& world, std::size_t n,
                          HashDrbg& rng) {
  if (n == 0) throw Error(errc::empty_local_data, "local dataset size must be positive");
  const auto total = static_cast<std::uint64_t>(world.prior_weights.sum());
  Dataset data;
  data.features = DMat(static_cast<Eigen::Index>(n), features.class_means.cols());
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t r = rng.uniform_below(total);
    int label = 0;
    std::uint64_t cumulative = 0;
    for (int c = 0; c < world.k; ++c) {
      cumulative += static_cast<std::uint64_t>(world.prior_weights[c]);
      if (r < cumulative) {
        label = c;
        break;
      }
    }
    data.labels[i] = static_cast<Signal>(label);
    for (Eigen::Index d = 0; d < features.class_means.cols(); ++d) {
      data.features(static_cast<Eigen::Index>(i), d) =
          features.class_means(label, d) + features.noise * rng.gaussian();
    }
  }
  return data;
}

}  // namespace peerfed::fltoy

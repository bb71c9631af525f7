#include "peerfed/fltoy.hpp"

#include "peerfed/drbg.hpp"
#include "peerfed/errors.hpp"
#include "peerfed/hashing.hpp"
#include "peerfed/mechanism.hpp"

#include <doctest.h>

#include <cmath>

using namespace peerfed;
using namespace peerfed::fltoy;

namespace {

HashDrbg test_rng(const char* tag) {
  return HashDrbg(sha256(as_bytes(std::string("fltoy-tests/") + tag)));
}

World uniform_world(int k, std::uint32_t m, const char* tag) {
  auto rng = test_rng(tag);
  return World::generate(k, m, IVec::Ones(k), rng);
}

}  // namespace

TEST_CASE("draw_signals endpoints and determinism") {
  World world = uniform_world(3, 200, "draw");

  SUBCASE("perfect accuracy copies ground truth") {
    auto rng = test_rng("draw-perfect");
    CHECK(draw_signals(world, Rational(1), rng) == world.ground_truth);
  }

  SUBCASE("same seed, same signals") {
    auto r1 = test_rng("draw-repeat");
    auto r2 = test_rng("draw-repeat");
    CHECK(draw_signals(world, Rational(17, 20), r1) == draw_signals(world, Rational(17, 20), r2));
  }

  SUBCASE("chance-level accuracy is independent of the truth") {
    // a = 1/k makes the signal marginal uniform; empirical accuracy over a
    // large world stays within 3 SE of 1/k.
    World big = uniform_world(3, 30000, "draw-chance");
    auto rng = test_rng("draw-chance-signals");
    auto signals = draw_signals(big, Rational(1, 3), rng);
    std::size_t hits = 0;
    for (std::uint32_t t = 0; t < big.m; ++t) {
      if (signals[t] == big.ground_truth[t]) ++hits;
    }
    double p = static_cast<double>(hits) / big.m;
    double se = std::sqrt((1.0 / 3) * (2.0 / 3) / big.m);
    CHECK(std::abs(p - 1.0 / 3) <= 3 * se);
  }

  SUBCASE("empirical accuracy tracks a(e)") {
    World big = uniform_world(4, 40000, "draw-marginal");
    AccuracyModel model{Rational(1, 4), Rational(9, 10)};
    Rational effort(1, 2);
    Rational a = model.accuracy(effort);  // 1/4 + 1/2 * 13/20 = 23/40
    CHECK(a == Rational(23, 40));
    auto rng = test_rng("draw-marginal-signals");
    auto signals = draw_signals(big, a, rng);
    std::size_t hits = 0;
    for (std::uint32_t t = 0; t < big.m; ++t) {
      if (signals[t] == big.ground_truth[t]) ++hits;
    }
    double p = static_cast<double>(hits) / big.m;
    double expect = a.to_double();
    double se = std::sqrt(expect * (1 - expect) / big.m);
    CHECK(std::abs(p - expect) <= 3 * se);
  }

  SUBCASE("accuracy outside [1/k, 1] is rejected") {
    auto rng = test_rng("draw-bad");
    CHECK_THROWS_WITH_AS(draw_signals(world, Rational(1, 4), rng),
                         doctest::Contains("InvalidAccuracy"), Error);
  }
}

TEST_CASE("apply_strategy") {
  auto rng = test_rng("strategy");
  SignalReport signals{0, 1, 2};

  CHECK(apply_strategy(Strategy{}, signals, 3, rng) == signals);

  Strategy constant{StrategyKind::constant, 1, {}};
  CHECK(apply_strategy(constant, signals, 3, rng) == SignalReport{1, 1, 1});

  Strategy swap01{StrategyKind::permuted, 0, {1, 0}};
  CHECK(apply_strategy(swap01, {0, 1, 0}, 2, rng) == SignalReport{1, 0, 1});

  Strategy noise{StrategyKind::uniform_random, 0, {}};
  auto r1 = test_rng("strategy-noise");
  auto r2 = test_rng("strategy-noise");
  CHECK(apply_strategy(noise, signals, 3, r1) == apply_strategy(noise, signals, 3, r2));
}

TEST_CASE("strategy parse and label round trip") {
  for (const char* text : {"truthful", "low_effort_truthful", "uniform_random", "constant:2",
                           "permuted:120"}) {
    CHECK(Strategy::parse(text, 3).label() == text);
  }
  CHECK_THROWS_AS(Strategy::parse("constant:9", 3), Error);
  CHECK_THROWS_AS(Strategy::parse("permuted:100", 3), Error);   // not a permutation
  CHECK_THROWS_AS(Strategy::parse("permuted:12", 3), Error);    // wrong length
  CHECK_THROWS_AS(Strategy::parse("sideways", 3), Error);
}

TEST_CASE("uniform_random reports are independent of signals (chi-square)") {
  World world = uniform_world(3, 30000, "chi");
  auto signal_rng = test_rng("chi-signals");
  auto signals = draw_signals(world, Rational(17, 20), signal_rng);
  auto report_rng = test_rng("chi-reports");
  auto report = apply_strategy(Strategy{StrategyKind::uniform_random, 0, {}}, signals, 3,
                               report_rng);

  double table[3][3] = {};
  double row[3] = {}, col[3] = {};
  for (std::uint32_t t = 0; t < world.m; ++t) {
    table[signals[t]][report[t]] += 1;
    row[signals[t]] += 1;
    col[report[t]] += 1;
  }
  double chi2 = 0;
  for (int x = 0; x < 3; ++x) {
    for (int y = 0; y < 3; ++y) {
      double expected = row[x] * col[y] / world.m;
      chi2 += (table[x][y] - expected) * (table[x][y] - expected) / expected;
    }
  }
  // df = (k-1)^2 = 4; 99% critical value.
  CHECK(chi2 < 13.277);
}

TEST_CASE("empirical joint of two truthful clients matches the analytic joint") {
  World world = uniform_world(3, 30000, "joint");
  auto ra_rng = test_rng("joint-a");
  auto rb_rng = test_rng("joint-b");
  auto ra = draw_signals(world, Rational(17, 20), ra_rng);
  auto rb = draw_signals(world, Rational(17, 20), rb_rng);

  auto analytic = mechanism::build_joint_from_model(IVec::Ones(3), Rational(17, 20),
                                                    Rational(17, 20));
  IMat counts = IMat::Zero(3, 3);
  for (std::uint32_t t = 0; t < world.m; ++t) counts(ra[t], rb[t]) += 1;

  for (int x = 0; x < 3; ++x) {
    for (int y = 0; y < 3; ++y) {
      double expected = static_cast<double>(analytic.counts(x, y)) / analytic.total;
      double observed = static_cast<double>(counts(x, y)) / world.m;
      double se = std::sqrt(expected * (1 - expected) / world.m);
      CAPTURE(x);
      CAPTURE(y);
      CHECK(std::abs(observed - expected) <= 3 * se);
    }
  }
}

TEST_CASE("fedavg on exact rationals") {
  using RMat = MatrixX<Rational>;

  SUBCASE("single update is returned unchanged") {
    RMat w(1, 1);
    w(0, 0) = Rational(7, 3);
    auto out = fedavg<Rational>({{w, 5}});
    CHECK(out.weights(0, 0) == Rational(7, 3));
    CHECK(out.sample_count == 5);
  }

  SUBCASE("weighted mean example") {
    RMat w1(1, 1), w2(1, 1);
    w1(0, 0) = Rational(0);
    w2(0, 0) = Rational(4);
    auto out = fedavg<Rational>({{w1, 1}, {w2, 3}});
    CHECK(out.weights(0, 0) == Rational(3));
    CHECK(out.sample_count == 4);
  }

  SUBCASE("identical updates average to themselves") {
    RMat w(2, 2);
    w << Rational(1, 2), Rational(-3, 7), Rational(0), Rational(5);
    auto out = fedavg<Rational>({{w, 2}, {w, 9}, {w, 1}});
    CHECK(out.weights == w);
  }

  SUBCASE("errors") {
    CHECK_THROWS_WITH_AS(fedavg<Rational>({}), doctest::Contains("EmptyUpdateList"), Error);
    RMat a(1, 1), b(2, 1);
    a.setConstant(Rational(1));
    b.setConstant(Rational(1));
    CHECK_THROWS_WITH_AS(fedavg<Rational>({{a, 1}, {b, 1}}),
                         doctest::Contains("DimensionMismatch"), Error);
  }

  SUBCASE("doubling every sample count changes nothing") {
    auto rng = test_rng("fedavg-double");
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<ModelParams<Rational>> updates, doubled;
      int n = 1 + static_cast<int>(rng.uniform_below(5));
      int d = 1 + static_cast<int>(rng.uniform_below(4));
      for (int i = 0; i < n; ++i) {
        RMat w(d, 1);
        for (int r = 0; r < d; ++r) {
          w(r, 0) = Rational(static_cast<std::int64_t>(rng.uniform_below(41)) - 20,
                             1 + static_cast<std::int64_t>(rng.uniform_below(12)));
        }
        std::uint64_t count = 1 + rng.uniform_below(50);
        updates.push_back({w, count});
        doubled.push_back({w, count * 2});
      }
      CHECK(fedavg<Rational>(updates).weights == fedavg<Rational>(doubled).weights);
    }
  }
}

TEST_CASE("fedavg on doubles is a convex combination") {
  auto rng = test_rng("fedavg-convex");
  for (int trial = 0; trial < 100; ++trial) {
    int n = 1 + static_cast<int>(rng.uniform_below(6));
    int d = 1 + static_cast<int>(rng.uniform_below(5));
    std::vector<ModelParams<double>> updates;
    for (int i = 0; i < n; ++i) {
      DMat w(d, 2);
      for (int r = 0; r < d; ++r) {
        for (int c = 0; c < 2; ++c) w(r, c) = rng.uniform01() * 10 - 5;
      }
      updates.push_back({w, 1 + rng.uniform_below(100)});
    }
    auto out = fedavg<double>(updates);
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < 2; ++c) {
        double lo = updates[0].weights(r, c), hi = lo;
        for (const auto& u : updates) {
          lo = std::min(lo, u.weights(r, c));
          hi = std::max(hi, u.weights(r, c));
        }
        CHECK(out.weights(r, c) >= lo - 1e-12);
        CHECK(out.weights(r, c) <= hi + 1e-12);
      }
    }
  }
}

namespace {

// Test-side loss oracle: direct softmax cross entropy with plain loops.
double loss_oracle(const DMat& weights, const Dataset& data) {
  double total = 0;
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    std::vector<double> scores(static_cast<std::size_t>(weights.cols()), 0.0);
    double max_score = -1e300;
    for (Eigen::Index c = 0; c < weights.cols(); ++c) {
      double s = 0;
      for (Eigen::Index d = 0; d < weights.rows(); ++d) {
        s += data.features(i, d) * weights(d, c);
      }
      scores[static_cast<std::size_t>(c)] = s;
      max_score = std::max(max_score, s);
    }
    double z = 0;
    for (double s : scores) z += std::exp(s - max_score);
    total -= (scores[data.labels[static_cast<std::size_t>(i)]] - max_score - std::log(z));
  }
  return total / static_cast<double>(data.features.rows());
}

}  // namespace

TEST_CASE("local_train") {
  Dataset data;
  data.features = DMat(2, 2);
  data.features << 1.0, 0.0, 0.0, 1.0;
  data.labels = {0, 1};
  ModelParams<double> init{DMat::Zero(2, 2), 2};

  SUBCASE("zero epochs returns init unchanged") {
    auto out = local_train(data, init, 0, {});
    CHECK(out.weights == DMat::Zero(2, 2));
  }

  SUBCASE("training strictly reduces the loss on a separable set") {
    double before = loss_oracle(init.weights, data);
    auto out = local_train(data, init, 100, {});
    double after = loss_oracle(out.weights, data);
    CHECK(after < before);
    CHECK(multinomial_loss(out, data) == doctest::Approx(after).epsilon(1e-9));
  }

  SUBCASE("loss is non-increasing epoch by epoch") {
    ModelParams<double> model = init;
    double last = loss_oracle(model.weights, data);
    for (int epoch = 0; epoch < 20; ++epoch) {
      model = local_train(data, model, 1, {});
      double now = loss_oracle(model.weights, data);
      CHECK(now <= last + 1e-12);
      last = now;
    }
  }

  SUBCASE("identical data and init give identical outputs") {
    auto o1 = local_train(data, init, 25, {});
    auto o2 = local_train(data, init, 25, {});
    CHECK(o1.weights == o2.weights);
  }

  SUBCASE("empty data rejected") {
    Dataset empty;
    empty.features = DMat(0, 2);
    CHECK_THROWS_WITH_AS(local_train(empty, init, 1, {}), doctest::Contains("EmptyLocalData"),
                         Error);
  }
}

TEST_CASE("infer_labels tie-break and determinism") {
  SUBCASE("zero weights predict class 0 everywhere") {
    ModelParams<double> zero{DMat::Zero(3, 4), 1};
    DMat features(5, 3);
    features.setRandom();
    auto labels = infer_labels(zero, features);
    for (Signal s : labels) CHECK(s == 0);
  }

  SUBCASE("higher score wins") {
    ModelParams<double> params{DMat(1, 2), 1};
    params.weights << 1.0, -1.0;
    DMat features(1, 1);
    features << 2.0;  // scores (2, -2)
    CHECK(infer_labels(params, features) == SignalReport{0});
    features << -2.0;  // scores (-2, 2)
    CHECK(infer_labels(params, features) == SignalReport{1});
  }

  SUBCASE("dimension mismatch") {
    ModelParams<double> params{DMat::Zero(3, 2), 1};
    DMat features(1, 2);
    features.setZero();
    CHECK_THROWS_AS(infer_labels(params, features), Error);
  }
}

TEST_CASE("end-to-end logistic path learns separable clusters") {
  World world = uniform_world(3, 60, "logistic-world");
  auto feature_rng = test_rng("logistic-features");
  FeatureWorld fw = generate_features(world, 6, 0.3, feature_rng);

  auto data_rng = test_rng("logistic-data");
  Dataset data = sample_local_data(fw, world, 120, data_rng);
  ModelParams<double> init{DMat::Zero(6, 3), 1};
  auto model = local_train(data, init, 60, {});
  auto predictions = infer_labels(model, fw.public_features);

  std::size_t correct = 0;
  for (std::uint32_t t = 0; t < world.m; ++t) {
    if (predictions[t] == world.ground_truth[t]) ++correct;
  }
  // Well-separated clusters with low noise: far above the 1/3 chance level.
  CHECK(static_cast<double>(correct) / world.m > 0.7);
}

#include "peerfed/mechanism.hpp"

#include "peerfed/errors.hpp"

#include <limits>
#include <numeric>
#include <unordered_set>

namespace peerfed::mechanism {

namespace {

void check_square(const IMat& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 2) {
    throw Error(errc::dimension_mismatch, std::string(what) + " must be square with k >= 2");
  }
}

}  // namespace

JointDistribution build_joint_from_counts(const IMat& counts) {
  check_square(counts, "joint counts");
  if ((counts.array() < 0).any()) {
    throw Error(errc::dimension_mismatch, "joint counts must be non-negative");
  }
  std::int64_t total = counts.sum();
  if (total == 0) {
    throw Error(errc::all_zero_counts, "joint counts sum to zero");
  }
  return JointDistribution{counts, total};
}

JointDistribution build_joint_from_model(const IVec& prior_weights, const Rational& accuracy_a,
                                         const Rational& accuracy_b) {
  const auto k = static_cast<int>(prior_weights.size());
  if (k < 2) throw Error(errc::dimension_mismatch, "prior needs k >= 2 classes");
  if ((prior_weights.array() < 0).any() || prior_weights.sum() <= 0) {
    throw Error(errc::invalid_config, "prior weights must be non-negative with positive sum");
  }
  for (const Rational& a : {accuracy_a, accuracy_b}) {
    if (a * Rational(k) < Rational(1) || a > Rational(1)) {
      throw Error(errc::invalid_accuracy, "accuracy " + a.str() + " outside [1/k, 1]");
    }
  }

  // Channel entries over the common denominator den*(k-1):
  // diagonal num*(k-1), off-diagonal (den-num).
  auto diag_num = [k](const Rational& a) { return a.num() * static_cast<std::int64_t>(k - 1); };
  auto off_num = [](const Rational& a) { return a.den() - a.num(); };

  MatrixX<__int128> wide = MatrixX<__int128>::Zero(k, k);
  for (int g = 0; g < k; ++g) {
    if (prior_weights[g] == 0) continue;
    for (int x = 0; x < k; ++x) {
      std::int64_t ga = (x == g) ? diag_num(accuracy_a) : off_num(accuracy_a);
      for (int y = 0; y < k; ++y) {
        std::int64_t gb = (y == g) ? diag_num(accuracy_b) : off_num(accuracy_b);
        wide(x, y) += static_cast<__int128>(prior_weights[g]) * ga * gb;
      }
    }
  }
  IMat counts(k, k);
  for (int x = 0; x < k; ++x) {
    for (int y = 0; y < k; ++y) {
      if (wide(x, y) > std::numeric_limits<std::int64_t>::max()) {
        throw Error(errc::overflow, "analytic joint counts exceed 64-bit range");
      }
      counts(x, y) = static_cast<std::int64_t>(wide(x, y));
    }
  }

  std::int64_t g = 0;
  for (int x = 0; x < k; ++x)
    for (int y = 0; y < k; ++y) g = std::gcd(g, counts(x, y));
  if (g > 1) counts.array() /= g;

  return build_joint_from_counts(counts);
}

JointDistribution symmetrize(const JointDistribution& joint) {
  IMat sym = joint.counts + joint.counts.transpose();
  return build_joint_from_counts(sym);
}

DeltaMatrix delta_matrix(const JointDistribution& joint) {
  // Every term is bounded by total^2, so one check keeps the whole
  // computation inside int64.
  constexpr std::int64_t kMaxTotal = 3037000499;  // isqrt(2^63 - 1)
  if (joint.total > kMaxTotal) {
    throw Error(errc::overflow, "joint total too large for exact delta arithmetic");
  }
  const IVec row_sums = joint.counts.rowwise().sum();
  const IVec col_sums = joint.counts.colwise().sum().transpose();
  IMat numerators = joint.total * joint.counts - row_sums * col_sums.transpose();
  return DeltaMatrix{std::move(numerators), joint.total * joint.total};
}

SignMatrix sign_matrix(const DeltaMatrix& delta) {
  return SignMatrix{(delta.numerators.array() > 0).cast<std::int32_t>().matrix()};
}

void validate_split(const TaskSplit& split) {
  if (split.bonus.empty() || split.penalty1.empty() || split.penalty2.empty()) {
    throw Error(errc::split_too_large, "task split sets must all be non-empty");
  }
  std::unordered_set<std::uint32_t> p1(split.penalty1.begin(), split.penalty1.end());
  for (std::uint32_t t : split.penalty2) {
    if (p1.count(t)) {
      throw Error(errc::split_too_large, "penalty sets overlap at task " + std::to_string(t));
    }
  }
}

PairPayment ca_pair_payment(const SignalReport& report_a, const SignalReport& report_b,
                            const TaskSplit& split, const SignMatrix& s) {
  validate_split(split);
  const int k = s.k();
  auto lookup = [&](const SignalReport& report, std::uint32_t task) -> std::uint8_t {
    if (task >= report.size()) {
      throw Error(errc::missing_report_entry, "report lacks task index " + std::to_string(task));
    }
    std::uint8_t sig = report[task];
    if (sig >= k) {
      throw Error(errc::signal_out_of_range, "signal " + std::to_string(sig) + " with k=" + std::to_string(k));
    }
    return sig;
  };

  std::int64_t bonus_sum = 0;
  for (std::uint32_t t : split.bonus) {
    bonus_sum += s.s(lookup(report_a, t), lookup(report_b, t));
  }
  std::int64_t penalty_sum = 0;
  for (std::uint32_t u : split.penalty1) {
    for (std::uint32_t v : split.penalty2) {
      penalty_sum += s.s(lookup(report_a, u), lookup(report_b, v));
    }
  }

  const auto p1 = static_cast<std::int64_t>(split.penalty1.size());
  const auto p2 = static_cast<std::int64_t>(split.penalty2.size());
  const auto b = static_cast<std::int64_t>(split.bonus.size());
  return PairPayment{p1 * p2 * bonus_sum - b * penalty_sum, p1 * p2};
}

std::int64_t to_currency(const PairPayment& payment, std::uint64_t alpha) {
  if (alpha == 0) {
    throw Error(errc::invalid_config, "alpha must be positive");
  }
  __int128 product = static_cast<__int128>(alpha) * payment.scaled_score;
  if (product > std::numeric_limits<std::int64_t>::max() ||
      product < std::numeric_limits<std::int64_t>::min()) {
    throw Error(errc::overflow, "currency payment exceeds 64-bit ledger range");
  }
  return static_cast<std::int64_t>(product);
}

}  // namespace peerfed::mechanism

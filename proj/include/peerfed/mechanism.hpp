#pragma once

#include "peerfed/rational.hpp"
#include "peerfed/types.hpp"

#include <cstdint>
#include <vector>

namespace peerfed::mechanism {

// Co-occurrence counts of paired signals. Kept as integers so everything
// downstream stays exact.
struct JointDistribution {
  IMat counts;          // k x k, non-negative
  std::int64_t total;   // sum of counts, > 0

  int k() const { return static_cast<int>(counts.rows()); }
};

// delta(x,y) = P(x,y) - P(x)P(y) as numerators over a common denominator
// total^2. Rows and columns of the numerators sum to zero.
struct DeltaMatrix {
  IMat numerators;
  std::int64_t denominator;

  int k() const { return static_cast<int>(numerators.rows()); }
};

// Scoring rule: s(x,y) = 1 iff delta(x,y) > 0. Ties at zero score 0, so
// independent signals yield the all-zero rule.
struct SignMatrix {
  MatrixX<std::int32_t> s;

  int k() const { return static_cast<int>(s.rows()); }
};

// Bonus tasks plus two disjoint penalty sets over public task indices.
struct TaskSplit {
  std::vector<std::uint32_t> bonus;
  std::vector<std::uint32_t> penalty1;
  std::vector<std::uint32_t> penalty2;
};

// Pairwise payment in units of 1/(|M1|*|M2|). Integer throughout; the
// division is carried as an explicit denominator instead of performed.
struct PairPayment {
  std::int64_t scaled_score = 0;
  std::int64_t scale_denominator = 1;  // |M1| * |M2|

  double normalized(std::size_t bonus_size) const {
    return static_cast<double>(scaled_score) /
           (static_cast<double>(scale_denominator) * static_cast<double>(bonus_size));
  }
};

JointDistribution build_joint_from_counts(const IMat& counts);

// Analytic joint of two clients observing the same ground truth through
// symmetric-confusion channels: P(x,y) = sum_g prior(g) G_a(g,x) G_b(g,y)
// with G(g,x) = a for x = g and (1-a)/(k-1) otherwise. Counts come out as
// integers over a common denominator and are reduced by their gcd.
JointDistribution build_joint_from_model(const IVec& prior_weights, const Rational& accuracy_a,
                                         const Rational& accuracy_b);

// counts + counts^T, so paired clients share one sign matrix.
JointDistribution symmetrize(const JointDistribution& joint);

DeltaMatrix delta_matrix(const JointDistribution& joint);

SignMatrix sign_matrix(const DeltaMatrix& delta);

// Correlated Agreement pair payment:
//   |M1||M2| * sum_{t in Mb} s(ra(t), rb(t))
//   - |Mb| * sum_{u in M1, v in M2} s(ra(u), rb(v))
// The same value pays both members: the partner's score conjugates both the
// report order and the sign matrix, which cancels.
PairPayment ca_pair_payment(const SignalReport& report_a, const SignalReport& report_b,
                            const TaskSplit& split, const SignMatrix& s);

// Currency minor-units: alpha * scaled_score, checked against the 64-bit
// ledger range.
std::int64_t to_currency(const PairPayment& payment, std::uint64_t alpha);

void validate_split(const TaskSplit& split);

}  // namespace peerfed::mechanism

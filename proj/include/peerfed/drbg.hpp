#pragma once

#include "peerfed/hashing.hpp"
#include "peerfed/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace peerfed {

// Counter-mode generator over SHA-256: block i = H(seed || be64(i)).
// Every random draw in the simulator goes through this so that transcripts
// are byte-identical across platforms; std:: distributions are not portable.
class HashDrbg {
 public:
  explicit HashDrbg(const Digest32& seed) : seed_(seed) {}

  // Derives an independent child generator; tag keeps domains separated.
  HashDrbg fork(const std::string& tag) const {
    return HashDrbg(sha256({seed_.view(), as_bytes(tag)}));
  }

  std::uint64_t next_u64() {
    if (pos_ + 8 > 32) refill();
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | block_.bytes[pos_ + i];
    pos_ += 8;
    return v;
  }

  // Unbiased draw in [0, n) by rejection.
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = n * (~std::uint64_t{0} / n);
    for (;;) {
      std::uint64_t v = next_u64();
      if (v < limit) return v % n;
    }
  }

  // Exact Bernoulli(num/den) without floating point.
  bool bernoulli(std::uint64_t num, std::uint64_t den) {
    return uniform_below(den) < num;
  }

  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  Digest32 next_digest() {
    auto ctr = be64(digest_counter_++);
    return sha256({seed_.view(), as_bytes("digest"), ByteView(ctr.data(), ctr.size())});
  }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // First `take` entries of a uniform shuffle of 0..n-1, without materializing
  // more swaps than needed.
  std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n, std::uint32_t take) {
    std::vector<std::uint32_t> idx(n);
    for (std::uint32_t i = 0; i < n; ++i) idx[i] = i;
    for (std::uint32_t i = 0; i < take && i + 1 < n; ++i) {
      std::uint32_t j = i + static_cast<std::uint32_t>(uniform_below(n - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(take);
    return idx;
  }

 private:
  void refill() {
    auto ctr = be64(counter_++);
    block_ = sha256({seed_.view(), ByteView(ctr.data(), ctr.size())});
    pos_ = 0;
  }

  Digest32 seed_;
  Digest32 block_{};
  std::uint64_t counter_ = 0;
  std::uint64_t digest_counter_ = 0;
  std::size_t pos_ = 32;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace peerfed

#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace peerfed {

// Dense types used across the mechanism and FL code, templated on scalar so
// the same routines run on exact integers, rationals, and doubles.
template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using IMat = MatrixX<std::int64_t>;
using IVec = VectorX<std::int64_t>;
using DMat = MatrixX<double>;
using DVec = VectorX<double>;

using ClientId = std::string;

// A signal is a label in 0..k-1; alphabets are capped at 256 so reports
// serialize one octet per task.
using Signal = std::uint8_t;
using SignalReport = std::vector<Signal>;

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

struct Digest32 {
  std::array<std::uint8_t, 32> bytes{};

  bool operator==(const Digest32&) const = default;
  auto operator<=>(const Digest32&) const = default;

  std::string hex() const;
  static Digest32 from_hex(const std::string& hex);

  ByteView view() const { return ByteView(bytes.data(), bytes.size()); }
};

using Salt = Digest32;

std::string to_hex(ByteView data);
Bytes from_hex(const std::string& hex);

inline ByteView as_bytes(const std::string& s) {
  return ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

// Big-endian u64, used everywhere an integer feeds a hash.
std::array<std::uint8_t, 8> be64(std::uint64_t v);

}  // namespace peerfed

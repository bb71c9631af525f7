#pragma once

#include "peerfed/types.hpp"

#include <filesystem>
#include <map>
#include <optional>

namespace peerfed::blobstore {

// SHA-256 of the blob bytes; the pointer is the address.
struct ContentPointer {
  Digest32 digest;

  bool operator==(const ContentPointer&) const = default;
  auto operator<=>(const ContentPointer&) const = default;
  std::string hex() const { return digest.hex(); }
};

// H(pointer || salt). Binding on the pointer, hiding through the salt.
struct Commitment {
  Digest32 digest;

  bool operator==(const Commitment&) const = default;
  std::string hex() const { return digest.hex(); }
};

// In-memory content-addressed store with optional directory persistence,
// layout <dir>/<hex-digest> holding the raw blob bytes.
class Store {
 public:
  Store() = default;

  // Writes each blob to disk as well; the directory is created on demand.
  explicit Store(std::filesystem::path persist_dir);

  ContentPointer put(const Bytes& blob);
  const Bytes& get(const ContentPointer& pointer) const;
  bool contains(const ContentPointer& pointer) const;
  std::size_t size() const { return blobs_.size(); }

  // Reloads blobs persisted by an earlier run; file names must match the
  // content hash or loading fails.
  static Store open(const std::filesystem::path& dir);

 private:
  std::map<Digest32, Bytes> blobs_;
  std::optional<std::filesystem::path> persist_dir_;
};

// Canonical wire format for a report: version octet 0x01, task count as
// 4-octet big-endian, one octet per signal.
inline constexpr std::uint8_t kReportVersion = 0x01;

Bytes encode_report(const SignalReport& signals, int k);
SignalReport decode_report(const Bytes& blob, int k);

Commitment make_commitment(const ContentPointer& pointer, const Salt& salt);
bool verify_commitment(const Commitment& commitment, const ContentPointer& pointer,
                       const Salt& salt);

// For salts arriving off the wire; rejects anything that is not 32 octets.
Salt salt_from_bytes(ByteView bytes);

}  // namespace peerfed::blobstore

#include "peerfed/blobstore.hpp"

#include "peerfed/errors.hpp"
#include "peerfed/hashing.hpp"

#include <fstream>

namespace peerfed::blobstore {

Store::Store(std::filesystem::path persist_dir) : persist_dir_(std::move(persist_dir)) {
  std::filesystem::create_directories(*persist_dir_);
}

ContentPointer Store::put(const Bytes& blob) {
  if (blob.empty()) {
    throw Error(errc::empty_blob, "cannot store an empty blob");
  }
  Digest32 digest = sha256(ByteView(blob.data(), blob.size()));
  auto [it, inserted] = blobs_.emplace(digest, blob);
  if (inserted && persist_dir_) {
    std::ofstream out(*persist_dir_ / digest.hex(), std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(errc::io_error, "cannot write blob file under " + persist_dir_->string());
    }
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  }
  return ContentPointer{digest};
}

const Bytes& Store::get(const ContentPointer& pointer) const {
  auto it = blobs_.find(pointer.digest);
  if (it == blobs_.end()) {
    throw Error(errc::not_found, "unknown content pointer " + pointer.hex());
  }
  return it->second;
}

bool Store::contains(const ContentPointer& pointer) const {
  return blobs_.count(pointer.digest) > 0;
}

Store Store::open(const std::filesystem::path& dir) {
  Store store;
  if (!std::filesystem::is_directory(dir)) {
    throw Error(errc::io_error, "blob directory does not exist: " + dir.string());
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    Bytes blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (blob.empty()) {
      throw Error(errc::malformed_blob, "empty blob file " + entry.path().string());
    }
    Digest32 digest = sha256(ByteView(blob.data(), blob.size()));
    if (digest.hex() != entry.path().filename().string()) {
      throw Error(errc::malformed_blob, "blob file name does not match content: " + entry.path().string());
    }
    store.blobs_.emplace(digest, std::move(blob));
  }
  return store;
}

Bytes encode_report(const SignalReport& signals, int k) {
  if (k < 2 || k > 256) {
    throw Error(errc::invalid_config, "alphabet size must be in [2, 256]");
  }
  for (Signal sig : signals) {
    if (sig >= k) {
      throw Error(errc::signal_out_of_range,
                  "signal " + std::to_string(sig) + " with k=" + std::to_string(k));
    }
  }
  const auto m = static_cast<std::uint32_t>(signals.size());
  Bytes blob;
  blob.reserve(5 + signals.size());
  blob.push_back(kReportVersion);
  blob.push_back(static_cast<std::uint8_t>(m >> 24));
  blob.push_back(static_cast<std::uint8_t>(m >> 16));
  blob.push_back(static_cast<std::uint8_t>(m >> 8));
  blob.push_back(static_cast<std::uint8_t>(m));
  blob.insert(blob.end(), signals.begin(), signals.end());
  return blob;
}

SignalReport decode_report(const Bytes& blob, int k) {
  if (blob.size() < 5) {
    throw Error(errc::malformed_blob, "report blob shorter than header");
  }
  if (blob[0] != kReportVersion) {
    throw Error(errc::malformed_blob, "unsupported report version " + std::to_string(blob[0]));
  }
  std::uint32_t m = (static_cast<std::uint32_t>(blob[1]) << 24) |
                    (static_cast<std::uint32_t>(blob[2]) << 16) |
                    (static_cast<std::uint32_t>(blob[3]) << 8) | blob[4];
  if (blob.size() != 5u + m) {
    throw Error(errc::malformed_blob, "report length field disagrees with blob size");
  }
  SignalReport signals(blob.begin() + 5, blob.end());
  for (Signal sig : signals) {
    if (sig >= k) {
      throw Error(errc::signal_out_of_range,
                  "signal " + std::to_string(sig) + " with k=" + std::to_string(k));
    }
  }
  return signals;
}

Commitment make_commitment(const ContentPointer& pointer, const Salt& salt) {
  return Commitment{sha256({pointer.digest.view(), salt.view()})};
}

bool verify_commitment(const Commitment& commitment, const ContentPointer& pointer,
                       const Salt& salt) {
  return make_commitment(pointer, salt).digest == commitment.digest;
}

Salt salt_from_bytes(ByteView bytes) {
  if (bytes.size() != 32) {
    throw Error(errc::bad_salt_length, "salt must be exactly 32 octets, got " + std::to_string(bytes.size()));
  }
  Salt salt;
  std::copy(bytes.begin(), bytes.end(), salt.bytes.begin());
  return salt;
}

}  // namespace peerfed::blobstore

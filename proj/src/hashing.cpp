#include "peerfed/hashing.hpp"

#include "peerfed/errors.hpp"

#include <openssl/evp.h>

#include <memory>

namespace peerfed {

namespace {

struct CtxFree {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

}  // namespace

Digest32 sha256(std::initializer_list<ByteView> parts) {
  std::unique_ptr<EVP_MD_CTX, CtxFree> ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest init failed");
  }
  for (const auto& part : parts) {
    if (EVP_DigestUpdate(ctx.get(), part.data(), part.size()) != 1) {
      throw std::runtime_error("sha256: digest update failed");
    }
  }
  Digest32 out;
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), out.bytes.data(), &len) != 1 || len != 32) {
    throw std::runtime_error("sha256: digest final failed");
  }
  return out;
}

Digest32 sha256(ByteView data) { return sha256({data}); }

std::string Digest32::hex() const { return to_hex(view()); }

Digest32 Digest32::from_hex(const std::string& hex) {
  Bytes raw = peerfed::from_hex(hex);
  if (raw.size() != 32) {
    throw Error(errc::parse_error, "expected 32-octet hex digest, got " + std::to_string(raw.size()));
  }
  Digest32 d;
  std::copy(raw.begin(), raw.end(), d.bytes.begin());
  return d;
}

std::string to_hex(ByteView data) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (std::uint8_t b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

Bytes from_hex(const std::string& hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) {
    throw Error(errc::parse_error, "odd-length hex string");
  }
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) {
      throw Error(errc::parse_error, "invalid hex character");
    }
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

std::array<std::uint8_t, 8> be64(std::uint64_t v) {
  std::array<std::uint8_t, 8> out;
  for (int i = 7; i >= 0; --i) {
    out[i] = static_cast<std::uint8_t>(v & 0xff);
    v >>= 8;
  }
  return out;
}

const char* errc_name(errc code) {
  switch (code) {
    case errc::all_zero_counts: return "AllZeroCounts";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::invalid_accuracy: return "InvalidAccuracy";
    case errc::missing_report_entry: return "MissingReportEntry";
    case errc::overflow: return "Overflow";
    case errc::empty_blob: return "EmptyBlob";
    case errc::not_found: return "NotFound";
    case errc::malformed_blob: return "MalformedBlob";
    case errc::signal_out_of_range: return "SignalOutOfRange";
    case errc::bad_salt_length: return "BadSaltLength";
    case errc::too_few_clients: return "TooFewClients";
    case errc::split_too_large: return "SplitTooLarge";
    case errc::wrong_phase: return "WrongPhase";
    case errc::insufficient_stake: return "InsufficientStake";
    case errc::duplicate_registration: return "DuplicateRegistration";
    case errc::not_registered: return "NotRegistered";
    case errc::duplicate_commit: return "DuplicateCommit";
    case errc::quorum_not_reached: return "QuorumNotReached";
    case errc::no_prior_commit: return "NoPriorCommit";
    case errc::duplicate_reveal: return "DuplicateReveal";
    case errc::commit_mismatch: return "CommitMismatch";
    case errc::unresolvable_pointer: return "UnresolvablePointer";
    case errc::malformed_report: return "MalformedReport";
    case errc::insufficient_pool: return "InsufficientPool";
    case errc::unknown_client: return "UnknownClient";
    case errc::empty_update_list: return "EmptyUpdateList";
    case errc::empty_local_data: return "EmptyLocalData";
    case errc::io_error: return "IoError";
    case errc::parse_error: return "ParseError";
    case errc::audit_failed: return "AuditFailed";
    case errc::invalid_config: return "InvalidConfig";
  }
  return "UnknownError";
}

}  // namespace peerfed

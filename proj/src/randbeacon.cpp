#include "peerfed/randbeacon.hpp"

#include "peerfed/drbg.hpp"
#include "peerfed/errors.hpp"
#include "peerfed/hashing.hpp"

#include <algorithm>

namespace peerfed::randbeacon {

BeaconKey BeaconKey::from_secret(const Digest32& secret) {
  return BeaconKey{secret, sha256(secret.view())};
}

const char* purpose_tag(SeedPurpose purpose) {
  switch (purpose) {
    case SeedPurpose::pairing: return "pairing";
    case SeedPurpose::task_split: return "task_split";
    case SeedPurpose::sampling: return "sampling";
  }
  return "unknown";
}

std::optional<SeedPurpose> purpose_from_tag(const std::string& tag) {
  if (tag == "pairing") return SeedPurpose::pairing;
  if (tag == "task_split") return SeedPurpose::task_split;
  if (tag == "sampling") return SeedPurpose::sampling;
  return std::nullopt;
}

SeedBundle derive_seed(const BeaconKey& key, std::uint64_t round, SeedPurpose purpose) {
  auto round_bytes = be64(round);
  Digest32 seed = sha256({key.secret.view(), ByteView(round_bytes.data(), round_bytes.size()),
                          as_bytes(purpose_tag(purpose))});
  return SeedBundle{round, purpose, seed};
}

bool verify_seed(const Digest32& public_commitment, const SeedBundle& bundle,
                 const Digest32& disclosed_secret) {
  if (sha256(disclosed_secret.view()) != public_commitment) return false;
  BeaconKey key{disclosed_secret, public_commitment};
  return derive_seed(key, bundle.round, bundle.purpose).seed == bundle.seed;
}

PairingAssignment pair_clients(const Digest32& seed, std::vector<ClientId> committed) {
  if (committed.size() < 2) {
    throw Error(errc::too_few_clients, "pairing needs at least 2 committed clients");
  }
  std::sort(committed.begin(), committed.end());
  HashDrbg drbg(seed);
  drbg.shuffle(committed);

  PairingAssignment assignment;
  const std::size_t n = committed.size();
  const std::size_t paired = n - (n % 2);
  assignment.pairs.reserve(paired / 2);
  for (std::size_t i = 0; i + 1 < paired; i += 2) {
    assignment.pairs.emplace_back(committed[i], committed[i + 1]);
  }
  if (n % 2 == 1) {
    std::size_t partner = static_cast<std::size_t>(drbg.uniform_below(paired));
    assignment.odd_client = {committed[n - 1], committed[partner]};
  }
  return assignment;
}

mechanism::TaskSplit split_tasks(const Digest32& seed, std::uint32_t m, std::uint32_t b,
                                 std::uint32_t p) {
  if (b < 1 || p < 1) {
    throw Error(errc::split_too_large, "bonus and penalty sizes must be at least 1");
  }
  if (static_cast<std::uint64_t>(b) + 2ull * p > m) {
    throw Error(errc::split_too_large,
                "b+2p = " + std::to_string(b + 2ull * p) + " exceeds task count " + std::to_string(m));
  }
  HashDrbg drbg(seed);
  std::vector<std::uint32_t> drawn = drbg.sample_without_replacement(m, b + 2 * p);
  mechanism::TaskSplit split;
  split.bonus.assign(drawn.begin(), drawn.begin() + b);
  split.penalty1.assign(drawn.begin() + b, drawn.begin() + b + p);
  split.penalty2.assign(drawn.begin() + b + p, drawn.end());
  return split;
}

ClientId choose_participant(const Digest32& seed, std::vector<ClientId> participants) {
  if (participants.empty()) {
    throw Error(errc::too_few_clients, "cannot choose from an empty participant set");
  }
  std::sort(participants.begin(), participants.end());
  HashDrbg drbg(seed);
  return participants[drbg.uniform_below(participants.size())];
}

}  // namespace peerfed::randbeacon

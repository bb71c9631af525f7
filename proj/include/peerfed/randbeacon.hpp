#pragma once

#include "peerfed/mechanism.hpp"
#include "peerfed/types.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace peerfed::randbeacon {

// Commit-at-genesis keyed-hash beacon. The public commitment H(secret) is
// published up front; disclosing the secret at audit time lets anyone
// recompute every seed the beacon ever produced.
struct BeaconKey {
  Digest32 secret;
  Digest32 public_commitment;

  static BeaconKey from_secret(const Digest32& secret);
};

enum class SeedPurpose { pairing, task_split, sampling };

const char* purpose_tag(SeedPurpose purpose);
std::optional<SeedPurpose> purpose_from_tag(const std::string& tag);

// seed = H(secret || be64(round) || tag); recomputable by any verifier
// holding the disclosed secret.
struct SeedBundle {
  std::uint64_t round = 0;
  SeedPurpose purpose = SeedPurpose::pairing;
  Digest32 seed;
};

SeedBundle derive_seed(const BeaconKey& key, std::uint64_t round, SeedPurpose purpose);

bool verify_seed(const Digest32& public_commitment, const SeedBundle& bundle,
                 const Digest32& disclosed_secret);

// Perfect matching over the committed clients; with an odd cohort the last
// shuffled client additionally scores against a uniformly chosen partner,
// one-directionally (the partner's own payment is unaffected).
struct PairingAssignment {
  std::vector<std::pair<ClientId, ClientId>> pairs;
  std::optional<std::pair<ClientId, ClientId>> odd_client;  // (odd, assigned partner)
};

// Clients are sorted before the seeded Fisher-Yates shuffle, so the result
// depends only on (seed, membership set), not on insertion order.
PairingAssignment pair_clients(const Digest32& seed, std::vector<ClientId> committed);

// b + 2p distinct indices drawn uniformly without replacement from 0..m-1;
// the first b form the bonus set, then p and p for the penalty sets.
mechanism::TaskSplit split_tasks(const Digest32& seed, std::uint32_t m, std::uint32_t b,
                                 std::uint32_t p);

// Seeded uniform choice of one participant (e.g. an aggregation validator);
// depends only on (seed, membership set).
ClientId choose_participant(const Digest32& seed, std::vector<ClientId> participants);

}  // namespace peerfed::randbeacon

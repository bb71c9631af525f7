#pragma once

#include "peerfed/blobstore.hpp"
#include "peerfed/mechanism.hpp"
#include "peerfed/randbeacon.hpp"
#include "peerfed/rational.hpp"
#include "peerfed/types.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace peerfed::chainsim {

enum class Phase { Register, Commit, PairingRequested, Reveal, Score, Settle, Audit };

const char* phase_name(Phase phase);

enum class DeltaMode { known_prior, empirical };

enum class SlashReason { commit_mismatch, unresolvable_pointer, malformed_report, missed_reveal };

const char* slash_reason_name(SlashReason reason);

struct Account {
  ClientId id;
  std::uint64_t balance = 0;
  std::uint64_t stake = 0;
  bool registered = false;
  bool slashed = false;
};

struct RoundConfig {
  std::uint64_t round = 1;
  int k = 2;
  std::uint32_t m = 0;
  std::uint32_t bonus_size = 1;
  std::uint32_t penalty_size = 1;
  std::uint64_t min_stake = 0;
  std::size_t quorum = 2;
  std::uint64_t reward_pool = 0;
  std::uint64_t alpha = 1;
  // Payment (in scaled-score units) for an honest client whose partner was
  // slashed: midpoint of the non-negative payment range by default.
  std::int64_t default_payment = 0;
  DeltaMode delta_mode = DeltaMode::known_prior;
  // One split shared by every pair (the default), or a fresh split per pair
  // derived from the split seed and the pair index.
  bool per_pair_split = false;
  // Inputs for recomputing the known-prior sign matrix at audit time.
  IVec prior_weights;
  Rational reference_accuracy{1, 1};

  std::int64_t max_scaled_score() const {
    return static_cast<std::int64_t>(bonus_size) * penalty_size * penalty_size;
  }
};

// One line of the transcript. Payload integers are decimal strings and keys
// are lexicographically sorted so the JSONL bytes are identical across
// platforms.
struct LedgerEvent {
  std::uint64_t height = 0;
  std::string kind;
  std::string emitter;
  nlohmann::json payload;

  std::string line() const;
  static LedgerEvent parse(const std::string& line);
};

struct ClientPayment {
  ClientId client;
  ClientId partner;
  std::int64_t scaled_score = 0;
  std::int64_t scale_denominator = 1;
  bool defaulted = false;  // partner slashed; scaled_score is the configured default
};

struct CostMeter {
  std::uint64_t compute_units = 0;
  std::uint64_t storage_bytes = 0;
};

enum class RevealOutcome { accepted, commit_mismatch, unresolvable_pointer, malformed_report };

// Single-writer simulated coordination contract. Accounts are funded at
// genesis, so sum(balances) + sum(stakes) + reward_pool is invariant under
// every later operation; money moves but is never minted.
class Contract {
 public:
  Contract(RoundConfig config, const std::vector<std::pair<ClientId, std::uint64_t>>& funding,
           const Digest32& beacon_commitment);

  void register_client(const ClientId& client, std::uint64_t stake_amount);
  void begin_commit();
  void commit(const ClientId& client, const blobstore::Commitment& commitment);
  const randbeacon::PairingAssignment& request_pairing(const randbeacon::SeedBundle& bundle);
  void install_task_split(const randbeacon::SeedBundle& bundle);
  RevealOutcome reveal(const ClientId& client, const blobstore::ContentPointer& pointer,
                       const Salt& salt, const blobstore::Store& store);
  std::vector<ClientPayment> score_round(const mechanism::SignMatrix& sign,
                                         const blobstore::Store& store);
  void settle(const std::vector<ClientPayment>& payments);
  // Discloses the beacon secret, appends the audit records, and moves the
  // round to its terminal phase.
  void finish_audit(const Digest32& disclosed_secret);

  Phase phase() const { return phase_; }
  const RoundConfig& config() const { return config_; }
  const std::vector<LedgerEvent>& events() const { return events_; }
  const std::map<ClientId, Account>& accounts() const { return accounts_; }
  std::uint64_t reward_pool() const { return reward_pool_; }
  const CostMeter& meter() const { return meter_; }
  const randbeacon::PairingAssignment& pairing() const;
  // The shared split; throws when the round runs in per-pair mode.
  const mechanism::TaskSplit& task_split() const;
  const std::map<ClientId, blobstore::ContentPointer>& reveals() const { return reveals_; }
  const std::map<ClientId, blobstore::Commitment>& commitments() const { return commitments_; }
  std::size_t commit_count() const { return commitments_.size(); }

  // sum(balances) + sum(stakes) + reward_pool; constant from genesis on.
  std::uint64_t total_money() const;

  // SHA-256 of the canonical serialization of the full contract state.
  Digest32 state_digest() const;

  struct AuditResult {
    bool ok = false;
    std::uint64_t divergence_height = 0;
    std::string message;
  };

  // Replays a transcript against a fresh contract, recomputing pairing,
  // split, sign matrix, payments, and settlement from first principles, and
  // compares every recomputed event byte-for-byte with the recorded one.
  static AuditResult audit(const std::vector<LedgerEvent>& transcript,
                           const Digest32& disclosed_secret, const blobstore::Store& store);

 private:
  void require_phase(Phase expected, const char* op) const;
  LedgerEvent& append(const std::string& kind, const std::string& emitter,
                      nlohmann::json payload);
  void slash(const ClientId& client, SlashReason reason, const nlohmann::json& detail);
  Account& account(const ClientId& client);

  RoundConfig config_;
  Phase phase_ = Phase::Register;
  std::map<ClientId, Account> accounts_;
  std::map<ClientId, blobstore::Commitment> commitments_;
  std::map<ClientId, blobstore::ContentPointer> reveals_;
  std::set<ClientId> resolved_;  // revealed or slashed
  std::optional<randbeacon::PairingAssignment> pairing_;
  std::optional<mechanism::TaskSplit> split_;
  std::optional<randbeacon::SeedBundle> pairing_bundle_;
  std::optional<randbeacon::SeedBundle> split_bundle_;
  std::vector<ClientPayment> last_payments_;
  std::uint64_t reward_pool_ = 0;
  Digest32 beacon_commitment_;
  CostMeter meter_;
  std::vector<LedgerEvent> events_;
  std::uint64_t next_height_ = 0;
};

// The scoring rule the round actually uses. known_prior derives it from the
// configured signal model; empirical pools the round's revealed reports over
// all scoring pairs and symmetrizes. All-zero empirical counts fall back to
// the zero rule.
mechanism::SignMatrix compute_round_sign_matrix(const Contract& contract,
                                                const blobstore::Store& store);

nlohmann::json sign_matrix_to_json(const mechanism::SignMatrix& sign);
mechanism::SignMatrix sign_matrix_from_json(const nlohmann::json& j);

}  // namespace peerfed::chainsim

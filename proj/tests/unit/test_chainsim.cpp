#include "peerfed/chainsim.hpp"

#include "peerfed/blobstore.hpp"
#include "peerfed/drbg.hpp"
#include "peerfed/errors.hpp"
#include "peerfed/hashing.hpp"
#include "peerfed/randbeacon.hpp"

#include <doctest.h>

#include <string>
#include <vector>

using namespace peerfed;
using namespace peerfed::chainsim;

namespace {

RoundConfig small_config(int clients_hint = 4) {
  RoundConfig rc;
  rc.round = 1;
  rc.k = 2;
  rc.m = 8;
  rc.bonus_size = 2;
  rc.penalty_size = 2;
  rc.min_stake = 100;
  rc.quorum = 2;
  rc.reward_pool = 100000;
  rc.alpha = 10;
  rc.default_payment = 4;  // (2 * 2 * 2) / 2
  rc.delta_mode = DeltaMode::known_prior;
  rc.prior_weights = IVec::Ones(2);
  rc.reference_accuracy = Rational(9, 10);
  (void)clients_hint;
  return rc;
}

struct Fixture {
  randbeacon::BeaconKey key =
      randbeacon::BeaconKey::from_secret(sha256(as_bytes(std::string("chainsim-tests"))));
  blobstore::Store store;
  std::vector<std::pair<ClientId, std::uint64_t>> funding;
  HashDrbg rng = HashDrbg(sha256(as_bytes(std::string("chainsim-rng"))));

  struct Prepared {
    blobstore::ContentPointer pointer;
    Salt salt;
    blobstore::Commitment commitment;
  };
  std::map<ClientId, Prepared> prepared;

  Contract make_contract(const RoundConfig& rc, const std::vector<ClientId>& ids) {
    funding.clear();
    for (const auto& id : ids) funding.emplace_back(id, 100);
    return Contract(rc, funding, key.public_commitment);
  }

  // Stores a fresh valid report and prepares its commitment material.
  void prepare(const ClientId& id, const RoundConfig& rc, std::optional<SignalReport> forced = {}) {
    SignalReport report;
    if (forced) {
      report = *forced;
    } else {
      report.resize(rc.m);
      for (auto& s : report) {
        s = static_cast<Signal>(rng.uniform_below(static_cast<std::uint64_t>(rc.k)));
      }
    }
    Prepared p;
    p.pointer = store.put(blobstore::encode_report(report, rc.k));
    p.salt = rng.next_digest();
    p.commitment = blobstore::make_commitment(p.pointer, p.salt);
    prepared[id] = p;
  }

  void run_to_reveal(Contract& contract, const RoundConfig& rc, const std::vector<ClientId>& ids) {
    for (const auto& id : ids) contract.register_client(id, 100);
    contract.begin_commit();
    for (const auto& id : ids) {
      prepare(id, rc);
      contract.commit(id, prepared[id].commitment);
    }
    contract.request_pairing(randbeacon::derive_seed(key, 1, randbeacon::SeedPurpose::pairing));
    contract.install_task_split(
        randbeacon::derive_seed(key, 1, randbeacon::SeedPurpose::task_split));
  }

  mechanism::SignMatrix identity_sign(int k) {
    return mechanism::SignMatrix{MatrixX<std::int32_t>::Identity(k, k)};
  }
};

}  // namespace

TEST_CASE("happy path round conserves money and reaches audit") {
  Fixture fx;
  auto rc = small_config();
  std::vector<ClientId> ids{"a", "b", "c", "d"};
  Contract contract = fx.make_contract(rc, ids);
  const std::uint64_t total0 = contract.total_money();
  CHECK(total0 == rc.reward_pool + 400);

  fx.run_to_reveal(contract, rc, ids);
  CHECK(contract.total_money() == total0);

  for (const auto& id : ids) {
    auto outcome = contract.reveal(id, fx.prepared[id].pointer, fx.prepared[id].salt, fx.store);
    CHECK(outcome == RevealOutcome::accepted);
  }
  CHECK(contract.total_money() == total0);

  auto payments = contract.score_round(fx.identity_sign(rc.k), fx.store);
  CHECK(payments.size() == 4);  // two per pair
  CHECK(contract.meter().compute_units ==
        2ull * (rc.bonus_size + rc.penalty_size * rc.penalty_size));
  CHECK(contract.meter().storage_bytes == 4 * 32 + 4 * 32);

  contract.settle(payments);
  CHECK(contract.total_money() == total0);
  CHECK(contract.phase() == Phase::Settle);
  // Stakes released for everyone.
  for (const auto& [id, acct] : contract.accounts()) CHECK(acct.stake == 0);

  contract.finish_audit(fx.key.secret);
  CHECK(contract.phase() == Phase::Audit);

  auto audit = Contract::audit(contract.events(), fx.key.secret, fx.store);
  CHECK(audit.ok);

  // Heights strictly increasing from zero.
  for (std::size_t i = 0; i < contract.events().size(); ++i) {
    CHECK(contract.events()[i].height == i);
  }
}

TEST_CASE("replay determinism: identical inputs give identical transcripts") {
  auto build = []() {
    Fixture fx;
    auto rc = small_config();
    std::vector<ClientId> ids{"a", "b"};
    Contract contract = fx.make_contract(rc, ids);
    fx.run_to_reveal(contract, rc, ids);
    for (const auto& id : ids) {
      contract.reveal(id, fx.prepared[id].pointer, fx.prepared[id].salt, fx.store);
    }
    auto payments = contract.score_round(fx.identity_sign(rc.k), fx.store);
    contract.settle(payments);
    contract.finish_audit(fx.key.secret);
    std::string text;
    for (const auto& ev : contract.events()) text += ev.line() + "\n";
    return text;
  };
  CHECK(build() == build());
}

TEST_CASE("registration guards") {
  Fixture fx;
  auto rc = small_config();
  Contract contract = fx.make_contract(rc, {"a", "b"});

  contract.register_client("a", 100);
  CHECK_THROWS_WITH_AS(contract.register_client("a", 100),
                       doctest::Contains("DuplicateRegistration"), Error);
  CHECK_THROWS_WITH_AS(contract.register_client("b", 99),
                       doctest::Contains("InsufficientStake"), Error);
  CHECK_THROWS_WITH_AS(contract.register_client("ghost", 100),
                       doctest::Contains("UnknownClient"), Error);

  contract.begin_commit();
  CHECK_THROWS_WITH_AS(contract.register_client("b", 100), doctest::Contains("WrongPhase"),
                       Error);
}

TEST_CASE("commit guards") {
  Fixture fx;
  auto rc = small_config();
  std::vector<ClientId> ids{"a", "b", "c"};
  Contract contract = fx.make_contract(rc, ids);
  contract.register_client("a", 100);
  contract.register_client("b", 100);

  fx.prepare("a", rc);
  CHECK_THROWS_WITH_AS(contract.commit("a", fx.prepared["a"].commitment),
                       doctest::Contains("WrongPhase"), Error);

  contract.begin_commit();
  fx.prepare("c", rc);
  CHECK_THROWS_WITH_AS(contract.commit("c", fx.prepared["c"].commitment),
                       doctest::Contains("NotRegistered"), Error);

  contract.commit("a", fx.prepared["a"].commitment);
  CHECK_THROWS_WITH_AS(contract.commit("a", fx.prepared["a"].commitment),
                       doctest::Contains("DuplicateCommit"), Error);

  // Commit after the pairing phase is structurally impossible.
  fx.prepare("b", rc);
  contract.commit("b", fx.prepared["b"].commitment);
  contract.request_pairing(randbeacon::derive_seed(fx.key, 1, randbeacon::SeedPurpose::pairing));
  fx.prepare("c", rc);
  CHECK_THROWS_WITH_AS(contract.commit("c", fx.prepared["c"].commitment),
                       doctest::Contains("WrongPhase"), Error);
}

TEST_CASE("pairing requires quorum and covers committed clients only") {
  Fixture fx;
  auto rc = small_config();
  rc.quorum = 4;
  std::vector<ClientId> ids{"a", "b", "c", "d", "e"};
  Contract contract = fx.make_contract(rc, ids);
  for (const auto& id : ids) contract.register_client(id, 100);
  contract.begin_commit();

  fx.prepare("a", rc);
  contract.commit("a", fx.prepared["a"].commitment);
  CHECK_THROWS_WITH_AS(
      contract.request_pairing(randbeacon::derive_seed(fx.key, 1, randbeacon::SeedPurpose::pairing)),
      doctest::Contains("QuorumNotReached"), Error);

  for (const ClientId id : {"b", "c", "d"}) {
    fx.prepare(id, rc);
    contract.commit(id, fx.prepared[id].commitment);
  }
  const auto& pairing =
      contract.request_pairing(randbeacon::derive_seed(fx.key, 1, randbeacon::SeedPurpose::pairing));
  std::set<ClientId> members;
  for (const auto& [x, y] : pairing.pairs) {
    members.insert(x);
    members.insert(y);
  }
  CHECK(members == std::set<ClientId>{"a", "b", "c", "d"});  // e never committed
  CHECK(contract.phase() == Phase::Reveal);
}

TEST_CASE("reveal outcomes and slashing") {
  Fixture fx;
  auto rc = small_config();
  std::vector<ClientId> ids{"a", "b", "c", "d"};
  Contract contract = fx.make_contract(rc, ids);
  const std::uint64_t total0 = contract.total_money();
  fx.run_to_reveal(contract, rc, ids);

  SUBCASE("honest reveal is recorded") {
    CHECK(contract.reveal("a", fx.prepared["a"].pointer, fx.prepared["a"].salt, fx.store) ==
          RevealOutcome::accepted);
    CHECK(contract.reveals().count("a") == 1);
    CHECK_THROWS_WITH_AS(
        contract.reveal("a", fx.prepared["a"].pointer, fx.prepared["a"].salt, fx.store),
        doctest::Contains("DuplicateReveal"), Error);
  }

  SUBCASE("altered salt slashes") {
    Salt wrong = fx.rng.next_digest();
    CHECK(contract.reveal("a", fx.prepared["a"].pointer, wrong, fx.store) ==
          RevealOutcome::commit_mismatch);
    const auto& acct = contract.accounts().at("a");
    CHECK(acct.slashed);
    CHECK(acct.stake == 0);
    CHECK(contract.reward_pool() == rc.reward_pool + 100);
    CHECK(contract.total_money() == total0);
  }

  SUBCASE("unknown pointer slashes") {
    // Commit to a pointer that is never stored.
    Fixture fx2;
    auto rc2 = small_config();
    Contract c2 = fx2.make_contract(rc2, {"a", "b"});
    c2.register_client("a", 100);
    c2.register_client("b", 100);
    c2.begin_commit();
    blobstore::ContentPointer phantom{sha256(as_bytes(std::string("never stored")))};
    Salt salt = fx2.rng.next_digest();
    auto commitment = blobstore::make_commitment(phantom, salt);
    c2.commit("a", commitment);
    fx2.prepare("b", rc2);
    c2.commit("b", fx2.prepared["b"].commitment);
    c2.request_pairing(randbeacon::derive_seed(fx2.key, 1, randbeacon::SeedPurpose::pairing));
    c2.install_task_split(randbeacon::derive_seed(fx2.key, 1, randbeacon::SeedPurpose::task_split));
    CHECK(c2.reveal("a", phantom, salt, fx2.store) == RevealOutcome::unresolvable_pointer);
    CHECK(c2.accounts().at("a").slashed);
  }

  SUBCASE("non-report blob slashes") {
    Fixture fx3;
    auto rc3 = small_config();
    Contract c3 = fx3.make_contract(rc3, {"a", "b"});
    c3.register_client("a", 100);
    c3.register_client("b", 100);
    c3.begin_commit();
    Bytes junk{0x42, 0x42, 0x42};
    auto pointer = fx3.store.put(junk);
    Salt salt = fx3.rng.next_digest();
    c3.commit("a", blobstore::make_commitment(pointer, salt));
    fx3.prepare("b", rc3);
    c3.commit("b", fx3.prepared["b"].commitment);
    c3.request_pairing(randbeacon::derive_seed(fx3.key, 1, randbeacon::SeedPurpose::pairing));
    c3.install_task_split(randbeacon::derive_seed(fx3.key, 1, randbeacon::SeedPurpose::task_split));
    CHECK(c3.reveal("a", pointer, salt, fx3.store) == RevealOutcome::malformed_report);
    CHECK(c3.accounts().at("a").slashed);
  }

  SUBCASE("reveal without commitment") {
    Fixture fx4;
    auto rc4 = small_config();
    Contract c4 = fx4.make_contract(rc4, {"a", "b", "c"});
    for (const ClientId id : {"a", "b", "c"}) c4.register_client(id, 100);
    c4.begin_commit();
    fx4.prepare("a", rc4);
    fx4.prepare("b", rc4);
    c4.commit("a", fx4.prepared["a"].commitment);
    c4.commit("b", fx4.prepared["b"].commitment);
    c4.request_pairing(randbeacon::derive_seed(fx4.key, 1, randbeacon::SeedPurpose::pairing));
    fx4.prepare("c", rc4);
    CHECK_THROWS_WITH_AS(c4.reveal("c", fx4.prepared["c"].pointer, fx4.prepared["c"].salt, fx4.store),
                         doctest::Contains("NoPriorCommit"), Error);
  }
}

TEST_CASE("scoring handles slashed partners and missed reveals") {
  Fixture fx;
  auto rc = small_config();
  std::vector<ClientId> ids{"a", "b"};
  Contract contract = fx.make_contract(rc, ids);
  fx.run_to_reveal(contract, rc, ids);

  SUBCASE("missed reveal slashes at scoring and partner gets the default") {
    contract.reveal("a", fx.prepared["a"].pointer, fx.prepared["a"].salt, fx.store);
    auto payments = contract.score_round(fx.identity_sign(rc.k), fx.store);
    REQUIRE(payments.size() == 1);
    CHECK(payments[0].client == "a");
    CHECK(payments[0].defaulted);
    CHECK(payments[0].scaled_score == rc.default_payment);
    CHECK(contract.accounts().at("b").slashed);
    CHECK(contract.meter().compute_units == 0);  // no pair actually scored

    contract.settle(payments);
    CHECK(contract.accounts().at("a").balance ==
          100 + static_cast<std::uint64_t>(rc.default_payment) * rc.alpha);
    CHECK(contract.accounts().at("b").balance == 0);
  }

  SUBCASE("no reveals at all yields an empty payment list") {
    auto payments = contract.score_round(fx.identity_sign(rc.k), fx.store);
    CHECK(payments.empty());
    contract.settle(payments);
    // Both slashed: stakes went to the pool.
    CHECK(contract.reward_pool() == rc.reward_pool + 200);
  }
}

TEST_CASE("settlement arithmetic") {
  Fixture fx;
  auto rc = small_config();
  std::vector<ClientId> ids{"a", "b"};
  Contract contract = fx.make_contract(rc, ids);
  fx.run_to_reveal(contract, rc, ids);
  for (const auto& id : ids) {
    contract.reveal(id, fx.prepared[id].pointer, fx.prepared[id].salt, fx.store);
  }
  contract.score_round(fx.identity_sign(rc.k), fx.store);

  SUBCASE("positive payment moves pool to balance") {
    std::vector<ClientPayment> payments{{"a", "b", 1, 4, false}};
    contract.settle(payments);
    CHECK(contract.accounts().at("a").balance == 100 + 10);
    CHECK(contract.reward_pool() == rc.reward_pool - 10);
  }

  SUBCASE("negative payment clamps at the stake") {
    // -15 in currency against a stake of 10: use scaled -15 with alpha 10
    // against stake 100 -> deduct 150, clamped at 100.
    std::vector<ClientPayment> payments{{"a", "b", -15, 4, false}};
    contract.settle(payments);
    const auto& acct = contract.accounts().at("a");
    CHECK(acct.stake == 0);
    CHECK(acct.balance == 0);
    CHECK(contract.reward_pool() == rc.reward_pool + 100);
  }

  SUBCASE("pool shortfall aborts atomically") {
    auto digest_before = contract.state_digest();
    std::vector<ClientPayment> payments{
        {"a", "b", static_cast<std::int64_t>(rc.reward_pool), 4, false}};
    CHECK_THROWS_WITH_AS(contract.settle(payments), doctest::Contains("InsufficientPool"), Error);
    CHECK(contract.state_digest() == digest_before);
    CHECK(contract.phase() == Phase::Score);
  }
}

TEST_CASE("phase safety: rejected operations leave no trace") {
  Fixture fx;
  auto rc = small_config();
  Contract contract = fx.make_contract(rc, {"a", "b"});
  contract.register_client("a", 100);
  contract.register_client("b", 100);

  auto digest = contract.state_digest();
  CHECK_THROWS_AS(contract.commit("a", blobstore::Commitment{}), Error);
  CHECK_THROWS_AS(
      contract.request_pairing(randbeacon::derive_seed(fx.key, 1, randbeacon::SeedPurpose::pairing)),
      Error);
  CHECK_THROWS_AS(contract.settle({}), Error);
  CHECK_THROWS_AS(contract.finish_audit(fx.key.secret), Error);
  CHECK(contract.state_digest() == digest);
}

TEST_CASE("audit detects tampering") {
  Fixture fx;
  auto rc = small_config();
  std::vector<ClientId> ids{"a", "b", "c", "d"};
  Contract contract = fx.make_contract(rc, ids);
  fx.run_to_reveal(contract, rc, ids);
  for (const auto& id : ids) {
    contract.reveal(id, fx.prepared[id].pointer, fx.prepared[id].salt, fx.store);
  }
  auto payments = contract.score_round(fx.identity_sign(rc.k), fx.store);
  contract.settle(payments);
  contract.finish_audit(fx.key.secret);

  auto events = contract.events();
  REQUIRE(Contract::audit(events, fx.key.secret, fx.store).ok);

  SUBCASE("edited payment is caught at its height") {
    for (auto& ev : events) {
      if (ev.kind == "score") {
        std::int64_t v = std::stoll(ev.payload.at("scaled_score").get<std::string>());
        ev.payload["scaled_score"] = std::to_string(v + 1);
        auto result = Contract::audit(events, fx.key.secret, fx.store);
        CHECK_FALSE(result.ok);
        CHECK(result.divergence_height == ev.height);
        break;
      }
    }
  }

  SUBCASE("edited pairing seed is caught") {
    for (auto& ev : events) {
      if (ev.kind == "pairing") {
        std::string seed = ev.payload.at("seed").get<std::string>();
        seed[0] = seed[0] == 'a' ? 'b' : 'a';
        ev.payload["seed"] = seed;
        auto result = Contract::audit(events, fx.key.secret, fx.store);
        CHECK_FALSE(result.ok);
        CHECK(result.divergence_height == ev.height);
        break;
      }
    }
  }

  SUBCASE("edited settle balance is caught") {
    for (auto& ev : events) {
      if (ev.kind == "settle") {
        ev.payload["balance"] = "999999";
        auto result = Contract::audit(events, fx.key.secret, fx.store);
        CHECK_FALSE(result.ok);
        CHECK(result.divergence_height == ev.height);
        break;
      }
    }
  }

  SUBCASE("truncated transcript is rejected") {
    events.pop_back();
    CHECK_FALSE(Contract::audit(events, fx.key.secret, fx.store).ok);
  }

  SUBCASE("wrong secret is rejected") {
    auto wrong = sha256(as_bytes(std::string("wrong secret")));
    CHECK_FALSE(Contract::audit(events, wrong, fx.store).ok);
  }
}

TEST_CASE("per-pair task splits score, settle, and audit") {
  Fixture fx;
  auto rc = small_config();
  rc.per_pair_split = true;
  rc.m = 16;
  std::vector<ClientId> ids{"a", "b", "c", "d", "e", "f"};
  Contract contract = fx.make_contract(rc, ids);
  fx.run_to_reveal(contract, rc, ids);
  for (const auto& id : ids) {
    contract.reveal(id, fx.prepared[id].pointer, fx.prepared[id].salt, fx.store);
  }
  // The shared-split accessor is meaningless in this mode.
  CHECK_THROWS_AS(contract.task_split(), Error);

  auto payments = contract.score_round(fx.identity_sign(rc.k), fx.store);
  CHECK(payments.size() == 6);
  // Cost accounting is unchanged: same lookup count per scored pair.
  CHECK(contract.meter().compute_units ==
        3ull * (rc.bonus_size + rc.penalty_size * rc.penalty_size));
  contract.settle(payments);
  contract.finish_audit(fx.key.secret);
  CHECK(Contract::audit(contract.events(), fx.key.secret, fx.store).ok);
}

TEST_CASE("ledger event line parsing round trip") {
  LedgerEvent ev{7, "commit", "alice", nlohmann::json{{"client", "alice"}, {"commitment", "ff"}}};
  auto parsed = LedgerEvent::parse(ev.line());
  CHECK(parsed.height == 7);
  CHECK(parsed.kind == "commit");
  CHECK(parsed.emitter == "alice");
  CHECK(parsed.line() == ev.line());

  CHECK_THROWS_WITH_AS(LedgerEvent::parse("not json"), doctest::Contains("ParseError"), Error);
  CHECK_THROWS_AS(LedgerEvent::parse("{\"kind\":\"x\"}"), Error);
}

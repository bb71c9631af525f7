#include "peerfed/chainsim.hpp"

#include "peerfed/errors.hpp"
#include "peerfed/hashing.hpp"

#include <algorithm>
#include <charconv>

namespace peerfed::chainsim {

using nlohmann::json;

namespace {

std::string dec(std::uint64_t v) { return std::to_string(v); }
std::string dec(std::int64_t v) { return std::to_string(v); }
std::string dec(std::uint32_t v) { return std::to_string(v); }
std::string dec(int v) { return std::to_string(v); }

std::uint64_t parse_u64(const json& j, const char* field) {
  if (!j.is_string()) throw Error(errc::parse_error, std::string(field) + " must be a decimal string");
  const std::string& s = j.get_ref<const std::string&>();
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(errc::parse_error, std::string("bad unsigned integer in ") + field);
  }
  return out;
}

std::int64_t parse_i64(const json& j, const char* field) {
  if (!j.is_string()) throw Error(errc::parse_error, std::string(field) + " must be a decimal string");
  const std::string& s = j.get_ref<const std::string&>();
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(errc::parse_error, std::string("bad signed integer in ") + field);
  }
  return out;
}

const char* delta_mode_name(DeltaMode mode) {
  return mode == DeltaMode::known_prior ? "known_prior" : "empirical";
}

DeltaMode delta_mode_from(const std::string& name) {
  if (name == "known_prior") return DeltaMode::known_prior;
  if (name == "empirical") return DeltaMode::empirical;
  throw Error(errc::parse_error, "unknown delta mode " + name);
}

json split_to_json(const mechanism::TaskSplit& split) {
  auto arr = [](const std::vector<std::uint32_t>& v) {
    json a = json::array();
    for (auto t : v) a.push_back(dec(t));
    return a;
  };
  return json{{"bonus", arr(split.bonus)}, {"penalty1", arr(split.penalty1)},
              {"penalty2", arr(split.penalty2)}};
}

json pairing_to_json(const randbeacon::PairingAssignment& pairing) {
  json pairs = json::array();
  for (const auto& [a, b] : pairing.pairs) pairs.push_back(json::array({a, b}));
  json j{{"pairs", pairs}};
  if (pairing.odd_client) {
    j["odd_client"] = pairing.odd_client->first;
    j["odd_partner"] = pairing.odd_client->second;
  } else {
    j["odd_client"] = nullptr;
    j["odd_partner"] = nullptr;
  }
  return j;
}

}  // namespace

const char* phase_name(Phase phase) {
  switch (phase) {
    case Phase::Register: return "Register";
    case Phase::Commit: return "Commit";
    case Phase::PairingRequested: return "PairingRequested";
    case Phase::Reveal: return "Reveal";
    case Phase::Score: return "Score";
    case Phase::Settle: return "Settle";
    case Phase::Audit: return "Audit";
  }
  return "Unknown";
}

const char* slash_reason_name(SlashReason reason) {
  switch (reason) {
    case SlashReason::commit_mismatch: return "commit_mismatch";
    case SlashReason::unresolvable_pointer: return "unresolvable_pointer";
    case SlashReason::malformed_report: return "malformed_report";
    case SlashReason::missed_reveal: return "missed_reveal";
  }
  return "unknown";
}

std::string LedgerEvent::line() const {
  json j{{"emitter", emitter}, {"height", height}, {"kind", kind}, {"payload", payload}};
  return j.dump();
}

LedgerEvent LedgerEvent::parse(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(errc::parse_error, std::string("bad transcript line: ") + e.what());
  }
  if (!j.is_object() || !j.contains("height") || !j.contains("kind") || !j.contains("emitter") ||
      !j.contains("payload")) {
    throw Error(errc::parse_error, "transcript line missing required fields");
  }
  try {
    LedgerEvent ev;
    ev.height = j.at("height").get<std::uint64_t>();
    ev.kind = j.at("kind").get<std::string>();
    ev.emitter = j.at("emitter").get<std::string>();
    ev.payload = j.at("payload");
    return ev;
  } catch (const json::exception& e) {
    throw Error(errc::parse_error, std::string("bad transcript field: ") + e.what());
  }
}

Contract::Contract(RoundConfig config, const std::vector<std::pair<ClientId, std::uint64_t>>& funding,
                   const Digest32& beacon_commitment)
    : config_(std::move(config)), reward_pool_(config_.reward_pool),
      beacon_commitment_(beacon_commitment) {
  if (config_.k < 2 || config_.k > 256) {
    throw Error(errc::invalid_config, "k must be in [2, 256]");
  }
  if (config_.bonus_size < 1 || config_.penalty_size < 1 ||
      static_cast<std::uint64_t>(config_.bonus_size) + 2ull * config_.penalty_size > config_.m) {
    throw Error(errc::invalid_config, "task split sizes incompatible with m");
  }
  if (config_.quorum < 2) {
    throw Error(errc::invalid_config, "quorum must be at least 2");
  }
  if (config_.alpha == 0) {
    throw Error(errc::invalid_config, "alpha must be positive");
  }
  if (config_.default_payment < 0 || config_.default_payment > config_.max_scaled_score()) {
    throw Error(errc::invalid_config, "default_payment outside the payment range");
  }
  if (config_.prior_weights.size() != config_.k) {
    throw Error(errc::invalid_config, "prior weights must have one entry per class");
  }

  json roster = json::object();
  for (const auto& [id, funds] : funding) {
    if (accounts_.count(id)) {
      throw Error(errc::invalid_config, "duplicate account id " + id);
    }
    accounts_[id] = Account{id, funds, 0, false, false};
    roster[id] = dec(funds);
  }

  json prior = json::array();
  for (Eigen::Index i = 0; i < config_.prior_weights.size(); ++i) {
    prior.push_back(dec(config_.prior_weights[i]));
  }
  append("genesis", "contract",
         json{{"accounts", roster},
              {"alpha", dec(config_.alpha)},
              {"beacon_commitment", beacon_commitment_.hex()},
              {"bonus_size", dec(config_.bonus_size)},
              {"default_payment", dec(config_.default_payment)},
              {"delta_mode", delta_mode_name(config_.delta_mode)},
              {"k", dec(config_.k)},
              {"m", dec(config_.m)},
              {"min_stake", dec(config_.min_stake)},
              {"penalty_size", dec(config_.penalty_size)},
              {"per_pair_split", config_.per_pair_split},
              {"prior", prior},
              {"quorum", dec(static_cast<std::uint64_t>(config_.quorum))},
              {"reference_accuracy", config_.reference_accuracy.str()},
              {"reward_pool", dec(config_.reward_pool)},
              {"round", dec(config_.round)}});
}

void Contract::require_phase(Phase expected, const char* op) const {
  if (phase_ != expected) {
    throw Error(errc::wrong_phase, std::string(op) + " requires phase " + phase_name(expected) +
                                       ", current phase is " + phase_name(phase_));
  }
}

LedgerEvent& Contract::append(const std::string& kind, const std::string& emitter, json payload) {
  events_.push_back(LedgerEvent{next_height_++, kind, emitter, std::move(payload)});
  return events_.back();
}

Account& Contract::account(const ClientId& client) {
  auto it = accounts_.find(client);
  if (it == accounts_.end()) {
    throw Error(errc::unknown_client, "no funded account for " + client);
  }
  return it->second;
}

void Contract::register_client(const ClientId& client, std::uint64_t stake_amount) {
  require_phase(Phase::Register, "register");
  Account& acct = account(client);
  if (acct.registered) {
    throw Error(errc::duplicate_registration, client + " is already registered");
  }
  if (stake_amount < config_.min_stake) {
    throw Error(errc::insufficient_stake, "stake " + dec(stake_amount) + " below minimum " +
                                              dec(config_.min_stake));
  }
  if (acct.balance < stake_amount) {
    throw Error(errc::insufficient_stake, client + " cannot fund stake " + dec(stake_amount));
  }
  acct.balance -= stake_amount;
  acct.stake = stake_amount;
  acct.registered = true;
  append("register", client, json{{"client", client}, {"stake", dec(stake_amount)}});
}

void Contract::begin_commit() {
  require_phase(Phase::Register, "begin_commit");
  phase_ = Phase::Commit;
  append("phase", "contract", json{{"from", "Register"}, {"to", "Commit"}});
}

void Contract::commit(const ClientId& client, const blobstore::Commitment& commitment) {
  require_phase(Phase::Commit, "commit");
  auto it = accounts_.find(client);
  if (it == accounts_.end() || !it->second.registered) {
    throw Error(errc::not_registered, client + " is not registered");
  }
  if (commitments_.count(client)) {
    throw Error(errc::duplicate_commit, client + " already committed this round");
  }
  commitments_.emplace(client, commitment);
  meter_.storage_bytes += 32;
  append("commit", client, json{{"client", client}, {"commitment", commitment.hex()}});
}

const randbeacon::PairingAssignment& Contract::request_pairing(
    const randbeacon::SeedBundle& bundle) {
  require_phase(Phase::Commit, "request_pairing");
  if (commitments_.size() < config_.quorum) {
    throw Error(errc::quorum_not_reached, dec(static_cast<std::uint64_t>(commitments_.size())) +
                                              " commitments, quorum is " +
                                              dec(static_cast<std::uint64_t>(config_.quorum)));
  }
  std::vector<ClientId> committed;
  committed.reserve(commitments_.size());
  for (const auto& [id, c] : commitments_) committed.push_back(id);

  phase_ = Phase::PairingRequested;
  pairing_ = randbeacon::pair_clients(bundle.seed, std::move(committed));
  pairing_bundle_ = bundle;
  phase_ = Phase::Reveal;

  json payload = pairing_to_json(*pairing_);
  payload["purpose"] = randbeacon::purpose_tag(bundle.purpose);
  payload["round"] = dec(bundle.round);
  payload["seed"] = bundle.seed.hex();
  append("pairing", "contract", std::move(payload));
  return *pairing_;
}

void Contract::install_task_split(const randbeacon::SeedBundle& bundle) {
  require_phase(Phase::Reveal, "install_task_split");
  if (split_bundle_) {
    throw Error(errc::wrong_phase, "task split already installed this round");
  }
  split_bundle_ = bundle;
  json payload;
  if (config_.per_pair_split) {
    // Per-pair splits are derived lazily from the seed and the pair index;
    // only the seed goes on chain.
    payload = json{{"mode", "per_pair"}};
  } else {
    split_ = randbeacon::split_tasks(bundle.seed, config_.m, config_.bonus_size,
                                     config_.penalty_size);
    payload = split_to_json(*split_);
    payload["mode"] = "shared";
  }
  payload["purpose"] = randbeacon::purpose_tag(bundle.purpose);
  payload["round"] = dec(bundle.round);
  payload["seed"] = bundle.seed.hex();
  append("task_split", "contract", std::move(payload));
}

void Contract::slash(const ClientId& client, SlashReason reason, const json& detail) {
  Account& acct = accounts_.at(client);
  std::uint64_t forfeited = acct.stake;
  reward_pool_ += forfeited;
  acct.stake = 0;
  acct.slashed = true;
  resolved_.insert(client);
  json payload = detail;
  payload["client"] = client;
  payload["forfeited"] = dec(forfeited);
  payload["reason"] = slash_reason_name(reason);
  append("slash", "contract", std::move(payload));
}

RevealOutcome Contract::reveal(const ClientId& client, const blobstore::ContentPointer& pointer,
                               const Salt& salt, const blobstore::Store& store) {
  require_phase(Phase::Reveal, "reveal");
  auto it = commitments_.find(client);
  if (it == commitments_.end()) {
    throw Error(errc::no_prior_commit, client + " has no commitment this round");
  }
  if (resolved_.count(client)) {
    throw Error(errc::duplicate_reveal, client + " already revealed or was slashed");
  }

  json detail{{"pointer", pointer.hex()}, {"salt", salt.hex()}};
  if (!blobstore::verify_commitment(it->second, pointer, salt)) {
    slash(client, SlashReason::commit_mismatch, detail);
    return RevealOutcome::commit_mismatch;
  }
  if (!store.contains(pointer)) {
    slash(client, SlashReason::unresolvable_pointer, detail);
    return RevealOutcome::unresolvable_pointer;
  }
  try {
    SignalReport report = blobstore::decode_report(store.get(pointer), config_.k);
    if (report.size() != config_.m) {
      throw Error(errc::malformed_report, "report does not cover the public task set");
    }
  } catch (const Error&) {
    slash(client, SlashReason::malformed_report, detail);
    return RevealOutcome::malformed_report;
  }

  reveals_.emplace(client, pointer);
  resolved_.insert(client);
  meter_.storage_bytes += 32;
  append("reveal", client, json{{"client", client}, {"pointer", pointer.hex()}, {"salt", salt.hex()}});
  return RevealOutcome::accepted;
}

std::vector<ClientPayment> Contract::score_round(const mechanism::SignMatrix& sign,
                                                 const blobstore::Store& store) {
  require_phase(Phase::Reveal, "score_round");
  if (!pairing_ || !split_bundle_) {
    throw Error(errc::wrong_phase, "scoring requires pairing and task split");
  }
  if (sign.k() != config_.k) {
    throw Error(errc::dimension_mismatch, "sign matrix size does not match alphabet");
  }

  // Deadline: committed clients that never revealed forfeit their stake now.
  for (const auto& [client, c] : commitments_) {
    if (!resolved_.count(client)) {
      slash(client, SlashReason::missed_reveal, json::object());
    }
  }

  append("sign_matrix", "contract",
         json{{"k", dec(config_.k)},
              {"mode", delta_mode_name(config_.delta_mode)},
              {"rows", sign_matrix_to_json(sign)}});

  std::map<ClientId, SignalReport> reports;
  for (const auto& [client, pointer] : reveals_) {
    reports.emplace(client, blobstore::decode_report(store.get(pointer), config_.k));
  }

  const std::int64_t denom =
      static_cast<std::int64_t>(config_.penalty_size) * config_.penalty_size;
  const std::uint64_t lookups_per_pair =
      config_.bonus_size + static_cast<std::uint64_t>(config_.penalty_size) * config_.penalty_size;

  auto split_for_pair = [&](std::uint64_t index) -> mechanism::TaskSplit {
    if (!config_.per_pair_split) return *split_;
    auto idx = be64(index);
    Digest32 pair_seed =
        sha256({split_bundle_->seed.view(), ByteView(idx.data(), idx.size())});
    return randbeacon::split_tasks(pair_seed, config_.m, config_.bonus_size,
                                   config_.penalty_size);
  };

  std::vector<ClientPayment> payments;
  auto score_pair = [&](const ClientId& a, const ClientId& b, std::uint64_t index, bool pay_b) {
    const bool a_ok = reports.count(a) > 0;
    const bool b_ok = reports.count(b) > 0;
    if (a_ok && b_ok) {
      mechanism::PairPayment pay =
          mechanism::ca_pair_payment(reports.at(a), reports.at(b), split_for_pair(index), sign);
      meter_.compute_units += lookups_per_pair;
      payments.push_back({a, b, pay.scaled_score, pay.scale_denominator, false});
      if (pay_b) payments.push_back({b, a, pay.scaled_score, pay.scale_denominator, false});
    } else if (a_ok) {
      payments.push_back({a, b, config_.default_payment, denom, true});
    } else if (b_ok && pay_b) {
      payments.push_back({b, a, config_.default_payment, denom, true});
    }
  };

  std::uint64_t pair_index = 0;
  for (const auto& [a, b] : pairing_->pairs) score_pair(a, b, pair_index++, true);
  if (pairing_->odd_client) {
    score_pair(pairing_->odd_client->first, pairing_->odd_client->second, pair_index, false);
  }

  for (const ClientPayment& p : payments) {
    append("score", "contract",
           json{{"client", p.client},
                {"defaulted", p.defaulted},
                {"denominator", dec(p.scale_denominator)},
                {"partner", p.partner},
                {"scaled_score", dec(p.scaled_score)}});
  }

  phase_ = Phase::Score;
  last_payments_ = payments;
  return payments;
}

void Contract::settle(const std::vector<ClientPayment>& payments) {
  require_phase(Phase::Score, "settle");

  std::map<ClientId, std::int64_t> currency;
  std::uint64_t positive_total = 0;
  for (const ClientPayment& p : payments) {
    std::int64_t amount =
        mechanism::to_currency(mechanism::PairPayment{p.scaled_score, p.scale_denominator},
                               config_.alpha);
    currency[p.client] += amount;
  }
  for (const auto& [client, amount] : currency) {
    if (amount > 0) positive_total += static_cast<std::uint64_t>(amount);
  }
  if (positive_total > reward_pool_) {
    throw Error(errc::insufficient_pool, "pool " + dec(reward_pool_) + " cannot cover payouts " +
                                             dec(positive_total));
  }

  for (auto& [id, acct] : accounts_) {
    std::int64_t amount = 0;
    if (auto it = currency.find(id); it != currency.end()) amount = it->second;
    if (amount > 0) {
      reward_pool_ -= static_cast<std::uint64_t>(amount);
      acct.balance += static_cast<std::uint64_t>(amount);
    } else if (amount < 0) {
      std::uint64_t deficit = static_cast<std::uint64_t>(-amount);
      std::uint64_t taken = std::min(acct.stake, deficit);
      acct.stake -= taken;
      reward_pool_ += taken;
    }
    if (acct.registered && !acct.slashed) {
      acct.balance += acct.stake;
      acct.stake = 0;
    }
    append("settle", "contract",
           json{{"balance", dec(acct.balance)},
                {"client", id},
                {"payment", dec(amount)},
                {"stake", dec(acct.stake)}});
  }
  append("settled", "contract", json{{"reward_pool", dec(reward_pool_)}});
  phase_ = Phase::Settle;
}

void Contract::finish_audit(const Digest32& disclosed_secret) {
  require_phase(Phase::Settle, "audit");
  if (sha256(disclosed_secret.view()) != beacon_commitment_) {
    throw Error(errc::audit_failed, "disclosed secret does not match the beacon commitment");
  }
  Digest32 digest = state_digest();
  for (const auto& bundle : {pairing_bundle_, split_bundle_}) {
    if (!bundle) continue;
    append("audit_seed", "contract",
           json{{"purpose", randbeacon::purpose_tag(bundle->purpose)},
                {"round", dec(bundle->round)},
                {"secret_hex", disclosed_secret.hex()},
                {"seed_hex", bundle->seed.hex()}});
  }
  append("audit", "contract", json{{"state_digest", digest.hex()}});
  phase_ = Phase::Audit;
}

const randbeacon::PairingAssignment& Contract::pairing() const {
  if (!pairing_) throw Error(errc::wrong_phase, "no pairing requested yet");
  return *pairing_;
}

const mechanism::TaskSplit& Contract::task_split() const {
  if (!split_) {
    throw Error(errc::wrong_phase, "no shared task split installed");
  }
  return *split_;
}

std::uint64_t Contract::total_money() const {
  std::uint64_t total = reward_pool_;
  for (const auto& [id, acct] : accounts_) total += acct.balance + acct.stake;
  return total;
}

Digest32 Contract::state_digest() const {
  json accounts = json::array();
  for (const auto& [id, acct] : accounts_) {
    accounts.push_back(json{{"balance", dec(acct.balance)},
                            {"client", id},
                            {"registered", acct.registered},
                            {"slashed", acct.slashed},
                            {"stake", dec(acct.stake)}});
  }
  json commitments = json::object();
  for (const auto& [id, c] : commitments_) commitments[id] = c.hex();
  json reveals = json::object();
  for (const auto& [id, p] : reveals_) reveals[id] = p.hex();

  json state{{"accounts", accounts},
             {"commitments", commitments},
             {"compute_units", dec(meter_.compute_units)},
             {"pairing", pairing_ ? pairing_to_json(*pairing_) : json(nullptr)},
             {"phase", phase_name(phase_)},
             {"reveals", reveals},
             {"reward_pool", dec(reward_pool_)},
             {"round", dec(config_.round)},
             {"split", split_ ? split_to_json(*split_) : json(nullptr)},
             {"storage_bytes", dec(meter_.storage_bytes)}};
  std::string text = state.dump();
  return sha256(as_bytes(text));
}

mechanism::SignMatrix compute_round_sign_matrix(const Contract& contract,
                                                const blobstore::Store& store) {
  const RoundConfig& cfg = contract.config();
  if (cfg.delta_mode == DeltaMode::known_prior) {
    auto joint = mechanism::build_joint_from_model(cfg.prior_weights, cfg.reference_accuracy,
                                                   cfg.reference_accuracy);
    return mechanism::sign_matrix(mechanism::delta_matrix(joint));
  }

  const auto& reveals = contract.reveals();
  std::map<ClientId, SignalReport> reports;
  for (const auto& [client, pointer] : reveals) {
    reports.emplace(client, blobstore::decode_report(store.get(pointer), cfg.k));
  }

  IMat counts = IMat::Zero(cfg.k, cfg.k);
  auto accumulate = [&](const ClientId& a, const ClientId& b) {
    auto ia = reports.find(a);
    auto ib = reports.find(b);
    if (ia == reports.end() || ib == reports.end()) return;
    for (std::uint32_t t = 0; t < cfg.m; ++t) {
      counts(ia->second[t], ib->second[t]) += 1;
    }
  };
  const auto& pairing = contract.pairing();
  for (const auto& [a, b] : pairing.pairs) accumulate(a, b);
  if (pairing.odd_client) accumulate(pairing.odd_client->first, pairing.odd_client->second);

  if (counts.sum() == 0) {
    return mechanism::SignMatrix{MatrixX<std::int32_t>::Zero(cfg.k, cfg.k)};
  }
  auto joint = mechanism::symmetrize(mechanism::build_joint_from_counts(counts));
  return mechanism::sign_matrix(mechanism::delta_matrix(joint));
}

nlohmann::json sign_matrix_to_json(const mechanism::SignMatrix& sign) {
  json rows = json::array();
  for (int x = 0; x < sign.k(); ++x) {
    std::string row(static_cast<std::size_t>(sign.k()), '0');
    for (int y = 0; y < sign.k(); ++y) {
      if (sign.s(x, y) != 0) row[static_cast<std::size_t>(y)] = '1';
    }
    rows.push_back(row);
  }
  return rows;
}

mechanism::SignMatrix sign_matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw Error(errc::parse_error, "sign matrix rows missing");
  const int k = static_cast<int>(j.size());
  MatrixX<std::int32_t> s = MatrixX<std::int32_t>::Zero(k, k);
  for (int x = 0; x < k; ++x) {
    const std::string row = j.at(static_cast<std::size_t>(x)).get<std::string>();
    if (static_cast<int>(row.size()) != k) throw Error(errc::parse_error, "ragged sign matrix");
    for (int y = 0; y < k; ++y) {
      if (row[static_cast<std::size_t>(y)] == '1') s(x, y) = 1;
    }
  }
  return mechanism::SignMatrix{std::move(s)};
}

namespace {

// Rebuilds the contract inputs recorded in a genesis event.
struct GenesisData {
  RoundConfig config;
  std::vector<std::pair<ClientId, std::uint64_t>> funding;
  Digest32 beacon_commitment;
};

GenesisData parse_genesis(const LedgerEvent& ev) {
  if (ev.kind != "genesis") {
    throw Error(errc::parse_error, "transcript must start with a genesis event");
  }
  const json& p = ev.payload;
  GenesisData g;
  g.config.round = parse_u64(p.at("round"), "round");
  g.config.k = static_cast<int>(parse_u64(p.at("k"), "k"));
  g.config.m = static_cast<std::uint32_t>(parse_u64(p.at("m"), "m"));
  g.config.bonus_size = static_cast<std::uint32_t>(parse_u64(p.at("bonus_size"), "bonus_size"));
  g.config.penalty_size =
      static_cast<std::uint32_t>(parse_u64(p.at("penalty_size"), "penalty_size"));
  g.config.min_stake = parse_u64(p.at("min_stake"), "min_stake");
  g.config.quorum = static_cast<std::size_t>(parse_u64(p.at("quorum"), "quorum"));
  g.config.reward_pool = parse_u64(p.at("reward_pool"), "reward_pool");
  g.config.alpha = parse_u64(p.at("alpha"), "alpha");
  g.config.default_payment = parse_i64(p.at("default_payment"), "default_payment");
  g.config.delta_mode = delta_mode_from(p.at("delta_mode").get<std::string>());
  g.config.per_pair_split = p.at("per_pair_split").get<bool>();
  const json& prior = p.at("prior");
  g.config.prior_weights = IVec(prior.size());
  for (std::size_t i = 0; i < prior.size(); ++i) {
    g.config.prior_weights[static_cast<Eigen::Index>(i)] =
        static_cast<std::int64_t>(parse_u64(prior.at(i), "prior"));
  }
  g.config.reference_accuracy = Rational::parse(p.at("reference_accuracy").get<std::string>());
  g.beacon_commitment = Digest32::from_hex(p.at("beacon_commitment").get<std::string>());
  for (const auto& [id, funds] : p.at("accounts").items()) {
    g.funding.emplace_back(id, parse_u64(funds, "accounts"));
  }
  return g;
}

randbeacon::SeedBundle bundle_from_payload(const json& p) {
  auto purpose = randbeacon::purpose_from_tag(p.at("purpose").get<std::string>());
  if (!purpose) throw Error(errc::parse_error, "unknown seed purpose");
  return randbeacon::SeedBundle{parse_u64(p.at("round"), "round"), *purpose,
                                Digest32::from_hex(p.at("seed").get<std::string>())};
}

}  // namespace

Contract::AuditResult Contract::audit(const std::vector<LedgerEvent>& transcript,
                                      const Digest32& disclosed_secret,
                                      const blobstore::Store& store) {
  if (transcript.empty()) {
    return {false, 0, "empty transcript"};
  }
  std::size_t pos = 0;  // next recorded event to reconcile
  try {
    GenesisData genesis = parse_genesis(transcript.front());
    if (sha256(disclosed_secret.view()) != genesis.beacon_commitment) {
      return {false, 0, "disclosed secret does not match the genesis beacon commitment"};
    }
    Contract replica(genesis.config, genesis.funding, genesis.beacon_commitment);

    auto reconcile = [&](std::uint64_t up_to_exclusive) -> std::optional<AuditResult> {
      for (; pos < up_to_exclusive; ++pos) {
        if (pos >= transcript.size()) {
          return AuditResult{false, pos == 0 ? 0 : transcript.back().height,
                             "replica produced more events than the transcript records"};
        }
        if (pos >= replica.events_.size()) {
          return AuditResult{false, transcript[pos].height,
                             "transcript records events the replica did not produce"};
        }
        if (replica.events_[pos].line() != transcript[pos].line()) {
          return AuditResult{false, transcript[pos].height,
                             "recomputed " + replica.events_[pos].kind +
                                 " event diverges from recorded " + transcript[pos].kind};
        }
      }
      return std::nullopt;
    };

    if (auto r = reconcile(1)) return *r;  // genesis echo

    std::vector<ClientPayment> payments;
    bool scored = false;
    bool settled = false;
    bool audited = false;

    while (pos < transcript.size()) {
      const LedgerEvent& ev = transcript[pos];
      const json& p = ev.payload;
      const std::string& kind = ev.kind;

      if (kind == "register") {
        replica.register_client(p.at("client").get<std::string>(),
                                parse_u64(p.at("stake"), "stake"));
      } else if (kind == "phase") {
        if (p.at("to").get<std::string>() != "Commit") {
          return {false, ev.height, "unexpected phase transition event"};
        }
        replica.begin_commit();
      } else if (kind == "commit") {
        replica.commit(p.at("client").get<std::string>(),
                       blobstore::Commitment{
                           Digest32::from_hex(p.at("commitment").get<std::string>())});
      } else if (kind == "pairing") {
        auto bundle = bundle_from_payload(p);
        if (!randbeacon::verify_seed(genesis.beacon_commitment, bundle, disclosed_secret)) {
          return {false, ev.height, "pairing seed fails verification"};
        }
        replica.request_pairing(bundle);
      } else if (kind == "task_split") {
        auto bundle = bundle_from_payload(p);
        if (!randbeacon::verify_seed(genesis.beacon_commitment, bundle, disclosed_secret)) {
          return {false, ev.height, "task split seed fails verification"};
        }
        replica.install_task_split(bundle);
      } else if (kind == "reveal" ||
                 (kind == "slash" && p.at("reason").get<std::string>() != "missed_reveal")) {
        blobstore::ContentPointer pointer{
            Digest32::from_hex(p.at("pointer").get<std::string>())};
        Salt salt = blobstore::salt_from_bytes(
            Bytes(from_hex(p.at("salt").get<std::string>())));
        replica.reveal(p.at("client").get<std::string>(), pointer, salt, store);
      } else if (kind == "sign_matrix" ||
                 (kind == "slash" && p.at("reason").get<std::string>() == "missed_reveal")) {
        mechanism::SignMatrix sign = compute_round_sign_matrix(replica, store);
        payments = replica.score_round(sign, store);
        scored = true;
      } else if (kind == "settle" || kind == "settled") {
        if (!scored) return {false, ev.height, "settlement recorded before scoring"};
        replica.settle(payments);
        settled = true;
      } else if (kind == "audit_seed" || kind == "audit") {
        if (!settled) return {false, ev.height, "audit recorded before settlement"};
        replica.finish_audit(disclosed_secret);
        audited = true;
      } else {
        return {false, ev.height, "unknown event kind " + kind};
      }

      if (auto r = reconcile(replica.events_.size())) return *r;
    }

    if (!audited || replica.phase() != Phase::Audit) {
      return {false, transcript.back().height, "transcript is incomplete"};
    }
    return {true, 0, ""};
  } catch (const std::exception& e) {
    std::uint64_t height =
        pos < transcript.size() ? transcript[pos].height : transcript.back().height;
    return {false, height, std::string("replay error: ") + e.what()};
  }
}

}  // namespace peerfed::chainsim

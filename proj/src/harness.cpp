#include "peerfed/harness.hpp"

#include "peerfed/blobstore.hpp"
#include "peerfed/drbg.hpp"
#include "peerfed/errors.hpp"
#include "peerfed/hashing.hpp"
#include "peerfed/randbeacon.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

namespace peerfed::harness {

using nlohmann::json;

const char* behavior_name(ProtocolBehavior behavior) {
  switch (behavior) {
    case ProtocolBehavior::honest: return "honest";
    case ProtocolBehavior::withhold_commit: return "withhold_commit";
    case ProtocolBehavior::equivocate_reveal: return "equivocate_reveal";
    case ProtocolBehavior::no_reveal: return "no_reveal";
  }
  return "unknown";
}

namespace {

ProtocolBehavior behavior_from(const std::string& name) {
  if (name == "honest") return ProtocolBehavior::honest;
  if (name == "withhold_commit") return ProtocolBehavior::withhold_commit;
  if (name == "equivocate_reveal") return ProtocolBehavior::equivocate_reveal;
  if (name == "no_reveal") return ProtocolBehavior::no_reveal;
  throw Error(errc::invalid_config, "unknown behavior " + name);
}

Rational rational_from_json(const json& j, const char* field) {
  if (j.is_string()) return Rational::parse(j.get<std::string>());
  if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
  if (j.is_number_float()) return Rational::from_decimal(j.get<double>());
  throw Error(errc::invalid_config, std::string(field) + " must be a number or rational string");
}

template <class T>
T uint_from_json(const json& j, const char* field) {
  if (!j.is_number_integer() ||
      (!j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    throw Error(errc::invalid_config, std::string(field) + " must be a non-negative integer");
  }
  return static_cast<T>(j.get<std::uint64_t>());
}

void reject_unknown(const json& j, const std::set<std::string>& known, const char* where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      throw Error(errc::invalid_config,
                  std::string("unknown field \"") + key + "\" in " + where);
    }
  }
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (k < 2 || k > 256) throw Error(errc::invalid_config, "k must be in [2, 256]");
  if (m < 1) throw Error(errc::invalid_config, "m must be positive");
  if (bonus_size < 1 || penalty_size < 1 ||
      static_cast<std::uint64_t>(bonus_size) + 2ull * penalty_size > m) {
    throw Error(errc::invalid_config, "require bonus_size + 2*penalty_size <= m");
  }
  if (clients.empty()) throw Error(errc::invalid_config, "client roster is empty");
  if (quorum < 2 || quorum > clients.size()) {
    throw Error(errc::invalid_config, "quorum must be in [2, roster size]");
  }
  std::set<ClientId> ids;
  for (const ClientSpec& c : clients) {
    if (!ids.insert(c.id).second) {
      throw Error(errc::invalid_config, "duplicate client id " + c.id);
    }
    if (c.effort < Rational(0) || c.effort > Rational(1)) {
      throw Error(errc::invalid_config, "effort of " + c.id + " outside [0, 1]");
    }
    if (c.stake < min_stake) {
      throw Error(errc::invalid_config, "stake of " + c.id + " below min_stake");
    }
  }
  auto acc = accuracy_model();
  if (acc.a_min * Rational(k) < Rational(1) || acc.a_max > Rational(1) || acc.a_min > acc.a_max) {
    throw Error(errc::invalid_config, "accuracy range must satisfy 1/k <= a_min <= a_max <= 1");
  }
  if (prior_weights.size() != 0 && prior_weights.size() != k) {
    throw Error(errc::invalid_config, "prior must have one weight per class");
  }
  std::int64_t def = effective_default_payment();
  if (def < 0 || def > max_scaled_score()) {
    throw Error(errc::invalid_config, "default_payment outside [0, max scaled score]");
  }
  if (trials < 1) throw Error(errc::invalid_config, "trials must be at least 1");
}

IVec effective_prior_weights(const ScenarioConfig& config) {
  if (config.prior_weights.size() == static_cast<Eigen::Index>(config.k)) {
    return config.prior_weights;
  }
  return IVec::Ones(config.k);
}

chainsim::RoundConfig ScenarioConfig::round_config() const {
  chainsim::RoundConfig rc;
  rc.round = 1;
  rc.k = k;
  rc.m = m;
  rc.bonus_size = bonus_size;
  rc.penalty_size = penalty_size;
  rc.min_stake = min_stake;
  rc.quorum = quorum;
  rc.reward_pool = reward_pool;
  rc.alpha = alpha;
  rc.default_payment = effective_default_payment();
  rc.delta_mode = delta_mode;
  rc.per_pair_split = per_pair_split;
  rc.prior_weights = effective_prior_weights(*this);
  rc.reference_accuracy = accuracy_model().accuracy(reference_effort);
  return rc;
}

ScenarioConfig scenario_from_json(const json& j) {
  if (!j.is_object()) throw Error(errc::invalid_config, "scenario must be a JSON object");
  reject_unknown(j,
                 {"k", "m", "bonus_size", "penalty_size", "clients", "min_stake", "quorum",
                  "reward_pool", "alpha", "delta_mode", "default_payment", "master_seed",
                  "trials", "a_min", "a_max", "cost_per_effort", "reference_effort", "prior",
                  "signal_source", "logistic", "per_pair_split"},
                 "scenario");

  ScenarioConfig cfg;
  cfg.k = static_cast<int>(uint_from_json<std::uint32_t>(j.at("k"), "k"));
  cfg.m = uint_from_json<std::uint32_t>(j.at("m"), "m");
  cfg.bonus_size = uint_from_json<std::uint32_t>(j.at("bonus_size"), "bonus_size");
  cfg.penalty_size = uint_from_json<std::uint32_t>(j.at("penalty_size"), "penalty_size");
  cfg.min_stake = uint_from_json<std::uint64_t>(j.at("min_stake"), "min_stake");
  cfg.quorum = uint_from_json<std::uint64_t>(j.at("quorum"), "quorum");
  cfg.reward_pool = uint_from_json<std::uint64_t>(j.at("reward_pool"), "reward_pool");
  cfg.alpha = uint_from_json<std::uint64_t>(j.at("alpha"), "alpha");
  cfg.master_seed = uint_from_json<std::uint64_t>(j.at("master_seed"), "master_seed");
  if (j.contains("trials")) cfg.trials = uint_from_json<std::uint32_t>(j.at("trials"), "trials");

  const std::string mode = j.at("delta_mode").get<std::string>();
  if (mode == "known_prior") {
    cfg.delta_mode = chainsim::DeltaMode::known_prior;
  } else if (mode == "empirical") {
    cfg.delta_mode = chainsim::DeltaMode::empirical;
  } else {
    throw Error(errc::invalid_config, "delta_mode must be known_prior or empirical");
  }

  if (j.contains("default_payment") && !j.at("default_payment").is_null()) {
    cfg.default_payment = j.at("default_payment").get<std::int64_t>();
  }
  if (j.contains("per_pair_split")) {
    if (!j.at("per_pair_split").is_boolean()) {
      throw Error(errc::invalid_config, "per_pair_split must be a boolean");
    }
    cfg.per_pair_split = j.at("per_pair_split").get<bool>();
  }
  if (j.contains("a_min")) cfg.a_min = rational_from_json(j.at("a_min"), "a_min");
  if (j.contains("a_max")) cfg.a_max = rational_from_json(j.at("a_max"), "a_max");
  if (j.contains("cost_per_effort")) {
    cfg.cost_per_effort = uint_from_json<std::uint64_t>(j.at("cost_per_effort"), "cost_per_effort");
  }
  if (j.contains("reference_effort")) {
    cfg.reference_effort = rational_from_json(j.at("reference_effort"), "reference_effort");
  }
  if (j.contains("prior")) {
    const json& prior = j.at("prior");
    if (!prior.is_array()) throw Error(errc::invalid_config, "prior must be an array");
    cfg.prior_weights = IVec(prior.size());
    for (std::size_t i = 0; i < prior.size(); ++i) {
      cfg.prior_weights[static_cast<Eigen::Index>(i)] =
          static_cast<std::int64_t>(uint_from_json<std::uint64_t>(prior.at(i), "prior"));
    }
  }
  if (j.contains("signal_source")) {
    const std::string source = j.at("signal_source").get<std::string>();
    if (source == "confusion") {
      cfg.signal_source = SignalSource::confusion;
    } else if (source == "logistic") {
      cfg.signal_source = SignalSource::logistic;
    } else {
      throw Error(errc::invalid_config, "signal_source must be confusion or logistic");
    }
  }
  if (j.contains("logistic")) {
    const json& lg = j.at("logistic");
    reject_unknown(lg, {"feature_dim", "noise", "local_samples", "epochs", "step_size"},
                   "logistic");
    if (lg.contains("feature_dim")) {
      cfg.logistic.feature_dim = static_cast<int>(uint_from_json<std::uint32_t>(lg.at("feature_dim"), "feature_dim"));
    }
    if (lg.contains("noise")) cfg.logistic.noise = lg.at("noise").get<double>();
    if (lg.contains("local_samples")) {
      cfg.logistic.local_samples = uint_from_json<std::uint32_t>(lg.at("local_samples"), "local_samples");
    }
    if (lg.contains("epochs")) {
      cfg.logistic.epochs = uint_from_json<std::uint32_t>(lg.at("epochs"), "epochs");
    }
    if (lg.contains("step_size")) cfg.logistic.step_size = lg.at("step_size").get<double>();
  }

  const json& clients = j.at("clients");
  if (!clients.is_array()) throw Error(errc::invalid_config, "clients must be an array");
  for (const json& cj : clients) {
    reject_unknown(cj, {"id", "strategy", "effort", "stake", "behavior"}, "client");
    ClientSpec spec;
    spec.id = cj.at("id").get<std::string>();
    spec.strategy = fltoy::Strategy::parse(cj.at("strategy").get<std::string>(), cfg.k);
    if (cj.contains("effort")) spec.effort = rational_from_json(cj.at("effort"), "effort");
    spec.stake = uint_from_json<std::uint64_t>(cj.at("stake"), "stake");
    if (cj.contains("behavior")) {
      spec.behavior = behavior_from(cj.at("behavior").get<std::string>());
    }
    cfg.clients.push_back(std::move(spec));
  }

  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(errc::io_error, "cannot open scenario file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(errc::parse_error, std::string("scenario file: ") + e.what());
  }
  return scenario_from_json(j);
}

json scenario_to_json(const ScenarioConfig& config) {
  json clients = json::array();
  for (const ClientSpec& c : config.clients) {
    clients.push_back(json{{"id", c.id},
                           {"strategy", c.strategy.label()},
                           {"effort", c.effort.str()},
                           {"stake", c.stake},
                           {"behavior", behavior_name(c.behavior)}});
  }
  json prior = json::array();
  IVec weights = effective_prior_weights(config);
  for (Eigen::Index i = 0; i < weights.size(); ++i) prior.push_back(weights[i]);
  return json{
      {"k", config.k},
      {"m", config.m},
      {"bonus_size", config.bonus_size},
      {"penalty_size", config.penalty_size},
      {"clients", clients},
      {"min_stake", config.min_stake},
      {"quorum", config.quorum},
      {"reward_pool", config.reward_pool},
      {"alpha", config.alpha},
      {"delta_mode",
       config.delta_mode == chainsim::DeltaMode::known_prior ? "known_prior" : "empirical"},
      {"default_payment", config.effective_default_payment()},
      {"master_seed", config.master_seed},
      {"trials", config.trials},
      {"a_min", config.accuracy_model().a_min.str()},
      {"a_max", config.a_max.str()},
      {"cost_per_effort", config.cost_per_effort},
      {"reference_effort", config.reference_effort.str()},
      {"prior", prior},
      {"per_pair_split", config.per_pair_split},
      {"signal_source",
       config.signal_source == SignalSource::confusion ? "confusion" : "logistic"}};
}

std::string RoundResult::transcript_text() const {
  std::string out;
  for (const chainsim::LedgerEvent& ev : events) {
    out += ev.line();
    out += '\n';
  }
  return out;
}

Digest32 trial_seed(std::uint64_t master_seed, std::uint64_t trial_index) {
  auto master = be64(master_seed);
  auto index = be64(trial_index);
  return sha256({ByteView(master.data(), master.size()), ByteView(index.data(), index.size())});
}

namespace {

struct PreparedClient {
  const ClientSpec* spec = nullptr;
  blobstore::ContentPointer committed_pointer;
  blobstore::ContentPointer reveal_pointer;
  Salt salt;
  blobstore::Commitment commitment;
  std::optional<fltoy::ModelParams<double>> model;
};

std::size_t local_sample_count(const LogisticConfig& lg, const Rational& effort) {
  Rational scaled = Rational(static_cast<std::int64_t>(lg.local_samples) - 2) * effort;
  std::int64_t extra = scaled.num() / scaled.den();
  return static_cast<std::size_t>(2 + std::max<std::int64_t>(0, extra));
}

}  // namespace

RoundResult run_round(const ScenarioConfig& config, const Digest32& seed,
                      const std::optional<std::filesystem::path>& persist_cas) {
  config.validate();

  HashDrbg root(seed);
  const Digest32 secret = sha256({seed.view(), as_bytes("beacon")});
  const auto key = randbeacon::BeaconKey::from_secret(secret);

  auto world_rng = root.fork("world");
  fltoy::World world =
      fltoy::World::generate(config.k, config.m, effective_prior_weights(config), world_rng);

  std::optional<fltoy::FeatureWorld> features;
  if (config.signal_source == SignalSource::logistic) {
    auto feature_rng = root.fork("features");
    features = fltoy::generate_features(world, config.logistic.feature_dim, config.logistic.noise,
                                        feature_rng);
  }

  blobstore::Store store =
      persist_cas ? blobstore::Store(*persist_cas) : blobstore::Store();
  const fltoy::AccuracyModel accuracy = config.accuracy_model();

  std::vector<PreparedClient> prepared;
  prepared.reserve(config.clients.size());
  for (const ClientSpec& spec : config.clients) {
    PreparedClient pc;
    pc.spec = &spec;

    SignalReport signals;
    if (config.signal_source == SignalSource::confusion) {
      auto signal_rng = root.fork("client/" + spec.id + "/signals");
      signals = fltoy::draw_signals(world, accuracy.accuracy(spec.effort), signal_rng);
    } else {
      auto data_rng = root.fork("client/" + spec.id + "/data");
      fltoy::Dataset data = fltoy::sample_local_data(
          *features, world, local_sample_count(config.logistic, spec.effort), data_rng);
      fltoy::ModelParams<double> init{DMat::Zero(config.logistic.feature_dim, config.k),
                                      static_cast<std::uint64_t>(data.features.rows())};
      pc.model = fltoy::local_train(data, std::move(init), config.logistic.epochs,
                                    fltoy::TrainConfig{config.logistic.step_size});
      signals = fltoy::infer_labels(*pc.model, features->public_features);
    }

    auto strategy_rng = root.fork("client/" + spec.id + "/strategy");
    SignalReport report = fltoy::apply_strategy(spec.strategy, signals, config.k, strategy_rng);

    pc.committed_pointer = store.put(blobstore::encode_report(report, config.k));
    auto salt_rng = root.fork("client/" + spec.id + "/salt");
    pc.salt = salt_rng.next_digest();
    pc.commitment = blobstore::make_commitment(pc.committed_pointer, pc.salt);

    if (spec.behavior == ProtocolBehavior::equivocate_reveal) {
      SignalReport altered = report;
      altered[0] = static_cast<Signal>((altered[0] + 1) % config.k);
      pc.reveal_pointer = store.put(blobstore::encode_report(altered, config.k));
    } else {
      pc.reveal_pointer = pc.committed_pointer;
    }
    prepared.push_back(std::move(pc));
  }

  std::vector<std::pair<ClientId, std::uint64_t>> funding;
  funding.reserve(config.clients.size());
  for (const ClientSpec& spec : config.clients) funding.emplace_back(spec.id, spec.stake);

  chainsim::Contract contract(config.round_config(), funding, key.public_commitment);
  for (const ClientSpec& spec : config.clients) {
    contract.register_client(spec.id, spec.stake);
  }
  contract.begin_commit();
  for (const PreparedClient& pc : prepared) {
    if (pc.spec->behavior == ProtocolBehavior::withhold_commit) continue;
    contract.commit(pc.spec->id, pc.commitment);
  }

  contract.request_pairing(randbeacon::derive_seed(key, 1, randbeacon::SeedPurpose::pairing));

  // Late-committing copycats must bounce off the phase machine.
  for (const PreparedClient& pc : prepared) {
    if (pc.spec->behavior != ProtocolBehavior::withhold_commit) continue;
    try {
      contract.commit(pc.spec->id, pc.commitment);
      throw Error(errc::audit_failed, "late commit was accepted for " + pc.spec->id);
    } catch (const Error& e) {
      if (e.code() != errc::wrong_phase) throw;
    }
  }

  contract.install_task_split(
      randbeacon::derive_seed(key, 1, randbeacon::SeedPurpose::task_split));

  for (const PreparedClient& pc : prepared) {
    switch (pc.spec->behavior) {
      case ProtocolBehavior::honest:
      case ProtocolBehavior::equivocate_reveal:
        contract.reveal(pc.spec->id, pc.reveal_pointer, pc.salt, store);
        break;
      case ProtocolBehavior::withhold_commit:
      case ProtocolBehavior::no_reveal:
        break;
    }
  }

  mechanism::SignMatrix sign = chainsim::compute_round_sign_matrix(contract, store);
  std::vector<chainsim::ClientPayment> payments = contract.score_round(sign, store);
  contract.settle(payments);
  contract.finish_audit(secret);

  auto audit = chainsim::Contract::audit(contract.events(), secret, store);
  if (!audit.ok) {
    throw Error(errc::audit_failed, "transcript replay diverged at height " +
                                        std::to_string(audit.divergence_height) + ": " +
                                        audit.message);
  }

  RoundResult result;
  result.events = contract.events();
  result.meter = contract.meter();
  result.sign = sign;
  result.beacon_secret = secret;

  std::map<ClientId, std::int64_t> scaled;
  for (const chainsim::ClientPayment& p : payments) scaled[p.client] += p.scaled_score;

  const double norm = static_cast<double>(config.max_scaled_score());
  for (const ClientSpec& spec : config.clients) {
    ClientResult cr;
    cr.id = spec.id;
    cr.strategy = spec.strategy.label();
    cr.effort = spec.effort;
    cr.slashed = contract.accounts().at(spec.id).slashed;
    cr.excluded = spec.behavior == ProtocolBehavior::withhold_commit;
    if (auto it = scaled.find(spec.id); it != scaled.end()) {
      cr.payment = mechanism::to_currency(mechanism::PairPayment{it->second, 1}, config.alpha);
      cr.normalized = static_cast<double>(it->second) / norm;
    }
    cr.utility = static_cast<double>(cr.payment) -
                 static_cast<double>(config.cost_per_effort) * spec.effort.to_double();
    result.clients.push_back(std::move(cr));
  }

  if (config.signal_source == SignalSource::logistic) {
    std::vector<fltoy::ModelParams<double>> updates;
    for (const PreparedClient& pc : prepared) {
      if (pc.model) updates.push_back(*pc.model);
    }
    if (!updates.empty()) {
      fltoy::ModelParams<double> global = fltoy::fedavg(updates);
      SignalReport predictions = fltoy::infer_labels(global, features->public_features);
      std::size_t correct = 0;
      for (std::uint32_t t = 0; t < config.m; ++t) {
        if (predictions[t] == world.ground_truth[t]) ++correct;
      }
      result.global_model_accuracy = static_cast<double>(correct) / config.m;
    }
  }

  return result;
}

RoundResult run_round(const ScenarioConfig& config, const Digest32& seed) {
  return run_round(config, seed, std::nullopt);
}

RoundResult run_round(const ScenarioConfig& config, std::uint64_t seed) {
  return run_round(config, trial_seed(seed, 0), std::nullopt);
}

namespace {

struct GroupKey {
  std::string strategy;
  Rational effort;
  bool operator<(const GroupKey& o) const {
    if (strategy != o.strategy) return strategy < o.strategy;
    return effort < o.effort;
  }
};

struct GroupAccum {
  std::vector<double> payment_per_trial;
  std::vector<double> utility_per_trial;
  std::uint64_t slashed = 0;
  std::uint64_t member_trials = 0;
};

void mean_se(const std::vector<double>& xs, double& mean, double& se) {
  const std::size_t n = xs.size();
  mean = 0.0;
  se = 0.0;
  if (n == 0) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  if (n < 2) return;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(n - 1);
  se = std::sqrt(var / static_cast<double>(n));
}

}  // namespace

MonteCarloResult monte_carlo(const ScenarioConfig& config, std::uint32_t trials,
                             unsigned threads) {
  if (trials < 1) throw Error(errc::invalid_config, "trials must be at least 1");
  config.validate();

  std::vector<std::vector<ClientResult>> per_trial(trials);
  unsigned workers = threads != 0 ? threads : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, trials));

  std::atomic<std::uint32_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto work = [&]() {
    for (;;) {
      std::uint32_t i = next.fetch_add(1);
      if (i >= trials) return;
      try {
        per_trial[i] = run_round(config, trial_seed(config.master_seed, i)).clients;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  // Per-trial group means first, then statistics across trials.
  std::map<GroupKey, GroupAccum> groups;
  for (std::uint32_t i = 0; i < trials; ++i) {
    std::map<GroupKey, std::pair<double, double>> sums;  // payment, utility
    std::map<GroupKey, std::uint32_t> sizes;
    for (const ClientResult& cr : per_trial[i]) {
      GroupKey key{cr.strategy, cr.effort};
      sums[key].first += cr.normalized;
      sums[key].second += cr.utility;
      sizes[key] += 1;
      GroupAccum& acc = groups[key];
      acc.member_trials += 1;
      if (cr.slashed) acc.slashed += 1;
    }
    for (const auto& [key, sum] : sums) {
      GroupAccum& acc = groups[key];
      acc.payment_per_trial.push_back(sum.first / sizes[key]);
      acc.utility_per_trial.push_back(sum.second / sizes[key]);
    }
  }

  MonteCarloResult result;
  result.trials = trials;
  for (auto& [key, acc] : groups) {
    GroupStats stats;
    stats.strategy = key.strategy;
    stats.effort = key.effort;
    stats.trials = acc.payment_per_trial.size();
    mean_se(acc.payment_per_trial, stats.mean_payment, stats.se_payment);
    mean_se(acc.utility_per_trial, stats.mean_utility, stats.se_utility);
    stats.slash_rate =
        acc.member_trials == 0 ? 0.0 : static_cast<double>(acc.slashed) / acc.member_trials;
    result.groups.push_back(std::move(stats));
  }

  for (const ClientSpec& spec : config.clients) {
    ClientStats cs;
    cs.id = spec.id;
    cs.strategy = spec.strategy.label();
    cs.effort = spec.effort;
    std::uint64_t slashed = 0;
    for (std::uint32_t i = 0; i < trials; ++i) {
      for (const ClientResult& cr : per_trial[i]) {
        if (cr.id != spec.id) continue;
        cs.mean_payment += cr.normalized;
        cs.mean_utility += cr.utility;
        if (cr.slashed) ++slashed;
      }
    }
    cs.mean_payment /= trials;
    cs.mean_utility /= trials;
    cs.slash_rate = static_cast<double>(slashed) / trials;
    result.clients.push_back(std::move(cs));
  }
  return result;
}

void emit_round_report(const RoundResult& result, const ScenarioConfig& config,
                       ReportFormat format, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  if (format == ReportFormat::csv) {
    std::ofstream out(out_dir / "report.csv", std::ios::trunc);
    if (!out) throw Error(errc::io_error, "cannot write report.csv");
    out << "client,strategy,effort,payment,normalized,utility,slashed,excluded\n";
    for (const ClientResult& cr : result.clients) {
      out << cr.id << ',' << cr.strategy << ',' << fmt_double(cr.effort.to_double()) << ','
          << cr.payment << ',' << fmt_double(cr.normalized) << ',' << fmt_double(cr.utility)
          << ',' << (cr.slashed ? 1 : 0) << ',' << (cr.excluded ? 1 : 0) << '\n';
    }
    return;
  }
  json clients = json::array();
  for (const ClientResult& cr : result.clients) {
    clients.push_back(json{{"id", cr.id},
                           {"strategy", cr.strategy},
                           {"effort", cr.effort.str()},
                           {"payment", cr.payment},
                           {"normalized", cr.normalized},
                           {"utility", cr.utility},
                           {"slashed", cr.slashed},
                           {"excluded", cr.excluded}});
  }
  json doc{{"config", scenario_to_json(config)},
           {"clients", clients},
           {"compute_units", result.meter.compute_units},
           {"storage_bytes", result.meter.storage_bytes},
           {"sign_matrix", chainsim::sign_matrix_to_json(result.sign)}};
  if (result.global_model_accuracy) {
    doc["global_model_accuracy"] = *result.global_model_accuracy;
  }
  std::ofstream out(out_dir / "report.json", std::ios::trunc);
  if (!out) throw Error(errc::io_error, "cannot write report.json");
  out << doc.dump(2) << '\n';
}

void emit_mc_report(const MonteCarloResult& result, const ScenarioConfig& config,
                    ReportFormat format, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  if (format == ReportFormat::csv) {
    std::ofstream out(out_dir / "report.csv", std::ios::trunc);
    if (!out) throw Error(errc::io_error, "cannot write report.csv");
    out << "strategy,effort,mean_payment,se_payment,mean_utility,slash_rate\n";
    for (const GroupStats& g : result.groups) {
      out << g.strategy << ',' << fmt_double(g.effort.to_double()) << ','
          << fmt_double(g.mean_payment) << ',' << fmt_double(g.se_payment) << ','
          << fmt_double(g.mean_utility) << ',' << fmt_double(g.slash_rate) << '\n';
    }
    std::ofstream clients(out_dir / "report_clients.csv", std::ios::trunc);
    if (!clients) throw Error(errc::io_error, "cannot write report_clients.csv");
    clients << "client,strategy,effort,mean_payment,mean_utility,slash_rate\n";
    for (const ClientStats& c : result.clients) {
      clients << c.id << ',' << c.strategy << ',' << fmt_double(c.effort.to_double()) << ','
              << fmt_double(c.mean_payment) << ',' << fmt_double(c.mean_utility) << ','
              << fmt_double(c.slash_rate) << '\n';
    }
    return;
  }
  json groups = json::array();
  for (const GroupStats& g : result.groups) {
    groups.push_back(json{{"strategy", g.strategy},
                          {"effort", g.effort.str()},
                          {"trials", g.trials},
                          {"mean_payment", g.mean_payment},
                          {"se_payment", g.se_payment},
                          {"mean_utility", g.mean_utility},
                          {"se_utility", g.se_utility},
                          {"slash_rate", g.slash_rate}});
  }
  json clients = json::array();
  for (const ClientStats& c : result.clients) {
    clients.push_back(json{{"id", c.id},
                           {"strategy", c.strategy},
                           {"effort", c.effort.str()},
                           {"mean_payment", c.mean_payment},
                           {"mean_utility", c.mean_utility},
                           {"slash_rate", c.slash_rate}});
  }
  json doc{{"config", scenario_to_json(config)},
           {"groups", groups},
           {"clients", clients},
           {"trials", result.trials}};
  std::ofstream out(out_dir / "report.json", std::ios::trunc);
  if (!out) throw Error(errc::io_error, "cannot write report.json");
  out << doc.dump(2) << '\n';
}

bool verify_transcript(const std::filesystem::path& transcript_path, const Digest32& secret,
                       std::ostream& diagnostics) {
  std::ifstream in(transcript_path);
  if (!in) throw Error(errc::io_error, "cannot open transcript " + transcript_path.string());
  std::vector<chainsim::LedgerEvent> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    events.push_back(chainsim::LedgerEvent::parse(line));
  }

  std::filesystem::path cas = transcript_path.parent_path() / "cas";
  blobstore::Store store =
      std::filesystem::is_directory(cas) ? blobstore::Store::open(cas) : blobstore::Store();

  auto result = chainsim::Contract::audit(events, secret, store);
  if (!result.ok) {
    diagnostics << "verification failed at height " << result.divergence_height << ": "
                << result.message << '\n';
  }
  return result.ok;
}

mechanism::JointDistribution pooled_joint(const std::vector<SignalReport>& reports, int k) {
  if (reports.size() < 2) {
    throw Error(errc::too_few_clients, "need at least two reports to pool a joint");
  }
  const std::size_t m = reports.front().size();
  for (const SignalReport& r : reports) {
    if (r.size() != m) {
      throw Error(errc::dimension_mismatch, "reports must cover the same task set");
    }
  }
  IMat counts = IMat::Zero(k, k);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    for (std::size_t j = i + 1; j < reports.size(); ++j) {
      for (std::size_t t = 0; t < m; ++t) {
        counts(reports[i][t], reports[j][t]) += 1;
      }
    }
  }
  return mechanism::symmetrize(mechanism::build_joint_from_counts(counts));
}

}  // namespace peerfed::harness

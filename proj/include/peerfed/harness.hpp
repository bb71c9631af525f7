#pragma once

#include "peerfed/chainsim.hpp"
#include "peerfed/fltoy.hpp"
#include "peerfed/rational.hpp"
#include "peerfed/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace peerfed::harness {

// How a client treats the commit-reveal protocol, independent of its report
// strategy. Everything except honest exists to exercise the exclusion and
// slashing paths.
enum class ProtocolBehavior { honest, withhold_commit, equivocate_reveal, no_reveal };

const char* behavior_name(ProtocolBehavior behavior);

struct ClientSpec {
  ClientId id;
  fltoy::Strategy strategy;
  Rational effort{1, 1};
  std::uint64_t stake = 0;
  ProtocolBehavior behavior = ProtocolBehavior::honest;
};

// Parameters of the logistic-regression signal path.
struct LogisticConfig {
  int feature_dim = 8;
  double noise = 1.0;
  std::uint32_t local_samples = 64;
  unsigned epochs = 40;
  double step_size = 0.5;
};

enum class SignalSource { confusion, logistic };

struct ScenarioConfig {
  int k = 3;
  std::uint32_t m = 60;
  std::uint32_t bonus_size = 10;
  std::uint32_t penalty_size = 10;
  std::vector<ClientSpec> clients;
  std::uint64_t min_stake = 100;
  std::size_t quorum = 2;
  std::uint64_t reward_pool = 1000000;
  std::uint64_t alpha = 10;
  chainsim::DeltaMode delta_mode = chainsim::DeltaMode::known_prior;
  std::optional<std::int64_t> default_payment;  // scaled-score units
  std::uint64_t master_seed = 0;
  std::uint32_t trials = 1;
  bool per_pair_split = false;
  // Extensions beyond the required fields; all optional in the file.
  Rational a_min{0, 1};  // zero denominator sentinel resolved to 1/k at load
  Rational a_max{9, 10};
  std::uint64_t cost_per_effort = 500;
  Rational reference_effort{1, 1};
  IVec prior_weights;  // defaults to uniform
  SignalSource signal_source = SignalSource::confusion;
  LogisticConfig logistic;

  fltoy::AccuracyModel accuracy_model() const {
    Rational lo = (a_min == Rational(0)) ? Rational(1, k) : a_min;
    return {lo, a_max};
  }
  std::int64_t max_scaled_score() const {
    return static_cast<std::int64_t>(bonus_size) * penalty_size * penalty_size;
  }
  std::int64_t effective_default_payment() const {
    return default_payment.value_or(max_scaled_score() / 2);
  }

  void validate() const;
  chainsim::RoundConfig round_config() const;
};

ScenarioConfig scenario_from_json(const nlohmann::json& j);
ScenarioConfig load_scenario(const std::filesystem::path& path);
nlohmann::json scenario_to_json(const ScenarioConfig& config);

struct ClientResult {
  ClientId id;
  std::string strategy;
  Rational effort;
  std::int64_t payment = 0;      // currency minor-units
  double normalized = 0.0;       // scaled_score / (b * p * p)
  double utility = 0.0;          // payment - cost_per_effort * effort
  bool slashed = false;
  bool excluded = false;         // never committed, therefore never paid
};

struct RoundResult {
  std::vector<ClientResult> clients;
  std::vector<chainsim::LedgerEvent> events;
  chainsim::CostMeter meter;
  mechanism::SignMatrix sign;
  Digest32 beacon_secret;
  std::optional<double> global_model_accuracy;  // logistic path only

  std::string transcript_text() const;
};

// Trial i derives its root from SHA-256(be64(master_seed) || be64(i)).
Digest32 trial_seed(std::uint64_t master_seed, std::uint64_t trial_index);

// One full protocol round: register, train/draw, commit, pair, reveal,
// score, settle, audit. Throws AuditFailed if the produced transcript does
// not replay. Deterministic in (config, seed). When persist_cas is set, every
// stored blob is also written to that directory.
RoundResult run_round(const ScenarioConfig& config, const Digest32& seed,
                      const std::optional<std::filesystem::path>& persist_cas);
RoundResult run_round(const ScenarioConfig& config, const Digest32& seed);
RoundResult run_round(const ScenarioConfig& config, std::uint64_t seed);

IVec effective_prior_weights(const ScenarioConfig& config);

struct GroupStats {
  std::string strategy;
  Rational effort;
  std::uint64_t trials = 0;
  double mean_payment = 0.0;  // normalized payment
  double se_payment = 0.0;
  double mean_utility = 0.0;
  double se_utility = 0.0;
  double slash_rate = 0.0;
};

struct ClientStats {
  ClientId id;
  std::string strategy;
  Rational effort;
  double mean_payment = 0.0;
  double mean_utility = 0.0;
  double slash_rate = 0.0;
};

struct MonteCarloResult {
  std::vector<GroupStats> groups;
  std::vector<ClientStats> clients;
  std::uint64_t trials = 0;
};

// Independent trials with per-trial seeds; trials run on a small thread pool
// and are merged by trial index, so the statistics do not depend on the
// degree of concurrency.
MonteCarloResult monte_carlo(const ScenarioConfig& config, std::uint32_t trials,
                             unsigned threads = 0);

enum class ReportFormat { csv, json };

void emit_round_report(const RoundResult& result, const ScenarioConfig& config,
                       ReportFormat format, const std::filesystem::path& out_dir);
void emit_mc_report(const MonteCarloResult& result, const ScenarioConfig& config,
                    ReportFormat format, const std::filesystem::path& out_dir);

// Replays a transcript file against the content-addressed blobs stored next
// to it (<dir>/cas). Prints the first divergence height on failure.
bool verify_transcript(const std::filesystem::path& transcript_path, const Digest32& secret,
                       std::ostream& diagnostics);

// Pools every unordered pair of reports over all tasks, symmetrized; the
// diagnostic joint behind the `delta` subcommand.
mechanism::JointDistribution pooled_joint(const std::vector<SignalReport>& reports, int k);

}  // namespace peerfed::harness

#include "peerfed/blobstore.hpp"
#include "peerfed/chainsim.hpp"
#include "peerfed/errors.hpp"
#include "peerfed/harness.hpp"
#include "peerfed/mechanism.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace peerfed;

constexpr int kExitOk = 0;
constexpr int kExitProtocolError = 1;
constexpr int kExitVerificationFailed = 2;

harness::ReportFormat parse_format(const std::string& format) {
  if (format == "csv") return harness::ReportFormat::csv;
  if (format == "json") return harness::ReportFormat::json;
  throw Error(errc::invalid_config, "format must be csv or json");
}

int cmd_run(const std::string& config_path, std::uint64_t seed, const std::string& out_dir,
            const std::string& format) {
  auto config = harness::load_scenario(config_path);
  std::filesystem::path out(out_dir);
  std::filesystem::create_directories(out);

  auto result = harness::run_round(config, harness::trial_seed(seed, 0), out / "cas");

  std::ofstream transcript(out / "transcript.jsonl", std::ios::trunc);
  if (!transcript) throw Error(errc::io_error, "cannot write transcript.jsonl");
  transcript << result.transcript_text();
  transcript.close();

  std::ofstream secret(out / "beacon_secret.hex", std::ios::trunc);
  secret << result.beacon_secret.hex() << '\n';
  secret.close();

  harness::emit_round_report(result, config, parse_format(format), out);

  std::cout << "round complete; transcript at " << (out / "transcript.jsonl").string() << "\n";
  std::cout << "beacon secret: " << result.beacon_secret.hex() << "\n";
  std::cout << "compute_units=" << result.meter.compute_units
            << " storage_bytes=" << result.meter.storage_bytes << "\n";
  for (const auto& cr : result.clients) {
    std::cout << "  " << cr.id << " [" << cr.strategy << " e=" << cr.effort.str()
              << "] payment=" << cr.payment << " utility=" << cr.utility
              << (cr.slashed ? " SLASHED" : "") << (cr.excluded ? " EXCLUDED" : "") << "\n";
  }
  if (result.global_model_accuracy) {
    std::cout << "global model public accuracy: " << *result.global_model_accuracy << "\n";
  }
  return kExitOk;
}

int cmd_mc(const std::string& config_path, std::uint32_t trials, const std::string& out_dir,
           const std::string& format, unsigned threads) {
  auto config = harness::load_scenario(config_path);
  std::uint32_t n = trials != 0 ? trials : config.trials;
  auto result = harness::monte_carlo(config, n, threads);
  std::filesystem::path out(out_dir);
  harness::emit_mc_report(result, config, parse_format(format), out);

  std::cout << "trials: " << result.trials << "\n";
  std::cout << "strategy,effort,mean_payment,se_payment,mean_utility,slash_rate\n";
  for (const auto& g : result.groups) {
    std::cout << g.strategy << ',' << g.effort.to_double() << ',' << g.mean_payment << ','
              << g.se_payment << ',' << g.mean_utility << ',' << g.slash_rate << "\n";
  }
  return kExitOk;
}

int cmd_verify(const std::string& transcript_path, const std::string& secret_hex) {
  Digest32 secret = Digest32::from_hex(secret_hex);
  bool ok = harness::verify_transcript(transcript_path, secret, std::cerr);
  if (ok) {
    std::cout << "transcript verified\n";
    return kExitOk;
  }
  return kExitVerificationFailed;
}

int cmd_delta(const std::string& reports_dir, int k_arg) {
  std::filesystem::path dir(reports_dir);
  if (!std::filesystem::is_directory(dir)) {
    throw Error(errc::io_error, "no such directory: " + reports_dir);
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Bytes> blobs;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    Bytes blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!blob.empty()) blobs.push_back(std::move(blob));
  }
  if (blobs.size() < 2) {
    throw Error(errc::too_few_clients, "need at least two report blobs");
  }

  int k = k_arg;
  if (k == 0) {
    // Infer the alphabet from the largest signal present.
    Signal max_signal = 0;
    for (const Bytes& blob : blobs) {
      for (std::size_t i = 5; i < blob.size(); ++i) max_signal = std::max(max_signal, blob[i]);
    }
    k = std::max(2, max_signal + 1);
  }

  std::vector<SignalReport> reports;
  for (const Bytes& blob : blobs) {
    reports.push_back(blobstore::decode_report(blob, k));
  }

  auto joint = harness::pooled_joint(reports, k);
  auto delta = mechanism::delta_matrix(joint);
  auto sign = mechanism::sign_matrix(delta);

  std::cout << "reports: " << reports.size() << "  k: " << k << "  samples: " << joint.total
            << "\n";
  std::cout << "delta numerators (denominator " << delta.denominator << "):\n";
  for (int x = 0; x < delta.k(); ++x) {
    std::cout << " ";
    for (int y = 0; y < delta.k(); ++y) std::cout << ' ' << delta.numerators(x, y);
    std::cout << "\n";
  }
  std::cout << "sign matrix:\n";
  for (const auto& row : chainsim::sign_matrix_to_json(sign)) {
    std::cout << "  " << row.get<std::string>() << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Peer-prediction incentive simulator for blockchain-coordinated federated learning"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::string format = "json";
  std::string transcript_path;
  std::string secret_hex;
  std::string reports_dir;
  std::uint64_t seed = 0;
  std::uint32_t trials = 0;
  unsigned threads = 0;
  int k_arg = 0;

  auto* run = app.add_subcommand("run", "Execute one protocol round and emit its transcript");
  run->add_option("--config", config_path, "Scenario JSON file")->required();
  run->add_option("--seed", seed, "Round seed")->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--format", format, "Report format: csv|json");

  auto* mc = app.add_subcommand("mc", "Monte Carlo sweep over independent rounds");
  mc->add_option("--config", config_path, "Scenario JSON file")->required();
  mc->add_option("--trials", trials, "Number of trials (0 = value from config)");
  mc->add_option("--out", out_dir, "Output directory");
  mc->add_option("--format", format, "Report format: csv|json");
  mc->add_option("--threads", threads, "Worker threads (0 = hardware)");

  auto* verify = app.add_subcommand("verify", "Replay and verify a recorded transcript");
  verify->add_option("--transcript", transcript_path, "transcript.jsonl path")->required();
  verify->add_option("--secret", secret_hex, "Disclosed beacon secret (hex)")->required();

  auto* delta = app.add_subcommand("delta", "Print the empirical delta and sign matrices");
  delta->add_option("--reports", reports_dir, "Directory of encoded report blobs")->required();
  delta->add_option("--k", k_arg, "Alphabet size (0 = infer)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, seed, out_dir, format);
    if (mc->parsed()) return cmd_mc(config_path, trials, out_dir, format, threads);
    if (verify->parsed()) return cmd_verify(transcript_path, secret_hex);
    if (delta->parsed()) return cmd_delta(reports_dir, k_arg);
  } catch (const peerfed::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == peerfed::errc::audit_failed ? kExitVerificationFailed : kExitProtocolError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitProtocolError;
  }
  return kExitProtocolError;
}

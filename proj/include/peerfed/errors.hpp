#pragma once

#include <stdexcept>
#include <string>

namespace peerfed {

enum class errc {
  // mechanism
  all_zero_counts,
  dimension_mismatch,
  invalid_accuracy,
  missing_report_entry,
  overflow,
  // blobstore
  empty_blob,
  not_found,
  malformed_blob,
  signal_out_of_range,
  bad_salt_length,
  // randbeacon
  too_few_clients,
  split_too_large,
  // chainsim
  wrong_phase,
  insufficient_stake,
  duplicate_registration,
  not_registered,
  duplicate_commit,
  quorum_not_reached,
  no_prior_commit,
  duplicate_reveal,
  commit_mismatch,
  unresolvable_pointer,
  malformed_report,
  insufficient_pool,
  unknown_client,
  // fltoy
  empty_update_list,
  empty_local_data,
  // harness
  io_error,
  parse_error,
  audit_failed,
  invalid_config,
};

const char* errc_name(errc code);

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const { return code_; }

 private:
  errc code_;
};

}  // namespace peerfed

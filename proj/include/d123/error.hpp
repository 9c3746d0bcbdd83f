#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace d123 {

enum class ErrorCode {
  invalid_argument,
  corrupt_data,
  unknown_origin,
  unsorted_timestamps,
  duplicate_modality_file,
  io_failure,
  corrupt_file,
  metadata_mismatch,
  missing_payload,
  codec_unsupported_for_decode,
  payload_corrupt,
  missing_modality,
  empty_reference_stream,
  malformed_wkb,
  unknown_layer,
  layer_empty,
  unknown_id,
  dangling_reference,
  unknown_split,
  invalid_filter,
  iteration_out_of_range,
  unknown_sensor_id,
  no_match_within_tolerance,
  map_unavailable,
  schema_violation,
  non_monotonic_timestamps,
  unknown_frame_tag,
  unmapped_label,
  empty_track,
};

/// CamelCase name used in diagnostics, e.g. "CorruptFile".
std::string_view error_name(ErrorCode code);

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace d123

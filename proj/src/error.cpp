#include "d123/error.hpp"

namespace d123 {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::corrupt_data: return "CorruptData";
    case ErrorCode::unknown_origin: return "UnknownOrigin";
    case ErrorCode::unsorted_timestamps: return "UnsortedTimestamps";
    case ErrorCode::duplicate_modality_file: return "DuplicateModalityFile";
    case ErrorCode::io_failure: return "IoFailure";
    case ErrorCode::corrupt_file: return "CorruptFile";
    case ErrorCode::metadata_mismatch: return "MetadataMismatch";
    case ErrorCode::missing_payload: return "MissingPayload";
    case ErrorCode::codec_unsupported_for_decode: return "CodecUnsupportedForDecode";
    case ErrorCode::payload_corrupt: return "PayloadCorrupt";
    case ErrorCode::missing_modality: return "MissingModality";
    case ErrorCode::empty_reference_stream: return "EmptyReferenceStream";
    case ErrorCode::malformed_wkb: return "MalformedWkb";
    case ErrorCode::unknown_layer: return "UnknownLayer";
    case ErrorCode::layer_empty: return "LayerEmpty";
    case ErrorCode::unknown_id: return "UnknownId";
    case ErrorCode::dangling_reference: return "DanglingReference";
    case ErrorCode::unknown_split: return "UnknownSplit";
    case ErrorCode::invalid_filter: return "InvalidFilter";
    case ErrorCode::iteration_out_of_range: return "IterationOutOfRange";
    case ErrorCode::unknown_sensor_id: return "UnknownSensorId";
    case ErrorCode::no_match_within_tolerance: return "NoMatchWithinTolerance";
    case ErrorCode::map_unavailable: return "MapUnavailable";
    case ErrorCode::schema_violation: return "SchemaViolation";
    case ErrorCode::non_monotonic_timestamps: return "NonMonotonicTimestamps";
    case ErrorCode::unknown_frame_tag: return "UnknownFrameTag";
    case ErrorCode::unmapped_label: return "UnmappedLabel";
    case ErrorCode::empty_track: return "EmptyTrack";
  }
  return "Unknown";
}

}  // namespace d123

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace d123 {

enum class CodecKind { raw_f32le, raw_deflate, png, jpeg, mp4, draco, laz, unknown };

/// Payload codec by name. Names outside the known set are kept verbatim and
/// round-trip as opaque bytes.
class Codec {
 public:
  Codec() : Codec(CodecKind::raw_f32le) {}
  explicit Codec(CodecKind kind);
  explicit Codec(std::string name);

  CodecKind kind() const { return kind_; }
  const std::string& name() const { return name_; }

  bool operator==(const Codec& other) const { return name_ == other.name_; }

 private:
  CodecKind kind_;
  std::string name_;
};

enum class PayloadLocation : std::uint8_t { inline_bytes = 0, external = 1 };

/// Sensor payload either serialized into the log or referenced by a path
/// relative to the log directory.
struct PayloadRef {
  Codec codec;
  PayloadLocation location = PayloadLocation::inline_bytes;
  std::vector<std::uint8_t> bytes;
  std::string relative_path;
  // Frame within a container blob (mp4).
  std::optional<std::int64_t> frame_index;

  static PayloadRef inline_data(Codec codec, std::vector<std::uint8_t> bytes);
  /// Throws InvalidArgument for absolute paths or parent traversal.
  static PayloadRef external_file(Codec codec, std::string relative_path);

  void validate() const;
  bool operator==(const PayloadRef&) const = default;
};

/// Decoded lidar sweep: N rows of (x, y, z, intensity), body frame.
struct PointCloud {
  std::vector<float> xyzi;

  std::size_t size() const { return xyzi.size() / 4; }
  bool operator==(const PointCloud&) const = default;
};

using DecodedPayload = std::variant<PointCloud, std::vector<std::uint8_t>>;

/// Encoded payload bytes regardless of storage location. External paths
/// resolve against `base_dir`; a dangling path raises MissingPayload.
std::vector<std::uint8_t> payload_bytes(const PayloadRef& payload, const std::filesystem::path& base_dir);

/// raw_f32le / raw_deflate to points. Other codecs raise
/// CodecUnsupportedForDecode; bad lengths raise PayloadCorrupt.
PointCloud decode_points(const PayloadRef& payload, const std::filesystem::path& base_dir);
PointCloud decode_points(std::span<const std::uint8_t> encoded, const Codec& codec);

/// Points for raw codecs, opaque encoded bytes for everything else.
DecodedPayload decode_payload(const PayloadRef& payload, const std::filesystem::path& base_dir);

/// Encodes (x, y, z, intensity) rows with raw_f32le or raw_deflate.
std::vector<std::uint8_t> encode_points(std::span<const float> xyzi, const Codec& codec);

/// zlib stream helpers behind raw_deflate.
std::vector<std::uint8_t> deflate_bytes(std::span<const std::uint8_t> input);
std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> input);

}  // namespace d123

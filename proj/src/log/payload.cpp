#include "d123/log/payload.hpp"

#include <zlib.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "d123/error.hpp"

namespace d123 {

static_assert(std::endian::native == std::endian::little, "raw_f32le payloads assume a little-endian host");

namespace {

constexpr std::array<std::pair<CodecKind, std::string_view>, 7> kCodecNames = {{
    {CodecKind::raw_f32le, "raw_f32le"},
    {CodecKind::raw_deflate, "raw_deflate"},
    {CodecKind::png, "png"},
    {CodecKind::jpeg, "jpeg"},
    {CodecKind::mp4, "mp4"},
    {CodecKind::draco, "draco"},
    {CodecKind::laz, "laz"},
}};

constexpr std::size_t kPointBytes = 4 * sizeof(float);

}  // namespace

Codec::Codec(CodecKind kind) : kind_(kind) {
  for (const auto& [k, n] : kCodecNames) {
    if (k == kind) name_ = n;
  }
  if (name_.empty()) throw Error(ErrorCode::invalid_argument, "codec kind has no canonical name");
}

Codec::Codec(std::string name) : kind_(CodecKind::unknown), name_(std::move(name)) {
  if (name_.empty()) throw Error(ErrorCode::invalid_argument, "empty codec name");
  for (const auto& [k, n] : kCodecNames) {
    if (n == name_) kind_ = k;
  }
}

PayloadRef PayloadRef::inline_data(Codec codec, std::vector<std::uint8_t> bytes) {
  PayloadRef p;
  p.codec = std::move(codec);
  p.location = PayloadLocation::inline_bytes;
  p.bytes = std::move(bytes);
  p.validate();
  return p;
}

PayloadRef PayloadRef::external_file(Codec codec, std::string relative_path) {
  PayloadRef p;
  p.codec = std::move(codec);
  p.location = PayloadLocation::external;
  p.relative_path = std::move(relative_path);
  p.validate();
  return p;
}

void PayloadRef::validate() const {
  if (location == PayloadLocation::inline_bytes) {
    if (bytes.empty()) throw Error(ErrorCode::invalid_argument, "inline payload is empty");
    return;
  }
  const std::filesystem::path p(relative_path);
  if (relative_path.empty() || p.is_absolute() || p.has_root_name() || p.has_root_directory()) {
    throw Error(ErrorCode::invalid_argument, "external payload path must be relative: '" + relative_path + "'");
  }
  for (const auto& part : p) {
    if (part == "..") throw Error(ErrorCode::invalid_argument, "payload path escapes the log: '" + relative_path + "'");
  }
}

std::vector<std::uint8_t> payload_bytes(const PayloadRef& payload, const std::filesystem::path& base_dir) {
  if (payload.location == PayloadLocation::inline_bytes) return payload.bytes;
  payload.validate();
  const auto path = base_dir / payload.relative_path;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::missing_payload, path.string());
  std::vector<std::uint8_t> out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::missing_payload, "read failed: " + path.string());
  return out;
}

PointCloud decode_points(std::span<const std::uint8_t> encoded, const Codec& codec) {
  std::vector<std::uint8_t> inflated;
  std::span<const std::uint8_t> raw = encoded;
  if (codec.kind() == CodecKind::raw_deflate) {
    inflated = inflate_bytes(encoded);
    raw = inflated;
  } else if (codec.kind() != CodecKind::raw_f32le) {
    throw Error(ErrorCode::codec_unsupported_for_decode, codec.name());
  }
  if (raw.size() % kPointBytes != 0) {
    throw Error(ErrorCode::payload_corrupt,
                std::to_string(raw.size()) + " bytes is not a multiple of " + std::to_string(kPointBytes));
  }
  PointCloud out;
  out.xyzi.resize(raw.size() / sizeof(float));
  if (!raw.empty()) std::memcpy(out.xyzi.data(), raw.data(), raw.size());
  return out;
}

PointCloud decode_points(const PayloadRef& payload, const std::filesystem::path& base_dir) {
  if (payload.codec.kind() != CodecKind::raw_f32le && payload.codec.kind() != CodecKind::raw_deflate) {
    throw Error(ErrorCode::codec_unsupported_for_decode, payload.codec.name());
  }
  return decode_points(payload_bytes(payload, base_dir), payload.codec);
}

DecodedPayload decode_payload(const PayloadRef& payload, const std::filesystem::path& base_dir) {
  auto bytes = payload_bytes(payload, base_dir);
  const auto kind = payload.codec.kind();
  if (kind == CodecKind::raw_f32le || kind == CodecKind::raw_deflate) return decode_points(bytes, payload.codec);
  return bytes;
}

std::vector<std::uint8_t> encode_points(std::span<const float> xyzi, const Codec& codec) {
  if (xyzi.size() % 4 != 0) throw Error(ErrorCode::invalid_argument, "point array is not N x 4");
  std::vector<std::uint8_t> raw(xyzi.size() * sizeof(float));
  if (!raw.empty()) std::memcpy(raw.data(), xyzi.data(), raw.size());
  if (codec.kind() == CodecKind::raw_f32le) return raw;
  if (codec.kind() == CodecKind::raw_deflate) return deflate_bytes(raw);
  throw Error(ErrorCode::invalid_argument, "cannot encode points as " + codec.name());
}

std::vector<std::uint8_t> deflate_bytes(std::span<const std::uint8_t> input) {
  uLongf size = compressBound(static_cast<uLong>(input.size()));
  std::vector<std::uint8_t> out(size);
  if (compress2(out.data(), &size, input.data(), static_cast<uLong>(input.size()), Z_BEST_SPEED) != Z_OK) {
    throw Error(ErrorCode::invalid_argument, "deflate failed");
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> input) {
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) throw Error(ErrorCode::payload_corrupt, "inflate init failed");
  zs.next_in = const_cast<Bytef*>(input.data());
  zs.avail_in = static_cast<uInt>(input.size());
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> chunk{};
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error(ErrorCode::payload_corrupt, "deflate stream is corrupt");
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw Error(ErrorCode::payload_corrupt, "deflate stream is truncated");
    }
  }
  inflateEnd(&zs);
  return out;
}

}  // namespace d123

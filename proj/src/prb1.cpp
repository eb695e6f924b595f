#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <string>

#include "sdss/dataset_io.hpp"

namespace sdss {
namespace {

constexpr std::uint8_t kMagic[4] = {'P', 'R', 'B', '1'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 4 + 1;
constexpr std::uint8_t kFlagNormalized = 0x01;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t len) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large sections in chunks.
  while (len > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(len, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    len -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> encode_prb1(const ProbVolume& volume) {
  const auto data = volume.data();
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * data.size() + 4);
  for (std::uint8_t b : kMagic) out.push_back(b);
  put_u32(out, static_cast<std::uint32_t>(volume.num_classes()));
  put_u32(out, static_cast<std::uint32_t>(volume.height()));
  put_u32(out, static_cast<std::uint32_t>(volume.width()));
  out.push_back(volume.normalized() ? kFlagNormalized : 0);
  for (float f : data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  put_u32(out, crc32_of(out.data() + kHeaderBytes, 4 * data.size()));
  return out;
}

ProbVolume decode_prb1(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error(ErrorCode::BadMagic, "missing PRB1 magic");
  if (bytes.size() < kHeaderBytes) throw Error(ErrorCode::TruncatedFile, "PRB1 header is incomplete");
  const std::uint64_t k = get_u32(bytes.data() + 4);
  const std::uint64_t h = get_u32(bytes.data() + 8);
  const std::uint64_t w = get_u32(bytes.data() + 12);
  const std::uint8_t flags = bytes[16];
  constexpr std::uint64_t kMaxEntries = std::uint64_t{1} << 36;
  if (w != 0 && k * h > kMaxEntries / w) throw Error(ErrorCode::InvalidVolume, "PRB1 dimensions are implausibly large");
  const std::uint64_t count = k * h * w;
  const std::uint64_t data_bytes = 4 * count;
  const std::uint64_t expected = kHeaderBytes + data_bytes + 4;
  if (bytes.size() < expected)
    throw Error(ErrorCode::TruncatedFile, "PRB1 needs " + std::to_string(expected) + " bytes, file has " +
                                              std::to_string(bytes.size()));
  if (bytes.size() > expected)
    throw Error(ErrorCode::InvalidVolume, "PRB1 has " + std::to_string(bytes.size() - expected) + " trailing bytes");
  const std::uint8_t* section = bytes.data() + kHeaderBytes;
  const std::uint32_t stored = get_u32(section + data_bytes);
  const std::uint32_t actual = crc32_of(section, data_bytes);
  if (stored != actual) throw Error(ErrorCode::ChecksumMismatch, "PRB1 data CRC32 does not match");
  std::vector<float> data(count);
  for (std::uint64_t i = 0; i < count; ++i) data[i] = std::bit_cast<float>(get_u32(section + 4 * i));
  return ProbVolume(w, h, k, std::move(data), (flags & kFlagNormalized) != 0);
}

ProbVolume load_prob_volume(const fs::path& path) {
  try {
    return decode_prb1(read_bytes(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw;
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

void save_prob_volume(const ProbVolume& volume, const fs::path& path) { write_bytes(path, encode_prb1(volume)); }

ConfPair load_conf_pair(const fs::path& argmax_png, const fs::path& confidence_prb, std::size_t num_classes) {
  LabelMap argmax = load_label_png(argmax_png, num_classes);
  ProbVolume conf = load_prob_volume(confidence_prb);
  if (conf.num_classes() != 1)
    throw Error(ErrorCode::InvalidVolume, confidence_prb.string() + ": confidence volume must have K=1");
  if (conf.width() != argmax.width() || conf.height() != argmax.height())
    throw Error(ErrorCode::DimensionMismatch, "argmax and confidence files differ in size");
  auto plane = conf.plane(0);
  return ConfPair(std::move(argmax), std::vector<float>(plane.begin(), plane.end()));
}

void save_conf_pair(const ConfPair& pair, const fs::path& argmax_png, const fs::path& confidence_prb) {
  save_label_png(pair.argmax, argmax_png);
  save_prob_volume(ProbVolume(pair.argmax.width(), pair.argmax.height(), 1, pair.confidence, false), confidence_prb);
}

}  // namespace sdss

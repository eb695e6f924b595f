#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sdss/image_scorer.hpp"
#include "sdss/label_core.hpp"
#include "sdss/selector.hpp"

namespace sdss {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Label PNGs: single-channel gray (or palette indices), 8 or 16 bit.
// The maximum sample value (255 / 65535) is the ignore code.

/// Throws IoError, BadImage, UnsupportedBitDepth, ClassOutOfRange.
LabelMap load_label_png(const fs::path& path, std::size_t num_classes);

/// Loads without a class-range check, for raw dataset ids that still need remapping.
LabelMap load_raw_label_png(const fs::path& path);

/// 8-bit when num_classes <= 254, otherwise 16-bit.
void save_label_png(const LabelMap& map, const fs::path& path);

std::vector<std::uint8_t> encode_label_png(const LabelMap& map);
LabelMap decode_label_png(std::span<const std::uint8_t> bytes, std::size_t num_classes);

// ---------------------------------------------------------------------------
// PRB1 probability volumes.
//
//   "PRB1" | u32 K | u32 H | u32 W | u8 flags (bit0 = normalized)
//   | f32 data, k-major then row-major | u32 CRC32(data)
//
// All integers and floats little-endian.

std::vector<std::uint8_t> encode_prb1(const ProbVolume& volume);
/// Throws BadMagic, TruncatedFile, ChecksumMismatch, InvalidVolume.
ProbVolume decode_prb1(std::span<const std::uint8_t> bytes);

ProbVolume load_prob_volume(const fs::path& path);
void save_prob_volume(const ProbVolume& volume, const fs::path& path);

/// Compact prediction as two files: argmax label PNG + K=1 PRB1 confidence.
ConfPair load_conf_pair(const fs::path& argmax_png, const fs::path& confidence_prb, std::size_t num_classes);
void save_conf_pair(const ConfPair& pair, const fs::path& argmax_png, const fs::path& confidence_prb);

// ---------------------------------------------------------------------------
// Manifests (JSONL). Line 1 is the header, one record per following line.

void write_manifest(const Manifest& m, std::ostream& out);
void write_manifest(const Manifest& m, const fs::path& path);
/// Throws MalformedLine (message carries the 1-based line number) or DuplicateId.
Manifest read_manifest(std::istream& in);
Manifest read_manifest(const fs::path& path);

nlohmann::ordered_json record_to_json(const ScoredRecord& r);
ScoredRecord record_from_json(const nlohmann::json& j);

/// Sidecar for a refined label map: {"id", "n_image", "n_class", "n_correct"}.
nlohmann::ordered_json tally_to_json(const std::string& image_id, const ClassTally& t);
ClassTally tally_from_json(const nlohmann::json& j, std::size_t num_classes);

// ---------------------------------------------------------------------------
// Small JSON documents.

nlohmann::json read_json(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);
std::vector<std::uint8_t> read_bytes(const fs::path& path);
void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes);

ClassMapping load_class_mapping(const fs::path& path);
void save_class_mapping(const ClassMapping& m, const fs::path& path);

// ---------------------------------------------------------------------------
// Dataset layouts.

struct PredictionRef {
  std::string volume;      // PRB1 path, or empty for the compact form
  std::string argmax;      // compact form: label PNG
  std::string confidence;  // compact form: K=1 PRB1

  bool compact() const noexcept { return volume.empty(); }
  friend bool operator==(const PredictionRef&, const PredictionRef&) = default;
};

struct LayoutEntry {
  std::string id;
  std::string gt;
  PredictionRef pred;
  friend bool operator==(const LayoutEntry&, const LayoutEntry&) = default;
};

/// {"root": str, "num_classes": int, "mapping": str?, "entries": [{"id", "gt", "pred"}]}
/// where "pred" is a PRB1 path or {"argmax": png, "confidence": prb}.
/// Relative paths resolve against root; a relative root resolves against the
/// layout file's directory.
struct DatasetLayout {
  fs::path root;
  std::size_t num_classes = 0;
  std::string mapping_path;            // as written in the layout
  std::optional<ClassMapping> mapping; // applied to raw GT ids when present
  std::vector<LayoutEntry> entries;    // ascending id

  fs::path resolve(const std::string& p) const;
  /// Sorts entries by id; throws DuplicateId.
  void normalize();
};

/// Throws ConfigError for malformed documents and DuplicateId.
DatasetLayout load_layout(const fs::path& path);
nlohmann::ordered_json layout_to_json(const DatasetLayout& layout);
void save_layout(const DatasetLayout& layout, const fs::path& path);

/// Files referenced by the layout that do not exist.
std::vector<fs::path> missing_files(const DatasetLayout& layout);

using Prediction = std::variant<ProbVolume, ConfPair>;

struct DatasetItem {
  std::string image_id;
  LabelMap gt;
  Prediction pred;
};

struct LoadFailure {
  std::string image_id;
  std::string message;
};

/// Loads GT (remapped if the layout has a mapping) and prediction of entry i.
DatasetItem load_entry(const DatasetLayout& layout, std::size_t index);
LabelMap load_gt(const DatasetLayout& layout, const LayoutEntry& entry);
Prediction load_prediction(const DatasetLayout& layout, const LayoutEntry& entry);

/// Pseudo-labels either prediction form.
LabelMap pseudo_label(const Prediction& pred, double tau_ssl);

/// Sequential reader in ascending id order. Per-entry failures come back as
/// LoadFailure; in strict mode the first failure throws StrictAbort instead.
class DatasetStream {
 public:
  using Item = std::variant<DatasetItem, LoadFailure>;

  explicit DatasetStream(const DatasetLayout& layout, bool strict = false);

  std::optional<Item> next();

 private:
  const DatasetLayout* layout_;
  bool strict_;
  std::size_t index_ = 0;
};

/// Drains a DatasetStream.
std::vector<DatasetStream::Item> stream_dataset(const DatasetLayout& layout, bool strict = false);

}  // namespace sdss

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdss/image_scorer.hpp"
#include "sdss/label_core.hpp"

namespace sdss {

/// One image of a scored dataset. Tally maps only hold classes present in GT.
struct ScoredRecord {
  std::string image_id;
  double score = 0.0;
  std::int64_t n_image = 0;
  std::map<Label, std::int64_t> n_class;
  std::map<Label, std::int64_t> n_correct;
  std::map<std::string, std::string> paths;

  static ScoredRecord from(const ImageScore& s, std::map<std::string, std::string> paths = {});

  friend bool operator==(const ScoredRecord&, const ScoredRecord&) = default;
};

struct Provenance {
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::string tool_version;
  std::string created;  // ISO-8601 UTC

  /// Snapshot of `cfg`, current tool version and creation time. The time is
  /// taken from SOURCE_DATE_EPOCH when set so that reruns are byte-identical.
  static Provenance capture(const SamplingConfig& cfg);

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Records ordered by (score descending, image_id ascending).
struct Manifest {
  Provenance provenance;
  std::vector<ScoredRecord> records;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

/// Orders by (score desc, image_id asc).
bool record_before(const ScoredRecord& a, const ScoredRecord& b) noexcept;

/// Sorts and checks id uniqueness (DuplicateId).
Manifest make_manifest(std::vector<ScoredRecord> records, Provenance provenance = {});

/// Records with score strictly greater than tau_c.
Manifest select_threshold(std::span<const ScoredRecord> records, double tau_c, Provenance provenance = {});

/// round_half_away_from_zero(percent/100 * n). Throws InvalidPercent unless 0 < percent <= 100.
std::size_t top_count(std::size_t n, double percent);

/// The top_count(N, percent) best records under record_before.
Manifest select_top_percent(std::span<const ScoredRecord> records, double percent, Provenance provenance = {});

Manifest select(std::span<const ScoredRecord> records, const Selection& selection, Provenance provenance = {});

struct ScoreQuantiles {
  double min = 0, q25 = 0, median = 0, q75 = 0, max = 0, mean = 0;
};

struct SubsetReport {
  std::size_t count = 0;
  std::optional<ScoreQuantiles> quantiles;  // empty for an empty manifest
  std::int64_t total_pixels = 0;
  std::map<Label, std::int64_t> class_pixels;    // summed n_class
  std::map<Label, std::int64_t> correct_pixels;  // summed n_correct
};

/// Quantiles use linear interpolation between order statistics.
SubsetReport subset_stats(const Manifest& m);

}  // namespace sdss

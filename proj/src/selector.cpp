#include "sdss/selector.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <unordered_set>

#include "sdss/version.hpp"

namespace sdss {
namespace {

std::string iso8601_utc(std::time_t t) {
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void check_unique(std::span<const ScoredRecord> records) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(records.size());
  for (const auto& r : records)
    if (!seen.insert(r.image_id).second) throw Error(ErrorCode::DuplicateId, "image id '" + r.image_id + "' repeated");
}

std::vector<ScoredRecord> sorted_copy(std::span<const ScoredRecord> records) {
  check_unique(records);
  std::vector<ScoredRecord> out(records.begin(), records.end());
  std::sort(out.begin(), out.end(), record_before);
  return out;
}

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

}  // namespace

ScoredRecord ScoredRecord::from(const ImageScore& s, std::map<std::string, std::string> paths) {
  ScoredRecord r;
  r.image_id = s.image_id;
  r.score = s.score;
  r.n_image = s.tally.n_image;
  for (std::size_t k = 0; k < s.tally.n_class.size(); ++k) {
    if (s.tally.n_class[k] == 0) continue;
    r.n_class.emplace(static_cast<Label>(k), s.tally.n_class[k]);
    r.n_correct.emplace(static_cast<Label>(k), s.tally.n_correct[k]);
  }
  r.paths = std::move(paths);
  return r;
}

Provenance Provenance::capture(const SamplingConfig& cfg) {
  Provenance p;
  p.config = cfg.to_json();
  p.tool_version = std::string(kToolVersion);
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch != nullptr && *epoch != '\0') {
    char* end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (end != nullptr && *end == '\0' && v >= 0) t = static_cast<std::time_t>(v);
  }
  p.created = iso8601_utc(t);
  return p;
}

bool record_before(const ScoredRecord& a, const ScoredRecord& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  return a.image_id < b.image_id;
}

Manifest make_manifest(std::vector<ScoredRecord> records, Provenance provenance) {
  check_unique(records);
  std::sort(records.begin(), records.end(), record_before);
  return Manifest{std::move(provenance), std::move(records)};
}

Manifest select_threshold(std::span<const ScoredRecord> records, double tau_c, Provenance provenance) {
  auto all = sorted_copy(records);
  // Sorted descending, so the selection is a prefix.
  auto cut = std::find_if(all.begin(), all.end(), [tau_c](const ScoredRecord& r) { return !(r.score > tau_c); });
  all.erase(cut, all.end());
  return Manifest{std::move(provenance), std::move(all)};
}

std::size_t top_count(std::size_t n, double percent) {
  if (!(percent > 0.0 && percent <= 100.0))
    throw Error(ErrorCode::InvalidPercent, "top percent must lie in (0, 100], got " + std::to_string(percent));
  // Multiply before dividing: percent * n is exact for integral percents.
  const double exact = percent * static_cast<double>(n) / 100.0;
  const auto count = static_cast<std::size_t>(std::llround(exact));
  return std::min(count, n);
}

Manifest select_top_percent(std::span<const ScoredRecord> records, double percent, Provenance provenance) {
  const std::size_t n = top_count(records.size(), percent);
  auto all = sorted_copy(records);
  all.resize(n);
  return Manifest{std::move(provenance), std::move(all)};
}

Manifest select(std::span<const ScoredRecord> records, const Selection& selection, Provenance provenance) {
  if (const auto* t = std::get_if<ThresholdSelection>(&selection))
    return select_threshold(records, t->tau_c, std::move(provenance));
  return select_top_percent(records, std::get<TopPercentSelection>(selection).percent, std::move(provenance));
}

SubsetReport subset_stats(const Manifest& m) {
  SubsetReport rep;
  rep.count = m.records.size();
  if (m.records.empty()) return rep;
  std::vector<double> scores;
  scores.reserve(m.records.size());
  double sum = 0.0;
  for (const auto& r : m.records) {
    scores.push_back(r.score);
    sum += r.score;
    rep.total_pixels += r.n_image;
    for (const auto& [k, n] : r.n_class) rep.class_pixels[k] += n;
    for (const auto& [k, n] : r.n_correct) rep.correct_pixels[k] += n;
  }
  std::sort(scores.begin(), scores.end());
  rep.quantiles = ScoreQuantiles{scores.front(),        quantile(scores, 0.25), quantile(scores, 0.5),
                                 quantile(scores, 0.75), scores.back(),          sum / static_cast<double>(scores.size())};
  return rep;
}

}  // namespace sdss

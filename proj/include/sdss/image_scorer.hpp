#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdss/label_core.hpp"

namespace sdss {

/// Per-image pixel counts feeding the class-balance score.
struct ClassTally {
  std::vector<std::int64_t> n_correct;  // refined label == k
  std::vector<std::int64_t> n_class;    // GT label == k
  std::int64_t n_image = 0;             // all pixels, GT-ignore included

  std::size_t num_classes() const noexcept { return n_class.size(); }
  std::int64_t n_valid() const noexcept;  // sum of n_class
  std::size_t classes_present() const noexcept;

  /// 0 <= n_correct[k] <= n_class[k] <= n_image and sum(n_class) <= n_image.
  bool consistent() const noexcept;

  friend bool operator==(const ClassTally&, const ClassTally&) = default;
};

struct ScoreOptions {
  bool ignore_in_total = true;
  bool class_balance = true;

  static ScoreOptions from(const SamplingConfig& cfg) { return {cfg.ignore_in_total, cfg.class_balance}; }
};

struct ImageScore {
  std::string image_id;
  double score = 0.0;
  ClassTally tally;
};

/// Throws DimensionMismatch or ClassCountMismatch.
ClassTally tally(const LabelMap& refined, const LabelMap& gt);

/// Class-balance score:
///   sum over classes present of (n_correct/n_class) * (1 - n_class/n_total)
/// where n_total is n_image, or the valid-pixel count when
/// ignore_in_total is false. Absent classes contribute 0.
/// Throws EmptyImage when n_image == 0.
double score(const ClassTally& t, ScoreOptions opts = {});

/// score(tally(refine(pseudo, gt), gt)).
ImageScore score_image(const LabelMap& pseudo, const LabelMap& gt, std::string image_id = {},
                       ScoreOptions opts = {});

}  // namespace sdss

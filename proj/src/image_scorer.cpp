#include "sdss/image_scorer.hpp"

#include <numeric>

#include "sdss/pixel_sampler.hpp"

namespace sdss {

std::int64_t ClassTally::n_valid() const noexcept {
  return std::accumulate(n_class.begin(), n_class.end(), std::int64_t{0});
}

std::size_t ClassTally::classes_present() const noexcept {
  std::size_t c = 0;
  for (auto n : n_class) c += n > 0 ? 1 : 0;
  return c;
}

bool ClassTally::consistent() const noexcept {
  if (n_correct.size() != n_class.size() || n_image < 0) return false;
  for (std::size_t k = 0; k < n_class.size(); ++k) {
    if (n_correct[k] < 0 || n_correct[k] > n_class[k] || n_class[k] > n_image) return false;
  }
  return n_valid() <= n_image;
}

ClassTally tally(const LabelMap& refined, const LabelMap& gt) {
  if (!refined.same_shape(gt)) throw Error(ErrorCode::DimensionMismatch, "refined and gt shapes differ");
  if (refined.num_classes() != gt.num_classes())
    throw Error(ErrorCode::ClassCountMismatch, "refined and gt class counts differ");
  const std::size_t k_count = gt.num_classes();
  ClassTally t;
  t.n_correct.assign(k_count, 0);
  t.n_class.assign(k_count, 0);
  t.n_image = static_cast<std::int64_t>(gt.size());
  for (std::size_t p = 0; p < gt.size(); ++p) {
    const Label g = gt[p];
    if (!is_ignore(g) && g < k_count) ++t.n_class[g];
    const Label r = refined[p];
    if (!is_ignore(r) && r < k_count) ++t.n_correct[r];
  }
  return t;
}

double score(const ClassTally& t, ScoreOptions opts) {
  if (t.n_image <= 0) throw Error(ErrorCode::EmptyImage, "image has no pixels");
  const double total = static_cast<double>(opts.ignore_in_total ? t.n_image : t.n_valid());
  double s = 0.0;
  for (std::size_t k = 0; k < t.n_class.size(); ++k) {
    const std::int64_t n_class = t.n_class[k];
    if (n_class == 0) continue;
    const double ratio = static_cast<double>(t.n_correct[k]) / static_cast<double>(n_class);
    s += opts.class_balance ? ratio * (1.0 - static_cast<double>(n_class) / total) : ratio;
  }
  return s;
}

ImageScore score_image(const LabelMap& pseudo, const LabelMap& gt, std::string image_id, ScoreOptions opts) {
  ImageScore out;
  out.image_id = std::move(image_id);
  out.tally = tally(refine(pseudo, gt), gt);
  out.score = score(out.tally, opts);
  return out;
}

}  // namespace sdss

#include "sdss/oracle.hpp"

#include <vector>

namespace sdss {

LabelMap oracle_pseudo_label(const ProbVolume& pred, double tau_ssl) {
  if (!pred.normalized()) throw Error(ErrorCode::UnnormalizedInput, "oracle needs a normalized volume");
  LabelMap out(pred.width(), pred.height(), pred.num_classes());
  for (std::size_t y = 0; y < pred.height(); ++y) {
    for (std::size_t x = 0; x < pred.width(); ++x) {
      const std::size_t p = y * pred.width() + x;
      float top = -1.0f;
      for (std::size_t k = 0; k < pred.num_classes(); ++k)
        if (pred.prob(k, p) > top) top = pred.prob(k, p);
      std::vector<std::size_t> candidates;
      for (std::size_t k = 0; k < pred.num_classes(); ++k)
        if (pred.prob(k, p) == top) candidates.push_back(k);
      std::size_t chosen = candidates.front();
      for (std::size_t c : candidates)
        if (c < chosen) chosen = c;
      out[p] = (double(top) >= tau_ssl) ? static_cast<Label>(chosen) : kIgnore;
    }
  }
  return out;
}

LabelMap oracle_refine(const LabelMap& pseudo, const LabelMap& gt) {
  if (pseudo.width() != gt.width() || pseudo.height() != gt.height())
    throw Error(ErrorCode::DimensionMismatch, "oracle_refine: shapes differ");
  if (pseudo.num_classes() != gt.num_classes())
    throw Error(ErrorCode::ClassCountMismatch, "oracle_refine: class counts differ");
  LabelMap out(gt.width(), gt.height(), gt.num_classes());
  for (std::size_t y = 0; y < gt.height(); ++y) {
    for (std::size_t x = 0; x < gt.width(); ++x) {
      const Label s = gt.at(x, y);
      const Label q = pseudo.at(x, y);
      if (s == kIgnore) continue;
      if (q == s) out[y * gt.width() + x] = q;
    }
  }
  return out;
}

double oracle_score(const LabelMap& pseudo, const LabelMap& gt, OracleScoreConfig cfg) {
  if (pseudo.width() != gt.width() || pseudo.height() != gt.height())
    throw Error(ErrorCode::DimensionMismatch, "oracle_score: shapes differ");
  if (pseudo.num_classes() != gt.num_classes())
    throw Error(ErrorCode::ClassCountMismatch, "oracle_score: class counts differ");
  if (gt.width() * gt.height() == 0) throw Error(ErrorCode::EmptyImage, "oracle_score: empty image");

  double n_image = 0.0;
  for (std::size_t y = 0; y < gt.height(); ++y)
    for (std::size_t x = 0; x < gt.width(); ++x)
      if (cfg.ignore_in_total || gt.at(x, y) != kIgnore) n_image += 1.0;

  double tau = 0.0;
  for (std::size_t k = 0; k < gt.num_classes(); ++k) {
    double n_class = 0.0;
    double n_correct = 0.0;
    for (std::size_t y = 0; y < gt.height(); ++y) {
      for (std::size_t x = 0; x < gt.width(); ++x) {
        if (gt.at(x, y) != k) continue;
        n_class += 1.0;
        if (pseudo.at(x, y) == k) n_correct += 1.0;
      }
    }
    if (n_class == 0.0) continue;
    const double correctness = n_correct / n_class;
    tau += cfg.class_balance ? correctness * (1.0 - n_class / n_image) : correctness;
  }
  return tau;
}

}  // namespace sdss

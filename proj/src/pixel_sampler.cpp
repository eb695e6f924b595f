#include "sdss/pixel_sampler.hpp"

#include <string>

namespace sdss {
namespace {

void check_tau(double tau_ssl) {
  if (!(tau_ssl >= 0.0 && tau_ssl <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "tau_ssl must lie in [0, 1], got " + std::to_string(tau_ssl));
}

}  // namespace

LabelMap pseudo_label(const ProbVolume& pred, double tau_ssl) {
  check_tau(tau_ssl);
  if (!pred.normalized())
    throw Error(ErrorCode::UnnormalizedInput, "pseudo_label needs a normalized probability volume");

  const std::size_t n = pred.pixels();
  const std::size_t k_count = pred.num_classes();
  std::vector<Label> best(n, 0);
  std::vector<float> best_p(pred.plane(0).begin(), pred.plane(0).end());
  // Strict '>' keeps the earliest class on ties.
  for (std::size_t k = 1; k < k_count; ++k) {
    auto plane = pred.plane(k);
    for (std::size_t p = 0; p < n; ++p) {
      if (plane[p] > best_p[p]) {
        best_p[p] = plane[p];
        best[p] = static_cast<Label>(k);
      }
    }
  }
  for (std::size_t p = 0; p < n; ++p)
    if (!(static_cast<double>(best_p[p]) >= tau_ssl)) best[p] = kIgnore;
  return LabelMap(pred.width(), pred.height(), k_count, std::move(best));
}

LabelMap pseudo_label_compact(const ConfPair& pred, double tau_ssl) {
  check_tau(tau_ssl);
  if (pred.argmax.size() != pred.confidence.size())
    throw Error(ErrorCode::DimensionMismatch, "argmax and confidence sizes differ");
  LabelMap out = pred.argmax;
  for (std::size_t p = 0; p < out.size(); ++p)
    if (!(static_cast<double>(pred.confidence[p]) >= tau_ssl)) out[p] = kIgnore;
  return out;
}

LabelMap refine(const LabelMap& pseudo, const LabelMap& gt) {
  if (!pseudo.same_shape(gt))
    throw Error(ErrorCode::DimensionMismatch,
                "pseudo is " + std::to_string(pseudo.width()) + "x" + std::to_string(pseudo.height()) + ", gt is " +
                    std::to_string(gt.width()) + "x" + std::to_string(gt.height()));
  if (pseudo.num_classes() != gt.num_classes())
    throw Error(ErrorCode::ClassCountMismatch, "pseudo has K=" + std::to_string(pseudo.num_classes()) +
                                                   ", gt has K=" + std::to_string(gt.num_classes()));
  LabelMap out(gt.width(), gt.height(), gt.num_classes());
  for (std::size_t p = 0; p < gt.size(); ++p) {
    const Label g = gt[p];
    if (!is_ignore(g) && pseudo[p] == g) out[p] = g;
  }
  return out;
}

}  // namespace sdss

#pragma once

#include "sdss/label_core.hpp"

namespace sdss {

inline constexpr double kDefaultTauSsl = 0.1;

/// Confidence-thresholded pseudo-labels: argmax class (lowest index on ties)
/// when its probability is >= tau_ssl, kIgnore otherwise.
/// Throws UnnormalizedInput unless the volume is flagged normalized.
LabelMap pseudo_label(const ProbVolume& pred, double tau_ssl = kDefaultTauSsl);

/// Same rule over the compact (argmax, confidence) form.
LabelMap pseudo_label_compact(const ConfPair& pred, double tau_ssl = kDefaultTauSsl);

/// Keeps a pseudo-label only where it equals a non-ignore GT label.
/// Throws DimensionMismatch or ClassCountMismatch.
LabelMap refine(const LabelMap& pseudo, const LabelMap& gt);

}  // namespace sdss

#pragma once

#include "sdss/label_core.hpp"

// Deliberately naive re-implementations of pseudo-labelling, refinement and
// the class-balance score. They share no code with the production path and
// exist to cross-check it.

namespace sdss {

/// Enumerates every class per pixel, collects the maximal ones and keeps the
/// smallest index; then applies the inclusive threshold.
LabelMap oracle_pseudo_label(const ProbVolume& pred, double tau_ssl);

LabelMap oracle_refine(const LabelMap& pseudo, const LabelMap& gt);

struct OracleScoreConfig {
  bool ignore_in_total = true;
  bool class_balance = true;
};

/// Literal per-class, per-pixel double loops over (x, y).
double oracle_score(const LabelMap& pseudo, const LabelMap& gt, OracleScoreConfig cfg = {});

}  // namespace sdss

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "sdss/label_core.hpp"

namespace sdss {

/// Seeded generator with a fixed, named algorithm. Distributions are derived
/// here rather than through <random> adaptors, whose output is
/// implementation-defined.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  /// Index drawn proportionally to non-negative weights (at least one positive).
  std::size_t weighted(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
};

struct SceneSpec {
  std::size_t width = 256;
  std::size_t height = 256;
  std::size_t num_classes = 19;
  std::vector<double> area_fractions;  // one per class
  std::size_t blob_size = 2048;        // expected region size in pixels
  double ignore_fraction = 0.0;
  std::uint64_t seed = 0;

  /// Equal areas over `present` classes (the first `present` indices of K).
  static SceneSpec balanced(std::size_t width, std::size_t height, std::size_t num_classes, std::size_t present,
                            std::uint64_t seed);

  /// Throws InfeasibleSpec.
  void check() const;
};

/// Region-growth scene generator. Per-class areas are exact up to integer
/// rounding of fraction * pixels (largest-remainder apportionment).
LabelMap gen_label_map(const SceneSpec& spec);

struct ConfidenceRange {
  double lo = 0.0;
  double hi = 1.0;
};

struct PredictorSpec {
  std::vector<double> accuracy;        // a_k per class
  std::vector<double> confusion_bias;  // weights over wrong classes; empty = uniform
  ConfidenceRange correct_confidence{0.5, 1.0};
  ConfidenceRange wrong_confidence{0.2, 0.9};
  std::uint64_t seed = 0;

  static PredictorSpec uniform(std::size_t num_classes, double accuracy, std::uint64_t seed);

  /// Throws InvalidArgument.
  void check(std::size_t num_classes) const;
};

/// Stand-in for a target-pretrained segmentation network. For each pixel
/// with GT class g the argmax is g with probability a_g, otherwise a class
/// drawn from the confusion bias; the argmax probability is drawn from the
/// matching confidence range (raised just above 1/K when needed so the
/// argmax stays unique) and the remaining mass is spread evenly.
/// GT-ignore pixels get a bias-drawn class at wrong-pixel confidence.
ProbVolume mock_predict(const LabelMap& gt, const PredictorSpec& spec);

/// Shannon entropy (nats) of the GT class distribution; ignore excluded.
double class_entropy(const LabelMap& gt);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace sdss

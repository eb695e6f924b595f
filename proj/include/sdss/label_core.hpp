#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sdss/error.hpp"

namespace sdss {

/// Class index as stored in memory. Valid classes are [0, K-1].
using Label = std::uint16_t;

/// Reserved "ignore" code: the maximum value of the 16-bit storage width.
/// 8-bit PNGs carry it as 255 and are widened on load.
inline constexpr Label kIgnore = 0xFFFF;

/// Largest K representable without colliding with kIgnore.
inline constexpr std::size_t kMaxClasses = 0xFFFF;

/// Largest K that still fits 8-bit storage (255 is reserved for ignore).
inline constexpr std::size_t kMax8BitClasses = 254;

inline bool is_ignore(Label l) noexcept { return l == kIgnore; }

/// H x W grid of class indices, row-major.
///
/// Construction checks the buffer length but not the values; use validate()
/// to audit a map built from untrusted data.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(std::size_t width, std::size_t height, std::size_t num_classes, Label fill = kIgnore);
  LabelMap(std::size_t width, std::size_t height, std::size_t num_classes, std::vector<Label> data);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const Label> data() const noexcept { return data_; }
  std::span<Label> data() noexcept { return data_; }

  Label operator[](std::size_t i) const noexcept { return data_[i]; }
  Label& operator[](std::size_t i) noexcept { return data_[i]; }
  Label at(std::size_t x, std::size_t y) const { return data_.at(y * width_ + x); }

  bool same_shape(const LabelMap& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::size_t num_classes_ = 0;
  std::vector<Label> data_;
};

/// Per-pixel class probabilities, K planes of H x W (k-major, then row-major).
class ProbVolume {
 public:
  static constexpr double kNormTolerance = 1e-3;

  ProbVolume() = default;

  /// Throws InvalidVolume when an entry leaves [0, 1] or when `normalized`
  /// is set and some pixel's sum is outside 1 +/- kNormTolerance.
  ProbVolume(std::size_t width, std::size_t height, std::size_t num_classes,
             std::vector<float> data, bool normalized);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t pixels() const noexcept { return width_ * height_; }
  bool normalized() const noexcept { return normalized_; }

  float prob(std::size_t k, std::size_t pixel) const noexcept { return data_[k * pixels() + pixel]; }
  std::span<const float> plane(std::size_t k) const noexcept {
    return std::span<const float>(data_).subspan(k * pixels(), pixels());
  }
  std::span<const float> data() const noexcept { return data_; }

  friend bool operator==(const ProbVolume&, const ProbVolume&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::size_t num_classes_ = 0;
  std::vector<float> data_;
  bool normalized_ = false;
};

/// Compact prediction: argmax class plus its probability per pixel.
struct ConfPair {
  LabelMap argmax;
  std::vector<float> confidence;

  ConfPair() = default;
  /// Throws DimensionMismatch if sizes differ, InvalidVolume if a confidence leaves [0, 1].
  ConfPair(LabelMap argmax, std::vector<float> confidence);
};

/// Collapses a volume to (argmax, max probability); ties go to the lowest class.
ConfPair compress(const ProbVolume& volume);

/// Raw dataset label id -> training class (or kIgnore).
struct ClassMapping {
  std::string name;
  std::size_t num_classes = 0;
  std::map<std::uint32_t, Label> table;

  static ClassMapping identity(std::size_t num_classes);

  /// Parses {"name": str, "num_classes": int, "table": {"<raw>": int|"ignore"}}.
  static ClassMapping from_json(const nlohmann::json& doc);
  nlohmann::ordered_json to_json() const;

  /// Throws ConfigError unless every target is < num_classes or kIgnore.
  void check() const;
};

/// `first` then `second`. Raw ids of `first` mapping to kIgnore stay kIgnore.
ClassMapping compose(const ClassMapping& first, const ClassMapping& second);

/// Rewrites every pixel through the mapping. kIgnore passes through unchanged.
/// Throws UnmappedLabel on the first raw value without a table entry.
LabelMap remap_labels(const LabelMap& raw, const ClassMapping& mapping);

struct ValidationReport {
  struct Finding {
    std::size_t pixel_index;
    Label value;
  };
  std::vector<Finding> findings;

  bool ok() const noexcept { return findings.empty(); }
};

ValidationReport validate(const LabelMap& map);

struct ThresholdSelection {
  double tau_c = 0.3;
};

struct TopPercentSelection {
  double percent = 10.0;
};

using Selection = std::variant<ThresholdSelection, TopPercentSelection>;

struct SamplingConfig {
  double tau_ssl = 0.1;
  Selection selection = ThresholdSelection{};
  // n_image counts GT-ignore pixels too; false switches to the valid-pixel total.
  bool ignore_in_total = true;
  // false drops the (1 - n_class/n_image) factor (ablation of the balance term).
  bool class_balance = true;
  std::string class_mapping;
  std::uint64_t seed = 0;

  /// Throws ConfigError on out-of-range values.
  void check() const;

  nlohmann::ordered_json to_json() const;
  /// Fields absent from `doc` keep their values in `base`. Supplying both
  /// "tau_c" and "top_percent" is a ConfigError.
  static SamplingConfig from_json(const nlohmann::json& doc, SamplingConfig base);
  static SamplingConfig from_json(const nlohmann::json& doc);
};

}  // namespace sdss

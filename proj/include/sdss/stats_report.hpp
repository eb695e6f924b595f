#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sdss/label_core.hpp"
#include "sdss/selector.hpp"

namespace sdss {

/// Total pixels per class over all maps; ignore pixels are not counted.
/// Throws ClassCountMismatch when the maps disagree on K.
std::vector<std::int64_t> class_histogram(std::span<const LabelMap> maps);

/// Adds one map into an existing histogram of size K.
void accumulate_histogram(std::vector<std::int64_t>& hist, const LabelMap& map);

/// K x (K+1) pixel counts: rows are GT classes, columns predicted classes,
/// and the last column collects pixels the prediction left as ignore.
/// GT-ignore pixels are never counted.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t num_classes);

  std::size_t num_classes() const noexcept { return k_; }
  std::size_t unlabeled_column() const noexcept { return k_; }

  std::int64_t at(std::size_t gt, std::size_t pred) const { return counts_.at(gt * (k_ + 1) + pred); }
  std::int64_t& at(std::size_t gt, std::size_t pred) { return counts_.at(gt * (k_ + 1) + pred); }

  /// Throws DimensionMismatch or ClassCountMismatch.
  void add(const LabelMap& pred, const LabelMap& gt);
  /// Elementwise sum; throws ClassCountMismatch.
  void merge(const ConfusionMatrix& other);

  std::int64_t row_sum(std::size_t gt) const;           // includes the unlabeled column
  std::int64_t col_sum(std::size_t pred) const;
  std::int64_t total() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t k_ = 0;
  std::vector<std::int64_t> counts_;
};

/// Accumulating form of the confusion operation.
ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& gt, ConfusionMatrix acc);

struct IouResult {
  std::vector<std::optional<double>> per_class;  // nullopt where the denominator is zero
  std::optional<double> mean;                    // nullopt when no class is defined
};

/// IoU_k = cm[k][k] / (row_k + col_k - cm[k][k]) over the class columns only.
/// The mean runs over `eval_classes` (all classes when empty) whose IoU is defined.
IouResult miou(const ConfusionMatrix& cm, std::span<const std::size_t> eval_classes = {});

// ---------------------------------------------------------------------------
// Tabular reports.

using Cell = std::variant<std::int64_t, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();

  friend bool operator==(const Table&, const Table&) = default;
};

enum class ReportFormat { Csv, Json };

Table histogram_table(std::span<const std::int64_t> hist);
Table iou_table(const IouResult& result);
Table subset_table(const SubsetReport& report);

std::string to_csv(const Table& t);
std::string to_json(const Table& t);
Table table_from_csv(const std::string& text);
Table table_from_json(const std::string& text);

/// CSV gets the config snapshot in a "<path>.config.json" sidecar so the CSV
/// itself stays plain; JSON embeds it. Throws IoError.
void export_report(const Table& t, ReportFormat format, const std::filesystem::path& path);

}  // namespace sdss

#include "sdss/label_core.hpp"

#include <cmath>
#include <string>

namespace sdss {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnmappedLabel: return "UnmappedLabel";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ClassCountMismatch: return "ClassCountMismatch";
    case ErrorCode::UnnormalizedInput: return "UnnormalizedInput";
    case ErrorCode::InvalidVolume: return "InvalidVolume";
    case ErrorCode::EmptyImage: return "EmptyImage";
    case ErrorCode::InvalidPercent: return "InvalidPercent";
    case ErrorCode::BadImage: return "BadImage";
    case ErrorCode::UnsupportedBitDepth: return "UnsupportedBitDepth";
    case ErrorCode::ClassOutOfRange: return "ClassOutOfRange";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::LoadError: return "LoadError";
    case ErrorCode::StrictAbort: return "StrictAbort";
    case ErrorCode::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

LabelMap::LabelMap(std::size_t width, std::size_t height, std::size_t num_classes, Label fill)
    : width_(width), height_(height), num_classes_(num_classes), data_(width * height, fill) {
  if (num_classes > kMaxClasses)
    throw Error(ErrorCode::InvalidArgument, "num_classes " + std::to_string(num_classes) + " exceeds 16-bit storage");
}

LabelMap::LabelMap(std::size_t width, std::size_t height, std::size_t num_classes, std::vector<Label> data)
    : width_(width), height_(height), num_classes_(num_classes), data_(std::move(data)) {
  if (data_.size() != width * height)
    throw Error(ErrorCode::DimensionMismatch, "label buffer has " + std::to_string(data_.size()) +
                                                  " entries, expected " + std::to_string(width * height));
  if (num_classes > kMaxClasses)
    throw Error(ErrorCode::InvalidArgument, "num_classes " + std::to_string(num_classes) + " exceeds 16-bit storage");
}

ProbVolume::ProbVolume(std::size_t width, std::size_t height, std::size_t num_classes,
                       std::vector<float> data, bool normalized)
    : width_(width), height_(height), num_classes_(num_classes), data_(std::move(data)), normalized_(normalized) {
  const std::size_t n = width * height;
  if (num_classes == 0) throw Error(ErrorCode::InvalidVolume, "volume has zero classes");
  if (data_.size() != n * num_classes)
    throw Error(ErrorCode::DimensionMismatch, "volume buffer has " + std::to_string(data_.size()) +
                                                  " entries, expected " + std::to_string(n * num_classes));
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const float v = data_[i];
    if (!(v >= 0.0f && v <= 1.0f))
      throw Error(ErrorCode::InvalidVolume, "probability out of [0,1] at flat index " + std::to_string(i));
  }
  if (!normalized_) return;
  std::vector<double> sums(n, 0.0);
  for (std::size_t k = 0; k < num_classes; ++k) {
    const float* plane = data_.data() + k * n;
    for (std::size_t p = 0; p < n; ++p) sums[p] += plane[p];
  }
  for (std::size_t p = 0; p < n; ++p) {
    if (std::abs(sums[p] - 1.0) > kNormTolerance)
      throw Error(ErrorCode::InvalidVolume, "pixel " + std::to_string(p) + " sums to " + std::to_string(sums[p]) +
                                                " but volume is flagged normalized");
  }
}

ConfPair::ConfPair(LabelMap argmax_map, std::vector<float> conf)
    : argmax(std::move(argmax_map)), confidence(std::move(conf)) {
  if (argmax.size() != confidence.size())
    throw Error(ErrorCode::DimensionMismatch, "argmax has " + std::to_string(argmax.size()) +
                                                  " pixels, confidence has " + std::to_string(confidence.size()));
  for (float c : confidence)
    if (!(c >= 0.0f && c <= 1.0f)) throw Error(ErrorCode::InvalidVolume, "confidence out of [0,1]");
}

ConfPair compress(const ProbVolume& volume) {
  const std::size_t n = volume.pixels();
  const std::size_t k_count = volume.num_classes();
  std::vector<Label> best(n, 0);
  std::vector<float> conf(volume.plane(0).begin(), volume.plane(0).end());
  for (std::size_t k = 1; k < k_count; ++k) {
    auto plane = volume.plane(k);
    for (std::size_t p = 0; p < n; ++p) {
      if (plane[p] > conf[p]) {
        conf[p] = plane[p];
        best[p] = static_cast<Label>(k);
      }
    }
  }
  return ConfPair(LabelMap(volume.width(), volume.height(), k_count, std::move(best)), std::move(conf));
}

ClassMapping ClassMapping::identity(std::size_t num_classes) {
  ClassMapping m;
  m.name = "identity";
  m.num_classes = num_classes;
  for (std::size_t k = 0; k < num_classes; ++k) m.table.emplace(static_cast<std::uint32_t>(k), static_cast<Label>(k));
  return m;
}

ClassMapping ClassMapping::from_json(const nlohmann::json& doc) {
  ClassMapping m;
  try {
    m.name = doc.at("name").get<std::string>();
    m.num_classes = doc.at("num_classes").get<std::size_t>();
    for (const auto& [key, value] : doc.at("table").items()) {
      std::size_t consumed = 0;
      const unsigned long raw = std::stoul(key, &consumed);
      if (consumed != key.size() || raw > 0xFFFFFFFFul)
        throw Error(ErrorCode::ConfigError, "mapping key '" + key + "' is not an unsigned integer");
      Label target;
      if (value.is_string()) {
        if (value.get<std::string>() != "ignore")
          throw Error(ErrorCode::ConfigError, "mapping value for '" + key + "' must be an integer or \"ignore\"");
        target = kIgnore;
      } else {
        const auto t = value.get<std::int64_t>();
        if (t < 0 || static_cast<std::size_t>(t) >= m.num_classes)
          throw Error(ErrorCode::ConfigError, "mapping target " + std::to_string(t) + " for raw id " + key +
                                                  " is outside [0, num_classes)");
        target = static_cast<Label>(t);
      }
      m.table.emplace(static_cast<std::uint32_t>(raw), target);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("malformed class mapping: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::ConfigError, "mapping key is not an unsigned integer");
  } catch (const std::out_of_range&) {
    throw Error(ErrorCode::ConfigError, "mapping key out of range");
  }
  m.check();
  return m;
}

nlohmann::ordered_json ClassMapping::to_json() const {
  nlohmann::ordered_json doc;
  doc["name"] = name;
  doc["num_classes"] = num_classes;
  nlohmann::ordered_json table = nlohmann::ordered_json::object();
  for (const auto& [raw, target] : this->table) {
    if (is_ignore(target))
      table[std::to_string(raw)] = "ignore";
    else
      table[std::to_string(raw)] = target;
  }
  doc["table"] = std::move(table);
  return doc;
}

void ClassMapping::check() const {
  if (num_classes == 0 || num_classes > kMaxClasses)
    throw Error(ErrorCode::ConfigError, "mapping '" + name + "' declares invalid num_classes " + std::to_string(num_classes));
  for (const auto& [raw, target] : table) {
    if (!is_ignore(target) && target >= num_classes)
      throw Error(ErrorCode::ConfigError, "mapping '" + name + "' sends raw id " + std::to_string(raw) +
                                              " to class " + std::to_string(target));
  }
}

ClassMapping compose(const ClassMapping& first, const ClassMapping& second) {
  ClassMapping out;
  out.name = first.name + "+" + second.name;
  out.num_classes = second.num_classes;
  for (const auto& [raw, mid] : first.table) {
    if (is_ignore(mid)) {
      out.table.emplace(raw, kIgnore);
      continue;
    }
    auto it = second.table.find(mid);
    if (it == second.table.end())
      throw Error(ErrorCode::UnmappedLabel, "intermediate class " + std::to_string(mid) + " has no entry in '" +
                                                second.name + "'");
    out.table.emplace(raw, it->second);
  }
  return out;
}

LabelMap remap_labels(const LabelMap& raw, const ClassMapping& mapping) {
  // Dense lookup over the raw value range; kIgnore is handled before lookup.
  constexpr Label kUnmapped = 0xFFFE;
  std::vector<Label> lut(kMaxClasses, kUnmapped);
  for (const auto& [raw_id, target] : mapping.table)
    if (raw_id < kMaxClasses) lut[raw_id] = target;

  LabelMap out(raw.width(), raw.height(), mapping.num_classes);
  for (std::size_t p = 0; p < raw.size(); ++p) {
    const Label v = raw[p];
    if (is_ignore(v)) continue;
    const Label t = lut[v];
    // A genuine target of 0xFFFE needs K = 65535; the table is then checked directly.
    if (t == kUnmapped && !mapping.table.contains(v))
      throw Error(ErrorCode::UnmappedLabel,
                  "raw id " + std::to_string(v) + " at pixel " + std::to_string(p) + " has no mapping entry");
    out[p] = t;
  }
  return out;
}

ValidationReport validate(const LabelMap& map) {
  ValidationReport report;
  const auto k = map.num_classes();
  for (std::size_t p = 0; p < map.size(); ++p) {
    const Label v = map[p];
    if (!is_ignore(v) && v >= k) report.findings.push_back({p, v});
  }
  return report;
}

void SamplingConfig::check() const {
  if (!(tau_ssl >= 0.0 && tau_ssl <= 1.0))
    throw Error(ErrorCode::ConfigError, "tau_ssl must lie in [0, 1], got " + std::to_string(tau_ssl));
  if (const auto* t = std::get_if<ThresholdSelection>(&selection)) {
    if (!(t->tau_c >= 0.0) || !std::isfinite(t->tau_c))
      throw Error(ErrorCode::ConfigError, "tau_c must be a finite value >= 0");
  } else {
    const double k = std::get<TopPercentSelection>(selection).percent;
    if (!(k > 0.0 && k <= 100.0))
      throw Error(ErrorCode::ConfigError, "top_percent must lie in (0, 100], got " + std::to_string(k));
  }
}

nlohmann::ordered_json SamplingConfig::to_json() const {
  nlohmann::ordered_json doc;
  doc["tau_ssl"] = tau_ssl;
  if (const auto* t = std::get_if<ThresholdSelection>(&selection))
    doc["tau_c"] = t->tau_c;
  else
    doc["top_percent"] = std::get<TopPercentSelection>(selection).percent;
  doc["ignore_in_total"] = ignore_in_total;
  doc["class_balance"] = class_balance;
  doc["class_mapping"] = class_mapping;
  doc["seed"] = seed;
  return doc;
}

SamplingConfig SamplingConfig::from_json(const nlohmann::json& doc) { return from_json(doc, SamplingConfig{}); }

SamplingConfig SamplingConfig::from_json(const nlohmann::json& doc, SamplingConfig base) {
  if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
  try {
    if (doc.contains("tau_c") && doc.contains("top_percent"))
      throw Error(ErrorCode::ConfigError, "tau_c and top_percent are mutually exclusive");
    if (doc.contains("tau_ssl")) base.tau_ssl = doc["tau_ssl"].get<double>();
    if (doc.contains("tau_c")) base.selection = ThresholdSelection{doc["tau_c"].get<double>()};
    if (doc.contains("top_percent")) base.selection = TopPercentSelection{doc["top_percent"].get<double>()};
    if (doc.contains("ignore_in_total")) base.ignore_in_total = doc["ignore_in_total"].get<bool>();
    if (doc.contains("class_balance")) base.class_balance = doc["class_balance"].get<bool>();
    if (doc.contains("class_mapping")) base.class_mapping = doc["class_mapping"].get<std::string>();
    if (doc.contains("seed")) base.seed = doc["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad config field: ") + e.what());
  }
  base.check();
  return base;
}

}  // namespace sdss

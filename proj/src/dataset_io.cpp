#include "sdss/dataset_io.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_set>

#include "sdss/pixel_sampler.hpp"

namespace sdss {
namespace {

constexpr const char* kManifestFormat = "sdss-manifest";
constexpr int kManifestVersion = 1;

nlohmann::ordered_json counts_to_json(const std::map<Label, std::int64_t>& counts) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, n] : counts) j[std::to_string(k)] = n;
  return j;
}

std::map<Label, std::int64_t> counts_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("class counts must be an object");
  std::map<Label, std::int64_t> out;
  for (const auto& [key, value] : j.items()) {
    std::size_t used = 0;
    const unsigned long k = std::stoul(key, &used);
    if (used != key.size() || k >= kMaxClasses) throw std::invalid_argument("bad class key '" + key + "'");
    if (!value.is_number_integer()) throw std::invalid_argument("class count must be an integer");
    out.emplace(static_cast<Label>(k), value.get<std::int64_t>());
  }
  return out;
}

Error malformed(std::size_t line_no, const std::string& why) {
  return Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": " + why);
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed for " + path.string());
  return bytes;
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

ClassMapping load_class_mapping(const fs::path& path) {
  try {
    return ClassMapping::from_json(read_json(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw;
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

void save_class_mapping(const ClassMapping& m, const fs::path& path) { write_text(path, m.to_json().dump(2) + "\n"); }

// ---------------------------------------------------------------------------

nlohmann::ordered_json record_to_json(const ScoredRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.image_id;
  j["score"] = r.score;
  j["n_image"] = r.n_image;
  j["n_class"] = counts_to_json(r.n_class);
  j["n_correct"] = counts_to_json(r.n_correct);
  nlohmann::ordered_json paths = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.paths) paths[k] = v;
  j["paths"] = std::move(paths);
  return j;
}

ScoredRecord record_from_json(const nlohmann::json& j) {
  ScoredRecord r;
  r.image_id = j.at("id").get<std::string>();
  if (!j.at("score").is_number()) throw std::invalid_argument("score must be a number");
  r.score = j.at("score").get<double>();
  r.n_image = j.at("n_image").get<std::int64_t>();
  r.n_class = counts_from_json(j.at("n_class"));
  r.n_correct = counts_from_json(j.at("n_correct"));
  if (j.contains("paths"))
    for (const auto& [k, v] : j["paths"].items()) r.paths.emplace(k, v.get<std::string>());
  return r;
}

void write_manifest(const Manifest& m, std::ostream& out) {
  nlohmann::ordered_json header;
  header["format"] = kManifestFormat;
  header["version"] = kManifestVersion;
  header["config"] = m.provenance.config;
  header["tool_version"] = m.provenance.tool_version;
  header["created"] = m.provenance.created;
  out << header.dump() << '\n';
  for (const auto& r : m.records) out << record_to_json(r).dump() << '\n';
}

void write_manifest(const Manifest& m, const fs::path& path) {
  std::ostringstream buf;
  write_manifest(m, buf);
  write_text(path, buf.str());
}

Manifest read_manifest(std::istream& in) {
  Manifest m;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw malformed(line_no, e.what());
    }
    if (!have_header) {
      if (!j.is_object() || j.value("format", "") != kManifestFormat || j.value("version", 0) != kManifestVersion)
        throw malformed(line_no, "expected an sdss-manifest version 1 header");
      try {
        // Re-parse so the config keeps its written key order.
        const auto ordered = nlohmann::ordered_json::parse(line);
        m.provenance.config = ordered.contains("config") ? ordered["config"] : nlohmann::ordered_json::object();
        m.provenance.tool_version = j.value("tool_version", "");
        m.provenance.created = j.value("created", "");
      } catch (const nlohmann::json::exception& e) {
        throw malformed(line_no, e.what());
      }
      have_header = true;
      continue;
    }
    ScoredRecord r;
    try {
      r = record_from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw malformed(line_no, e.what());
    } catch (const std::exception& e) {
      throw malformed(line_no, e.what());
    }
    if (!seen.insert(r.image_id).second)
      throw Error(ErrorCode::DuplicateId, "line " + std::to_string(line_no) + ": image id '" + r.image_id + "' repeated");
    m.records.push_back(std::move(r));
  }
  if (!have_header) throw malformed(1, "missing header line");
  return m;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return read_manifest(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

nlohmann::ordered_json tally_to_json(const std::string& image_id, const ClassTally& t) {
  std::map<Label, std::int64_t> n_class, n_correct;
  for (std::size_t k = 0; k < t.n_class.size(); ++k) {
    if (t.n_class[k] == 0 && t.n_correct[k] == 0) continue;
    n_class.emplace(static_cast<Label>(k), t.n_class[k]);
    n_correct.emplace(static_cast<Label>(k), t.n_correct[k]);
  }
  nlohmann::ordered_json j;
  j["id"] = image_id;
  j["n_image"] = t.n_image;
  j["n_class"] = counts_to_json(n_class);
  j["n_correct"] = counts_to_json(n_correct);
  return j;
}

ClassTally tally_from_json(const nlohmann::json& j, std::size_t num_classes) {
  ClassTally t;
  t.n_class.assign(num_classes, 0);
  t.n_correct.assign(num_classes, 0);
  try {
    t.n_image = j.at("n_image").get<std::int64_t>();
    for (const auto& [k, n] : counts_from_json(j.at("n_class"))) {
      if (k >= num_classes) throw std::invalid_argument("class index beyond K");
      t.n_class[k] = n;
    }
    for (const auto& [k, n] : counts_from_json(j.at("n_correct"))) {
      if (k >= num_classes) throw std::invalid_argument("class index beyond K");
      t.n_correct[k] = n;
    }
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("malformed tally: ") + e.what());
  }
  return t;
}

// ---------------------------------------------------------------------------

fs::path DatasetLayout::resolve(const std::string& p) const {
  const fs::path path(p);
  return path.is_absolute() ? path : root / path;
}

void DatasetLayout::normalize() {
  // Ids become output file names.
  for (const auto& e : entries)
    if (e.id.empty() || e.id == "." || e.id == ".." || e.id.find_first_of("/\\") != std::string::npos)
      throw Error(ErrorCode::ConfigError, "image id '" + e.id + "' is not usable as a file name");
  std::sort(entries.begin(), entries.end(), [](const LayoutEntry& a, const LayoutEntry& b) { return a.id < b.id; });
  auto dup = std::adjacent_find(entries.begin(), entries.end(),
                                [](const LayoutEntry& a, const LayoutEntry& b) { return a.id == b.id; });
  if (dup != entries.end()) throw Error(ErrorCode::DuplicateId, "layout lists id '" + dup->id + "' twice");
}

DatasetLayout load_layout(const fs::path& path) {
  const nlohmann::json doc = read_json(path);
  DatasetLayout layout;
  try {
    fs::path root(doc.value("root", "."));
    layout.root = root.is_absolute() ? root : path.parent_path() / root;
    layout.mapping_path = doc.value("mapping", "");
    if (!layout.mapping_path.empty()) {
      layout.mapping = load_class_mapping(layout.resolve(layout.mapping_path));
      layout.num_classes = layout.mapping->num_classes;
    }
    if (doc.contains("num_classes")) {
      const auto k = doc["num_classes"].get<std::size_t>();
      if (layout.mapping && k != layout.num_classes)
        throw Error(ErrorCode::ConfigError, "layout num_classes disagrees with its mapping");
      layout.num_classes = k;
    }
    if (layout.num_classes == 0 || layout.num_classes > kMaxClasses)
      throw Error(ErrorCode::ConfigError, "layout needs num_classes in [1, 65535] or a mapping");
    for (const auto& e : doc.at("entries")) {
      LayoutEntry entry;
      entry.id = e.at("id").get<std::string>();
      entry.gt = e.at("gt").get<std::string>();
      const auto& pred = e.at("pred");
      if (pred.is_string()) {
        entry.pred.volume = pred.get<std::string>();
      } else {
        entry.pred.argmax = pred.at("argmax").get<std::string>();
        entry.pred.confidence = pred.at("confidence").get<std::string>();
      }
      if (entry.id.empty()) throw Error(ErrorCode::ConfigError, "layout entry with empty id");
      layout.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": malformed layout: " + e.what());
  }
  layout.normalize();
  return layout;
}

nlohmann::ordered_json layout_to_json(const DatasetLayout& layout) {
  nlohmann::ordered_json doc;
  doc["root"] = layout.root.string();
  doc["num_classes"] = layout.num_classes;
  if (!layout.mapping_path.empty()) doc["mapping"] = layout.mapping_path;
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& e : layout.entries) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["gt"] = e.gt;
    if (e.pred.compact())
      j["pred"] = {{"argmax", e.pred.argmax}, {"confidence", e.pred.confidence}};
    else
      j["pred"] = e.pred.volume;
    entries.push_back(std::move(j));
  }
  doc["entries"] = std::move(entries);
  return doc;
}

void save_layout(const DatasetLayout& layout, const fs::path& path) {
  write_text(path, layout_to_json(layout).dump(2) + "\n");
}

std::vector<fs::path> missing_files(const DatasetLayout& layout) {
  std::vector<fs::path> missing;
  auto check = [&](const std::string& p) {
    const auto full = layout.resolve(p);
    std::error_code ec;
    if (!fs::is_regular_file(full, ec)) missing.push_back(full);
  };
  for (const auto& e : layout.entries) {
    check(e.gt);
    if (e.pred.compact()) {
      check(e.pred.argmax);
      check(e.pred.confidence);
    } else {
      check(e.pred.volume);
    }
  }
  return missing;
}

LabelMap load_gt(const DatasetLayout& layout, const LayoutEntry& entry) {
  if (layout.mapping) return remap_labels(load_raw_label_png(layout.resolve(entry.gt)), *layout.mapping);
  return load_label_png(layout.resolve(entry.gt), layout.num_classes);
}

Prediction load_prediction(const DatasetLayout& layout, const LayoutEntry& entry) {
  if (entry.pred.compact())
    return load_conf_pair(layout.resolve(entry.pred.argmax), layout.resolve(entry.pred.confidence), layout.num_classes);
  ProbVolume v = load_prob_volume(layout.resolve(entry.pred.volume));
  if (v.num_classes() != layout.num_classes)
    throw Error(ErrorCode::ClassCountMismatch, entry.pred.volume + " has K=" + std::to_string(v.num_classes()) +
                                                   ", layout declares " + std::to_string(layout.num_classes));
  return v;
}

DatasetItem load_entry(const DatasetLayout& layout, std::size_t index) {
  const LayoutEntry& entry = layout.entries.at(index);
  DatasetItem item{entry.id, load_gt(layout, entry), load_prediction(layout, entry)};
  const bool same = std::visit(
      [&](const auto& p) {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, ProbVolume>)
          return p.width() == item.gt.width() && p.height() == item.gt.height();
        else
          return p.argmax.same_shape(item.gt);
      },
      item.pred);
  if (!same) throw Error(ErrorCode::DimensionMismatch, "prediction and GT of '" + entry.id + "' differ in size");
  return item;
}

LabelMap pseudo_label(const Prediction& pred, double tau_ssl) {
  return std::visit(
      [tau_ssl](const auto& p) -> LabelMap {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, ProbVolume>)
          return pseudo_label(p, tau_ssl);
        else
          return pseudo_label_compact(p, tau_ssl);
      },
      pred);
}

DatasetStream::DatasetStream(const DatasetLayout& layout, bool strict) : layout_(&layout), strict_(strict) {}

std::optional<DatasetStream::Item> DatasetStream::next() {
  if (index_ >= layout_->entries.size()) return std::nullopt;
  const std::size_t i = index_++;
  try {
    return Item{load_entry(*layout_, i)};
  } catch (const Error& e) {
    if (strict_)
      throw Error(ErrorCode::StrictAbort, "entry '" + layout_->entries[i].id + "': " + std::string(e.what()));
    return Item{LoadFailure{layout_->entries[i].id, e.what()}};
  }
}

std::vector<DatasetStream::Item> stream_dataset(const DatasetLayout& layout, bool strict) {
  std::vector<DatasetStream::Item> out;
  DatasetStream stream(layout, strict);
  while (auto item = stream.next()) out.push_back(std::move(*item));
  return out;
}

}  // namespace sdss

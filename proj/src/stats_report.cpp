#include "sdss/stats_report.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "sdss/dataset_io.hpp"

namespace sdss {

std::vector<std::int64_t> class_histogram(std::span<const LabelMap> maps) {
  if (maps.empty()) return {};
  std::vector<std::int64_t> hist(maps.front().num_classes(), 0);
  for (const auto& m : maps) accumulate_histogram(hist, m);
  return hist;
}

void accumulate_histogram(std::vector<std::int64_t>& hist, const LabelMap& map) {
  if (map.num_classes() != hist.size())
    throw Error(ErrorCode::ClassCountMismatch, "map has K=" + std::to_string(map.num_classes()) +
                                                   ", histogram has " + std::to_string(hist.size()));
  for (Label v : map.data())
    if (!is_ignore(v) && v < hist.size()) ++hist[v];
}

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : k_(num_classes), counts_(num_classes * (num_classes + 1), 0) {}

void ConfusionMatrix::add(const LabelMap& pred, const LabelMap& gt) {
  if (!pred.same_shape(gt)) throw Error(ErrorCode::DimensionMismatch, "prediction and GT shapes differ");
  if (gt.num_classes() != k_ || pred.num_classes() != k_)
    throw Error(ErrorCode::ClassCountMismatch, "maps do not match the matrix class count");
  const std::size_t stride = k_ + 1;
  for (std::size_t p = 0; p < gt.size(); ++p) {
    const Label g = gt[p];
    if (is_ignore(g) || g >= k_) continue;
    const Label q = pred[p];
    const std::size_t col = (is_ignore(q) || q >= k_) ? k_ : q;
    ++counts_[g * stride + col];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw Error(ErrorCode::ClassCountMismatch, "cannot merge matrices of different K");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::int64_t ConfusionMatrix::row_sum(std::size_t gt) const {
  std::int64_t s = 0;
  for (std::size_t c = 0; c <= k_; ++c) s += at(gt, c);
  return s;
}

std::int64_t ConfusionMatrix::col_sum(std::size_t pred) const {
  std::int64_t s = 0;
  for (std::size_t r = 0; r < k_; ++r) s += at(r, pred);
  return s;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& gt, ConfusionMatrix acc) {
  acc.add(pred, gt);
  return acc;
}

IouResult miou(const ConfusionMatrix& cm, std::span<const std::size_t> eval_classes) {
  const std::size_t k_count = cm.num_classes();
  IouResult out;
  out.per_class.resize(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    const std::int64_t tp = cm.at(k, k);
    // row_sum includes the unlabeled column: those pixels are misses of k.
    const std::int64_t denom = cm.row_sum(k) + cm.col_sum(k) - tp;
    if (denom > 0) out.per_class[k] = static_cast<double>(tp) / static_cast<double>(denom);
  }
  double sum = 0.0;
  std::size_t n = 0;
  auto take = [&](std::size_t k) {
    if (k < k_count && out.per_class[k]) {
      sum += *out.per_class[k];
      ++n;
    }
  };
  if (eval_classes.empty()) {
    for (std::size_t k = 0; k < k_count; ++k) take(k);
  } else {
    for (std::size_t k : eval_classes) take(k);
  }
  if (n > 0) out.mean = sum / static_cast<double>(n);
  return out;
}

// ---------------------------------------------------------------------------

Table histogram_table(std::span<const std::int64_t> hist) {
  Table t;
  t.columns = {"class", "pixels"};
  for (std::size_t k = 0; k < hist.size(); ++k)
    t.rows.push_back({Cell{static_cast<std::int64_t>(k)}, Cell{hist[k]}});
  return t;
}

Table iou_table(const IouResult& result) {
  Table t;
  t.columns = {"class", "iou"};
  for (std::size_t k = 0; k < result.per_class.size(); ++k) {
    if (!result.per_class[k]) continue;
    t.rows.push_back({Cell{static_cast<std::int64_t>(k)}, Cell{*result.per_class[k]}});
  }
  return t;
}

Table subset_table(const SubsetReport& report) {
  Table t;
  t.columns = {"metric", "value"};
  t.rows.push_back({Cell{std::string("count")}, Cell{static_cast<std::int64_t>(report.count)}});
  t.rows.push_back({Cell{std::string("total_pixels")}, Cell{report.total_pixels}});
  if (report.quantiles) {
    const auto& q = *report.quantiles;
    t.rows.push_back({Cell{std::string("score_min")}, Cell{q.min}});
    t.rows.push_back({Cell{std::string("score_q25")}, Cell{q.q25}});
    t.rows.push_back({Cell{std::string("score_median")}, Cell{q.median}});
    t.rows.push_back({Cell{std::string("score_q75")}, Cell{q.q75}});
    t.rows.push_back({Cell{std::string("score_max")}, Cell{q.max}});
    t.rows.push_back({Cell{std::string("score_mean")}, Cell{q.mean}});
  }
  for (const auto& [k, n] : report.class_pixels)
    t.rows.push_back({Cell{"class_" + std::to_string(k) + "_pixels"}, Cell{n}});
  for (const auto& [k, n] : report.correct_pixels)
    t.rows.push_back({Cell{"class_" + std::to_string(k) + "_correct"}, Cell{n}});
  return t;
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_cell(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&c)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", *d);
    std::string s = buf;
    // Keep floats distinguishable from integers on re-read.
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  }
  return csv_escape(std::get<std::string>(c));
}

Cell parse_cell(const std::string& s, bool quoted) {
  if (!quoted && !s.empty()) {
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), i);
    if (ec == std::errc() && p == s.data() + s.size()) return i;
    double d = 0.0;
    auto [q, ec2] = std::from_chars(s.data(), s.data() + s.size(), d);
    if (ec2 == std::errc() && q == s.data() + s.size()) return d;
  }
  return s;
}

std::vector<std::pair<std::string, bool>> split_csv_line(const std::string& line) {
  std::vector<std::pair<std::string, bool>> fields;
  std::string cur;
  bool quoted = false, in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        in_quotes = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      in_quotes = quoted = true;
    } else if (c == ',') {
      fields.emplace_back(std::move(cur), quoted);
      cur.clear();
      quoted = false;
    } else {
      cur += c;
    }
  }
  fields.emplace_back(std::move(cur), quoted);
  return fields;
}

nlohmann::ordered_json cell_json(const Cell& c) {
  return std::visit([](const auto& v) { return nlohmann::ordered_json(v); }, c);
}

}  // namespace

std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + csv_escape(t.columns[i]);
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_cell(row[i]);
    out += '\n';
  }
  return out;
}

std::string to_json(const Table& t) {
  nlohmann::ordered_json j;
  j["config"] = t.config;
  j["columns"] = t.columns;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    nlohmann::ordered_json r = nlohmann::ordered_json::array();
    for (const auto& c : row) r.push_back(cell_json(c));
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

Table table_from_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (header) {
      for (auto& [f, q] : fields) t.columns.push_back(std::move(f));
      header = false;
      continue;
    }
    std::vector<Cell> row;
    for (auto& [f, q] : fields) row.push_back(parse_cell(f, q));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table table_from_json(const std::string& text) {
  Table t;
  try {
    const auto j = nlohmann::ordered_json::parse(text);
    if (j.contains("config")) t.config = j["config"];
    t.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows")) {
      std::vector<Cell> row;
      for (const auto& c : r) {
        if (c.is_number_integer())
          row.emplace_back(c.get<std::int64_t>());
        else if (c.is_number())
          row.emplace_back(c.get<double>());
        else
          row.emplace_back(c.get<std::string>());
      }
      t.rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("malformed report: ") + e.what());
  }
  return t;
}

void export_report(const Table& t, ReportFormat format, const std::filesystem::path& path) {
  if (format == ReportFormat::Json) {
    write_text(path, to_json(t));
    return;
  }
  write_text(path, to_csv(t));
  write_text(path.string() + ".config.json", t.config.dump(2) + "\n");
}

}  // namespace sdss

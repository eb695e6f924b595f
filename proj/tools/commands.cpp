#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sdss/dataset_io.hpp"
#include "sdss/image_scorer.hpp"
#include "sdss/oracle.hpp"
#include "sdss/pixel_sampler.hpp"
#include "sdss/selector.hpp"
#include "sdss/sim.hpp"
#include "sdss/stats_report.hpp"
#include "sdss/version.hpp"
#include "worker_pool.hpp"

namespace sdss::cli {
namespace {

using json = nlohmann::ordered_json;

struct EntryError {
  std::string id;
  std::string message;
};

// A mapping named in the layout wins over the one named in the config.
DatasetLayout open_layout(const CommonOptions& opts, const SamplingConfig& cfg) {
  if (opts.layout.empty()) throw Error(ErrorCode::ConfigError, "--layout is required");
  try {
    DatasetLayout layout = load_layout(opts.layout);
    if (!layout.mapping && !cfg.class_mapping.empty()) {
      layout.mapping = load_class_mapping(cfg.class_mapping);
      if (layout.mapping->num_classes != layout.num_classes)
        throw Error(ErrorCode::ConfigError, "mapping " + cfg.class_mapping + " declares " +
                                                std::to_string(layout.mapping->num_classes) + " classes, layout has " +
                                                std::to_string(layout.num_classes));
    }
    return layout;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw Error(ErrorCode::ConfigError, e.detail());
    throw;
  }
}

void require_out(const CommonOptions& opts) {
  if (opts.out.empty()) throw Error(ErrorCode::ConfigError, "--out is required");
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

void make_parent(const fs::path& file) {
  if (file.has_parent_path()) make_dir(file.parent_path());
}

json provenance_header(const std::string& command, const SamplingConfig& cfg) {
  const Provenance p = Provenance::capture(cfg);
  json j;
  j["command"] = command;
  j["tool_version"] = p.tool_version;
  j["created"] = p.created;
  j["config"] = p.config;
  return j;
}

json errors_json(const std::vector<std::optional<EntryError>>& errors) {
  json arr = json::array();
  for (const auto& e : errors)
    if (e) arr.push_back({{"id", e->id}, {"message", e->message}});
  return arr;
}

// Reports per-entry failures; in strict mode any failure is a data error.
int finish(const std::string& command, const std::vector<std::optional<EntryError>>& errors, bool strict) {
  std::size_t n = 0;
  for (const auto& e : errors) {
    if (!e) continue;
    ++n;
    std::cerr << command << ": " << e->id << ": " << e->message << '\n';
  }
  if (n == 0) return kExitOk;
  if (strict) {
    std::cerr << command << ": " << n << " entr" << (n == 1 ? "y" : "ies") << " failed (strict)\n";
    return kExitData;
  }
  std::cerr << command << ": " << n << " entr" << (n == 1 ? "y" : "ies") << " skipped\n";
  return kExitOk;
}

std::string label_file(const std::string& dir, const std::string& id) { return (fs::path(dir) / (id + ".png")).string(); }

// Keeps manifests independent of where the output tree lives.
std::string relative_to(const fs::path& p, const fs::path& base) {
  return fs::absolute(p).lexically_normal().lexically_relative(base.lexically_normal()).generic_string();
}

std::string prediction_path(const LayoutEntry& e) { return e.pred.compact() ? e.pred.argmax : e.pred.volume; }

}  // namespace

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    std::cerr << "error: " << err->what() << '\n';
    switch (err->code()) {
      case ErrorCode::ConfigError:
      case ErrorCode::InvalidArgument:
      case ErrorCode::InvalidPercent:
        return kExitUsage;
      default:
        return kExitData;
    }
  }
  if (dynamic_cast<const InternalError*>(&e) != nullptr) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  std::cerr << "internal error: " << e.what() << '\n';
  return kExitInternal;
}

SamplingConfig effective_config(const CommonOptions& opts, const nlohmann::json* inherited) {
  SamplingConfig cfg;
  if (inherited != nullptr && inherited->is_object()) {
    // Keys the manifest header may carry beyond the sampling fields are ignored.
    nlohmann::json known = nlohmann::json::object();
    for (const char* key : {"tau_ssl", "tau_c", "top_percent", "ignore_in_total", "class_balance", "class_mapping", "seed"})
      if (inherited->contains(key)) known[key] = (*inherited)[key];
    cfg = SamplingConfig::from_json(known, cfg);
  }
  if (!opts.config.empty()) {
    nlohmann::json doc;
    try {
      doc = read_json(opts.config);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, e.detail());
    }
    if (doc.contains("tau_c") || doc.contains("top_percent")) cfg.selection = ThresholdSelection{};
    cfg = SamplingConfig::from_json(doc, cfg);
  }
  if (opts.tau_ssl) cfg.tau_ssl = *opts.tau_ssl;
  if (opts.tau_c) cfg.selection = ThresholdSelection{*opts.tau_c};
  if (opts.top_percent) cfg.selection = TopPercentSelection{*opts.top_percent};
  if (opts.ignore_in_total) cfg.ignore_in_total = *opts.ignore_in_total;
  if (opts.class_balance) cfg.class_balance = *opts.class_balance;
  if (opts.seed) cfg.seed = *opts.seed;
  cfg.check();
  return cfg;
}

// ---------------------------------------------------------------------------

int cmd_pseudo_label(const CommonOptions& opts) {
  const SamplingConfig cfg = effective_config(opts);
  const DatasetLayout layout = open_layout(opts, cfg);
  require_out(opts);
  make_dir(opts.out);

  const std::size_t n = layout.entries.size();
  std::vector<std::optional<double>> fractions(n);
  std::vector<std::optional<EntryError>> errors(n);
  Progress progress("pseudo-label", n, opts.quiet);
  parallel_for(
      n, opts.jobs,
      [&](std::size_t i) {
        const auto& entry = layout.entries[i];
        try {
          const LabelMap pseudo = pseudo_label(load_prediction(layout, entry), cfg.tau_ssl);
          save_label_png(pseudo, label_file(opts.out, entry.id));
          const auto labeled = std::count_if(pseudo.data().begin(), pseudo.data().end(), [](Label l) { return !is_ignore(l); });
          fractions[i] = pseudo.size() ? static_cast<double>(labeled) / static_cast<double>(pseudo.size()) : 0.0;
        } catch (const Error& e) {
          errors[i] = EntryError{entry.id, e.what()};
        }
      },
      &progress);

  json summary = provenance_header("pseudo-label", cfg);
  json entries = json::array();
  for (std::size_t i = 0; i < n; ++i)
    if (fractions[i]) entries.push_back({{"id", layout.entries[i].id}, {"labeled_fraction", *fractions[i]}});
  summary["count"] = entries.size();
  summary["entries"] = std::move(entries);
  summary["errors"] = errors_json(errors);
  write_text(fs::path(opts.out) / "summary.json", summary.dump(2) + "\n");
  return finish("pseudo-label", errors, opts.strict);
}

int cmd_refine(const CommonOptions& opts, const std::string& pseudo_dir) {
  const SamplingConfig cfg = effective_config(opts);
  const DatasetLayout layout = open_layout(opts, cfg);
  require_out(opts);
  if (pseudo_dir.empty()) throw Error(ErrorCode::ConfigError, "--pseudo is required");
  make_dir(opts.out);

  const std::size_t n = layout.entries.size();
  std::vector<std::optional<ClassTally>> tallies(n);
  std::vector<std::optional<EntryError>> errors(n);
  Progress progress("refine", n, opts.quiet);
  parallel_for(
      n, opts.jobs,
      [&](std::size_t i) {
        const auto& entry = layout.entries[i];
        try {
          const LabelMap gt = load_gt(layout, entry);
          const LabelMap pseudo = load_label_png(label_file(pseudo_dir, entry.id), layout.num_classes);
          const LabelMap refined = refine(pseudo, gt);
          ClassTally t = tally(refined, gt);
          if (!t.consistent()) throw InternalError("tally invariants violated for '" + entry.id + "'");
          save_label_png(refined, label_file(opts.out, entry.id));
          write_text(fs::path(opts.out) / (entry.id + ".json"), tally_to_json(entry.id, t).dump() + "\n");
          tallies[i] = std::move(t);
        } catch (const Error& e) {
          errors[i] = EntryError{entry.id, e.what()};
        }
      },
      &progress);

  json summary = provenance_header("refine", cfg);
  json entries = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    if (!tallies[i]) continue;
    const auto& t = *tallies[i];
    std::int64_t kept = 0;
    for (auto c : t.n_correct) kept += c;
    entries.push_back({{"id", layout.entries[i].id},
                       {"refined_fraction", t.n_image ? static_cast<double>(kept) / static_cast<double>(t.n_image) : 0.0}});
  }
  summary["count"] = entries.size();
  summary["entries"] = std::move(entries);
  summary["errors"] = errors_json(errors);
  write_text(fs::path(opts.out) / "summary.json", summary.dump(2) + "\n");
  return finish("refine", errors, opts.strict);
}

int cmd_score(const CommonOptions& opts, const ScoreOptions& score_opts) {
  const SamplingConfig cfg = effective_config(opts);
  const DatasetLayout layout = open_layout(opts, cfg);
  require_out(opts);
  if (score_opts.refined_dir.empty()) throw Error(ErrorCode::ConfigError, "--refined is required");
  if (!(score_opts.audit_fraction > 0.0 && score_opts.audit_fraction <= 1.0))
    throw Error(ErrorCode::ConfigError, "--audit-fraction must lie in (0, 1]");

  const fs::path manifest_dir = fs::absolute(fs::path(opts.out)).parent_path();
  const std::size_t n = layout.entries.size();
  const sdss::ScoreOptions sopts = sdss::ScoreOptions::from(cfg);

  std::vector<bool> audited(n, false);
  if (score_opts.audit && n > 0) {
    const auto want = std::min<std::size_t>(n, std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(score_opts.audit_fraction * static_cast<double>(n)))));
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(cfg.seed);
    for (std::size_t i = 0; i < want; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    for (std::size_t i = 0; i < want; ++i) audited[idx[i]] = true;
  }

  std::vector<std::optional<ScoredRecord>> records(n);
  std::vector<std::optional<EntryError>> errors(n);
  std::vector<double> audit_diff(n, 0.0);
  Progress progress("score", n, opts.quiet);
  parallel_for(
      n, opts.jobs,
      [&](std::size_t i) {
        const auto& entry = layout.entries[i];
        try {
          const LabelMap gt = load_gt(layout, entry);
          const std::string refined_path = label_file(score_opts.refined_dir, entry.id);
          const LabelMap refined = load_label_png(refined_path, layout.num_classes);
          const ImageScore s = score_image(refined, gt, entry.id, sopts);
          if (!s.tally.consistent()) throw InternalError("tally invariants violated for '" + entry.id + "'");
          if (audited[i]) {
            const double reference = oracle_score(refined, gt, {cfg.ignore_in_total, cfg.class_balance});
            audit_diff[i] = std::abs(reference - s.score);
            if (audit_diff[i] > 1e-12)
              throw InternalError("audit: score of '" + entry.id + "' differs from the reference by " +
                                  std::to_string(audit_diff[i]));
          }
          records[i] = ScoredRecord::from(
              s, {{"gt", entry.gt}, {"pred", prediction_path(entry)}, {"refined", relative_to(refined_path, manifest_dir)}});
        } catch (const Error& e) {
          errors[i] = EntryError{entry.id, e.what()};
        }
      },
      &progress);

  std::vector<ScoredRecord> kept;
  for (auto& r : records)
    if (r) kept.push_back(std::move(*r));
  Provenance prov = Provenance::capture(cfg);
  prov.config["score_input"] = "refined";
  const Manifest m = make_manifest(std::move(kept), std::move(prov));
  make_parent(opts.out);
  write_manifest(m, fs::path(opts.out));
  if (score_opts.audit) {
    const auto count = std::count(audited.begin(), audited.end(), true);
    std::cerr << "score: audited " << count << " entries against the reference scorer, max |diff| = "
              << (audit_diff.empty() ? 0.0 : *std::max_element(audit_diff.begin(), audit_diff.end())) << '\n';
  }
  return finish("score", errors, opts.strict);
}

int cmd_select(const CommonOptions& opts, const std::string& manifest_path) {
  if (manifest_path.empty()) throw Error(ErrorCode::ConfigError, "--manifest is required");
  require_out(opts);
  const Manifest in = read_manifest(fs::path(manifest_path));
  const nlohmann::json inherited = in.provenance.config;
  const SamplingConfig cfg = effective_config(opts, &inherited);
  Provenance prov = Provenance::capture(cfg);
  if (in.provenance.config.contains("score_input")) prov.config["score_input"] = in.provenance.config["score_input"];
  const Manifest out = select(in.records, cfg.selection, std::move(prov));
  make_parent(opts.out);
  write_manifest(out, fs::path(opts.out));
  std::cout << out.records.size() << " of " << in.records.size() << " records selected\n";
  return kExitOk;
}

int cmd_stats(const CommonOptions& opts, const StatsOptions& st) {
  const SamplingConfig cfg = effective_config(opts);
  require_out(opts);
  if (st.format != "csv" && st.format != "json") throw Error(ErrorCode::ConfigError, "--format must be csv or json");
  if (st.manifest.empty() && opts.layout.empty())
    throw Error(ErrorCode::ConfigError, "stats needs --manifest and/or --layout");
  const ReportFormat fmt = st.format == "csv" ? ReportFormat::Csv : ReportFormat::Json;
  make_dir(opts.out);

  std::optional<Manifest> manifest;
  if (!st.manifest.empty()) manifest = read_manifest(fs::path(st.manifest));

  std::vector<std::int64_t> hist;
  std::vector<std::optional<EntryError>> errors;
  if (!opts.layout.empty()) {
    const DatasetLayout layout = open_layout(opts, cfg);
    std::vector<std::size_t> chosen;
    if (manifest) {
      std::map<std::string, std::size_t> by_id;
      for (std::size_t i = 0; i < layout.entries.size(); ++i) by_id.emplace(layout.entries[i].id, i);
      for (const auto& r : manifest->records) {
        auto it = by_id.find(r.image_id);
        if (it == by_id.end()) throw Error(ErrorCode::LoadError, "manifest id '" + r.image_id + "' is not in the layout");
        chosen.push_back(it->second);
      }
      std::sort(chosen.begin(), chosen.end());
    } else {
      for (std::size_t i = 0; i < layout.entries.size(); ++i) chosen.push_back(i);
    }
    std::vector<std::vector<std::int64_t>> partial(chosen.size());
    errors.resize(chosen.size());
    Progress progress("stats", chosen.size(), opts.quiet);
    parallel_for(
        chosen.size(), opts.jobs,
        [&](std::size_t j) {
          const auto& entry = layout.entries[chosen[j]];
          try {
            const LabelMap m = st.labels_dir.empty() ? load_gt(layout, entry)
                                                     : load_label_png(label_file(st.labels_dir, entry.id), layout.num_classes);
            partial[j].assign(layout.num_classes, 0);
            accumulate_histogram(partial[j], m);
          } catch (const Error& e) {
            errors[j] = EntryError{entry.id, e.what()};
          }
        },
        &progress);
    hist.assign(layout.num_classes, 0);
    for (const auto& p : partial)
      for (std::size_t k = 0; k < p.size(); ++k) hist[k] += p[k];
  } else {
    const SubsetReport rep = subset_stats(*manifest);
    Label top = 0;
    for (const auto& [k, n] : rep.class_pixels) top = std::max<Label>(top, static_cast<Label>(k + 1));
    hist.assign(top, 0);
    for (const auto& [k, n] : rep.class_pixels) hist[k] = n;
  }

  const std::string ext = fmt == ReportFormat::Csv ? ".csv" : ".json";
  Table ht = histogram_table(hist);
  ht.config = provenance_header("stats", cfg);
  export_report(ht, fmt, fs::path(opts.out) / ("histogram" + ext));
  if (manifest) {
    Table subset = subset_table(subset_stats(*manifest));
    subset.config = provenance_header("stats", cfg);
    export_report(subset, fmt, fs::path(opts.out) / ("subset" + ext));
  }
  if (!st.plot_data.empty()) {
    make_parent(st.plot_data);
    Table series = histogram_table(hist);
    series.columns = {"class", "count"};
    write_text(st.plot_data, to_csv(series));
  }
  return finish("stats", errors, opts.strict);
}

namespace {

// Lines of "<iteration> <miou>" separated by comma or whitespace; other lines are skipped.
Table read_training_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open training log " + path);
  Table t;
  t.columns = {"iteration", "miou"};
  std::string line;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    std::int64_t it = 0;
    double value = 0.0;
    if (fields >> it >> value) t.rows.push_back({Cell{it}, Cell{value}});
  }
  return t;
}

}  // namespace

int cmd_eval(const CommonOptions& opts, const EvalOptions& ev) {
  const SamplingConfig cfg = effective_config(opts);
  if (ev.format != "csv" && ev.format != "json") throw Error(ErrorCode::ConfigError, "--format must be csv or json");
  if (!ev.training_log.empty()) {
    const Table series = read_training_log(ev.training_log);
    if (!ev.plot_data.empty()) {
      make_parent(ev.plot_data);
      write_text(ev.plot_data, to_csv(series));
    }
    if (opts.layout.empty()) return kExitOk;
  }
  const DatasetLayout layout = open_layout(opts, cfg);
  require_out(opts);

  const std::size_t n = layout.entries.size();
  std::vector<std::optional<ConfusionMatrix>> partial(n);
  std::vector<std::optional<EntryError>> errors(n);
  Progress progress("eval", n, opts.quiet);
  parallel_for(
      n, opts.jobs,
      [&](std::size_t i) {
        const auto& entry = layout.entries[i];
        try {
          const LabelMap gt = load_gt(layout, entry);
          const LabelMap pred = ev.predictions_dir.empty()
                                    ? pseudo_label(load_prediction(layout, entry), cfg.tau_ssl)
                                    : load_label_png(label_file(ev.predictions_dir, entry.id), layout.num_classes);
          partial[i] = confusion(pred, gt, ConfusionMatrix(layout.num_classes));
        } catch (const Error& e) {
          errors[i] = EntryError{entry.id, e.what()};
        }
      },
      &progress);
  ConfusionMatrix cm(layout.num_classes);
  for (const auto& p : partial)
    if (p) cm.merge(*p);
  for (std::size_t k : ev.eval_classes)
    if (k >= layout.num_classes) throw Error(ErrorCode::ConfigError, "eval class " + std::to_string(k) + " is not below K");
  const IouResult iou = miou(cm, ev.eval_classes);

  make_parent(opts.out);
  if (ev.format == "csv") {
    Table t = iou_table(iou);
    t.config = provenance_header("eval", cfg);
    export_report(t, ReportFormat::Csv, opts.out);
  } else {
    json report = provenance_header("eval", cfg);
    json per_class = json::array();
    for (const auto& v : iou.per_class) per_class.push_back(v ? json(*v) : json(nullptr));
    report["eval_classes"] = ev.eval_classes;
    report["iou"] = std::move(per_class);
    report["miou"] = iou.mean ? json(*iou.mean) : json(nullptr);
    json rows = json::array();
    for (std::size_t g = 0; g < cm.num_classes(); ++g) {
      json row = json::array();
      for (std::size_t p = 0; p <= cm.num_classes(); ++p) row.push_back(cm.at(g, p));
      rows.push_back(std::move(row));
    }
    report["confusion"] = std::move(rows);
    write_text(opts.out, report.dump(2) + "\n");
  }
  if (iou.mean) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", *iou.mean);
    std::cout << "mIoU " << buf << '\n';
  } else {
    std::cout << "mIoU undefined\n";
  }
  return finish("eval", errors, opts.strict);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::string image_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%06zu", i);
  return buf;
}

}  // namespace

int cmd_simulate(const CommonOptions& opts, const SimulateOptions& sim) {
  require_out(opts);
  const std::uint64_t seed = opts.seed.value_or(0);
  const std::size_t k_count = sim.num_classes;
  const std::size_t max_classes = sim.max_classes == 0 ? k_count : sim.max_classes;
  if (k_count == 0 || k_count > kMaxClasses) throw Error(ErrorCode::ConfigError, "--num-classes out of range");
  if (sim.min_classes == 0 || sim.min_classes > max_classes || max_classes > k_count)
    throw Error(ErrorCode::ConfigError, "need 1 <= --min-classes <= --max-classes <= --num-classes");
  if (!(sim.accuracy >= 0.0 && sim.accuracy <= 1.0)) throw Error(ErrorCode::ConfigError, "--accuracy outside [0,1]");
  if (!(sim.ignore_fraction >= 0.0 && sim.ignore_fraction < 1.0))
    throw Error(ErrorCode::ConfigError, "--ignore-fraction outside [0,1)");
  if (sim.width == 0 || sim.height == 0) throw Error(ErrorCode::ConfigError, "image size must be positive");

  const fs::path root(opts.out);
  make_dir(root / "gt");
  make_dir(root / "pred");

  DatasetLayout layout;
  layout.root = ".";
  layout.num_classes = k_count;
  layout.entries.resize(sim.count);

  Progress progress("simulate", sim.count, opts.quiet);
  parallel_for(
      sim.count, opts.jobs,
      [&](std::size_t i) {
        const std::uint64_t image_seed = splitmix64(seed ^ splitmix64(i));
        Rng rng(image_seed);
        const std::size_t present = sim.min_classes + rng.below(max_classes - sim.min_classes + 1);
        std::vector<std::size_t> classes(k_count);
        for (std::size_t k = 0; k < k_count; ++k) classes[k] = k;
        for (std::size_t j = 0; j < present; ++j) std::swap(classes[j], classes[j + rng.below(k_count - j)]);

        SceneSpec scene;
        scene.width = sim.width;
        scene.height = sim.height;
        scene.num_classes = k_count;
        scene.area_fractions.assign(k_count, 0.0);
        std::vector<double> weights(present);
        double total = 0.0;
        for (auto& w : weights) total += (w = rng.uniform(0.5, 1.5));
        for (std::size_t j = 0; j < present; ++j)
          scene.area_fractions[classes[j]] = weights[j] / total * (1.0 - sim.ignore_fraction);
        scene.ignore_fraction = sim.ignore_fraction;
        // Absorb floating error so the fractions sum to one.
        double sum = scene.ignore_fraction;
        for (double f : scene.area_fractions) sum += f;
        scene.area_fractions[classes[0]] += 1.0 - sum;
        scene.blob_size = std::max<std::size_t>(1, sim.width * sim.height / (4 * present));
        scene.seed = rng.next();

        PredictorSpec predictor = PredictorSpec::uniform(k_count, sim.perfect ? 1.0 : sim.accuracy, rng.next());
        if (sim.perfect) predictor.correct_confidence = {1.0, 1.0};
        else predictor.wrong_confidence = {0.05, 0.9};

        const LabelMap gt = gen_label_map(scene);
        const ProbVolume pred = mock_predict(gt, predictor);

        LayoutEntry& entry = layout.entries[i];
        entry.id = image_id(i);
        entry.gt = "gt/" + entry.id + ".png";
        save_label_png(gt, root / entry.gt);
        if (sim.compact) {
          entry.pred.argmax = "pred/" + entry.id + "_argmax.png";
          entry.pred.confidence = "pred/" + entry.id + "_conf.prb";
          save_conf_pair(compress(pred), root / entry.pred.argmax, root / entry.pred.confidence);
        } else {
          entry.pred.volume = "pred/" + entry.id + ".prb";
          save_prob_volume(pred, root / entry.pred.volume);
        }
      },
      &progress);

  save_layout(layout, root / "layout.json");
  json meta;
  meta["generator"] = "sdss simulate";
  meta["tool_version"] = std::string(kToolVersion);
  meta["rng"] = std::string(Rng::kAlgorithm);
  meta["seed"] = seed;
  meta["count"] = sim.count;
  meta["width"] = sim.width;
  meta["height"] = sim.height;
  meta["num_classes"] = k_count;
  meta["min_classes"] = sim.min_classes;
  meta["max_classes"] = max_classes;
  meta["accuracy"] = sim.perfect ? 1.0 : sim.accuracy;
  meta["ignore_fraction"] = sim.ignore_fraction;
  meta["compact"] = sim.compact;
  write_text(root / "simulate.json", meta.dump(2) + "\n");
  return kExitOk;
}

int cmd_pipeline(const CommonOptions& opts, bool dry_run, bool audit) {
  const SamplingConfig cfg = effective_config(opts);
  require_out(opts);
  if (opts.layout.empty()) throw Error(ErrorCode::ConfigError, "--layout is required");
  const fs::path root(opts.out);
  const std::string pseudo_dir = (root / "pseudo").string();
  const std::string refined_dir = (root / "refined").string();
  const std::string scored = (root / "scored.jsonl").string();
  const std::string selected = (root / "selected.jsonl").string();

  if (dry_run) {
    std::string cut;
    if (const auto* t = std::get_if<ThresholdSelection>(&cfg.selection))
      cut = "tau_c > " + json(t->tau_c).dump();
    else
      cut = "top " + json(std::get<TopPercentSelection>(cfg.selection).percent).dump() + "%";
    std::cout << "1. pseudo-label  layout=" << opts.layout << " tau_ssl=" << json(cfg.tau_ssl).dump()
              << " -> " << pseudo_dir << '\n'
              << "2. refine        pseudo=" << pseudo_dir << " -> " << refined_dir << '\n'
              << "3. score         refined=" << refined_dir << (audit ? " (audit)" : "") << " -> " << scored << '\n'
              << "4. select        " << cut << " -> " << selected << '\n';
    return kExitOk;
  }

  CommonOptions stage = opts;
  stage.out = pseudo_dir;
  if (int rc = cmd_pseudo_label(stage); rc != kExitOk) return rc;
  stage.out = refined_dir;
  if (int rc = cmd_refine(stage, pseudo_dir); rc != kExitOk) return rc;
  stage.out = scored;
  if (int rc = cmd_score(stage, ScoreOptions{refined_dir, audit, 0.01}); rc != kExitOk) return rc;
  stage.out = selected;
  return cmd_select(stage, scored);
}

}  // namespace sdss::cli

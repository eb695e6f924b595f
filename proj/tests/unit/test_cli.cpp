#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "sdss/dataset_io.hpp"
#include "sdss/oracle.hpp"
#include "sdss/stats_report.hpp"

using namespace sdss;

namespace {

struct RunResult {
  int status = -1;
  std::string out;
};

// Runs the tool with a fixed creation time; stderr is discarded unless asked for.
RunResult run(const std::string& args, bool keep_stderr = false) {
  const std::string cmd = std::string("SOURCE_DATE_EPOCH=1700000000 '") + SDSS_BIN + "' " + args +
                          (keep_stderr ? " 2>&1" : " 2>/dev/null");
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Every regular file under root, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  return files;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

void simulate(const fs::path& out, const std::string& extra = "") {
  REQUIRE(run("simulate --out " + q(out) + " --count 12 --width 24 --height 16 --num-classes 5 --seed 4 -q " + extra)
              .status == 0);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 2") {
  CHECK(run("").status == 2);
  CHECK(run("frobnicate").status == 2);
  CHECK(run("select --manifest x --out y --tau-c 0.3 --top-percent 10").status == 2);
  CHECK(run("pseudo-label --out /tmp/x --layout /nonexistent/layout.json").status == 2);
  CHECK(run("--version").status == 0);
}

TEST_CASE("pseudo-label on a simulated layout") {
  testing::TempDir dir;
  simulate(dir / "data");
  REQUIRE(run("pseudo-label --layout " + q(dir / "data/layout.json") + " --out " + q(dir / "pseudo") + " -q").status == 0);
  const auto summary = read_json(dir / "pseudo/summary.json");
  CHECK(summary["count"] == 12);
  CHECK(summary["entries"].size() == 12);
  CHECK(summary["errors"].empty());
  CHECK(summary["config"]["tau_ssl"] == 0.1);

  // tau_ssl 0 introduces no ignore pixels.
  REQUIRE(run("pseudo-label --tau-ssl 0 --layout " + q(dir / "data/layout.json") + " --out " + q(dir / "p0") + " -q")
              .status == 0);
  for (const auto& e : read_json(dir / "p0/summary.json")["entries"]) CHECK(e["labeled_fraction"] == 1.0);
}

TEST_CASE("compact predictions give the same pseudo-labels as full volumes") {
  testing::TempDir dir;
  simulate(dir / "full");
  simulate(dir / "compact", "--compact");
  REQUIRE(run("pseudo-label --layout " + q(dir / "full/layout.json") + " --out " + q(dir / "a") + " -q").status == 0);
  REQUIRE(run("pseudo-label --layout " + q(dir / "compact/layout.json") + " --out " + q(dir / "b") + " -q").status == 0);
  auto a = snapshot(dir / "a"), b = snapshot(dir / "b");
  a.erase("summary.json");
  b.erase("summary.json");
  CHECK(a == b);
}

TEST_CASE("missing prediction: skipped normally, exit 3 when strict") {
  testing::TempDir dir;
  simulate(dir / "data");
  fs::remove(dir / "data/pred/img_000003.prb");
  const std::string base = "pseudo-label --layout " + q(dir / "data/layout.json") + " -q --out ";
  CHECK(run(base + q(dir / "loose")).status == 0);
  const auto summary = read_json(dir / "loose/summary.json");
  CHECK(summary["count"] == 11);
  REQUIRE(summary["errors"].size() == 1);
  CHECK(summary["errors"][0]["id"] == "img_000003");
  CHECK(run(base + q(dir / "strict") + " --strict").status == 3);
}

TEST_CASE("refine: perfect predictions, sidecars and idempotence") {
  testing::TempDir dir;
  simulate(dir / "data", "--perfect --ignore-fraction 0.1");
  const std::string layout = q(dir / "data/layout.json");
  REQUIRE(run("pseudo-label --layout " + layout + " --out " + q(dir / "pseudo") + " -q").status == 0);
  REQUIRE(run("refine --layout " + layout + " --pseudo " + q(dir / "pseudo") + " --out " + q(dir / "r1") + " -q").status == 0);
  REQUIRE(run("refine --layout " + layout + " --pseudo " + q(dir / "pseudo") + " --out " + q(dir / "r2") + " -q").status == 0);
  CHECK(snapshot(dir / "r1") == snapshot(dir / "r2"));

  const DatasetLayout l = load_layout(dir / "data/layout.json");
  for (const auto& e : l.entries) {
    const LabelMap gt = load_gt(l, e);
    const LabelMap refined = load_label_png(dir / "r1" / (e.id + ".png"), 5);
    for (std::size_t p = 0; p < gt.size(); ++p)
      if (!is_ignore(gt[p])) CHECK(refined[p] == gt[p]);
    const ClassTally t = tally_from_json(read_json(dir / "r1" / (e.id + ".json")), 5);
    CHECK(t.consistent());
    for (std::size_t k = 0; k < 5; ++k) CHECK(t.n_correct[k] <= t.n_class[k]);
  }
}

TEST_CASE("score writes a sorted manifest matching the reference scorer") {
  testing::TempDir dir;
  simulate(dir / "data");
  const std::string layout = q(dir / "data/layout.json");
  REQUIRE(run("pseudo-label --layout " + layout + " --out " + q(dir / "pseudo") + " -q").status == 0);
  REQUIRE(run("refine --layout " + layout + " --pseudo " + q(dir / "pseudo") + " --out " + q(dir / "refined") + " -q")
              .status == 0);
  REQUIRE(run("score --audit --audit-fraction 1 --layout " + layout + " --refined " + q(dir / "refined") + " --out " +
              q(dir / "scored.jsonl") + " -q")
              .status == 0);
  const Manifest m = read_manifest(dir / "scored.jsonl");
  REQUIRE(m.records.size() == 12);
  CHECK(std::is_sorted(m.records.begin(), m.records.end(), record_before));
  CHECK(m.provenance.created == "2023-11-14T22:13:20Z");
  CHECK(m.provenance.config["score_input"] == "refined");
  const DatasetLayout l = load_layout(dir / "data/layout.json");
  for (const auto& r : m.records) {
    const auto& e = *std::find_if(l.entries.begin(), l.entries.end(), [&](const auto& x) { return x.id == r.image_id; });
    const LabelMap refined = load_label_png(dir / "refined" / (e.id + ".png"), 5);
    CHECK(std::abs(r.score - oracle_score(refined, load_gt(l, e))) <= 1e-12);
  }
}

TEST_CASE("score on an empty layout writes a header-only manifest") {
  testing::TempDir dir;
  write_text(dir / "layout.json", R"({"root":".","num_classes":3,"entries":[]})");
  fs::create_directories(dir / "refined");
  REQUIRE(run("score --layout " + q(dir / "layout.json") + " --refined " + q(dir / "refined") + " --out " +
              q(dir / "m.jsonl"))
              .status == 0);
  const std::string text = slurp(dir / "m.jsonl");
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
}

TEST_CASE("select: 24,966 records, top 10 percent, threshold and nesting") {
  testing::TempDir dir;
  std::vector<ScoredRecord> rs;
  Rng rng(3);
  char id[16];
  for (std::size_t i = 0; i < 24966; ++i) {
    std::snprintf(id, sizeof id, "s%05zu", i);
    ScoredRecord r;
    r.image_id = id;
    r.score = static_cast<double>(rng.below(4000)) / 1000.0;
    r.n_image = 100;
    rs.push_back(r);
  }
  rs[0].score = 0.3;
  write_manifest(make_manifest(rs), dir / "all.jsonl");

  REQUIRE(run("select --manifest " + q(dir / "all.jsonl") + " --top-percent 10 --out " + q(dir / "top10.jsonl")).status == 0);
  CHECK(read_manifest(dir / "top10.jsonl").records.size() == 2497);

  REQUIRE(run("select --manifest " + q(dir / "all.jsonl") + " --tau-c 0.3 --out " + q(dir / "t.jsonl")).status == 0);
  const Manifest t = read_manifest(dir / "t.jsonl");
  std::size_t expected = 0;
  for (const auto& r : rs) expected += r.score > 0.3;
  CHECK(t.records.size() == expected);
  for (const auto& r : t.records) CHECK(r.score > 0.3);

  REQUIRE(run("select --manifest " + q(dir / "all.jsonl") + " --top-percent 50 --out " + q(dir / "top50.jsonl")).status == 0);
  REQUIRE(run("select --manifest " + q(dir / "top50.jsonl") + " --top-percent 20 --out " + q(dir / "nested.jsonl")).status ==
          0);
  const Manifest nested = read_manifest(dir / "nested.jsonl");
  const Manifest top50 = read_manifest(dir / "top50.jsonl");
  CHECK(nested.records.size() == top_count(top50.records.size(), 20));
  CHECK(std::equal(nested.records.begin(), nested.records.end(), top50.records.begin()));
  CHECK(nested.provenance.config["top_percent"] == 20.0);
}

TEST_CASE("flags override the config file, which overrides the manifest") {
  testing::TempDir dir;
  ScoredRecord a, b;
  a.image_id = "a";
  a.score = 0.5;
  b.image_id = "b";
  b.score = 0.9;
  Provenance p;
  p.config = SamplingConfig{}.to_json();
  write_manifest(make_manifest({a, b}, p), dir / "m.jsonl");
  write_text(dir / "cfg.json", R"({"tau_c": 0.6, "tau_ssl": 0.2})");
  REQUIRE(run("select --manifest " + q(dir / "m.jsonl") + " --config " + q(dir / "cfg.json") + " --out " + q(dir / "o1.jsonl"))
              .status == 0);
  const Manifest o1 = read_manifest(dir / "o1.jsonl");
  CHECK(o1.records.size() == 1);
  CHECK(o1.provenance.config["tau_c"] == 0.6);
  CHECK(o1.provenance.config["tau_ssl"] == 0.2);
  REQUIRE(run("select --manifest " + q(dir / "m.jsonl") + " --config " + q(dir / "cfg.json") + " --tau-c 0.1 --out " +
              q(dir / "o2.jsonl"))
              .status == 0);
  CHECK(read_manifest(dir / "o2.jsonl").records.size() == 2);
  write_text(dir / "bad.json", R"({"tau_c": 0.6, "top_percent": 5})");
  CHECK(run("select --manifest " + q(dir / "m.jsonl") + " --config " + q(dir / "bad.json") + " --out " + q(dir / "o3.jsonl"))
            .status == 2);
}

TEST_CASE("pipeline equals the four stages run by hand, and dry-run writes nothing") {
  testing::TempDir dir;
  simulate(dir / "data");
  const std::string layout = q(dir / "data/layout.json");
  const fs::path root = dir / "run";
  const auto dry = run("pipeline --dry-run --top-percent 30 --layout " + layout + " --out " + q(root));
  CHECK(dry.status == 0);
  CHECK(dry.out.find("select") != std::string::npos);
  CHECK_FALSE(fs::exists(root));

  REQUIRE(run("pipeline --top-percent 30 -q --layout " + layout + " --out " + q(root)).status == 0);
  const auto piped = snapshot(root);

  fs::remove_all(root);
  const std::string o = " -q --top-percent 30 --layout " + layout;
  REQUIRE(run("pseudo-label" + o + " --out " + q(root / "pseudo")).status == 0);
  REQUIRE(run("refine" + o + " --pseudo " + q(root / "pseudo") + " --out " + q(root / "refined")).status == 0);
  REQUIRE(run("score" + o + " --refined " + q(root / "refined") + " --out " + q(root / "scored.jsonl")).status == 0);
  REQUIRE(run("select -q --top-percent 30 --manifest " + q(root / "scored.jsonl") + " --out " + q(root / "selected.jsonl"))
              .status == 0);
  CHECK(snapshot(root) == piped);
  CHECK(read_manifest(root / "selected.jsonl").records.size() == top_count(12, 30));
}

TEST_CASE("pipeline output does not depend on the job count") {
  testing::TempDir dir;
  simulate(dir / "data");
  const std::string layout = q(dir / "data/layout.json");
  REQUIRE(run("pipeline -q --jobs 1 --layout " + layout + " --out " + q(dir / "j1")).status == 0);
  REQUIRE(run("pipeline -q --jobs 8 --layout " + layout + " --out " + q(dir / "j8")).status == 0);
  CHECK(snapshot(dir / "j1") == snapshot(dir / "j8"));
}

TEST_CASE("eval reports mIoU 1 on perfect predictions") {
  testing::TempDir dir;
  simulate(dir / "data", "--perfect");
  const auto r = run("eval --layout " + q(dir / "data/layout.json") + " --out " + q(dir / "eval.json"));
  REQUIRE(r.status == 0);
  CHECK(r.out == "mIoU 1\n");
  const auto report = read_json(dir / "eval.json");
  CHECK(report["miou"] == 1.0);
  CHECK(report["confusion"].size() == 5);
}

TEST_CASE("eval on hand-made predictions and training logs") {
  testing::TempDir dir;
  // GT [0,0,0,0,1,1,1,1], prediction [0,0,0,1,0,1,1,1]: confusion [[3,1],[1,3]].
  fs::create_directories(dir / "gt");
  fs::create_directories(dir / "pred");
  save_label_png(testing::map_of(4, 2, 2, {0, 0, 0, 0, 1, 1, 1, 1}), dir / "gt/x.png");
  save_label_png(testing::map_of(4, 2, 2, {0, 0, 0, 1, 0, 1, 1, 1}), dir / "pred/x.png");
  save_prob_volume(testing::volume_of(4, 2, 2, std::vector<std::vector<float>>(8, {0.5f, 0.5f})), dir / "x.prb");
  write_text(dir / "layout.json", R"({"num_classes":2,"entries":[{"id":"x","gt":"gt/x.png","pred":"x.prb"}]})");
  const auto r = run("eval --layout " + q(dir / "layout.json") + " --predictions " + q(dir / "pred") + " --format csv --out " +
                     q(dir / "iou.csv"));
  REQUIRE(r.status == 0);
  double v = 0;
  REQUIRE(std::sscanf(r.out.c_str(), "mIoU %lf", &v) == 1);
  CHECK(std::abs(v - 0.6) <= 1e-12);
  CHECK(fs::exists(dir / "iou.csv.config.json"));

  write_text(dir / "log.txt", "# iteration miou\n1000 0.41\n2000,0.45\nnoise\n3000 0.47\n");
  REQUIRE(run("eval --training-log " + q(dir / "log.txt") + " --plot-data " + q(dir / "series.csv") + " --out " +
              q(dir / "unused"))
              .status == 0);
  CHECK(slurp(dir / "series.csv") == "iteration,miou\n1000,0.41\n2000,0.45\n3000,0.47\n");
}

TEST_CASE("stats writes histogram and subset reports") {
  testing::TempDir dir;
  simulate(dir / "data");
  const std::string layout = q(dir / "data/layout.json");
  REQUIRE(run("pipeline -q --top-percent 50 --layout " + layout + " --out " + q(dir / "run")).status == 0);
  REQUIRE(run("stats --layout " + layout + " --manifest " + q(dir / "run/selected.jsonl") + " --plot-data " +
              q(dir / "plot.csv") + " --out " + q(dir / "stats"))
              .status == 0);
  const auto hist_text = slurp(dir / "stats/histogram.csv");
  const Table hist = table_from_csv(hist_text);
  CHECK(hist.columns == std::vector<std::string>{"class", "pixels"});
  // GT histogram of the selection equals the manifest's own tallies.
  const SubsetReport rep = subset_stats(read_manifest(dir / "run/selected.jsonl"));
  for (const auto& row : hist.rows) {
    const auto k = static_cast<Label>(std::get<std::int64_t>(row[0]));
    const auto it = rep.class_pixels.find(k);
    CHECK(std::get<std::int64_t>(row[1]) == (it == rep.class_pixels.end() ? 0 : it->second));
  }
  CHECK(fs::exists(dir / "stats/subset.csv"));
  CHECK(slurp(dir / "plot.csv").rfind("class,count\n", 0) == 0);
  REQUIRE(run("stats --format json --layout " + layout + " --out " + q(dir / "js")).status == 0);
  CHECK(read_json(dir / "js/histogram.json")["config"]["command"] == "stats");
}

TEST_CASE("simulate is deterministic and records its generator") {
  testing::TempDir dir;
  simulate(dir / "a");
  simulate(dir / "b");
  CHECK(snapshot(dir / "a") == snapshot(dir / "b"));
  const auto meta = read_json(dir / "a/simulate.json");
  CHECK(meta["rng"] == "mt19937_64");
  CHECK(meta["seed"] == 4);
}

}  // TEST_SUITE

#include <CLI11.hpp>

#include <iostream>
#include <thread>

#include "commands.hpp"
#include "sdss/version.hpp"

namespace {

using sdss::cli::CommonOptions;

void add_common(CLI::App* cmd, CommonOptions& o, bool needs_layout = true) {
  cmd->add_option("--config", o.config, "JSON config file; flags override its fields");
  if (needs_layout) cmd->add_option("--layout", o.layout, "dataset layout JSON");
  cmd->add_option("--out", o.out, "output path")->required();
  cmd->add_option("--jobs,-j", o.jobs, "worker threads")->check(CLI::Range(1u, 4096u));
  cmd->add_flag("--strict", o.strict, "fail on the first bad entry");
  cmd->add_flag("--quiet,-q", o.quiet, "no progress counter");
  cmd->add_option("--seed", o.seed, "random seed");
}

// Every config field can be overridden on the command line.
void add_config_flags(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--tau-ssl", o.tau_ssl, "pseudo-label confidence threshold")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--ignore-in-total", o.ignore_in_total, "count IGNORE pixels in the image total (true/false)");
  cmd->add_option("--class-balance", o.class_balance, "weight classes by (1 - area share) (true/false)");
  auto* tau = cmd->add_option("--tau-c", o.tau_c, "keep records with score > tau_c");
  auto* top = cmd->add_option("--top-percent", o.top_percent, "keep the best percent of records");
  tau->excludes(top);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective pseudo-label sampling for segmentation datasets"};
  app.set_version_flag("--version", std::string(sdss::kToolVersion));
  app.require_subcommand(1);

  CommonOptions o;
  o.jobs = std::max(1u, std::thread::hardware_concurrency());

  auto* pseudo = app.add_subcommand("pseudo-label", "threshold predictions into pseudo-label maps");
  add_common(pseudo, o);
  add_config_flags(pseudo, o);

  std::string pseudo_dir;
  auto* refine = app.add_subcommand("refine", "keep pseudo-labels that agree with ground truth");
  add_common(refine, o);
  add_config_flags(refine, o);
  refine->add_option("--pseudo", pseudo_dir, "directory of pseudo-label maps")->required();

  sdss::cli::ScoreOptions score_opts;
  auto* score = app.add_subcommand("score", "score refined maps and write a manifest");
  add_common(score, o);
  add_config_flags(score, o);
  score->add_option("--refined", score_opts.refined_dir, "directory of refined maps")->required();
  score->add_flag("--audit", score_opts.audit, "recompute a sample of scores with the reference scorer");
  score->add_option("--audit-fraction", score_opts.audit_fraction, "share of entries audited");

  std::string manifest;
  auto* select = app.add_subcommand("select", "cut a scored manifest by threshold or top percent");
  add_common(select, o, false);
  select->add_option("--manifest", manifest, "scored manifest")->required();
  add_config_flags(select, o);

  sdss::cli::StatsOptions stats_opts;
  auto* stats = app.add_subcommand("stats", "class histograms and subset statistics");
  add_common(stats, o);
  add_config_flags(stats, o);
  stats->add_option("--manifest", stats_opts.manifest, "restrict to the records of this manifest");
  stats->add_option("--labels", stats_opts.labels_dir, "count these label maps instead of ground truth");
  stats->add_option("--format", stats_opts.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  stats->add_option("--plot-data", stats_opts.plot_data, "write a (class, count) series");

  sdss::cli::EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "confusion matrix and mIoU");
  add_common(eval, o);
  add_config_flags(eval, o);
  eval->add_option("--predictions", eval_opts.predictions_dir, "directory of predicted label maps");
  eval->add_option("--eval-classes", eval_opts.eval_classes, "classes averaged into mIoU")->delimiter(',');
  eval->add_option("--format", eval_opts.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  eval->add_option("--training-log", eval_opts.training_log, "iteration/mIoU log to convert");
  eval->add_option("--plot-data", eval_opts.plot_data, "write an (iteration, mIoU) series");

  sdss::cli::SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
  add_common(simulate, o, false);
  simulate->add_option("--count", sim.count, "number of images");
  simulate->add_option("--width", sim.width, "image width");
  simulate->add_option("--height", sim.height, "image height");
  simulate->add_option("--num-classes", sim.num_classes, "K");
  simulate->add_option("--min-classes", sim.min_classes, "fewest classes per image");
  simulate->add_option("--max-classes", sim.max_classes, "most classes per image (0 = K)");
  simulate->add_option("--accuracy", sim.accuracy, "mock predictor accuracy");
  simulate->add_option("--ignore-fraction", sim.ignore_fraction, "share of IGNORE pixels");
  simulate->add_flag("--perfect", sim.perfect, "predictions equal ground truth with confidence 1");
  simulate->add_flag("--compact", sim.compact, "write argmax/confidence pairs instead of volumes");

  bool dry_run = false;
  bool audit = false;
  auto* pipeline = app.add_subcommand("pipeline", "pseudo-label, refine, score and select in one run");
  add_common(pipeline, o);
  add_config_flags(pipeline, o);
  pipeline->add_flag("--dry-run", dry_run, "print the plan and exit");
  pipeline->add_flag("--audit", audit, "audit scores with the reference scorer");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : sdss::cli::kExitUsage;
  }

  return sdss::cli::run_guarded([&] {
    if (*pseudo) return sdss::cli::cmd_pseudo_label(o);
    if (*refine) return sdss::cli::cmd_refine(o, pseudo_dir);
    if (*score) return sdss::cli::cmd_score(o, score_opts);
    if (*select) return sdss::cli::cmd_select(o, manifest);
    if (*stats) return sdss::cli::cmd_stats(o, stats_opts);
    if (*eval) return sdss::cli::cmd_eval(o, eval_opts);
    if (*simulate) return sdss::cli::cmd_simulate(o, sim);
    return sdss::cli::cmd_pipeline(o, dry_run, audit);
  });
}

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdss/label_core.hpp"

namespace sdss::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitData = 3, kExitInternal = 4 };

/// An invariant the tool itself should have guaranteed did not hold.
class InternalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config;
  std::string layout;
  std::string out;
  unsigned jobs = 1;
  bool strict = false;
  bool quiet = false;
  std::optional<std::uint64_t> seed;

  std::optional<double> tau_ssl;
  std::optional<double> tau_c;
  std::optional<double> top_percent;
  std::optional<bool> ignore_in_total;
  std::optional<bool> class_balance;
};

/// Config file (if any) over `inherited`, then command-line overrides.
SamplingConfig effective_config(const CommonOptions& opts, const nlohmann::json* inherited = nullptr);

struct ScoreOptions {
  std::string refined_dir;
  bool audit = false;
  double audit_fraction = 0.01;
};

struct StatsOptions {
  std::string manifest;
  std::string labels_dir;
  std::string format = "csv";
  std::string plot_data;
};

struct EvalOptions {
  std::string predictions_dir;
  std::vector<std::size_t> eval_classes;
  std::string format = "json";
  std::string training_log;
  std::string plot_data;
};

struct SimulateOptions {
  std::size_t count = 100;
  std::size_t width = 128;
  std::size_t height = 128;
  std::size_t num_classes = 19;
  std::size_t min_classes = 1;
  std::size_t max_classes = 0;  // 0 = num_classes
  double accuracy = 0.8;
  double ignore_fraction = 0.0;
  bool perfect = false;
  bool compact = false;
};

int cmd_pseudo_label(const CommonOptions& opts);
int cmd_refine(const CommonOptions& opts, const std::string& pseudo_dir);
int cmd_score(const CommonOptions& opts, const ScoreOptions& score);
int cmd_select(const CommonOptions& opts, const std::string& manifest);
int cmd_stats(const CommonOptions& opts, const StatsOptions& stats);
int cmd_eval(const CommonOptions& opts, const EvalOptions& eval);
int cmd_simulate(const CommonOptions& opts, const SimulateOptions& sim);
int cmd_pipeline(const CommonOptions& opts, bool dry_run, bool audit);

/// Runs a command, translating exceptions into exit codes and stderr messages.
template <class Fn>
int run_guarded(Fn&& fn);

int exit_code_for(const std::exception& e);

template <class Fn>
int run_guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return exit_code_for(e);
  }
}

}  // namespace sdss::cli

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dcc/constraints.hpp"
#include "dcc/data_io.hpp"
#include "dcc/metrics.hpp"
#include "dcc/run_config.hpp"
#include "dcc/trainer.hpp"

namespace dcc {

/// Features plus labels as described by the data.* keys.
Dataset load_dataset(const RunConfig& config);

/// Constraint files named by constraints.path (merged) and, when set,
/// constraints.triplets_path, filtered by constraints.types.
struct ConstraintInputs {
  ConstraintSet primary;
  std::optional<ConstraintSet> secondary;
};
ConstraintInputs load_constraint_inputs(const RunConfig& config, std::size_t n);

/// Writes the SDAE checkpoint and returns its path.
std::filesystem::path cmd_pretrain(const RunConfig& config, std::ostream& log);

/// Writes a constraint file plus a `<file>.manifest` sidecar; returns the file.
std::filesystem::path cmd_gen_constraints(const RunConfig& config, std::ostream& log);

/// Trains and writes output.dir/run-<seed>/; returns that directory.
std::filesystem::path cmd_train(const RunConfig& config, std::ostream& log);

struct Evaluation {
  double accuracy = 0.0;
  double nmi = 0.0;
  std::size_t instances = 0;

  std::string to_text() const;
};

/// Compares evaluate.labels with evaluate.assignments.
Evaluation cmd_evaluate(const RunConfig& config, std::ostream& log);

struct NegativeRatioReport {
  double baseline_accuracy = 0.0;
  double baseline_nmi = 0.0;
  std::vector<PairedRun> accuracy_runs;
  std::vector<PairedRun> nmi_runs;
  std::vector<std::size_t> epochs;

  double accuracy_ratio() const { return negative_ratio(accuracy_runs); }
  double nmi_ratio() const { return negative_ratio(nmi_runs); }
  std::string to_text() const;
};

using SetProgressFn = std::function<void(std::size_t set, const PairedRun& accuracy)>;

/// Paired runs sharing seed and initial centroids: one unconstrained run,
/// then one constrained run per random pairwise set of `pairs` constraints.
NegativeRatioReport negative_ratio_harness(const Dataset& dataset, const TrainState& initial,
                                           const TrainConfig& config, std::size_t sets, std::size_t pairs,
                                           std::uint64_t constraint_seed, const SetProgressFn& progress = {});

/// Writes output.dir/negative-ratio-<seed>/report.txt and returns the directory.
std::filesystem::path cmd_negative_ratio(const RunConfig& config, std::ostream& log);

/// Parses `dcc <command> [--config FILE] [--key value ...]` and runs it.
/// Returns 0 on success, 2 for usage or input errors, 3 for numeric failures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dcc

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "optrank/model_zoo.hpp"
#include "optrank/trainer.hpp"
#include "optrank/types.hpp"

namespace optrank {

// Sweep axes: rows are targets (transition figures), widths (the
// parameter-size axis of the network figure) or init standard deviations
// (the tuning figure). Width/init sweeps use a single target.
enum class SweepAxis { Targets, Widths, InitStds };

// Whether trials within a cell share one train set (randomizing only the
// initialization, as in the paper's trial averaging) or draw fresh train sets
// per trial.
enum class TrainSets { PerTrial, PerCell };

struct SweepSpec {
  int schema_version = 1;
  std::string name;
  ModelFamily family;
  SweepAxis axis = SweepAxis::Targets;
  std::vector<std::string> targets;  // ids; exactly one for Widths/InitStds
  std::vector<int> widths;
  std::vector<Scalar> init_stds;
  std::vector<int> sample_sizes;  // strictly increasing
  int trials = 1;
  TrainConfig train;
  std::vector<Scalar> lr_grid;  // empty: fixed train.learning_rate
  Scalar fit_threshold = 1e-4;
  int test_size = 1000;
  std::uint64_t seed = 0;
  MfSampling mf_sampling = MfSampling::PivotCross;
  TrainSets train_sets = TrainSets::PerTrial;
};

void validate_spec(const SweepSpec& spec);

struct SweepRow {
  std::string label;
  TargetSpec target;
  ModelFamily family;
  Scalar init_std;
  std::optional<int> optimistic;  // absent when no closed form applies
};

struct SweepCell {
  Scalar test_mse = 0;
  bool converged = false;
  bool diverged = false;
  long iterations = 0;
  Scalar learning_rate = 0;

  friend bool operator==(const SweepCell&, const SweepCell&) = default;
};

struct SweepGrid {
  SweepSpec spec;
  std::vector<SweepRow> rows;
  std::vector<SweepCell> cells;  // [row][n_index][trial], row-major
  Matrix mean_test_error;        // rows x sample_sizes

  Index n_count() const { return static_cast<Index>(spec.sample_sizes.size()); }
  Index row_count() const { return static_cast<Index>(rows.size()); }
  const SweepCell& cell(Index row, Index ni, Index trial) const {
    return cells[static_cast<std::size_t>((row * n_count() + ni) * spec.trials + trial)];
  }
  SweepCell& cell(Index row, Index ni, Index trial) {
    return cells[static_cast<std::size_t>((row * n_count() + ni) * spec.trials + trial)];
  }
  int diverged_count(Index row, Index ni) const;
};

// Resolves rows (targets, per-row families, init stds, closed-form optimistic
// sample sizes where they apply) without running anything.
std::vector<SweepRow> resolve_rows(const SweepSpec& spec);

// Runs every (row, n, trial) cell: a fresh train set per trial, a fixed
// per-row test set (1000 points, or every entry for completion targets),
// gd_fit or the learning-rate search. Deterministic given the spec seed and
// independent of worker count; per-cell seeds come from the splittable
// mix_seed scheme. Diverged runs keep their final test error and are counted
// separately.
SweepGrid run_sweep(const SweepSpec& spec, int workers = 1,
                    const std::function<void(std::size_t, std::size_t)>& progress = {});

struct TransitionRow {
  std::string label;
  std::optional<int> empirical_n;   // first n with mean test error < threshold
  std::optional<int> optimistic_n;  // closed form, absent when flagged
  std::optional<int> gap;           // empirical - optimistic
};

struct TransitionReport {
  Scalar fit_threshold = 0;
  std::vector<TransitionRow> rows;
};

TransitionReport detect_transitions(const SweepGrid& grid);
TransitionReport detect_transitions(const SweepGrid& grid,
                                    const std::vector<std::optional<int>>& optimistic);

// Run directory layout: manifest.json (spec + rows), grid.csv
// (row_id,n,trial,test_mse,converged,diverged,iters,lr), mean.csv, and
// transitions.csv. load() inverts persist() exactly.
void persist(const SweepGrid& grid, const std::filesystem::path& dir);
SweepGrid load_grid(const std::filesystem::path& dir);

}  // namespace optrank

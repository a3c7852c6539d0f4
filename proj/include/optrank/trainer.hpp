#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "optrank/model_zoo.hpp"
#include "optrank/types.hpp"

namespace optrank {

enum class Split { Train, Test };

// Entry revelation order for completion targets. PivotCross reveals entries
// cross by cross in the complete-pivoting order of the target matrix, so that
// the first 2rd - r^2 observed entries pin down a generic rank-r matrix;
// the order within each cross increment is shuffled per seed. Uniform draws
// entries uniformly without replacement, which leaves rank-r recovery
// unidentifiable for a sizable fraction of patterns at the optimistic sample
// size (at n = 7, d = 4 only spanning-tree patterns identify a rank-1 target).
enum class MfSampling { PivotCross, Uniform };

struct Dataset {
  Matrix inputs;   // one point per row
  Vector outputs;  // target values
  std::string target_id;
  std::uint64_t seed = 0;
  Split split = Split::Train;

  Index size() const { return outputs.size(); }
};

// Function targets: n i.i.d. standard-normal inputs. Completion targets:
// n entry indices (test split = all d^2 entries regardless of n).
Dataset sample_dataset(const TargetSpec& t, int n, std::uint64_t seed, Split split,
                       MfSampling sampling = MfSampling::PivotCross);

struct TrainConfig {
  Scalar init_std = 1e-4;
  Scalar learning_rate = 0.05;
  Scalar stop_train_mse = 1e-9;
  long max_iters = 2'000'000;
  std::uint64_t seed = 0;
  int trace_every = 0;  // record (iter, train_mse) every k iterations; 0 = off
};

void validate_config(const TrainConfig& cfg);

struct TrainResult {
  Vector theta;
  Scalar train_mse = 0;
  Scalar test_mse = 0;
  long iterations = 0;
  bool converged = false;
  bool diverged = false;
  Scalar learning_rate = 0;
  std::vector<std::pair<long, Scalar>> trace;
};

// Full-batch gradient descent on the mean squared error, theta0 ~ N(0,
// init_std^2) i.i.d. in layout order. Stops when train MSE <= stop_train_mse
// or after max_iters updates. A non-finite or > 1e6 train MSE flags the run
// as diverged (the last finite iterate is reported). An empty train set
// returns the initialization, converged by convention.
TrainResult gd_fit(const ModelFamily& fam, const Dataset& train, const Dataset& test,
                   const TrainConfig& cfg);

// Runs gd_fit once per learning rate and keeps the best test MSE among
// converged runs; if none converged, the smallest train MSE. Ties keep the
// earliest grid entry.
TrainResult lr_search(const ModelFamily& fam, const Dataset& train, const Dataset& test,
                      const TrainConfig& base, const std::vector<Scalar>& lr_grid);

// Mean squared error of the model against a dataset, and its parameter
// gradient. Shared with the gd_fit inner loop.
Scalar mse(const ModelFamily& fam, const Vector& theta, const Dataset& data);
Scalar mse_gradient(const ModelFamily& fam, const Vector& theta, const Dataset& data,
                    Vector& grad);

inline constexpr Scalar kDivergenceMse = 1e6;

}  // namespace optrank

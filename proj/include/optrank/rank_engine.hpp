#pragma once

#include <cstdint>
#include <limits>

#include "optrank/model_zoo.hpp"
#include "optrank/types.hpp"

namespace optrank {

// Model rank machinery: the rank of the span of parameter-gradient functions,
// estimated as the rank of an oversampled probe/parameter gradient matrix.

inline constexpr Scalar kDefaultRankTol = 1e-8;
// Spectra with a relative gap below this are flagged as ambiguous.
inline constexpr Scalar kGapWarnRatio = 1e3;

struct ProbeLog {
  Matrix inputs;  // one probe per row
  std::uint64_t seed = 0;
};

struct FeatureMatrix {
  Matrix values;  // N x M, row n = parameter gradient at probe n
  ModelFamily family;
  ProbeLog probes;
};

// max(4M, 64); MatrixFactorization always uses its complete d^2 entry set.
int default_probe_count(const ModelFamily& fam);

// Gradient rows at i.i.d. standard-normal probes (all entry indices for
// MatrixFactorization, for which the matrix is exact). Requires
// probe_count >= M and M >= 1.
FeatureMatrix feature_matrix(const ModelFamily& fam, const Vector& theta, int probe_count,
                             std::uint64_t seed);
FeatureMatrix feature_matrix(const ModelFamily& fam, const Vector& theta, std::uint64_t seed);

struct RankReport {
  int rank = 0;
  Vector singular_values;  // descending
  Scalar tolerance = kDefaultRankTol;
  // sigma_rank / sigma_{rank+1}; +inf when the spectrum ends or hits exact zero
  Scalar gap_ratio = std::numeric_limits<Scalar>::infinity();

  bool ambiguous() const { return gap_ratio < kGapWarnRatio; }
};

// rank = #{ sigma_i > rel_tol * sigma_1 }, rank 0 for an all-zero matrix.
RankReport rank_report(const Matrix& values, Scalar rel_tol = kDefaultRankTol);
RankReport numerical_rank(const FeatureMatrix& fm, Scalar rel_tol = kDefaultRankTol);
RankReport rank_at_point(const ModelFamily& fam, const Vector& theta,
                         Scalar rel_tol = kDefaultRankTol, int probe_count = 0,
                         std::uint64_t seed = 0);

// Closed-form optimistic sample sizes. Defined for bias-free families:
//   Linear3                        3
//   ReparamLinear4                 2 when the x2 coefficient is 0, else 3
//   DeepDiagonal                   k            (sparsity)
//   MatrixFactorization            2rd - r^2    (matrix rank)
//   TwoLayerTanhFC                 k(d+1)       (intrinsic width)
//   TwoLayerTanhCNN 1-D            k(d+1)       (intrinsic kernels)
//   TwoLayerTanhCNN 2-D            k(s^2 + (d+1-s)^2)
//   TwoLayerTanhCNNNoShare 1-D     k(d+1-s)(s+1)
//   TwoLayerTanhCNNNoShare 2-D     k(d+1-s)^2(s^2+1)
// Throws ConfigError for bias-ful families or targets the family cannot
// express.
int closed_form_optimistic(const ModelFamily& fam, const TargetSpec& t);

// The bare arithmetic above, given the complexity descriptor directly
// (r for MatrixFactorization, k otherwise; the 2-or-3 split for
// ReparamLinear4).
int optimistic_from_complexity(const ModelFamily& fam, int complexity);

// A parameter point that expresses the target exactly and attains the closed
// form rank: null-padded generator weights for the tanh families, the
// zero-padded factor pair A = U sqrt(S), B = sqrt(S) V^T for completion
// targets. Bias-free families only.
Vector minimizer_point(const ModelFamily& fam, const TargetSpec& t);

// Zero-padding embedding of a narrow network's parameters into a wider one of
// the same kind, depth and input size. Output- and rank-preserving. The
// identity when the families coincide.
Vector null_embed(const ModelFamily& narrow, const Vector& theta, const ModelFamily& wide);

struct MaxRankM_I {
  int value = 0;
};

// Probabilistic estimate of the maximum model rank: the largest numerical rank
// over five standard-normal parameter points.
MaxRankM_I max_rank(const ModelFamily& fam, Scalar rel_tol = kDefaultRankTol,
                    std::uint64_t seed = 0);

// The analytic counterpart (generic-point rank): 3, 3, d, d^2, and the full
// parameter count for the tanh families.
int max_rank_closed_form(const ModelFamily& fam);

}  // namespace optrank

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "optrank/types.hpp"

namespace optrank {

// Model families
//
// All models are scalar-valued and differentiable in their parameters. Each
// family fixes a flat parameter layout; pack/unpack helpers below give the
// structured view. Inputs are flat vectors whose meaning depends on the family:
//
//   Linear3, ReparamLinear4   x = (x1, x2)
//   DeepDiagonal              x in R^d
//   MatrixFactorization       x = (i, j), a 1-based entry index pair stored as doubles
//   TwoLayerTanhFC            x in R^d
//   TwoLayerTanhCNN (1-D)     x in R^d
//   TwoLayerTanhCNN (2-D)     x in R^(d*d), row-major: x[r*d + c]
//
// Parameter layouts (theta):
//
//   Linear3           (c0, c1, c2)                    f = c0 + c1 x1 + c2 x2
//   ReparamLinear4    (t0, t1, t2, t3)                f = t0 + t1 x1 + t2 t3 x2
//   DeepDiagonal      layer-major: theta[(l-1)d + j] = a_j^[l]
//                       product form: f = sum_j (prod_l a_j^[l]) x_j
//                       squared form (L = 2 only): rows (a, b), f = sum_j (a_j^2 - b_j^2) x_j
//   MatrixFactorization  row-major A then row-major B; f(i,j) = (A B)_{ij}
//   TwoLayerTanhFC    per neuron i: (a_i, w_i1 .. w_id[, b_i])
//                       f = sum_i a_i tanh(w_i . x + b_i)
//   TwoLayerTanhCNN   per kernel i: (a_i1 .. a_ip, K_i1 .. K_iS[, b_i])
//                       p output positions, S kernel taps (s or s*s),
//                       f = sum_i sum_j a_ij tanh(sum_t x[tap(j,t)] K_i[t] + b_i)
//   TwoLayerTanhCNNNoShare  per kernel i, per position j: (a_ij, K_ij1 .. K_ijS[, b_ij])
//
// The 1-D tap convention is tap(j, t) = j + s - 1 - t (0-based), i.e. position
// j's pre-activation is x_{j+s} K_1 + ... + x_{j+1} K_s in 1-based paper
// indexing. 2-D convolutions are stride 1, no padding, (d+1-s)^2 positions,
// kernels row-major.

enum class Kind {
  Linear3,
  ReparamLinear4,
  DeepDiagonal,
  MatrixFactorization,
  TwoLayerTanhFC,
  TwoLayerTanhCNN,
  TwoLayerTanhCNNNoShare,
};

struct ModelFamily {
  Kind kind = Kind::Linear3;
  int d = 2;            // input dimension (matrix side length for MatrixFactorization)
  int L = 2;            // DeepDiagonal depth, L >= 2
  bool squared = false; // DeepDiagonal L == 2: (a^2 - b^2) parameterization
  int m = 0;            // FC hidden width
  int m_c = 0;          // CNN kernel count
  int s = 0;            // CNN kernel size, 1 <= s <= d
  int conv_dims = 1;    // 1 or 2
  bool with_bias = false;

  friend bool operator==(const ModelFamily&, const ModelFamily&) = default;
};

ModelFamily linear3();
ModelFamily reparam_linear4();
ModelFamily deep_diagonal(int d, int L, bool squared = false);
ModelFamily matrix_factorization(int d);
ModelFamily two_layer_tanh_fc(int d, int m, bool with_bias = false);
ModelFamily two_layer_tanh_cnn(int d, int m_c, int s, int conv_dims = 1, bool with_bias = false);
ModelFamily two_layer_tanh_cnn_noshare(int d, int m_c, int s, int conv_dims = 1,
                                       bool with_bias = false);

// Throws ConfigError on invalid field combinations (s > d, bad depth, ...).
void validate_family(const ModelFamily& fam);

int param_count(const ModelFamily& fam);
int input_length(const ModelFamily& fam);

// Number of convolution output positions: d+1-s (1-D) or (d+1-s)^2 (2-D).
int conv_positions(const ModelFamily& fam);
// Kernel taps: s (1-D) or s*s (2-D).
int conv_taps(const ModelFamily& fam);
// Flat input index read by tap t at output position j (both 0-based).
int conv_tap_index(const ModelFamily& fam, int position, int tap);

Scalar evaluate(const ModelFamily& fam, const Vector& theta, const Vector& x);
Vector param_gradient(const ModelFamily& fam, const Vector& theta, const Vector& x);
void param_gradient(const ModelFamily& fam, const Vector& theta, const Vector& x, Vector& out);

// Structured parameter views. pack(unpack(theta)) == theta exactly.
struct MfParams {
  Matrix A, B;  // d x d each
};
struct FcParams {
  Vector a;  // m
  Matrix W;  // d x m, column i = w_i
  Vector b;  // m (size 0 when bias-free)
};
struct CnnParams {
  Matrix a;  // p x m_c
  Matrix K;  // S x m_c
  Vector b;  // m_c (size 0 when bias-free)
};
struct CnnNoShareParams {
  Matrix a;  // p x m_c
  Matrix K;  // S x (m_c * p), column i*p + j = K_ij
  Matrix b;  // p x m_c (0 x 0 when bias-free)
};
struct DeepDiagonalParams {
  Matrix layers;  // L x d, row l = layer l coefficients
};

MfParams unpack_mf(const ModelFamily& fam, const Vector& theta);
Vector pack_mf(const ModelFamily& fam, const MfParams& p);
FcParams unpack_fc(const ModelFamily& fam, const Vector& theta);
Vector pack_fc(const ModelFamily& fam, const FcParams& p);
CnnParams unpack_cnn(const ModelFamily& fam, const Vector& theta);
Vector pack_cnn(const ModelFamily& fam, const CnnParams& p);
CnnNoShareParams unpack_cnn_noshare(const ModelFamily& fam, const Vector& theta);
Vector pack_cnn_noshare(const ModelFamily& fam, const CnnNoShareParams& p);
DeepDiagonalParams unpack_deep_diagonal(const ModelFamily& fam, const Vector& theta);
Vector pack_deep_diagonal(const ModelFamily& fam, const DeepDiagonalParams& p);

// Targets
//
// A TargetSpec describes a target function constructively: `generator` is the
// smallest family that expresses it and `params` holds the generator content.
// For FC/CNN generators, `params` is a valid ParamVector of `generator`
// (bias-free, width = the intrinsic complexity). For the other kinds it is the
// minimal content instead:
//
//   Linear3 generator         (c0, c1, c2)
//   DeepDiagonal generator    the d linear coefficients (k of them nonzero)
//   MatrixFactorization       row-major target matrix M*
//
// Complexity descriptors are stored explicitly; each family's closed form
// reads the one it needs.
struct TargetSpec {
  std::string id;
  ModelFamily generator;
  Vector params;
  std::optional<int> sparsity;           // DeepDiagonal
  std::optional<int> matrix_rank;        // MatrixFactorization
  std::optional<int> intrinsic_width;    // FC
  std::optional<int> intrinsic_kernels;  // CNN

  friend bool operator==(const TargetSpec& a, const TargetSpec& b) {
    return a.id == b.id && a.generator == b.generator && a.params == b.params &&
           a.sparsity == b.sparsity && a.matrix_rank == b.matrix_rank &&
           a.intrinsic_width == b.intrinsic_width && a.intrinsic_kernels == b.intrinsic_kernels;
  }
};

Scalar evaluate_target(const TargetSpec& t, const Vector& x);

// Checks the non-degeneracy conditions behind the closed forms: nonzero
// coefficients, no weight pair equal up to sign, exactly k nonzero entries,
// rank(M*) == r. Throws ConfigError on violation.
void validate_target(const TargetSpec& t);

// Random target of the requested complexity for `family`. Coefficients are
// uniform on [0.5, 1.5] with random sign, which keeps a margin from the
// degenerate cases. For Linear3/ReparamLinear4 the complexity is the
// optimistic sample size (2 = no x2 term, 3 = with x2 term).
struct TargetRequest {
  ModelFamily family;
  int complexity = 0;
  std::uint64_t seed = 0;
};
TargetSpec make_target(const TargetRequest& req);

// Built-in targets: "M1".."M8" (the 4x4 completion targets), "fig4-target"
// (the d=5 sum of three shifted tanh units), the affine names "1", "x1",
// "1+x1", "x2", "1+x2", "x1+x2", "1+x1+x2", and "linear:<c0>,<c1>,<c2>".
// "zero:<family>" is accepted for the zero target of mf/deepdiag generators
// via "zero-mf:<d>" and "zero-deepdiag:<d>".
TargetSpec builtin_target(const std::string& id);
bool is_builtin_target(const std::string& id);
std::vector<std::string> builtin_target_ids();

// Neurons of an FC representation of the target: pairs (a_i, w_i in R^d).
// Defined for FC generators (identity) and 1-D CNN generators (one neuron per
// kernel/position pair with a nonzero output weight). Used for embedding CNN
// targets into FC families.
struct FcNeuron {
  Scalar a;
  Vector w;
};
std::vector<FcNeuron> fc_neurons_of_target(const TargetSpec& t);

const char* kind_name(Kind k);
Kind kind_from_name(const std::string& name);

}  // namespace optrank

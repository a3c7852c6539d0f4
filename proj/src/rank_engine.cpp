#include "optrank/rank_engine.hpp"

#include <algorithm>
#include <cmath>

#include "optrank/rng.hpp"

namespace optrank {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

Matrix target_matrix(const TargetSpec& t) {
  const int d = t.generator.d;
  Matrix M(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) M(i, j) = t.params[i * d + j];
  return M;
}

void require_bias_free(const ModelFamily& fam, const char* what) {
  if (fam.with_bias)
    fail(std::string(what) + " is defined for bias-free networks; drop the bias flag");
}

}  // namespace

int default_probe_count(const ModelFamily& fam) {
  if (fam.kind == Kind::MatrixFactorization) return fam.d * fam.d;
  return std::max(4 * param_count(fam), 64);
}

FeatureMatrix feature_matrix(const ModelFamily& fam, const Vector& theta, int probe_count,
                             std::uint64_t seed) {
  const int M = param_count(fam);
  if (M == 0) fail("family has no parameters; the gradient span is empty");
  FeatureMatrix fm;
  fm.family = fam;
  fm.probes.seed = seed;
  if (fam.kind == Kind::MatrixFactorization) {
    const int d = fam.d;
    fm.probes.inputs.resize(d * d, 2);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        fm.probes.inputs(i * d + j, 0) = i + 1;
        fm.probes.inputs(i * d + j, 1) = j + 1;
      }
  } else {
    if (probe_count < M)
      fail("probe_count " + std::to_string(probe_count) + " is below the parameter count " +
           std::to_string(M));
    auto rng = make_rng(mix_seed(seed, {kProbes}));
    fm.probes.inputs = normal_matrix(rng, probe_count, input_length(fam));
  }
  const Index N = fm.probes.inputs.rows();
  fm.values.resize(N, M);
  Vector grad(M);
  for (Index n = 0; n < N; ++n) {
    param_gradient(fam, theta, fm.probes.inputs.row(n).transpose(), grad);
    fm.values.row(n) = grad.transpose();
  }
  return fm;
}

FeatureMatrix feature_matrix(const ModelFamily& fam, const Vector& theta, std::uint64_t seed) {
  return feature_matrix(fam, theta, default_probe_count(fam), seed);
}

RankReport rank_report(const Matrix& values, Scalar rel_tol) {
  if (rel_tol <= 0 || rel_tol >= 1) fail("rel_tol must lie in (0, 1)");
  RankReport rep;
  rep.tolerance = rel_tol;
  Eigen::BDCSVD<Matrix> svd(values);
  rep.singular_values = svd.singularValues();
  const Index k = rep.singular_values.size();
  if (k == 0 || rep.singular_values[0] == 0) {
    rep.rank = 0;
    return rep;
  }
  const Scalar cut = rel_tol * rep.singular_values[0];
  int rank = 0;
  while (rank < k && rep.singular_values[rank] > cut) ++rank;
  rep.rank = rank;
  if (rank < k && rep.singular_values[rank] > 0)
    rep.gap_ratio = rep.singular_values[rank - 1] / rep.singular_values[rank];
  return rep;
}

RankReport numerical_rank(const FeatureMatrix& fm, Scalar rel_tol) {
  return rank_report(fm.values, rel_tol);
}

RankReport rank_at_point(const ModelFamily& fam, const Vector& theta, Scalar rel_tol,
                         int probe_count, std::uint64_t seed) {
  if (probe_count <= 0) probe_count = default_probe_count(fam);
  return numerical_rank(feature_matrix(fam, theta, probe_count, seed), rel_tol);
}

int optimistic_from_complexity(const ModelFamily& fam, int complexity) {
  validate_family(fam);
  require_bias_free(fam, "the optimistic closed form");
  const int k = complexity;
  if (k < 0) fail("complexity descriptor must be non-negative");
  switch (fam.kind) {
    case Kind::Linear3:
      return 3;
    case Kind::ReparamLinear4:
      if (k != 2 && k != 3) fail("ReparamLinear4 targets have optimistic size 2 or 3");
      return k;
    case Kind::DeepDiagonal:
      if (k > fam.d) fail("sparsity exceeds input dimension");
      return k;
    case Kind::MatrixFactorization:
      if (k > fam.d) fail("matrix rank exceeds the side length");
      return 2 * k * fam.d - k * k;
    case Kind::TwoLayerTanhFC:
      if (fam.m > 0 && k > fam.m) fail("intrinsic width exceeds the network width");
      return k * (fam.d + 1);
    case Kind::TwoLayerTanhCNN: {
      if (fam.m_c > 0 && k > fam.m_c) fail("intrinsic kernel count exceeds the kernel count");
      if (fam.conv_dims == 1) return k * (fam.d + 1);
      const int p1 = fam.d + 1 - fam.s;
      return k * (fam.s * fam.s + p1 * p1);
    }
    case Kind::TwoLayerTanhCNNNoShare: {
      if (fam.m_c > 0 && k > fam.m_c) fail("intrinsic kernel count exceeds the kernel count");
      const int p1 = fam.d + 1 - fam.s;
      if (fam.conv_dims == 1) return k * p1 * (fam.s + 1);
      return k * p1 * p1 * (fam.s * fam.s + 1);
    }
  }
  fail("unknown model family kind");
}

int closed_form_optimistic(const ModelFamily& fam, const TargetSpec& t) {
  validate_family(fam);
  require_bias_free(fam, "the optimistic closed form");
  const ModelFamily& g = t.generator;
  switch (fam.kind) {
    case Kind::Linear3:
      if (g.kind != Kind::Linear3) fail("Linear3 fits affine targets in two variables");
      return 3;
    case Kind::ReparamLinear4:
      if (g.kind != Kind::Linear3) fail("ReparamLinear4 fits affine targets in two variables");
      return t.params[2] == 0 ? 2 : 3;
    case Kind::DeepDiagonal:
      if (g.kind != Kind::DeepDiagonal || g.d != fam.d)
        fail("target is not a sparse linear function on this input space");
      return optimistic_from_complexity(fam, *t.sparsity);
    case Kind::MatrixFactorization:
      if (g.kind != Kind::MatrixFactorization || g.d != fam.d)
        fail("target is not a completion target of matching size");
      return optimistic_from_complexity(fam, *t.matrix_rank);
    case Kind::TwoLayerTanhFC: {
      if (!t.intrinsic_width) fail("target has no intrinsic width descriptor");
      if (g.kind != Kind::TwoLayerTanhFC && g.kind != Kind::TwoLayerTanhCNN)
        fail("target is not expressible by a two-layer tanh network");
      if (input_length(g) != fam.d) fail("target input dimension mismatch");
      return optimistic_from_complexity(fam, *t.intrinsic_width);
    }
    case Kind::TwoLayerTanhCNN:
    case Kind::TwoLayerTanhCNNNoShare: {
      if (!t.intrinsic_kernels) fail("target has no intrinsic kernel descriptor");
      if (g.kind != Kind::TwoLayerTanhCNN || g.d != fam.d || g.s != fam.s ||
          g.conv_dims != fam.conv_dims)
        fail("target is not a convolutional target of matching geometry");
      if (fam.kind == Kind::TwoLayerTanhCNNNoShare) {
        // the no-share closed form assumes every output weight of the
        // generator is nonzero
        const CnnParams p = unpack_cnn(g, t.params);
        if ((p.a.array() == 0).any())
          fail("no-share closed form needs all generator output weights nonzero");
      }
      return optimistic_from_complexity(fam, *t.intrinsic_kernels);
    }
  }
  fail("unknown model family kind");
}

Vector minimizer_point(const ModelFamily& fam, const TargetSpec& t) {
  validate_family(fam);
  require_bias_free(fam, "the minimizer construction");
  const ModelFamily& g = t.generator;
  switch (fam.kind) {
    case Kind::Linear3: {
      if (g.kind != Kind::Linear3) fail("target not expressible by Linear3");
      return t.params;
    }
    case Kind::ReparamLinear4: {
      if (g.kind != Kind::Linear3) fail("target not expressible by ReparamLinear4");
      Vector theta(4);
      const Scalar c2 = t.params[2];
      const Scalar root = std::sqrt(std::abs(c2));
      theta << t.params[0], t.params[1], c2 < 0 ? -root : root, root;
      return theta;
    }
    case Kind::DeepDiagonal: {
      if (g.kind != Kind::DeepDiagonal || g.d != fam.d) fail("target not expressible");
      Vector theta = Vector::Zero(param_count(fam));
      for (int j = 0; j < fam.d; ++j) {
        const Scalar c = t.params[j];
        if (c == 0) continue;
        if (fam.squared) {
          if (c > 0) theta[j] = std::sqrt(c);
          else theta[fam.d + j] = std::sqrt(-c);
        } else {
          const Scalar root = std::pow(std::abs(c), 1.0 / fam.L);
          theta[j] = c < 0 ? -root : root;
          for (int l = 1; l < fam.L; ++l) theta[l * fam.d + j] = root;
        }
      }
      return theta;
    }
    case Kind::MatrixFactorization: {
      if (g.kind != Kind::MatrixFactorization || g.d != fam.d) fail("target not expressible");
      const Matrix M = target_matrix(t);
      Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const Vector root = svd.singularValues().cwiseSqrt();
      MfParams p;
      p.A = svd.matrixU() * root.asDiagonal();
      p.B = root.asDiagonal() * svd.matrixV().transpose();
      return pack_mf(fam, p);
    }
    case Kind::TwoLayerTanhFC: {
      const auto neurons = fc_neurons_of_target(t);
      if (static_cast<int>(neurons.size()) > fam.m)
        fail("target needs width " + std::to_string(neurons.size()) + ", family has " +
             std::to_string(fam.m));
      FcParams p{Vector::Zero(fam.m), Matrix::Zero(fam.d, fam.m), Vector(0)};
      for (std::size_t i = 0; i < neurons.size(); ++i) {
        if (neurons[i].w.size() != fam.d) fail("target input dimension mismatch");
        p.a[static_cast<Index>(i)] = neurons[i].a;
        p.W.col(static_cast<Index>(i)) = neurons[i].w;
      }
      return pack_fc(fam, p);
    }
    case Kind::TwoLayerTanhCNN: {
      if (g.kind != Kind::TwoLayerTanhCNN || g.d != fam.d || g.s != fam.s ||
          g.conv_dims != fam.conv_dims)
        fail("target not expressible by this convolutional family");
      if (g.m_c > fam.m_c) fail("target needs more kernels than the family has");
      const CnnParams gen = unpack_cnn(g, t.params);
      const int p = conv_positions(fam), S = conv_taps(fam);
      CnnParams out{Matrix::Zero(p, fam.m_c), Matrix::Zero(S, fam.m_c), Vector(0)};
      out.a.leftCols(g.m_c) = gen.a;
      out.K.leftCols(g.m_c) = gen.K;
      return pack_cnn(fam, out);
    }
    case Kind::TwoLayerTanhCNNNoShare: {
      if (g.kind != Kind::TwoLayerTanhCNN || g.d != fam.d || g.s != fam.s ||
          g.conv_dims != fam.conv_dims)
        fail("target not expressible by this convolutional family");
      if (g.m_c > fam.m_c) fail("target needs more kernels than the family has");
      const CnnParams gen = unpack_cnn(g, t.params);
      const int p = conv_positions(fam), S = conv_taps(fam);
      CnnNoShareParams out{Matrix::Zero(p, fam.m_c), Matrix::Zero(S, fam.m_c * p), Matrix(0, 0)};
      for (int i = 0; i < g.m_c; ++i)
        for (int j = 0; j < p; ++j) {
          out.a(j, i) = gen.a(j, i);
          out.K.col(i * p + j) = gen.K.col(i);
        }
      return pack_cnn_noshare(fam, out);
    }
  }
  fail("unknown model family kind");
}

Vector null_embed(const ModelFamily& narrow, const Vector& theta, const ModelFamily& wide) {
  validate_family(narrow);
  validate_family(wide);
  if (theta.size() != param_count(narrow)) fail("parameter length does not match narrow family");
  if (narrow == wide) return theta;
  if (narrow.kind != wide.kind || narrow.d != wide.d || narrow.with_bias != wide.with_bias)
    fail("null embedding needs the same kind, input size and bias convention");
  switch (narrow.kind) {
    case Kind::TwoLayerTanhFC: {
      if (wide.m < narrow.m) fail("cannot embed into a narrower network");
      Vector out = Vector::Zero(param_count(wide));
      out.head(theta.size()) = theta;  // neuron blocks are contiguous
      return out;
    }
    case Kind::TwoLayerTanhCNN:
    case Kind::TwoLayerTanhCNNNoShare: {
      if (narrow.s != wide.s || narrow.conv_dims != wide.conv_dims)
        fail("null embedding needs matching kernel geometry");
      if (wide.m_c < narrow.m_c) fail("cannot embed into a narrower network");
      Vector out = Vector::Zero(param_count(wide));
      out.head(theta.size()) = theta;  // kernel blocks are contiguous
      return out;
    }
    default:
      fail("family has no width to embed along");
  }
}

MaxRankM_I max_rank(const ModelFamily& fam, Scalar rel_tol, std::uint64_t seed) {
  const int M = param_count(fam);
  if (M == 0) return {0};
  int best = 0;
  for (int trial = 0; trial < 5; ++trial) {
    auto rng = make_rng(mix_seed(seed, {0x51, static_cast<std::uint64_t>(trial)}));
    const Vector theta = normal_vector(rng, M);
    const auto rep =
        rank_at_point(fam, theta, rel_tol, 0, mix_seed(seed, {0x52, static_cast<std::uint64_t>(trial)}));
    best = std::max(best, rep.rank);
  }
  return {best};
}

int max_rank_closed_form(const ModelFamily& fam) {
  validate_family(fam);
  switch (fam.kind) {
    case Kind::Linear3:
      return 3;
    case Kind::ReparamLinear4:
      return 3;
    case Kind::DeepDiagonal:
      return fam.d;
    case Kind::MatrixFactorization:
      return fam.d * fam.d;
    case Kind::TwoLayerTanhFC:
    case Kind::TwoLayerTanhCNN:
    case Kind::TwoLayerTanhCNNNoShare:
      return param_count(fam);
  }
  fail("unknown model family kind");
}

}  // namespace optrank

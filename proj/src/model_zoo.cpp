#include "optrank/model_zoo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "optrank/rng.hpp"

namespace optrank {

namespace {

int bias_terms(const ModelFamily& fam) { return fam.with_bias ? 1 : 0; }

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

void check_theta(const ModelFamily& fam, const Vector& theta) {
  if (theta.size() != param_count(fam))
    fail("parameter vector has length " + std::to_string(theta.size()) + ", family expects " +
         std::to_string(param_count(fam)));
}

void check_input(const ModelFamily& fam, const Vector& x) {
  if (x.size() != input_length(fam))
    fail("input has length " + std::to_string(x.size()) + ", family expects " +
         std::to_string(input_length(fam)));
  if (fam.kind == Kind::MatrixFactorization) {
    for (int k = 0; k < 2; ++k) {
      const Scalar v = x[k];
      if (v != std::floor(v) || v < 1 || v > fam.d)
        fail("matrix factorization input must be a 1-based entry index pair");
    }
  }
}

Scalar signed_unit(std::mt19937_64& rng) {
  std::uniform_real_distribution<Scalar> mag(0.5, 1.5);
  std::uniform_int_distribution<int> sign(0, 1);
  const Scalar v = mag(rng);
  return sign(rng) ? v : -v;
}

}  // namespace

ModelFamily linear3() { return ModelFamily{.kind = Kind::Linear3, .d = 2}; }

ModelFamily reparam_linear4() { return ModelFamily{.kind = Kind::ReparamLinear4, .d = 2}; }

ModelFamily deep_diagonal(int d, int L, bool squared) {
  ModelFamily fam{.kind = Kind::DeepDiagonal, .d = d, .L = L, .squared = squared};
  validate_family(fam);
  return fam;
}

ModelFamily matrix_factorization(int d) {
  ModelFamily fam{.kind = Kind::MatrixFactorization, .d = d};
  validate_family(fam);
  return fam;
}

ModelFamily two_layer_tanh_fc(int d, int m, bool with_bias) {
  ModelFamily fam{.kind = Kind::TwoLayerTanhFC, .d = d, .m = m, .with_bias = with_bias};
  validate_family(fam);
  return fam;
}

ModelFamily two_layer_tanh_cnn(int d, int m_c, int s, int conv_dims, bool with_bias) {
  ModelFamily fam{.kind = Kind::TwoLayerTanhCNN,
                  .d = d,
                  .m_c = m_c,
                  .s = s,
                  .conv_dims = conv_dims,
                  .with_bias = with_bias};
  validate_family(fam);
  return fam;
}

ModelFamily two_layer_tanh_cnn_noshare(int d, int m_c, int s, int conv_dims, bool with_bias) {
  ModelFamily fam{.kind = Kind::TwoLayerTanhCNNNoShare,
                  .d = d,
                  .m_c = m_c,
                  .s = s,
                  .conv_dims = conv_dims,
                  .with_bias = with_bias};
  validate_family(fam);
  return fam;
}

void validate_family(const ModelFamily& fam) {
  switch (fam.kind) {
    case Kind::Linear3:
    case Kind::ReparamLinear4:
      if (fam.d != 2) fail("Linear3/ReparamLinear4 have a fixed input dimension of 2");
      return;
    case Kind::DeepDiagonal:
      if (fam.d < 1) fail("DeepDiagonal requires d >= 1");
      if (fam.L < 2) fail("DeepDiagonal requires depth L >= 2");
      if (fam.squared && fam.L != 2) fail("the squared DeepDiagonal form requires L == 2");
      return;
    case Kind::MatrixFactorization:
      if (fam.d < 1) fail("MatrixFactorization requires d >= 1");
      return;
    case Kind::TwoLayerTanhFC:
      if (fam.d < 1 || fam.m < 0) fail("TwoLayerTanhFC requires d >= 1 and m >= 0");
      return;
    case Kind::TwoLayerTanhCNN:
    case Kind::TwoLayerTanhCNNNoShare:
      if (fam.d < 1 || fam.m_c < 0) fail("CNN families require d >= 1 and m_c >= 0");
      if (fam.conv_dims != 1 && fam.conv_dims != 2) fail("conv_dims must be 1 or 2");
      if (fam.s < 1 || fam.s > fam.d) fail("kernel size must satisfy 1 <= s <= d");
      return;
  }
  fail("unknown model family kind");
}

int conv_positions(const ModelFamily& fam) {
  const int p1 = fam.d + 1 - fam.s;
  return fam.conv_dims == 2 ? p1 * p1 : p1;
}

int conv_taps(const ModelFamily& fam) { return fam.conv_dims == 2 ? fam.s * fam.s : fam.s; }

int conv_tap_index(const ModelFamily& fam, int position, int tap) {
  if (fam.conv_dims == 1) return position + fam.s - 1 - tap;
  const int p1 = fam.d + 1 - fam.s;
  const int j1 = position / p1, j2 = position % p1;
  const int ta = tap / fam.s, tb = tap % fam.s;
  return (j1 + fam.s - 1 - ta) * fam.d + (j2 + fam.s - 1 - tb);
}

int param_count(const ModelFamily& fam) {
  validate_family(fam);
  switch (fam.kind) {
    case Kind::Linear3:
      return 3;
    case Kind::ReparamLinear4:
      return 4;
    case Kind::DeepDiagonal:
      return fam.d * fam.L;
    case Kind::MatrixFactorization:
      return 2 * fam.d * fam.d;
    case Kind::TwoLayerTanhFC:
      return fam.m * (fam.d + 1 + bias_terms(fam));
    case Kind::TwoLayerTanhCNN:
      return fam.m_c * (conv_positions(fam) + conv_taps(fam) + bias_terms(fam));
    case Kind::TwoLayerTanhCNNNoShare:
      return fam.m_c * conv_positions(fam) * (1 + conv_taps(fam) + bias_terms(fam));
  }
  fail("unknown model family kind");
}

int input_length(const ModelFamily& fam) {
  switch (fam.kind) {
    case Kind::Linear3:
    case Kind::ReparamLinear4:
    case Kind::MatrixFactorization:
      return 2;
    case Kind::DeepDiagonal:
    case Kind::TwoLayerTanhFC:
      return fam.d;
    case Kind::TwoLayerTanhCNN:
    case Kind::TwoLayerTanhCNNNoShare:
      return fam.conv_dims == 2 ? fam.d * fam.d : fam.d;
  }
  fail("unknown model family kind");
}

Scalar evaluate(const ModelFamily& fam, const Vector& theta, const Vector& x) {
  check_theta(fam, theta);
  check_input(fam, x);
  switch (fam.kind) {
    case Kind::Linear3:
      return theta[0] + theta[1] * x[0] + theta[2] * x[1];
    case Kind::ReparamLinear4:
      return theta[0] + theta[1] * x[0] + theta[2] * theta[3] * x[1];
    case Kind::DeepDiagonal: {
      Scalar sum = 0;
      for (int j = 0; j < fam.d; ++j) {
        if (fam.squared) {
          sum += (theta[j] * theta[j] - theta[fam.d + j] * theta[fam.d + j]) * x[j];
        } else {
          Scalar prod = 1;
          for (int l = 0; l < fam.L; ++l) prod *= theta[l * fam.d + j];
          sum += prod * x[j];
        }
      }
      return sum;
    }
    case Kind::MatrixFactorization: {
      const int d = fam.d;
      const int i = static_cast<int>(x[0]) - 1, j = static_cast<int>(x[1]) - 1;
      Scalar sum = 0;
      for (int k = 0; k < d; ++k) sum += theta[i * d + k] * theta[d * d + k * d + j];
      return sum;
    }
    case Kind::TwoLayerTanhFC: {
      const int stride = fam.d + 1 + bias_terms(fam);
      Scalar sum = 0;
      for (int i = 0; i < fam.m; ++i) {
        const int off = i * stride;
        Scalar z = fam.with_bias ? theta[off + fam.d + 1] : 0;
        for (int k = 0; k < fam.d; ++k) z += theta[off + 1 + k] * x[k];
        sum += theta[off] * std::tanh(z);
      }
      return sum;
    }
    case Kind::TwoLayerTanhCNN: {
      const int p = conv_positions(fam), S = conv_taps(fam);
      const int stride = p + S + bias_terms(fam);
      Scalar sum = 0;
      for (int i = 0; i < fam.m_c; ++i) {
        const int off = i * stride;
        const Scalar bias = fam.with_bias ? theta[off + p + S] : 0;
        for (int j = 0; j < p; ++j) {
          Scalar z = bias;
          for (int t = 0; t < S; ++t) z += x[conv_tap_index(fam, j, t)] * theta[off + p + t];
          sum += theta[off + j] * std::tanh(z);
        }
      }
      return sum;
    }
    case Kind::TwoLayerTanhCNNNoShare: {
      const int p = conv_positions(fam), S = conv_taps(fam);
      const int unit = 1 + S + bias_terms(fam);
      Scalar sum = 0;
      for (int i = 0; i < fam.m_c; ++i) {
        for (int j = 0; j < p; ++j) {
          const int off = (i * p + j) * unit;
          Scalar z = fam.with_bias ? theta[off + 1 + S] : 0;
          for (int t = 0; t < S; ++t) z += x[conv_tap_index(fam, j, t)] * theta[off + 1 + t];
          sum += theta[off] * std::tanh(z);
        }
      }
      return sum;
    }
  }
  fail("unknown model family kind");
}

void param_gradient(const ModelFamily& fam, const Vector& theta, const Vector& x, Vector& out) {
  check_theta(fam, theta);
  check_input(fam, x);
  out.setZero(theta.size());
  switch (fam.kind) {
    case Kind::Linear3:
      out[0] = 1;
      out[1] = x[0];
      out[2] = x[1];
      return;
    case Kind::ReparamLinear4:
      out[0] = 1;
      out[1] = x[0];
      out[2] = theta[3] * x[1];
      out[3] = theta[2] * x[1];
      return;
    case Kind::DeepDiagonal: {
      if (fam.squared) {
        for (int j = 0; j < fam.d; ++j) {
          out[j] = 2 * theta[j] * x[j];
          out[fam.d + j] = -2 * theta[fam.d + j] * x[j];
        }
        return;
      }
      // prefix/suffix products avoid dividing by (possibly zero) coordinates
      std::vector<Scalar> pre(fam.L + 1), suf(fam.L + 1);
      for (int j = 0; j < fam.d; ++j) {
        pre[0] = 1;
        for (int l = 0; l < fam.L; ++l) pre[l + 1] = pre[l] * theta[l * fam.d + j];
        suf[fam.L] = 1;
        for (int l = fam.L - 1; l >= 0; --l) suf[l] = suf[l + 1] * theta[l * fam.d + j];
        for (int l = 0; l < fam.L; ++l) out[l * fam.d + j] = pre[l] * suf[l + 1] * x[j];
      }
      return;
    }
    case Kind::MatrixFactorization: {
      const int d = fam.d;
      const int i = static_cast<int>(x[0]) - 1, j = static_cast<int>(x[1]) - 1;
      for (int k = 0; k < d; ++k) {
        out[i * d + k] = theta[d * d + k * d + j];  // d entry(i,j) / d A(i,k) = B(k,j)
        out[d * d + k * d + j] = theta[i * d + k];
      }
      return;
    }
    case Kind::TwoLayerTanhFC: {
      const int stride = fam.d + 1 + bias_terms(fam);
      for (int i = 0; i < fam.m; ++i) {
        const int off = i * stride;
        Scalar z = fam.with_bias ? theta[off + fam.d + 1] : 0;
        for (int k = 0; k < fam.d; ++k) z += theta[off + 1 + k] * x[k];
        const Scalar th = std::tanh(z);
        const Scalar g = theta[off] * (1 - th * th);
        out[off] = th;
        for (int k = 0; k < fam.d; ++k) out[off + 1 + k] = g * x[k];
        if (fam.with_bias) out[off + fam.d + 1] = g;
      }
      return;
    }
    case Kind::TwoLayerTanhCNN: {
      const int p = conv_positions(fam), S = conv_taps(fam);
      const int stride = p + S + bias_terms(fam);
      for (int i = 0; i < fam.m_c; ++i) {
        const int off = i * stride;
        const Scalar bias = fam.with_bias ? theta[off + p + S] : 0;
        for (int j = 0; j < p; ++j) {
          Scalar z = bias;
          for (int t = 0; t < S; ++t) z += x[conv_tap_index(fam, j, t)] * theta[off + p + t];
          const Scalar th = std::tanh(z);
          const Scalar g = theta[off + j] * (1 - th * th);
          out[off + j] = th;
          for (int t = 0; t < S; ++t) out[off + p + t] += g * x[conv_tap_index(fam, j, t)];
          if (fam.with_bias) out[off + p + S] += g;
        }
      }
      return;
    }
    case Kind::TwoLayerTanhCNNNoShare: {
      const int p = conv_positions(fam), S = conv_taps(fam);
      const int unit = 1 + S + bias_terms(fam);
      for (int i = 0; i < fam.m_c; ++i) {
        for (int j = 0; j < p; ++j) {
          const int off = (i * p + j) * unit;
          Scalar z = fam.with_bias ? theta[off + 1 + S] : 0;
          for (int t = 0; t < S; ++t) z += x[conv_tap_index(fam, j, t)] * theta[off + 1 + t];
          const Scalar th = std::tanh(z);
          const Scalar g = theta[off] * (1 - th * th);
          out[off] = th;
          for (int t = 0; t < S; ++t) out[off + 1 + t] = g * x[conv_tap_index(fam, j, t)];
          if (fam.with_bias) out[off + 1 + S] = g;
        }
      }
      return;
    }
  }
  fail("unknown model family kind");
}

Vector param_gradient(const ModelFamily& fam, const Vector& theta, const Vector& x) {
  Vector out;
  param_gradient(fam, theta, x, out);
  return out;
}

// --- structured views -------------------------------------------------------

MfParams unpack_mf(const ModelFamily& fam, const Vector& theta) {
  check_theta(fam, theta);
  const int d = fam.d;
  MfParams p{Matrix(d, d), Matrix(d, d)};
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      p.A(i, j) = theta[i * d + j];
      p.B(i, j) = theta[d * d + i * d + j];
    }
  return p;
}

Vector pack_mf(const ModelFamily& fam, const MfParams& p) {
  const int d = fam.d;
  Vector theta(2 * d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      theta[i * d + j] = p.A(i, j);
      theta[d * d + i * d + j] = p.B(i, j);
    }
  return theta;
}

FcParams unpack_fc(const ModelFamily& fam, const Vector& theta) {
  check_theta(fam, theta);
  const int stride = fam.d + 1 + bias_terms(fam);
  FcParams p{Vector(fam.m), Matrix(fam.d, fam.m), Vector(fam.with_bias ? fam.m : 0)};
  for (int i = 0; i < fam.m; ++i) {
    const int off = i * stride;
    p.a[i] = theta[off];
    p.W.col(i) = theta.segment(off + 1, fam.d);
    if (fam.with_bias) p.b[i] = theta[off + fam.d + 1];
  }
  return p;
}

Vector pack_fc(const ModelFamily& fam, const FcParams& p) {
  const int stride = fam.d + 1 + bias_terms(fam);
  Vector theta(param_count(fam));
  for (int i = 0; i < fam.m; ++i) {
    const int off = i * stride;
    theta[off] = p.a[i];
    theta.segment(off + 1, fam.d) = p.W.col(i);
    if (fam.with_bias) theta[off + fam.d + 1] = p.b[i];
  }
  return theta;
}

CnnParams unpack_cnn(const ModelFamily& fam, const Vector& theta) {
  check_theta(fam, theta);
  const int p = conv_positions(fam), S = conv_taps(fam);
  const int stride = p + S + bias_terms(fam);
  CnnParams out{Matrix(p, fam.m_c), Matrix(S, fam.m_c), Vector(fam.with_bias ? fam.m_c : 0)};
  for (int i = 0; i < fam.m_c; ++i) {
    const int off = i * stride;
    out.a.col(i) = theta.segment(off, p);
    out.K.col(i) = theta.segment(off + p, S);
    if (fam.with_bias) out.b[i] = theta[off + p + S];
  }
  return out;
}

Vector pack_cnn(const ModelFamily& fam, const CnnParams& pr) {
  const int p = conv_positions(fam), S = conv_taps(fam);
  const int stride = p + S + bias_terms(fam);
  Vector theta(param_count(fam));
  for (int i = 0; i < fam.m_c; ++i) {
    const int off = i * stride;
    theta.segment(off, p) = pr.a.col(i);
    theta.segment(off + p, S) = pr.K.col(i);
    if (fam.with_bias) theta[off + p + S] = pr.b[i];
  }
  return theta;
}

CnnNoShareParams unpack_cnn_noshare(const ModelFamily& fam, const Vector& theta) {
  check_theta(fam, theta);
  const int p = conv_positions(fam), S = conv_taps(fam);
  const int unit = 1 + S + bias_terms(fam);
  CnnNoShareParams out{Matrix(p, fam.m_c), Matrix(S, fam.m_c * p),
                       fam.with_bias ? Matrix(p, fam.m_c) : Matrix(0, 0)};
  for (int i = 0; i < fam.m_c; ++i)
    for (int j = 0; j < p; ++j) {
      const int off = (i * p + j) * unit;
      out.a(j, i) = theta[off];
      out.K.col(i * p + j) = theta.segment(off + 1, S);
      if (fam.with_bias) out.b(j, i) = theta[off + 1 + S];
    }
  return out;
}

Vector pack_cnn_noshare(const ModelFamily& fam, const CnnNoShareParams& pr) {
  const int p = conv_positions(fam), S = conv_taps(fam);
  const int unit = 1 + S + bias_terms(fam);
  Vector theta(param_count(fam));
  for (int i = 0; i < fam.m_c; ++i)
    for (int j = 0; j < p; ++j) {
      const int off = (i * p + j) * unit;
      theta[off] = pr.a(j, i);
      theta.segment(off + 1, S) = pr.K.col(i * p + j);
      if (fam.with_bias) theta[off + 1 + S] = pr.b(j, i);
    }
  return theta;
}

DeepDiagonalParams unpack_deep_diagonal(const ModelFamily& fam, const Vector& theta) {
  check_theta(fam, theta);
  DeepDiagonalParams p{Matrix(fam.L, fam.d)};
  for (int l = 0; l < fam.L; ++l) p.layers.row(l) = theta.segment(l * fam.d, fam.d).transpose();
  return p;
}

Vector pack_deep_diagonal(const ModelFamily& fam, const DeepDiagonalParams& p) {
  Vector theta(param_count(fam));
  for (int l = 0; l < fam.L; ++l) theta.segment(l * fam.d, fam.d) = p.layers.row(l).transpose();
  return theta;
}

// --- targets ----------------------------------------------------------------

Scalar evaluate_target(const TargetSpec& t, const Vector& x) {
  switch (t.generator.kind) {
    case Kind::Linear3:
      if (x.size() != 2) fail("linear target expects a 2-dimensional input");
      return t.params[0] + t.params[1] * x[0] + t.params[2] * x[1];
    case Kind::DeepDiagonal:
      if (x.size() != t.generator.d) fail("target input length mismatch");
      return t.params.dot(x);
    case Kind::MatrixFactorization: {
      const int d = t.generator.d;
      check_input(t.generator, x);
      const int i = static_cast<int>(x[0]) - 1, j = static_cast<int>(x[1]) - 1;
      return t.params[i * d + j];
    }
    case Kind::TwoLayerTanhFC:
    case Kind::TwoLayerTanhCNN:
    case Kind::TwoLayerTanhCNNNoShare:
      return evaluate(t.generator, t.params, x);
    default:
      fail("target generator kind not supported");
  }
}

void validate_target(const TargetSpec& t) {
  const ModelFamily& g = t.generator;
  switch (g.kind) {
    case Kind::Linear3:
      if (t.params.size() != 3) fail("linear target needs 3 coefficients");
      return;
    case Kind::DeepDiagonal: {
      if (t.params.size() != g.d) fail("sparse linear target needs d coefficients");
      int nonzero = 0;
      for (int j = 0; j < g.d; ++j) nonzero += t.params[j] != 0;
      if (!t.sparsity || *t.sparsity != nonzero)
        fail("target sparsity descriptor does not match its nonzero coefficient count");
      return;
    }
    case Kind::MatrixFactorization: {
      if (t.params.size() != g.d * g.d) fail("completion target needs d*d entries");
      if (!t.matrix_rank) fail("completion target needs a matrix_rank descriptor");
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> M(
          t.params.data(), g.d, g.d);
      Eigen::JacobiSVD<Matrix> svd(M);
      const Vector sv = svd.singularValues();
      int rank = 0;
      for (Index i = 0; i < sv.size(); ++i) rank += sv[i] > 1e-8 * sv[0];
      if (sv[0] == 0) rank = 0;
      if (rank != *t.matrix_rank)
        fail("target matrix has numerical rank " + std::to_string(rank) +
             ", descriptor says " + std::to_string(*t.matrix_rank));
      return;
    }
    case Kind::TwoLayerTanhFC: {
      if (g.with_bias) fail("target generators are bias-free");
      if (!t.intrinsic_width || *t.intrinsic_width != g.m)
        fail("intrinsic width descriptor must equal the generator width");
      const FcParams p = unpack_fc(g, t.params);
      for (int i = 0; i < g.m; ++i) {
        if (p.a[i] == 0) fail("degenerate target: zero output weight");
        if (p.W.col(i).cwiseAbs().maxCoeff() == 0) fail("degenerate target: zero input weight");
        for (int j = 0; j < i; ++j)
          if ((p.W.col(i) - p.W.col(j)).cwiseAbs().maxCoeff() == 0 ||
              (p.W.col(i) + p.W.col(j)).cwiseAbs().maxCoeff() == 0)
            fail("degenerate target: weight pair equal up to sign");
      }
      return;
    }
    case Kind::TwoLayerTanhCNN: {
      if (g.with_bias) fail("target generators are bias-free");
      if (!t.intrinsic_kernels || *t.intrinsic_kernels != g.m_c)
        fail("intrinsic kernel descriptor must equal the generator kernel count");
      const CnnParams p = unpack_cnn(g, t.params);
      for (int i = 0; i < g.m_c; ++i) {
        if (p.a.col(i).cwiseAbs().maxCoeff() == 0) fail("degenerate target: zero output weights");
        if (p.K.col(i).cwiseAbs().maxCoeff() == 0) fail("degenerate target: zero kernel");
        for (int j = 0; j < i; ++j)
          if ((p.K.col(i) - p.K.col(j)).cwiseAbs().maxCoeff() == 0 ||
              (p.K.col(i) + p.K.col(j)).cwiseAbs().maxCoeff() == 0)
            fail("degenerate target: kernel pair equal up to sign");
      }
      return;
    }
    default:
      fail("target generator kind not supported");
  }
}

namespace {

TargetSpec finish(TargetSpec t) {
  validate_target(t);
  return t;
}

TargetSpec linear_target(std::string id, Scalar c0, Scalar c1, Scalar c2) {
  TargetSpec t;
  t.id = std::move(id);
  t.generator = linear3();
  t.params = Vector(3);
  t.params << c0, c1, c2;
  return finish(t);
}

TargetSpec mf_target(std::string id, const Matrix& M) {
  TargetSpec t;
  t.id = std::move(id);
  t.generator = matrix_factorization(static_cast<int>(M.rows()));
  t.params = Vector(M.size());
  const int d = static_cast<int>(M.rows());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) t.params[i * d + j] = M(i, j);
  Eigen::JacobiSVD<Matrix> svd(M);
  const Vector sv = svd.singularValues();
  int rank = 0;
  for (Index i = 0; i < sv.size(); ++i) rank += sv[0] > 0 && sv[i] > 1e-8 * sv[0];
  t.matrix_rank = rank;
  return finish(t);
}

// The completion targets. The third rank-3 matrix printed in the source
// duplicates the first rank-2 one, which would make its transition land two
// columns early; this variant restores rank 3 while keeping the style.
const Scalar kM[8][16] = {
    {1, 0.3, 0.7, -0.4, 2, 0.6, 1.4, -0.8, 4, 1.2, 2.8, -1.6, 7, 2.1, 4.9, -2.8},
    {4, 0.6, 1.8, 0.8, 6, 0.9, 2.7, 1.2, 8, 1.2, 3.6, 1.6, 18, 2.7, 8.1, 3.6},
    {-1.8, 2.4, 7.7, -5.3, 0.4, 1.8, 5.4, -3.6, 3.2, 1.8, 4.8, -3.0, 6.6, 2.4, 5.9, -3.5},
    {7.6, 3.3, 19.8, -7.3, 7.6, 2.1, 10.7, -2.4, 8.8, 1.8, 7.6, -0.2, 19.2, 3.6, 14.1, 0.9},
    {-1.7, 2.6, 7.8, -5.1, 0.2, 1.4, 5.2, -4.0, 3.5, 2.4, 5.1, -2.4, 7.1, 3.4, 6.4, -2.5},
    {8.5, 9.3, 22.5, -6.1, 8.2, 6.1, 12.5, -1.6, 11.5, 19.8, 15.7, 3.4, 20.4, 11.6, 17.7, 2.5},
    {3.6, -1.2, 8.1, -3.5, 8.1, -3.5, 3.6, -1.2, 9.1, -1.7, 11.4, -0.6, 11.4, -0.6, 9.1, -1.7},
    {12.1, 17.3, 24.1, -4.9, 16.3, 24.1, 16.1, 1.1, 14.2, 25.8, 16.9, 4.3, 22.2, 15.6, 18.5, 3.1},
};

TargetSpec fig4_target() {
  TargetSpec t;
  t.id = "fig4-target";
  t.generator = two_layer_tanh_cnn(5, 1, 3);
  // sum over three positions of tanh(0.6 x_j + 0.8 x_{j+1} + x_{j+2}):
  // output weights (1,1,1), kernel taps (1.0, 0.8, 0.6)
  t.params = Vector(6);
  t.params << 1, 1, 1, 1.0, 0.8, 0.6;
  t.intrinsic_kernels = 1;
  t.intrinsic_width = 3;
  return finish(t);
}

bool parse_kv(const std::string& body, std::vector<std::pair<std::string, std::string>>& out) {
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) return false;
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return true;
}

}  // namespace

bool is_builtin_target(const std::string& id) {
  for (const auto& name : builtin_target_ids())
    if (name == id) return true;
  return id.rfind("linear:", 0) == 0 || id.rfind("zero-mf:", 0) == 0 ||
         id.rfind("zero-deepdiag:", 0) == 0 || id.rfind("mf:", 0) == 0 ||
         id.rfind("fc:", 0) == 0 || id.rfind("cnn:", 0) == 0 || id.rfind("deepdiag:", 0) == 0;
}

std::vector<std::string> builtin_target_ids() {
  return {"M1", "M2", "M3", "M4",   "M5",    "M6",      "M7",        "M8",
          "fig4-target", "1", "x1", "1+x1", "x2", "1+x2", "x1+x2", "1+x1+x2"};
}

TargetSpec builtin_target(const std::string& id) {
  if (id.size() == 2 && id[0] == 'M' && id[1] >= '1' && id[1] <= '8') {
    const int k = id[1] - '1';
    Matrix M(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) M(i, j) = kM[k][i * 4 + j];
    return mf_target(id, M);
  }
  if (id == "fig4-target") return fig4_target();
  if (id == "1") return linear_target(id, 1, 0, 0);
  if (id == "x1") return linear_target(id, 0, 1, 0);
  if (id == "1+x1") return linear_target(id, 1, 1, 0);
  if (id == "x2") return linear_target(id, 0, 0, 1);
  if (id == "1+x2") return linear_target(id, 1, 0, 1);
  if (id == "x1+x2") return linear_target(id, 0, 1, 1);
  if (id == "1+x1+x2") return linear_target(id, 1, 1, 1);
  if (id.rfind("linear:", 0) == 0) {
    std::stringstream ss(id.substr(7));
    Scalar c[3];
    char comma;
    if (ss >> c[0] >> comma >> c[1] >> comma >> c[2]) return linear_target(id, c[0], c[1], c[2]);
    fail("malformed linear target id: " + id);
  }
  if (id.rfind("zero-mf:", 0) == 0) {
    const int d = std::stoi(id.substr(8));
    return mf_target(id, Matrix::Zero(d, d));
  }
  if (id.rfind("zero-deepdiag:", 0) == 0) {
    const int d = std::stoi(id.substr(14));
    TargetSpec t;
    t.id = id;
    t.generator = deep_diagonal(d, 2, true);
    t.params = Vector::Zero(d);
    t.sparsity = 0;
    return finish(t);
  }
  // parametric grammar: mf:d=4,r=2,seed=7 | fc:d=5,k=2,seed=7 |
  // cnn:d=5,s=3,k=1,seed=7 | deepdiag:d=6,k=2,seed=7
  const auto colon = id.find(':');
  if (colon != std::string::npos) {
    const std::string head = id.substr(0, colon);
    std::vector<std::pair<std::string, std::string>> kv;
    if (parse_kv(id.substr(colon + 1), kv)) {
      int d = 0, r = -1, k = -1, s = 0;
      std::uint64_t seed = 0;
      for (const auto& [key, val] : kv) {
        if (key == "d") d = std::stoi(val);
        else if (key == "r") r = std::stoi(val);
        else if (key == "k") k = std::stoi(val);
        else if (key == "s") s = std::stoi(val);
        else if (key == "seed") seed = std::stoull(val);
        else fail("unknown key '" + key + "' in target id: " + id);
      }
      TargetRequest req;
      req.seed = seed;
      if (head == "mf" && d > 0 && r >= 0) {
        req.family = matrix_factorization(d);
        req.complexity = r;
      } else if (head == "fc" && d > 0 && k >= 0) {
        req.family = two_layer_tanh_fc(d, k);
        req.complexity = k;
      } else if (head == "cnn" && d > 0 && k >= 0 && s > 0) {
        req.family = two_layer_tanh_cnn(d, k, s);
        req.complexity = k;
      } else if (head == "deepdiag" && d > 0 && k >= 0) {
        req.family = deep_diagonal(d, 2, true);
        req.complexity = k;
      } else {
        fail("malformed target id: " + id);
      }
      TargetSpec t = make_target(req);
      t.id = id;
      return t;
    }
  }
  fail("unknown target id: " + id);
}

TargetSpec make_target(const TargetRequest& req) {
  validate_family(req.family);
  auto rng = make_rng(mix_seed(req.seed, {kTargetGen}));
  TargetSpec t;
  const ModelFamily& fam = req.family;
  switch (fam.kind) {
    case Kind::Linear3:
    case Kind::ReparamLinear4: {
      if (req.complexity != 2 && req.complexity != 3)
        fail("linear target complexity must be 2 (no x2 term) or 3");
      const Scalar c0 = signed_unit(rng), c1 = signed_unit(rng);
      const Scalar c2 = req.complexity == 3 ? signed_unit(rng) : 0;
      std::ostringstream os;
      os << "linear:" << c0 << "," << c1 << "," << c2;
      return linear_target(os.str(), c0, c1, c2);
    }
    case Kind::DeepDiagonal: {
      const int k = req.complexity;
      if (k < 0 || k > fam.d) fail("sparsity must satisfy 0 <= k <= d");
      t.generator = deep_diagonal(fam.d, 2, true);
      t.params = Vector::Zero(fam.d);
      std::vector<int> idx(fam.d);
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng);
      for (int i = 0; i < k; ++i) t.params[idx[i]] = signed_unit(rng);
      t.sparsity = k;
      t.id = "deepdiag:d=" + std::to_string(fam.d) + ",k=" + std::to_string(k) +
             ",seed=" + std::to_string(req.seed);
      return finish(t);
    }
    case Kind::MatrixFactorization: {
      const int r = req.complexity, d = fam.d;
      if (r < 0 || r > d) fail("matrix rank must satisfy 0 <= r <= d");
      Matrix M = Matrix::Zero(d, d);
      if (r > 0) {
        const Matrix U = Eigen::HouseholderQR<Matrix>(normal_matrix(rng, d, d)).householderQ();
        const Matrix V = Eigen::HouseholderQR<Matrix>(normal_matrix(rng, d, d)).householderQ();
        std::uniform_real_distribution<Scalar> mag(0.5, 1.5);
        Vector sv(r);
        for (int i = 0; i < r; ++i) sv[i] = mag(rng);
        M = U.leftCols(r) * sv.asDiagonal() * V.leftCols(r).transpose();
      }
      TargetSpec out = mf_target("mf:d=" + std::to_string(d) + ",r=" + std::to_string(r) +
                                     ",seed=" + std::to_string(req.seed),
                                 M);
      if (*out.matrix_rank != r) fail("random target construction lost rank");
      return out;
    }
    case Kind::TwoLayerTanhFC: {
      const int k = req.complexity;
      if (k < 0 || (fam.m > 0 && k > fam.m)) fail("intrinsic width must satisfy 0 <= k <= m");
      t.generator = two_layer_tanh_fc(fam.d, k);
      FcParams p{Vector(k), Matrix(fam.d, k), Vector(0)};
      for (int i = 0; i < k; ++i) {
        p.a[i] = signed_unit(rng);
        for (int j = 0; j < fam.d; ++j) p.W(j, i) = signed_unit(rng);
      }
      t.params = pack_fc(t.generator, p);
      t.intrinsic_width = k;
      t.id = "fc:d=" + std::to_string(fam.d) + ",k=" + std::to_string(k) +
             ",seed=" + std::to_string(req.seed);
      return finish(t);
    }
    case Kind::TwoLayerTanhCNN:
    case Kind::TwoLayerTanhCNNNoShare: {
      const int k = req.complexity;
      if (k < 0 || (fam.m_c > 0 && k > fam.m_c))
        fail("intrinsic kernel count must satisfy 0 <= k <= m_c");
      t.generator = two_layer_tanh_cnn(fam.d, k, fam.s, fam.conv_dims);
      const int p = conv_positions(t.generator), S = conv_taps(t.generator);
      CnnParams pr{Matrix(p, k), Matrix(S, k), Vector(0)};
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < p; ++j) pr.a(j, i) = signed_unit(rng);
        for (int tp = 0; tp < S; ++tp) pr.K(tp, i) = signed_unit(rng);
      }
      t.params = pack_cnn(t.generator, pr);
      t.intrinsic_kernels = k;
      t.intrinsic_width = k * p;  // all output weights nonzero by construction
      t.id = "cnn:d=" + std::to_string(fam.d) + ",s=" + std::to_string(fam.s) +
             ",k=" + std::to_string(k) + ",seed=" + std::to_string(req.seed);
      return finish(t);
    }
  }
  fail("unknown model family kind");
}

std::vector<FcNeuron> fc_neurons_of_target(const TargetSpec& t) {
  std::vector<FcNeuron> neurons;
  if (t.generator.kind == Kind::TwoLayerTanhFC) {
    const FcParams p = unpack_fc(t.generator, t.params);
    for (int i = 0; i < t.generator.m; ++i) neurons.push_back({p.a[i], p.W.col(i)});
    return neurons;
  }
  if (t.generator.kind == Kind::TwoLayerTanhCNN) {
    const CnnParams p = unpack_cnn(t.generator, t.params);
    const int pos = conv_positions(t.generator), S = conv_taps(t.generator);
    for (int i = 0; i < t.generator.m_c; ++i)
      for (int j = 0; j < pos; ++j) {
        if (p.a(j, i) == 0) continue;
        Vector w = Vector::Zero(input_length(t.generator));
        for (int tp = 0; tp < S; ++tp) w[conv_tap_index(t.generator, j, tp)] += p.K(tp, i);
        neurons.push_back({p.a(j, i), std::move(w)});
      }
    return neurons;
  }
  fail("target has no fully-connected representation");
}

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Linear3: return "linear3";
    case Kind::ReparamLinear4: return "reparam_linear4";
    case Kind::DeepDiagonal: return "deep_diagonal";
    case Kind::MatrixFactorization: return "matrix_factorization";
    case Kind::TwoLayerTanhFC: return "two_layer_tanh_fc";
    case Kind::TwoLayerTanhCNN: return "two_layer_tanh_cnn";
    case Kind::TwoLayerTanhCNNNoShare: return "two_layer_tanh_cnn_noshare";
  }
  return "unknown";
}

Kind kind_from_name(const std::string& name) {
  for (Kind k : {Kind::Linear3, Kind::ReparamLinear4, Kind::DeepDiagonal,
                 Kind::MatrixFactorization, Kind::TwoLayerTanhFC, Kind::TwoLayerTanhCNN,
                 Kind::TwoLayerTanhCNNNoShare})
    if (name == kind_name(k)) return k;
  throw ConfigError("unknown model family kind: " + name);
}

}  // namespace optrank

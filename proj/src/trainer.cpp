#include "optrank/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "optrank/rng.hpp"

namespace optrank {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

using RowMajorMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Batched loss/gradient evaluation with preallocated buffers. One instance per
// (family, input set); not thread-safe, independent instances are.
class LossKernel {
 public:
  LossKernel(const ModelFamily& fam, const Matrix& inputs) : fam_(fam), X_(inputs) {
    n_ = X_.rows();
    const Scalar nd = static_cast<Scalar>(n_);
    inv_n_ = n_ > 0 ? 1.0 / nd : 0.0;
    switch (fam_.kind) {
      case Kind::MatrixFactorization:
        ri_.resize(n_);
        ci_.resize(n_);
        for (Index q = 0; q < n_; ++q) {
          ri_[q] = static_cast<int>(X_(q, 0)) - 1;
          ci_[q] = static_cast<int>(X_(q, 1)) - 1;
        }
        break;
      case Kind::TwoLayerTanhCNN:
      case Kind::TwoLayerTanhCNNNoShare: {
        const int p = conv_positions(fam_), S = conv_taps(fam_);
        XW_.resize(n_, p * S);
        for (int j = 0; j < p; ++j)
          for (int t = 0; t < S; ++t) XW_.col(j * S + t) = X_.col(conv_tap_index(fam_, j, t));
        break;
      }
      default:
        break;
    }
  }

  Scalar loss(const Vector& theta, const Vector& y) {
    Vector unused;
    return eval(theta, y, nullptr);
  }

  Scalar loss_grad(const Vector& theta, const Vector& y, Vector& grad) {
    grad.setZero(theta.size());
    return eval(theta, y, &grad);
  }

 private:
  Scalar eval(const Vector& theta, const Vector& y, Vector* grad) {
    if (n_ == 0) return 0;
    switch (fam_.kind) {
      case Kind::Linear3:
        return eval_linear3(theta, y, grad);
      case Kind::ReparamLinear4:
        return eval_reparam4(theta, y, grad);
      case Kind::DeepDiagonal:
        return eval_deep_diagonal(theta, y, grad);
      case Kind::MatrixFactorization:
        return eval_mf(theta, y, grad);
      case Kind::TwoLayerTanhFC:
        return eval_fc(theta, y, grad);
      case Kind::TwoLayerTanhCNN:
        return eval_cnn(theta, y, grad);
      case Kind::TwoLayerTanhCNNNoShare:
        return eval_cnn_noshare(theta, y, grad);
    }
    fail("unknown model family kind");
  }

  Scalar eval_linear3(const Vector& theta, const Vector& y, Vector* grad) {
    r_.noalias() = X_ * theta.tail<2>();
    r_.array() += theta[0];
    r_ -= y;
    const Scalar l = r_.squaredNorm() * inv_n_;
    if (grad) {
      const Scalar c = 2 * inv_n_;
      (*grad)[0] = c * r_.sum();
      grad->tail<2>().noalias() = c * (X_.transpose() * r_);
    }
    return l;
  }

  Scalar eval_reparam4(const Vector& theta, const Vector& y, Vector* grad) {
    r_ = theta[1] * X_.col(0) + (theta[2] * theta[3]) * X_.col(1);
    r_.array() += theta[0];
    r_ -= y;
    const Scalar l = r_.squaredNorm() * inv_n_;
    if (grad) {
      const Scalar c = 2 * inv_n_;
      const Scalar rx2 = c * r_.dot(X_.col(1));
      (*grad)[0] = c * r_.sum();
      (*grad)[1] = c * r_.dot(X_.col(0));
      (*grad)[2] = rx2 * theta[3];
      (*grad)[3] = rx2 * theta[2];
    }
    return l;
  }

  Scalar eval_deep_diagonal(const Vector& theta, const Vector& y, Vector* grad) {
    const int d = fam_.d, L = fam_.L;
    coef_.resize(d);
    for (int j = 0; j < d; ++j) {
      if (fam_.squared) {
        coef_[j] = theta[j] * theta[j] - theta[d + j] * theta[d + j];
      } else {
        Scalar prod = 1;
        for (int l = 0; l < L; ++l) prod *= theta[l * d + j];
        coef_[j] = prod;
      }
    }
    r_.noalias() = X_ * coef_;
    r_ -= y;
    const Scalar l = r_.squaredNorm() * inv_n_;
    if (grad) {
      u_.noalias() = (2 * inv_n_) * (X_.transpose() * r_);
      if (fam_.squared) {
        for (int j = 0; j < d; ++j) {
          (*grad)[j] = 2 * theta[j] * u_[j];
          (*grad)[d + j] = -2 * theta[d + j] * u_[j];
        }
      } else {
        std::vector<Scalar> pre(L + 1), suf(L + 1);
        for (int j = 0; j < d; ++j) {
          pre[0] = 1;
          for (int l = 0; l < L; ++l) pre[l + 1] = pre[l] * theta[l * d + j];
          suf[L] = 1;
          for (int l = L - 1; l >= 0; --l) suf[l] = suf[l + 1] * theta[l * d + j];
          for (int l = 0; l < L; ++l) (*grad)[l * d + j] = pre[l] * suf[l + 1] * u_[j];
        }
      }
    }
    return l;
  }

  Scalar eval_mf(const Vector& theta, const Vector& y, Vector* grad) {
    const int d = fam_.d;
    RowMajorMap A(theta.data(), d, d), B(theta.data() + d * d, d, d);
    Scalar sq = 0;
    if (!grad) {
      for (Index q = 0; q < n_; ++q) {
        const Scalar r = A.row(ri_[q]).dot(B.col(ci_[q])) - y[q];
        sq += r * r;
      }
      return sq * inv_n_;
    }
    RowMajorMutMap GA(grad->data(), d, d), GB(grad->data() + d * d, d, d);
    const Scalar c = 2 * inv_n_;
    for (Index q = 0; q < n_; ++q) {
      const int i = ri_[q], j = ci_[q];
      const Scalar r = A.row(i).dot(B.col(j)) - y[q];
      sq += r * r;
      GA.row(i) += (c * r) * B.col(j).transpose();
      GB.col(j) += (c * r) * A.row(i).transpose();
    }
    return sq * inv_n_;
  }

  Scalar eval_fc(const Vector& theta, const Vector& y, Vector* grad) {
    const int d = fam_.d, m = fam_.m;
    const int stride = d + 1 + (fam_.with_bias ? 1 : 0);
    W_.resize(d, m);
    a_.resize(m);
    for (int i = 0; i < m; ++i) {
      const int off = i * stride;
      a_[i] = theta[off];
      W_.col(i) = theta.segment(off + 1, d);
    }
    T_.resize(n_, m);
    T_.noalias() = X_ * W_;
    if (fam_.with_bias)
      for (int i = 0; i < m; ++i) T_.col(i).array() += theta[i * stride + d + 1];
    T_ = T_.array().tanh();
    r_.noalias() = T_ * a_;
    r_ -= y;
    const Scalar l = r_.squaredNorm() * inv_n_;
    if (grad) {
      const Scalar c = 2 * inv_n_;
      // D(q,i) = r_q a_i (1 - T(q,i)^2)
      D_ = ((1 - T_.array().square()).colwise() * r_.array()).rowwise() * a_.transpose().array();
      GW_.resize(d, m);
      GW_.noalias() = X_.transpose() * D_;
      ga_.noalias() = T_.transpose() * r_;
      for (int i = 0; i < m; ++i) {
        const int off = i * stride;
        (*grad)[off] = c * ga_[i];
        grad->segment(off + 1, d) = c * GW_.col(i);
        if (fam_.with_bias) (*grad)[off + d + 1] = c * D_.col(i).sum();
      }
    }
    return l;
  }

  Scalar eval_cnn(const Vector& theta, const Vector& y, Vector* grad) {
    const int p = conv_positions(fam_), S = conv_taps(fam_), m = fam_.m_c;
    const int stride = p + S + (fam_.with_bias ? 1 : 0);
    r_ = -y;
    T_.resize(n_, p);
    D_.resize(n_, p);
    if (grad) Tall_.resize(n_, p * m);
    for (int i = 0; i < m; ++i) {
      const int off = i * stride;
      for (int j = 0; j < p; ++j)
        T_.col(j).noalias() = XW_.middleCols(j * S, S) * theta.segment(off + p, S);
      if (fam_.with_bias) T_.array() += theta[off + p + S];
      T_ = T_.array().tanh();
      r_.noalias() += T_ * theta.segment(off, p);
      if (grad) Tall_.middleCols(i * p, p) = T_;
    }
    const Scalar l = r_.squaredNorm() * inv_n_;
    if (grad) {
      const Scalar c = 2 * inv_n_;
      for (int i = 0; i < m; ++i) {
        const int off = i * stride;
        auto Ti = Tall_.middleCols(i * p, p);
        grad->segment(off, p).noalias() = c * (Ti.transpose() * r_);
        D_ = ((1 - Ti.array().square()).colwise() * r_.array()).rowwise() *
             theta.segment(off, p).transpose().array();
        for (int j = 0; j < p; ++j)
          grad->segment(off + p, S).noalias() += c * (XW_.middleCols(j * S, S).transpose() * D_.col(j));
        if (fam_.with_bias) (*grad)[off + p + S] = c * D_.sum();
      }
    }
    return l;
  }

  Scalar eval_cnn_noshare(const Vector& theta, const Vector& y, Vector* grad) {
    const int p = conv_positions(fam_), S = conv_taps(fam_), m = fam_.m_c;
    const int unit = 1 + S + (fam_.with_bias ? 1 : 0);
    r_ = -y;
    if (grad) Tall_.resize(n_, p * m);
    else T_.resize(n_, 1);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < p; ++j) {
        const int off = (i * p + j) * unit;
        auto dst = grad ? Tall_.col(i * p + j) : T_.col(0);
        dst.noalias() = XW_.middleCols(j * S, S) * theta.segment(off + 1, S);
        if (fam_.with_bias) dst.array() += theta[off + 1 + S];
        dst = dst.array().tanh();
        r_.noalias() += theta[off] * dst;
      }
    const Scalar l = r_.squaredNorm() * inv_n_;
    if (grad) {
      const Scalar c = 2 * inv_n_;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < p; ++j) {
          const int off = (i * p + j) * unit;
          auto Tij = Tall_.col(i * p + j);
          (*grad)[off] = c * Tij.dot(r_);
          u_ = theta[off] * ((1 - Tij.array().square()) * r_.array());
          grad->segment(off + 1, S).noalias() = c * (XW_.middleCols(j * S, S).transpose() * u_);
          if (fam_.with_bias) (*grad)[off + 1 + S] = c * u_.sum();
        }
    }
    return l;
  }

  ModelFamily fam_;
  Matrix X_;
  Index n_ = 0;
  Scalar inv_n_ = 0;
  std::vector<int> ri_, ci_;
  Matrix XW_;                       // n x (positions * taps) window matrix
  Matrix W_, GW_, T_, D_, Tall_;
  Vector a_, ga_, r_, u_, coef_;
};

Scalar finite_or_inf(Scalar x) {
  return std::isfinite(x) ? x : std::numeric_limits<Scalar>::infinity();
}

}  // namespace

void validate_config(const TrainConfig& cfg) {
  if (!(cfg.init_std > 0)) fail("init_std must be positive");
  if (!(cfg.learning_rate >= 0)) fail("learning_rate must be non-negative");
  if (!(cfg.stop_train_mse > 0 && cfg.stop_train_mse < 1))
    fail("stop_train_mse must lie in (0, 1)");
  if (cfg.max_iters < 0) fail("max_iters must be non-negative");
  if (cfg.trace_every < 0) fail("trace_every must be non-negative");
}

namespace {

std::vector<std::pair<int, int>> pivot_cross_order(const Matrix& M) {
  const int d = static_cast<int>(M.rows());
  Matrix S = M;
  std::vector<int> rows(d), cols(d);
  std::iota(rows.begin(), rows.end(), 0);
  std::iota(cols.begin(), cols.end(), 0);
  std::vector<std::pair<int, int>> pivots;
  for (int lvl = 0; lvl < d; ++lvl) {
    int bi = 0, bj = 0;
    Scalar best = -1;
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = 0; b < cols.size(); ++b)
        if (std::abs(S(rows[a], cols[b])) > best) {
          best = std::abs(S(rows[a], cols[b]));
          bi = static_cast<int>(a);
          bj = static_cast<int>(b);
        }
    const int pi = rows[bi], pj = cols[bj];
    pivots.emplace_back(pi, pj);
    rows.erase(rows.begin() + bi);
    cols.erase(cols.begin() + bj);
    if (std::abs(S(pi, pj)) > 1e-12)
      for (int i : rows)
        for (int j : cols) S(i, j) -= S(i, pj) * S(pi, j) / S(pi, pj);
  }
  return pivots;
}

// Entries of the d x d grid in cross-by-cross revelation order; the order
// inside each cross increment is shuffled.
std::vector<std::pair<int, int>> mf_reveal_order(const TargetSpec& t, MfSampling sampling,
                                                 std::mt19937_64& rng) {
  const int d = t.generator.d;
  std::vector<std::pair<int, int>> order;
  if (sampling == MfSampling::Uniform) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) order.emplace_back(i, j);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
  }
  Matrix M(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) M(i, j) = t.params[i * d + j];
  const auto pivots = pivot_cross_order(M);
  for (int lvl = 0; lvl < d; ++lvl) {
    std::vector<std::pair<int, int>> inc;
    for (int b = lvl; b < d; ++b) inc.emplace_back(pivots[lvl].first, pivots[b].second);
    for (int a = lvl + 1; a < d; ++a) inc.emplace_back(pivots[a].first, pivots[lvl].second);
    std::shuffle(inc.begin(), inc.end(), rng);
    order.insert(order.end(), inc.begin(), inc.end());
  }
  return order;
}

}  // namespace

Dataset sample_dataset(const TargetSpec& t, int n, std::uint64_t seed, Split split,
                       MfSampling sampling) {
  if (n < 0) fail("sample size must be non-negative");
  Dataset ds;
  ds.target_id = t.id;
  ds.seed = seed;
  ds.split = split;
  auto rng = make_rng(mix_seed(seed, {split == Split::Train ? kTrainData : kTestData}));
  if (t.generator.kind == Kind::MatrixFactorization) {
    const int d = t.generator.d;
    if (split == Split::Train && n > d * d)
      fail("completion targets have at most d*d observable entries");
    std::vector<std::pair<int, int>> entries;
    if (split == Split::Test) {  // the test metric runs over every entry
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) entries.emplace_back(i, j);
    } else {
      auto order = mf_reveal_order(t, sampling, rng);
      entries.assign(order.begin(), order.begin() + n);
    }
    ds.inputs.resize(static_cast<Index>(entries.size()), 2);
    ds.outputs.resize(static_cast<Index>(entries.size()));
    for (std::size_t q = 0; q < entries.size(); ++q) {
      ds.inputs(static_cast<Index>(q), 0) = entries[q].first + 1;
      ds.inputs(static_cast<Index>(q), 1) = entries[q].second + 1;
      ds.outputs[static_cast<Index>(q)] = t.params[entries[q].first * d + entries[q].second];
    }
    return ds;
  }
  const int len = input_length(t.generator);
  ds.inputs = normal_matrix(rng, n, len);
  ds.outputs.resize(n);
  for (int q = 0; q < n; ++q)
    ds.outputs[q] = evaluate_target(t, ds.inputs.row(q).transpose());
  return ds;
}

Scalar mse(const ModelFamily& fam, const Vector& theta, const Dataset& data) {
  if (data.size() == 0) return 0;
  LossKernel kernel(fam, data.inputs);
  return kernel.loss(theta, data.outputs);
}

Scalar mse_gradient(const ModelFamily& fam, const Vector& theta, const Dataset& data,
                    Vector& grad) {
  LossKernel kernel(fam, data.inputs);
  if (data.size() == 0) {
    grad.setZero(theta.size());
    return 0;
  }
  return kernel.loss_grad(theta, data.outputs, grad);
}

TrainResult gd_fit(const ModelFamily& fam, const Dataset& train, const Dataset& test,
                   const TrainConfig& cfg) {
  validate_config(cfg);
  const int M = param_count(fam);
  TrainResult res;
  res.learning_rate = cfg.learning_rate;
  auto rng = make_rng(mix_seed(cfg.seed, {kInitPoint}));
  res.theta = normal_vector(rng, M, cfg.init_std);
  if (train.size() == 0) {
    res.converged = true;  // nothing to fit
    res.train_mse = 0;
    res.test_mse = mse(fam, res.theta, test);
    return res;
  }
  if (train.inputs.cols() != input_length(fam)) fail("train set input length mismatch");
  LossKernel kernel(fam, train.inputs);
  Vector grad(M), prev = res.theta;
  for (long t = 0;; ++t) {
    const Scalar l = kernel.loss_grad(res.theta, train.outputs, grad);
    if (cfg.trace_every > 0 && t % cfg.trace_every == 0) res.trace.emplace_back(t, l);
    res.iterations = t;
    if (!std::isfinite(l)) {
      res.diverged = true;
      if (t > 0) res.theta = prev;  // report the last finite iterate
      res.train_mse = kernel.loss(res.theta, train.outputs);
      break;
    }
    res.train_mse = l;
    if (l <= cfg.stop_train_mse) {
      res.converged = true;
      break;
    }
    if (l > kDivergenceMse) {
      res.diverged = true;
      break;
    }
    if (t == cfg.max_iters) break;
    prev = res.theta;
    res.theta -= cfg.learning_rate * grad;
  }
  res.test_mse = mse(fam, res.theta, test);
  return res;
}

TrainResult lr_search(const ModelFamily& fam, const Dataset& train, const Dataset& test,
                      const TrainConfig& base, const std::vector<Scalar>& lr_grid) {
  if (lr_grid.empty()) fail("learning-rate grid must be non-empty");
  TrainResult best;
  bool have = false;
  for (const Scalar lr : lr_grid) {
    TrainConfig cfg = base;
    cfg.learning_rate = lr;
    TrainResult r = gd_fit(fam, train, test, cfg);
    if (!have) {
      best = std::move(r);
      have = true;
      continue;
    }
    if (r.converged != best.converged) {
      if (r.converged) best = std::move(r);
      continue;
    }
    if (r.converged) {
      if (finite_or_inf(r.test_mse) < finite_or_inf(best.test_mse)) best = std::move(r);
    } else {
      if (finite_or_inf(r.train_mse) < finite_or_inf(best.train_mse)) best = std::move(r);
    }
  }
  return best;
}

}  // namespace optrank

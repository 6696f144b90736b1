#include "stepnav/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>

namespace stepnav {

namespace {

/// Kernel rows of the standardized training set with LRU eviction.
class KernelCache {
 public:
  KernelCache(const MatrixX& X, KernelKind kind, std::size_t bytes)
      : X_(X), kind_(kind), rows_(static_cast<std::size_t>(X.rows())), where_(rows_.size()) {
    const std::size_t per_row = std::max<std::size_t>(1, rows_.size() * sizeof(double));
    capacity_ = std::max<std::size_t>(2, bytes / per_row);
  }

  const VectorX& row(Eigen::Index i) {
    const auto k = static_cast<std::size_t>(i);
    if (rows_[k].size() != 0) {
      lru_.splice(lru_.begin(), lru_, where_[k]);
      return rows_[k];
    }
    if (lru_.size() >= capacity_) {
      const std::size_t victim = lru_.back();
      lru_.pop_back();
      rows_[victim] = VectorX();
    }
    VectorX r = X_ * X_.row(i).transpose();
    if (kind_ == KernelKind::Poly2) r = (r.array() + 1.0).square().matrix();
    rows_[k] = std::move(r);
    lru_.push_front(k);
    where_[k] = lru_.begin();
    return rows_[k];
  }

 private:
  const MatrixX& X_;
  KernelKind kind_;
  std::vector<VectorX> rows_;
  std::vector<std::list<std::size_t>::iterator> where_;
  std::list<std::size_t> lru_;
  std::size_t capacity_;
};

}  // namespace

int label_from_step(double dt) {
  if (std::abs(dt - kFineStep) < 1e-9) return 1;
  if (std::abs(dt - kCoarseStep) < 1e-9) return -1;
  throw ValidationError("step " + std::to_string(dt) + " is not one of the two classes");
}

double step_from_label(int label) { return label > 0 ? kFineStep : kCoarseStep; }

std::string_view to_string(KernelKind k) { return k == KernelKind::Linear ? "linear" : "poly2"; }

KernelKind kernel_from_string(std::string_view s) {
  if (s == "linear") return KernelKind::Linear;
  if (s == "poly2" || s == "quadratic") return KernelKind::Poly2;
  throw ValidationError("unknown kernel: " + std::string(s));
}

Standardizer Standardizer::fit(const MatrixX& X) {
  if (X.rows() == 0) throw ValidationError("cannot standardize an empty matrix");
  Standardizer s;
  s.mean = X.colwise().mean().transpose();
  s.scale = VectorX::Ones(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double var = (X.col(j).array() - s.mean(j)).square().mean();
    if (var > 0.0) s.scale(j) = std::sqrt(var);
  }
  return s;
}

VectorX Standardizer::apply(const VectorX& x) const {
  if (x.size() != mean.size()) throw ValidationError("feature dimension mismatch");
  return (x - mean).cwiseQuotient(scale);
}

MatrixX Standardizer::apply(const MatrixX& X) const {
  if (X.cols() != mean.size()) throw ValidationError("feature dimension mismatch");
  MatrixX out = X.rowwise() - mean.transpose();
  for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) /= scale(j);
  return out;
}

double kernel_value(KernelKind k, const VectorX& a, const VectorX& b) {
  const double d = a.dot(b);
  return k == KernelKind::Linear ? d : (d + 1.0) * (d + 1.0);
}

double SvmModel::decision(const VectorX& raw) const {
  const VectorX z = standardizer.apply(raw);
  if (kernel == KernelKind::Linear && weights.size() == z.size()) return weights.dot(z) + bias;
  double s = bias;
  for (Eigen::Index i = 0; i < support.rows(); ++i) {
    s += coef(i) * kernel_value(kernel, support.row(i).transpose(), z);
  }
  return s;
}

double SvmModel::decision(const Features& raw) const {
  return decision(VectorX(Eigen::Map<const VectorX>(raw.data(), kFeatureCount)));
}

SvmModel train_svm(const MatrixX& X, const std::vector<int>& y, const SvmParams& params) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (n != y.size()) throw ValidationError("feature and label counts differ");
  if (!(params.C > 0.0)) throw ValidationError("C must be > 0");
  if (!X.allFinite()) throw ValidationError("training features must be finite");
  std::size_t pos = 0, neg = 0;
  for (int v : y) {
    if (v == 1) ++pos;
    else if (v == -1) ++neg;
    else throw ValidationError("labels must be +1 or -1");
  }
  if (pos < 2 || neg < 2) throw ValidationError("training needs at least two examples of each class");

  SvmModel model;
  model.kernel = params.kernel;
  model.C = params.C;
  model.standardizer = Standardizer::fit(X);
  const MatrixX Z = model.standardizer.apply(X);

  const double C = params.C;
  std::vector<double> alpha(n, 0.0), grad(n, -1.0), diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = Z.row(static_cast<Eigen::Index>(i));
    diag[i] = kernel_value(params.kernel, r.transpose(), r.transpose());
  }
  KernelCache cache(Z, params.kernel, params.cache_bytes);

  auto in_up = [&](std::size_t t) { return y[t] == 1 ? alpha[t] < C : alpha[t] > 0.0; };
  auto in_low = [&](std::size_t t) { return y[t] == 1 ? alpha[t] > 0.0 : alpha[t] < C; };

  const std::int64_t max_iterations =
      params.max_iterations > 0 ? params.max_iterations
                                : std::max<std::int64_t>(1'000'000, 100 * static_cast<std::int64_t>(n));
  SvmTrainingInfo& info = model.info;
  constexpr double kTau = 1e-12;
  while (true) {
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > g_max) g_max = v, i = t;
      if (in_low(t) && v < g_min) g_min = v, j = t;
    }
    info.final_gap = g_max - g_min;
    if (i == n || j == n || info.final_gap <= params.tolerance) {
      info.converged = true;
      break;
    }
    if (info.iterations >= max_iterations) break;
    ++info.iterations;

    const VectorX Ki = cache.row(static_cast<Eigen::Index>(i));
    const VectorX& Kj = cache.row(static_cast<Eigen::Index>(j));
    const double kij = Ki(static_cast<Eigen::Index>(j));
    const double ai_old = alpha[i], aj_old = alpha[j];
    double& ai = alpha[i];
    double& aj = alpha[j];

    if (y[i] != y[j]) {
      double quad = diag[i] + diag[j] - 2.0 * kij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) aj = 0.0, ai = diff;
      } else if (ai < 0.0) {
        ai = 0.0, aj = -diff;
      }
      if (diff > 0.0) {
        if (ai > C) ai = C, aj = C - diff;
      } else if (aj > C) {
        aj = C, ai = C + diff;
      }
    } else {
      double quad = diag[i] + diag[j] - 2.0 * kij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > C) {
        if (ai > C) ai = C, aj = sum - C;
      } else if (aj < 0.0) {
        aj = 0.0, ai = sum;
      }
      if (sum > C) {
        if (aj > C) aj = C, ai = sum - C;
      } else if (ai < 0.0) {
        ai = 0.0, aj = sum;
      }
    }

    // Q_it = y_i y_t K_it.
    const double di = (ai - ai_old) * y[i];
    const double dj = (aj - aj_old) * y[j];
    for (std::size_t t = 0; t < n; ++t) {
      const auto e = static_cast<Eigen::Index>(t);
      grad[t] += y[t] * (di * Ki(e) + dj * Kj(e));
    }
  }

  // Offset from free vectors, midpoint of the feasible interval otherwise.
  double sum_free = 0.0, ub = std::numeric_limits<double>::infinity(), lb = -ub;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= C) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      sum_free += yg;
      ++n_free;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
  model.bias = -rho;

  std::vector<Eigen::Index> sv;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) sv.push_back(static_cast<Eigen::Index>(t));
  }
  info.support_vectors = sv.size();
  model.support.resize(static_cast<Eigen::Index>(sv.size()), Z.cols());
  model.coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    const auto e = static_cast<Eigen::Index>(k);
    model.support.row(e) = Z.row(sv[k]);
    model.coef(e) = alpha[static_cast<std::size_t>(sv[k])] * y[static_cast<std::size_t>(sv[k])];
  }
  if (params.kernel == KernelKind::Linear) {
    model.weights = model.support.transpose() * model.coef;
  }
  return model;
}

}  // namespace stepnav

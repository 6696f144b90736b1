#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "stepnav/common.hpp"
#include "stepnav/features.hpp"

namespace stepnav {

using MatrixX = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorX = Eigen::VectorXd;

inline constexpr double kFineStep = 0.002;
inline constexpr double kCoarseStep = 0.04;

/// +1 for the fine step, -1 for the coarse one.
int label_from_step(double dt);
double step_from_label(int label);

enum class KernelKind { Linear, Poly2 };

std::string_view to_string(KernelKind k);
KernelKind kernel_from_string(std::string_view s);

/// Per-feature z-score. Zero-variance features keep scale 1.
struct Standardizer {
  VectorX mean;
  VectorX scale;

  static Standardizer fit(const MatrixX& X);
  VectorX apply(const VectorX& x) const;
  MatrixX apply(const MatrixX& X) const;
};

struct SvmParams {
  KernelKind kernel = KernelKind::Linear;
  double C = 1.0;
  double tolerance = 1e-4;             // stop when the maximal KKT violation is below this
  std::int64_t max_iterations = 0;   // 0: max(1e6, 100 n)
  std::size_t cache_bytes = 256u << 20;
};

struct SvmTrainingInfo {
  std::int64_t iterations = 0;
  double final_gap = 0.0;
  bool converged = false;
  std::size_t support_vectors = 0;
};

/// Binary soft-margin SVM. The decision score is positive for the fine step.
class SvmModel {
 public:
  KernelKind kernel = KernelKind::Linear;
  Standardizer standardizer;
  MatrixX support;     // standardized support vectors, one per row
  VectorX coef;        // alpha_i * y_i
  double bias = 0.0;
  VectorX weights;     // primal weights, linear kernel only
  double C = 1.0;
  SvmTrainingInfo info;
  std::uint64_t seed = 0;
  std::string dataset_hash;

  int dimension() const { return static_cast<int>(standardizer.mean.size()); }

  double decision(const VectorX& raw) const;
  double decision(const Features& raw) const;

  /// Coarse step on a tie at zero.
  double predict_step(const VectorX& raw) const { return decision(raw) > 0.0 ? kFineStep : kCoarseStep; }
  double predict_step(const Features& raw) const { return decision(raw) > 0.0 ? kFineStep : kCoarseStep; }
};

/// Dual coordinate ascent with maximal-violating-pair working sets. Kernel
/// columns are computed on demand and kept in an LRU cache. `y` holds +1/-1.
SvmModel train_svm(const MatrixX& X, const std::vector<int>& y, const SvmParams& params = {});

double kernel_value(KernelKind k, const VectorX& a, const VectorX& b);

}  // namespace stepnav

#pragma once

#include <cstdint>
#include <vector>

namespace stepnav {

struct RocPoint {
  double fpr;
  double tpr;
  double threshold;  // scores >= threshold are called positive
};

struct Confusion {
  std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::int64_t total() const { return tp + tn + fp + fn; }
};

struct EvalReport {
  double accuracy = 0.0;
  double auc = 0.0;
  std::vector<RocPoint> roc;
  Confusion confusion;
};

/// ROC over every distinct score (plus the all-negative start) and its
/// trapezoid area. Labels are +1 / -1; both classes must be present.
std::vector<RocPoint> roc_curve(const std::vector<double>& scores, const std::vector<int>& labels);
double trapezoid_auc(const std::vector<RocPoint>& roc);

/// Fraction of positive/negative pairs ranked correctly, ties counting one
/// half. Quadratic; meant as a reference.
double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels);

Confusion confusion(const std::vector<int>& predicted, const std::vector<int>& labels);
double accuracy(const Confusion& c);
double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels);

/// Accuracy (sign of the score, zero counted negative), ROC and AuC.
EvalReport evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace stepnav

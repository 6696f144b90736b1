#include "stepnav/evaluation.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "stepnav/common.hpp"

namespace stepnav {

namespace {

void check_inputs(std::size_t n_scores, const std::vector<int>& labels) {
  if (n_scores != labels.size()) throw ValidationError("scores and labels differ in length");
  for (int l : labels) {
    if (l != 1 && l != -1) throw ValidationError("labels must be +1 or -1");
  }
}

}  // namespace

std::vector<RocPoint> roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_inputs(scores.size(), labels);
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  const auto neg = static_cast<std::int64_t>(labels.size()) - pos;
  if (pos == 0 || neg == 0) throw ValidationError("ROC needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<RocPoint> roc;
  roc.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::int64_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    while (k < order.size() && scores[order[k]] == s) {
      if (labels[order[k]] == 1) ++tp;
      else ++fp;
      ++k;
    }
    roc.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                   static_cast<double>(tp) / static_cast<double>(pos), s});
  }
  return roc;
}

double trapezoid_auc(const std::vector<RocPoint>& roc) {
  double area = 0.0;
  for (std::size_t k = 1; k < roc.size(); ++k) {
    area += (roc[k].fpr - roc[k - 1].fpr) * 0.5 * (roc[k].tpr + roc[k - 1].tpr);
  }
  return area;
}

double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_inputs(scores.size(), labels);
  double wins = 0.0;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != -1) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  if (pairs == 0) throw ValidationError("AuC needs both classes");
  return wins / static_cast<double>(pairs);
}

Confusion confusion(const std::vector<int>& predicted, const std::vector<int>& labels) {
  check_inputs(predicted.size(), labels);
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) (predicted[i] == 1 ? c.tp : c.fn)++;
    else (predicted[i] == 1 ? c.fp : c.tn)++;
  }
  return c;
}

double accuracy(const Confusion& c) {
  if (c.total() == 0) throw ValidationError("accuracy of an empty set");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels) {
  return accuracy(confusion(predicted, labels));
}

EvalReport evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels) {
  EvalReport r;
  std::vector<int> predicted(scores.size());
  std::transform(scores.begin(), scores.end(), predicted.begin(), [](double s) { return s > 0.0 ? 1 : -1; });
  r.confusion = confusion(predicted, labels);
  r.accuracy = accuracy(r.confusion);
  r.roc = roc_curve(scores, labels);
  r.auc = trapezoid_auc(r.roc);
  return r;
}

}  // namespace stepnav

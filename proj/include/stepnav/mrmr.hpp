#pragma once

#include <vector>

#include "stepnav/svm.hpp"

namespace stepnav {

inline constexpr int kMrmrBins = 16;

/// Equal-frequency discretization; tied values always share a bin.
std::vector<int> equal_frequency_bins(const VectorX& values, int bins = kMrmrBins);

/// Plug-in mutual information of two discrete sequences, nats.
double mutual_information(const std::vector<int>& a, const std::vector<int>& b);

struct MrmrEntry {
  int feature;
  double relevance;  // I(x; y)
  double score;      // relevance minus mean redundancy at selection time
};

/// Greedy max-relevance min-redundancy order over all columns of X. Equal
/// scores go to the lower column index.
std::vector<MrmrEntry> mrmr_rank(const MatrixX& X, const std::vector<int>& labels, int bins = kMrmrBins);

}  // namespace stepnav

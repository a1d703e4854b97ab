#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "fmim/data.hpp"

namespace fmim {

/// counts[t * classes + p]: samples of true class t predicted as p.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::size_t> counts;

  std::size_t at(std::size_t truth, std::size_t predicted) const {
    return counts[truth * classes + predicted];
  }
  std::size_t total() const;
  std::size_t trace() const;
};

ConfusionMatrix confusion_matrix(std::span<const std::size_t> predictions,
                                 std::span<const std::size_t> labels, std::size_t classes);

double accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels);

struct F1Report {
  std::vector<double> per_class;
  /// absent[j]: class j has no instances and no predictions; its F1 is 1.
  std::vector<bool> absent;
  double macro = 0.0;
};

/// F1_j = 2TP / (2TP + FP + FN); macro is the unweighted mean over classes.
F1Report f1_per_class(std::span<const std::size_t> predictions,
                      std::span<const std::size_t> labels, std::size_t classes);

struct HeterogeneityReport {
  /// counts[k][j]: instances of class j held by client k.
  std::vector<std::vector<std::size_t>> counts;
  /// Mean over classes of the largest single-client share of that class.
  double skew = 0.0;
};

HeterogeneityReport heterogeneity_report(const Partition& partition, const Dataset& dataset);

/// CSV with header client_id,class_id,count.
void write_heterogeneity_csv(std::ostream& out, const HeterogeneityReport& report);

}  // namespace fmim

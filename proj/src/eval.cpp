#include "fmim/eval.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "fmim/common.hpp"
#include "fmim/csv.hpp"

namespace fmim {

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (std::size_t j = 0; j < classes; ++j) t += at(j, j);
  return t;
}

ConfusionMatrix confusion_matrix(std::span<const std::size_t> predictions,
                                 std::span<const std::size_t> labels, std::size_t classes) {
  require(predictions.size() == labels.size(), "confusion_matrix: length mismatch");
  ConfusionMatrix cm{classes, std::vector<std::size_t>(classes * classes, 0)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < classes && predictions[i] < classes, "confusion_matrix: class out of range");
    ++cm.counts[labels[i] * classes + predictions[i]];
  }
  return cm;
}

double accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels) {
  require(predictions.size() == labels.size(), "accuracy: length mismatch");
  require(!labels.empty(), "accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

F1Report f1_per_class(std::span<const std::size_t> predictions,
                      std::span<const std::size_t> labels, std::size_t classes) {
  require(!labels.empty(), "f1_per_class: empty input");
  const auto cm = confusion_matrix(predictions, labels, classes);
  F1Report report;
  report.per_class.assign(classes, 0.0);
  report.absent.assign(classes, false);
  for (std::size_t j = 0; j < classes; ++j) {
    std::size_t fp = 0;
    std::size_t fn = 0;
    for (std::size_t o = 0; o < classes; ++o) {
      if (o == j) continue;
      fp += cm.at(o, j);
      fn += cm.at(j, o);
    }
    const std::size_t tp = cm.at(j, j);
    if (tp + fp + fn == 0) {
      report.per_class[j] = 1.0;
      report.absent[j] = true;
    } else {
      report.per_class[j] =
          static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
    }
  }
  report.macro = std::accumulate(report.per_class.begin(), report.per_class.end(), 0.0) /
                 static_cast<double>(classes);
  return report;
}

HeterogeneityReport heterogeneity_report(const Partition& partition, const Dataset& dataset) {
  HeterogeneityReport report;
  report.counts.assign(partition.client_count(), std::vector<std::size_t>(dataset.classes, 0));
  for (std::size_t k = 0; k < partition.client_count(); ++k)
    for (const auto i : partition.clients[k]) ++report.counts[k][dataset.labels.at(i)];
  double skew = 0.0;
  std::size_t present = 0;
  for (std::size_t j = 0; j < dataset.classes; ++j) {
    std::size_t total = 0;
    std::size_t largest = 0;
    for (const auto& row : report.counts) {
      total += row[j];
      largest = std::max(largest, row[j]);
    }
    if (total == 0) continue;
    skew += static_cast<double>(largest) / static_cast<double>(total);
    ++present;
  }
  report.skew = present ? skew / static_cast<double>(present) : 0.0;
  return report;
}

void write_heterogeneity_csv(std::ostream& out, const HeterogeneityReport& report) {
  csv::write_row(out, {"client_id", "class_id", "count"});
  for (std::size_t k = 0; k < report.counts.size(); ++k)
    for (std::size_t j = 0; j < report.counts[k].size(); ++j)
      csv::write_row(out, {csv::format_number(std::uint64_t{k}), csv::format_number(std::uint64_t{j}),
                           csv::format_number(std::uint64_t{report.counts[k][j]})});
}

}  // namespace fmim
